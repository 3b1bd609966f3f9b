"""Two-, three- and four-wave resonance analysis and good-set certification.

Every scan first evaluates the frequency combinations in float64 with an
a-priori rounding radius; only combinations that the float ball cannot
separate from the relevant threshold are re-decided in exact arithmetic
with :func:`radical_sum_sign`.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from .dispersion import FrequencyTable, Vorticity, omega_big, omega_float
from .exact import RadicalSum, Sign, fraction_str, radical_sum_sign

UNIT_ROUNDOFF = 2.0**-53
# float64 value of a signed sum of Omegas is within this many units of
# sum(omega_j + |gamma|/2) of the exact value (sqrt, scaling, 4 additions)
_RADIUS_UNITS = 16.0


class ResonanceError(RuntimeError):
    """A scan found a certified counterexample to the expected structure."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


# ---------------------------------------------------------------- good sets

def sign_polynomial(lam: Fraction) -> Fraction:
    """``p(l) = 2l^6 - 25l^5 + 50l^4 + 8l^3 - 4l^2 + l`` in exact rationals."""
    return ((((((2 * lam - 25) * lam + 50) * lam + 8) * lam - 4) * lam + 1) * lam)


def induced_gamma_sq(m: int, n: int) -> Fraction:
    """The unique gamma^2 making {m, n} two-wave resonant."""
    if n == m:
        raise ValueError("m and n must differ")
    return Fraction((m + n) ** 2, 2 * (n - m))


@dataclass(frozen=True)
class UpsilonEnclosure:
    """Rational enclosure of the negative root ``-1/upsilon`` of ``p``."""

    lam_lo: Fraction
    lam_hi: Fraction

    @property
    def upsilon_lo(self) -> Fraction:
        return -1 / self.lam_lo

    @property
    def upsilon_hi(self) -> Fraction:
        return -1 / self.lam_hi

    def refine(self) -> "UpsilonEnclosure":
        mid = (self.lam_lo + self.lam_hi) / 2
        s_mid = sign_polynomial(mid)
        if s_mid == 0:
            return UpsilonEnclosure(mid, mid)
        if (s_mid > 0) == (sign_polynomial(self.lam_lo) > 0):
            return UpsilonEnclosure(mid, self.lam_hi)
        return UpsilonEnclosure(self.lam_lo, mid)


def upsilon_enclosure(bits: int = 64) -> UpsilonEnclosure:
    """Isolate the root of ``p`` in ``(-0.401, -0.4009)`` by exact bisection."""
    enc = UpsilonEnclosure(Fraction(-401, 1000), Fraction(-4009, 10000))
    if (sign_polynomial(enc.lam_lo) > 0) == (sign_polynomial(enc.lam_hi) > 0):
        raise ResonanceError("p does not change sign on (-0.401, -0.4009)")
    for _ in range(bits):
        enc = enc.refine()
    if not (Fraction(2493, 1000) < enc.upsilon_lo and enc.upsilon_hi < Fraction(2495, 1000)):
        raise ResonanceError("upsilon enclosure escapes (2.493, 2.495)")
    return enc


def upsilon_proxy(m: int, n: int, max_steps: int = 4096) -> bool:
    """Decide ``n < -upsilon*m`` from a rational enclosure of upsilon."""
    enc = upsilon_enclosure()
    bound = Fraction(n, -m)
    for _ in range(max_steps):
        if bound < enc.upsilon_lo:
            return True
        if bound >= enc.upsilon_hi:
            return False
        enc = enc.refine()
    raise ResonanceError(f"upsilon proxy undecided for ({m}, {n})")


@dataclass(frozen=True)
class CheckItem:
    passed: bool
    witness: str

    def to_json(self) -> dict:
        return {"pass": self.passed, "witness": self.witness}


@dataclass(frozen=True)
class Certification:
    """Outcome of checking (G1)-(G4) for a candidate pair."""

    m: int
    n: int
    gamma_sq: Fraction
    items: dict
    proxy_upsilon: bool
    proxy_consistent: bool

    @property
    def ok(self) -> bool:
        return all(item.passed for item in self.items.values())

    def failures(self) -> list[str]:
        return [name for name, item in self.items.items() if not item.passed]

    def to_json(self) -> dict:
        out = {"m": self.m, "n": self.n, "gamma_sq": fraction_str(self.gamma_sq)}
        for name, item in self.items.items():
            out[name] = item.to_json()
        out["proxy_upsilon"] = {"pass": self.proxy_upsilon, "consistent": self.proxy_consistent}
        out["pass"] = self.ok
        return out


class CertificationError(ValueError):
    def __init__(self, cert: Certification):
        super().__init__(f"({cert.m}, {cert.n}) fails {', '.join(cert.failures())}")
        self.cert = cert


@dataclass(frozen=True)
class GoodSet:
    """A certified pair ``m < 0 < n`` together with its induced vorticity."""

    m: int
    n: int
    gamma_sq: Fraction
    cert: Certification = field(repr=False, compare=False)

    @classmethod
    def certified(cls, m: int, n: int, v: Vorticity | None = None) -> "GoodSet":
        cert = certify_good_set(m, n, v)
        if not cert.ok:
            raise CertificationError(cert)
        return cls(m, n, cert.gamma_sq, cert)

    @property
    def vorticity(self) -> Vorticity:
        return Vorticity(self.gamma_sq)

    @property
    def d(self) -> int:
        return self.n - self.m

    def __contains__(self, j) -> bool:
        return j == self.m or j == self.n

    def to_json(self) -> dict:
        return self.cert.to_json()


def certify_good_set(m: int, n: int, v: Vorticity | None = None) -> Certification:
    """Check (G1)-(G4) in exact rationals; ``v`` defaults to the induced gamma^2."""
    m, n = int(m), int(n)
    items: dict[str, CheckItem] = {}
    items["Lambda"] = CheckItem(m < 0 < n and m + n > 0, f"m={m}, n={n}, m+n={m + n}")
    if not (m < 0 < n):
        raise ValueError("certification needs m < 0 < n")

    g2 = induced_gamma_sq(m, n)
    if v is None:
        v = Vorticity(g2) if g2 > 0 else None
    if v is None:
        items["G1"] = CheckItem(False, f"(m+n)^2/(2(n-m))={fraction_str(g2)} is not positive")
        gamma_sq = g2
    else:
        gamma_sq = v.gamma_sq
        equal_freq = omega_big(m, v) - omega_big(n, v)
        g1 = gamma_sq == g2 and radical_sum_sign(equal_freq).sign is Sign.ZERO
        items["G1"] = CheckItem(g1, f"(m+n)^2/(2(n-m))={fraction_str(g2)}, gamma_sq={fraction_str(gamma_sq)}")

    r1, r2 = Fraction(3 * n + m, 8), Fraction(3 * m + n, 8)
    bad = (r1.denominator == 1 and r1 > 0) or (r2.denominator == 1 and r2 < 0)
    items["G2"] = CheckItem(not bad, f"(3n+m)/8={fraction_str(r1)}, (3m+n)/8={fraction_str(r2)}")

    pval = sign_polynomial(Fraction(m, n))
    items["G3"] = CheckItem(pval > 0, f"p(m/n)={fraction_str(pval)}")
    items["G4"] = CheckItem(n != -2 * m, f"n={n}, -2m={-2 * m}")

    proxy = upsilon_proxy(m, n) if m + n > 0 else False
    consistent = proxy == (pval > 0) if m + n > 0 else True
    return Certification(m, n, gamma_sq, items, proxy, consistent)


def two_adic_valuation(p: int) -> int:
    return (p & -p).bit_length() - 1


def construction_case(p: int, q: int) -> int:
    d = two_adic_valuation(p)
    if d == 0:
        return 4 if q % 4 == 2 else 3
    return 1 if d % 2 == 0 else 2


def family_member(p: int, q: int, a: int) -> tuple[int, int]:
    """The pair ``(m_a, n_a)`` of the constructive family for ``gamma^2 = p/q``."""
    d = two_adic_valuation(p)
    k = p >> d
    case = construction_case(p, q)
    if case == 1:
        lin, quad = 2 ** (d // 2) * k * a, Fraction(k * q * a * a)
    elif case == 2:
        lin, quad = 2 ** ((d + 1) // 2) * k * a, Fraction(2 * k * q * a * a)
    elif case == 3:
        lin, quad = p * a, Fraction(p * q * a * a)
    else:
        lin, quad = Fraction(p * a, 2), Fraction(q * p * a * a, 4)
    m, n = lin - quad, lin + quad
    if Fraction(m).denominator != 1 or Fraction(n).denominator != 1:
        raise ResonanceError(f"non-integer family member for a={a}")
    return int(m), int(n)


@dataclass
class FamilyReport:
    p: int
    q: int
    case: int
    accepted: list = field(default_factory=list)  # (a, GoodSet)
    skipped: list = field(default_factory=list)  # (a, Certification)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "case": self.case,
            "gamma_sq": fraction_str(Fraction(self.p, self.q)),
            "accepted": [{"a": a, **g.to_json()} for a, g in self.accepted],
            "skipped": [{"a": a, **(c.to_json() if c else {"pass": False})} for a, c in self.skipped],
        }


def construct_family(p: int, q: int, a_list) -> FamilyReport:
    if p <= 0 or q <= 0:
        raise ValueError("p and q must be positive")
    if math.gcd(p, q) != 1:
        raise ValueError("p and q must be coprime")
    report = FamilyReport(p, q, construction_case(p, q))
    v = Vorticity(Fraction(p, q))
    for a in a_list:
        if a % 2 == 0:
            raise ValueError(f"a must be odd, got {a}")
        if a <= 0:
            raise ValueError(f"a must be positive, got {a}")
        m, n = family_member(p, q, a)
        if not (m < 0 < n):
            # outside the family's range (only happens for small a)
            report.skipped.append((a, None))
            continue
        cert = certify_good_set(m, n, v)
        if cert.ok:
            report.accepted.append((a, GoodSet(m, n, cert.gamma_sq, cert)))
        else:
            report.skipped.append((a, cert))
    return report


def construct_good_sets(p: int, q: int, a_list) -> list[GoodSet]:
    return [g for _, g in construct_family(p, q, a_list).accepted]


def smallest_accepted(p: int, q: int, count: int, a_max: int = 10_001) -> FamilyReport:
    """Walk odd a = 1, 3, ... until ``count`` members certify."""
    report = FamilyReport(p, q, construction_case(p, q))
    for a in range(1, a_max + 1, 2):
        part = construct_family(p, q, [a])
        report.accepted += part.accepted
        report.skipped += part.skipped
        if len(report.accepted) >= count:
            break
    return report


# ---------------------------------------------------------------- 2 waves

def two_wave_partner(n: int, v: Vorticity) -> int | None:
    """The unique ``m < 0`` with ``Omega_m = Omega_n``, if any.

    Solves ``(m+n)^2 = 2 gamma^2 (n-m)``, i.e.
    ``m = -(n+g) + sqrt(g^2 + 4gn)`` with ``g = gamma^2``; the other root
    has ``m + n < 0`` and cannot be resonant.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    g = v.gamma_sq
    disc = g * g + 4 * g * n
    num, den = math.isqrt(disc.numerator), math.isqrt(disc.denominator)
    if num * num != disc.numerator or den * den != disc.denominator:
        return None
    m = -(n + g) + Fraction(num, den)
    if m.denominator != 1 or m >= 0 or m + n <= 0:
        return None
    return int(m)


def _omega_radius(js, v: Vorticity) -> np.ndarray:
    """Rounding radius of a float64 signed sum of Omegas over the given columns."""
    half_gamma = 0.5 * math.sqrt(float(v.gamma_sq))
    omega_small = sum(np.sqrt(np.abs(j) + float(v.gamma_sq) / 4) for j in js)
    return _RADIUS_UNITS * UNIT_ROUNDOFF * (omega_small + len(js) * half_gamma)


@dataclass
class GapReport:
    lower_bound: float
    witness: tuple
    pairs: int
    resonant_pairs: list
    exact_checks: int


def two_wave_gap_scan(v: Vorticity, J: int) -> GapReport:
    """Certified lower bound of ``|Omega_j - Omega_k| (|j|^1.5 + |k|^1.5)``."""
    if J < 2:
        raise ValueError("J must be at least 2")
    idx = np.array([j for j in range(-J, J + 1) if j])
    jj, kk = np.meshgrid(idx, idx, indexing="ij")
    keep = jj < kk
    jj, kk = jj[keep], kk[keep]
    diff = np.abs(omega_float(jj, v) - omega_float(kk, v))
    rad = _omega_radius([jj, kk], v)
    weight = np.abs(jj) ** 1.5 + np.abs(kk) ** 1.5
    lower = (diff - rad) * weight * (1 - 8 * UNIT_ROUNDOFF)

    table = FrequencyTable(v)
    resonant, exact_checks = [], 0
    for i in np.nonzero(diff <= rad)[0]:
        j, k = int(jj[i]), int(kk[i])
        exact_checks += 1
        cert = radical_sum_sign(table.exact(j) - table.exact(k))
        if cert.sign is Sign.ZERO:
            resonant.append((j, k))
            lower[i] = np.inf
        elif cert.sign is Sign.UNDECIDED:
            raise ResonanceError(f"undecided pair ({j}, {k})", (j, k))
        else:
            ball = cert.ball or (table.exact(j) - table.exact(k)).enclose(256)
            val = abs(float(ball.center)) - 2 * float(ball.radius)
            lower[i] = val * weight[i] * (1 - 8 * UNIT_ROUNDOFF)
    i = int(np.argmin(lower))
    if not np.isfinite(lower[i]) or lower[i] <= 0:
        raise ResonanceError("gap scan could not certify a positive bound")
    return GapReport(float(lower[i]), (int(jj[i]), int(kk[i])), int(len(jj)), resonant, exact_checks)


# ---------------------------------------------------------------- 3 waves

def c3_constant(v: Vorticity) -> RadicalSum:
    """``2 sqrt(1 + g/4) - sqrt(2 + g/4) - |gamma|/2`` (equals ``2 Omega_1 - Omega_2``)."""
    g = v.gamma_sq
    return RadicalSum([(2, 1 + g / 4), (-1, 2 + g / 4), (Fraction(-1, 2), g)])


@dataclass
class ThreeWaveReport:
    gamma_sq: Fraction
    J: int
    minimum: float
    argmin: tuple
    c3: float
    triples: int
    exact_checks: int
    undecided: list

    @property
    def ok(self) -> bool:
        return not self.undecided and self.minimum >= self.c3

    def to_json(self) -> dict:
        return {
            "gamma_sq": fraction_str(self.gamma_sq),
            "J": self.J,
            "min": self.minimum,
            "argmin": {"indices": list(self.argmin[0]), "signs": list(self.argmin[1])},
            "c3": self.c3,
            "triples": self.triples,
            "exact_checks": self.exact_checks,
            "undecided": [{"indices": list(i), "signs": list(s)} for i, s in self.undecided],
            "pass": self.ok,
        }


def _three_wave_chunk(args):
    gamma_sq, J, j1_values = args
    v = Vorticity(gamma_sq)
    c3 = c3_constant(v)
    c3_f = float(c3)
    table = FrequencyTable(v)
    idx = np.array([j for j in range(-J, J + 1) if j])
    best = (math.inf, None)
    count = exact = 0
    undecided = []
    for s2, s3 in product((1, -1), repeat=2):
        # global sign flip leaves |value| unchanged, so fix sigma_1 = +1
        j1, j2 = np.meshgrid(np.asarray(j1_values), idx, indexing="ij")
        j1, j2 = j1.ravel(), j2.ravel()
        j3 = -s3 * (j1 + s2 * j2)
        ok = (j3 != 0) & (np.abs(j3) <= J)
        j1, j2, j3 = j1[ok], j2[ok], j3[ok]
        if not len(j1):
            continue
        val = np.abs(omega_float(j1, v) + s2 * omega_float(j2, v) + s3 * omega_float(j3, v))
        rad = _omega_radius([j1, j2, j3], v) + 8 * UNIT_ROUNDOFF * 4
        count += len(j1)
        i = int(np.argmin(val))
        if val[i] < best[0]:
            best = (float(val[i]), ((int(j1[i]), int(j2[i]), int(j3[i])), (1, s2, s3)))
        for i in np.nonzero(val - rad <= c3_f)[0]:
            exact += 1
            tup = (int(j1[i]), int(j2[i]), int(j3[i]))
            x = table.combination(tup, (1, s2, s3))
            sx = radical_sum_sign(x)
            if sx.sign is Sign.UNDECIDED:
                undecided.append((tup, (1, s2, s3)))
                continue
            margin = (x if sx.sign is Sign.POSITIVE else -x) - c3
            sm = radical_sum_sign(margin)
            if sm.sign is Sign.NEGATIVE:
                raise ResonanceError(f"three-wave combination below c3 at {tup}", (tup, (1, s2, s3)))
            if sm.sign is Sign.UNDECIDED:
                undecided.append((tup, (1, s2, s3)))
    return best, count, exact, undecided


def three_wave_min(v: Vorticity, J: int, jobs: int = 1) -> ThreeWaveReport:
    """Exhaustive scan of momentum-conserving triples with ``|j_i| <= J``."""
    if J < 2:
        raise ValueError("J must be at least 2")
    idx = [j for j in range(-J, J + 1) if j]
    jobs = max(1, int(jobs))
    chunks = [(v.gamma_sq, J, idx[i::jobs]) for i in range(jobs)]
    if jobs == 1:
        results = [_three_wave_chunk(chunks[0])]
    else:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_three_wave_chunk, chunks))
    best = min((r[0] for r in results), key=lambda b: (b[0], b[1]))
    undecided = sorted(u for r in results for u in r[3])
    # the float minimum carries cancellation error; report the exact value
    exact_min = abs(float(FrequencyTable(v).combination(*best[1]).to_mpf(128)))
    return ThreeWaveReport(
        v.gamma_sq, J, exact_min, best[1], float(c3_constant(v).to_mpf(128)),
        sum(r[1] for r in results), sum(r[2] for r in results), undecided,
    )


# ---------------------------------------------------------------- 4 waves

class Classification(enum.Enum):
    INTEGRABLE = "IntegrableResonance"
    NON_INTEGRABLE = "NonIntegrableResonance"
    NON_RESONANT = "NonResonant"
    UNDECIDED = "Undecided"


def is_integrable_pattern(indices, signs) -> bool:
    """True when the (j, sigma) pairs match off as {(k,+), (k,-)}."""
    plus = sorted(j for j, s in zip(indices, signs) if s > 0)
    minus = sorted(j for j, s in zip(indices, signs) if s < 0)
    return plus == minus


@dataclass(frozen=True)
class ResonanceTuple:
    indices: tuple
    signs: tuple
    value: RadicalSum
    classification: Classification
    gap: object = None  # Ball enclosing |value| when non-resonant

    def to_json(self) -> dict:
        return {
            "indices": list(self.indices),
            "signs": list(self.signs),
            "classification": self.classification.value,
        }


def classify_tuple(indices, signs, v: Vorticity, table: FrequencyTable | None = None,
                   precision_cap: int = 4096) -> ResonanceTuple:
    indices, signs = tuple(int(j) for j in indices), tuple(int(s) for s in signs)
    if sum(j * s for j, s in zip(indices, signs)) != 0:
        raise ValueError(f"momentum not conserved for {indices} / {signs}")
    table = table or FrequencyTable(v)
    value = table.combination(indices, signs)
    cert = radical_sum_sign(value, precision_cap)
    if cert.sign is Sign.ZERO:
        cls = Classification.INTEGRABLE if is_integrable_pattern(indices, signs) else Classification.NON_INTEGRABLE
        return ResonanceTuple(indices, signs, value, cls)
    if cert.sign is Sign.UNDECIDED:
        return ResonanceTuple(indices, signs, value, Classification.UNDECIDED)
    gap = cert.ball if cert.ball is not None else value.enclose(128)
    return ResonanceTuple(indices, signs, value, Classification.NON_RESONANT, gap)


@dataclass
class FourWaveReport:
    lam: tuple
    layer: int
    J: int
    tuples: int
    resonances: list
    undecided: list
    exact_checks: int
    gap_bound: float | None = None
    gap_witness: tuple | None = None

    @property
    def ok(self) -> bool:
        if self.undecided:
            return False
        if self.layer == 1:
            return not self.resonances
        return all(r.classification is Classification.INTEGRABLE for r in self.resonances)

    def to_json(self) -> dict:
        out = {
            "lambda": list(self.lam),
            "layer": self.layer,
            "J": self.J,
            "tuples": self.tuples,
            "resonances": [r.to_json() for r in self.resonances],
            "undecided": [r.to_json() for r in self.undecided],
            "exact_checks": self.exact_checks,
            "pass": self.ok,
        }
        if self.gap_bound is not None:
            out["gap_bound"] = self.gap_bound
            out["gap_witness"] = {"indices": list(self.gap_witness[0]), "signs": list(self.gap_witness[1])}
        return out


def _layer_candidates(lam: GoodSet, layer: int, J: int):
    """Yield (inside index tuple, signs, free-index column arrays) blocks.

    Indices inside Lambda occupy the first ``4 - layer`` slots; the free
    slots come last.  Every tuple of the layer is a joint permutation of
    exactly one enumerated tuple, and classification is permutation-invariant.
    """
    members = (lam.m, lam.n)
    inside = 4 - layer
    free_range = np.array([j for j in range(-J, J + 1) if j and j not in members])
    for ins in product(members, repeat=inside):
        for signs in product((1, -1), repeat=4):
            base = sum(j * s for j, s in zip(ins, signs[:inside]))
            if layer == 0:
                if base == 0:
                    yield ins, signs, []
            elif layer == 1:
                j4 = -signs[3] * base
                if j4 != 0 and j4 not in members:
                    yield ins, signs, [np.array([j4])]
            else:
                j3 = free_range
                j4 = -signs[3] * (base + signs[2] * j3)
                ok = (j4 != 0) & (j4 != lam.m) & (j4 != lam.n)
                yield ins, signs, [j3[ok], j4[ok]]


def four_wave_classify(lam: GoodSet, layer: int, J: int = 500) -> FourWaveReport:
    """Classify all momentum-conserving tuples with ``layer`` indices outside Lambda."""
    if layer not in (0, 1, 2):
        raise ValueError("layer must be 0, 1 or 2")
    if J < lam.n:
        raise ValueError("J must be at least n")
    v = lam.vorticity
    table = FrequencyTable(v)
    resonances, undecided = [], []
    total = exact = 0
    gap_bound, gap_witness = math.inf, None
    for ins, signs, cols in _layer_candidates(lam, layer, J):
        size = len(cols[0]) if cols else 1
        if size == 0:
            continue
        total += size
        full = [np.full(size, j) for j in ins] + cols
        val = sum(s * omega_float(j, v) for j, s in zip(full, signs))
        rad = _omega_radius(full, v)
        for i in np.nonzero(np.abs(val) <= rad)[0]:
            exact += 1
            tup = tuple(int(c[i]) for c in full)
            res = classify_tuple(tup, signs, v, table)
            if res.classification is Classification.NON_INTEGRABLE:
                raise ResonanceError(f"non-integrable resonance {tup} / {signs}", res)
            if res.classification is Classification.UNDECIDED:
                undecided.append(res)
            elif res.classification is Classification.INTEGRABLE:
                resonances.append(res)
                val[i] = np.nan
            else:
                val[i] = abs(float(res.gap.center))
                rad[i] = float(res.gap.radius) * 2
        if layer == 2:
            omax = np.sqrt(np.max(np.abs(np.stack(full)), axis=0) + float(v.gamma_sq) / 4)
            low = (np.abs(val) - rad) * omax * (1 - 8 * UNIT_ROUNDOFF)
            low = np.where(np.isnan(low), np.inf, low)
            i = int(np.argmin(low))
            if low[i] < gap_bound:
                gap_bound = float(low[i])
                gap_witness = (tuple(int(c[i]) for c in full), signs)
    if layer == 1 and resonances:
        raise ResonanceError("resonance in layer 1", resonances[0])
    report = FourWaveReport((lam.m, lam.n), layer, J, total, resonances, undecided, exact)
    if layer == 2:
        if not gap_bound > 0:
            raise ResonanceError("layer-2 gap bound is not positive", gap_witness)
        report.gap_bound, report.gap_witness = gap_bound, gap_witness
    return report
