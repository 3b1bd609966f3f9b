"""Well-prepared data, its admissibility conditions, and the effective evolution."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .dispersion import omega_float
from .nfcoeffs import NfCoefficients, abs_squares_for_balance, transport_bundle, vtilde_closed
from .paradiff import (BandedOperator, assemble_bw, assemble_mourre, assemble_transport,
                       default_delta0, japanese, mode_list)
from .resonance import GoodSet

log = logging.getLogger(__name__)


class NumericalAbort(RuntimeError):
    def __init__(self, message, last_time):
        super().__init__(message)
        self.last_time = last_time


@dataclass
class Knobs:
    w_strength: float = 0.0
    b_strength: float = 0.0
    R_strength: float = 0.0
    Y_strength: float = 0.0
    d_strength: float = 0.0

    def active(self) -> bool:
        return any(getattr(self, f) != 0 for f in self.__dataclass_fields__)


@dataclass
class ExperimentConfig:
    m: int = -2
    n: int = 3
    eps: float = 0.05
    theta: float = 0.1
    s: float = 8.0
    s0: float = 2.0
    K: int = 256
    R: float = 64.0
    N_high: int | None = None  # position 3N of the first high mode
    rho: float | None = None
    T_end: float | None = None
    dt_record: float | None = None
    n_records: int = 60
    max_step: float = 2.0
    delta0: float | None = None
    seed: int = 0
    asymptotic_scaling: bool = False
    knobs: Knobs = field(default_factory=Knobs)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        knobs = data.pop("knobs", {}) or {}
        if "lambda" in data:
            data["m"], data["n"] = data.pop("lambda")
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data, knobs=Knobs(**knobs))
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def d(self) -> int:
        return self.n - self.m

    @property
    def eps_exact(self) -> Fraction:
        return Fraction(str(self.eps))

    def good_set(self) -> GoodSet:
        return GoodSet.certified(self.m, self.n)

    def theta_star(self) -> float:
        return min((self.s - 4 * self.s0) / (2 * (2 * self.s - self.s0)), 1 / 6)

    def advisories(self) -> list[str]:
        notes = []
        if not 0 < self.theta < self.theta_star():
            notes.append(f"theta={self.theta} outside (0, {self.theta_star():.4g})")
        return notes

    def high_mode(self) -> int:
        if self.N_high is not None:
            return self.N_high
        if self.asymptotic_scaling:
            return 3 * math.ceil(self.R)
        N = math.ceil((self.K - self.d) / 3) - 1
        while 3 * N + self.d > self.K:
            N -= 1
        return 3 * N

    def validate(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.s <= 0 or self.K < 1 or self.R < 1:
            raise ValueError("s, K and R must be positive (R >= 1)")
        if self.n_records < 2:
            raise ValueError("n_records must be at least 2")
        N3 = self.high_mode()
        if N3 + self.d > self.K:
            raise ValueError(f"high modes {N3}, {N3 + self.d} exceed K={self.K}")
        if N3 <= 0 or {N3, N3 + self.d} & {self.m, self.n}:
            raise ValueError("high modes collide with Lambda")


@dataclass
class SpectralField:
    K: int
    coeffs: np.ndarray

    @classmethod
    def zeros(cls, K: int) -> "SpectralField":
        return cls(K, np.zeros(2 * K, dtype=complex))

    def index(self, j: int) -> int:
        if j == 0 or abs(j) > self.K:
            raise IndexError(j)
        return j + self.K if j < 0 else j + self.K - 1

    def __getitem__(self, j):
        return self.coeffs[self.index(j)]

    def __setitem__(self, j, value):
        self.coeffs[self.index(j)] = value

    def norm(self, s: float = 0.0) -> float:
        return sobolev_norm(self.coeffs, self.K, s)

    def restrict(self, keep) -> "SpectralField":
        out = SpectralField.zeros(self.K)
        for j in keep:
            out[j] = self[j]
        return out


def sobolev_norm(z: np.ndarray, K: int, s: float) -> float:
    w = np.abs(mode_list(K)).astype(float) ** (2 * s)
    return float(np.sqrt(np.sum(np.abs(z) ** 2 * w)))


@dataclass
class Datum:
    cfg: ExperimentConfig
    lam: GoodSet
    field: SpectralField
    perp: SpectralField
    abs_sq_m: Fraction
    abs_sq_n: Fraction
    rho: float
    high: tuple
    bundle: NfCoefficients

    @property
    def balance(self) -> Fraction:
        vm, vn = vtilde_closed(self.lam)
        return vm * self.abs_sq_m + vn * self.abs_sq_n


def lambda_amplitudes(lam: GoodSet, eps: Fraction) -> tuple[Fraction, Fraction, float, float]:
    am, an = abs_squares_for_balance(lam, eps)
    return am, an, math.sqrt(am), math.sqrt(an)


def b3_form_unit(cfg: ExperimentConfig, bundle: NfCoefficients, A: BandedOperator) -> float:
    """Mourre form on the high modes at unit amplitude."""
    N3 = cfg.high_mode()
    z = SpectralField.zeros(cfg.K)
    z[N3] = 1.0
    z[N3 + cfg.d] = -1j
    return A.quad(z.coeffs)


def build_datum(cfg: ExperimentConfig, A: BandedOperator | None = None) -> Datum:
    """Two balanced modes on Lambda plus a pair of high modes of size rho."""
    cfg.validate()
    lam = cfg.good_set()
    am, an, zm, zn = lambda_amplitudes(lam, cfg.eps_exact)
    bundle = transport_bundle(lam, zm, zn)
    N3 = cfg.high_mode()
    if cfg.rho is not None:
        rho = cfg.rho
    elif cfg.asymptotic_scaling:
        under = (1 - 6 * cfg.theta) / 4
        rho = cfg.eps ** (cfg.theta + under + 2 * cfg.s * (3 + cfg.theta))
    else:
        # twice the B3 threshold; B3 is quadratic in rho
        A = A or assemble_mourre(bundle, cfg.s, cfg.R, cfg.K, cfg.delta0)
        q1 = b3_form_unit(cfg, bundle, A)
        if q1 <= 0:
            raise ValueError("Mourre form is not positive on the high modes; move N_high above 2R")
        rho = math.sqrt(2 * cfg.eps ** (3 - 4 * cfg.theta) / q1)
    z = SpectralField.zeros(cfg.K)
    z[lam.m] = zm
    z[lam.n] = zn
    z[N3] = rho
    z[N3 + cfg.d] = -1j * rho
    perp = z.restrict([N3, N3 + cfg.d])
    return Datum(cfg, lam, z, perp, am, an, rho, (N3, N3 + cfg.d), bundle)


@dataclass
class Condition:
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    @property
    def margin(self) -> float:
        return self.threshold - self.value if self.detail.startswith("<") else self.value - self.threshold

    def to_json(self) -> dict:
        return {"pass": self.passed, "value": self.value, "threshold": self.threshold,
                "margin": self.margin, "detail": self.detail}


def check_B(cfg: ExperimentConfig, datum: Datum, A: BandedOperator | None = None) -> dict:
    eps, theta = cfg.eps, cfg.theta
    bundle = datum.bundle
    lam_part = datum.field.restrict([datum.lam.m, datum.lam.n])
    top, perp = lam_part.norm(0), datum.perp.norm(0)
    A = A or assemble_mourre(bundle, cfg.s, cfg.R, cfg.K, cfg.delta0)
    form = A.quad(datum.perp.coeffs)
    b3_thr = eps ** (3 - 4 * theta)
    out = {
        "B1_top": Condition(top < eps, top, eps, "< eps (L2 of Lambda part)"),
        "B1_perp": Condition(perp < eps**2, perp, eps**2, "< eps^2 (L2 of high part)"),
        "B2": Condition(bundle.kappa > bundle.nu0 * eps**2, bundle.kappa, bundle.nu0 * eps**2, "> nu0 eps^2"),
        "B3": Condition(form > b3_thr, form, b3_thr, "> eps^(3-4 theta)"),
        "B4": Condition(datum.field.norm(cfg.s) < eps**theta, datum.field.norm(cfg.s), eps**theta,
                        "< eps^theta (H^s norm)"),
    }
    return out


def mode_evolution(bundle: NfCoefficients, t):
    """Closed-form phase rotation of the two Lambda modes."""
    lam = bundle.lam
    omega = math.sqrt(lam.d / 2)  # Omega_m = Omega_n
    am, an = abs(bundle.z_m0) ** 2, abs(bundle.z_n0) ** 2
    t = np.asarray(t, dtype=float)
    rate_m = omega + 2 * float(bundle.a) * am + float(bundle.b) * an
    rate_n = omega + 2 * float(bundle.c) * an + float(bundle.b) * am
    return np.exp(-1j * t * rate_m) * bundle.z_m0, np.exp(-1j * t * rate_n) * bundle.z_n0


@dataclass
class TimeSeries:
    times: np.ndarray
    virial: np.ndarray
    norm_s: np.ndarray
    norm_s0: np.ndarray
    norm_L2: np.ndarray
    abs_zm: np.ndarray
    abs_zn: np.ndarray

    columns = ("t", "A", "norm_s", "norm_s0", "norm_L2", "abs_zm", "abs_zn")

    def rows(self):
        return zip(self.times, self.virial, self.norm_s, self.norm_s0, self.norm_L2, self.abs_zm, self.abs_zn)


class _Perturbation:
    """Synthetic remainders with the prescribed sizes; separable in time."""

    def __init__(self, cfg: ExperimentConfig, bundle: NfCoefficients, delta0: float):
        k = cfg.knobs
        rng = np.random.default_rng(cfg.seed)
        eps, th, K = cfg.eps, cfg.theta, cfg.K
        self.K = K
        self.modes = mode_list(K)
        self.terms = []  # (sparse operator B_l, amplitude, frequency)
        self.forcing = []  # (vector, frequency)

        def trig(strength, weight):
            ells = rng.choice(np.arange(1, 9), size=4, replace=False)
            amps = rng.normal(size=4) + 1j * rng.normal(size=4)
            freqs = rng.uniform(0.5, 1.5, size=4)
            scale = sum(abs(a) * weight(l) for a, l in zip(amps, ells))
            # real function: c_l e^{ilx} + conj, W^{2,inf} bounded by 2 sum |c_l|(1+l+l^2)
            amps = amps * strength / (2 * scale)
            return list(zip(ells, amps, freqs))

        w2 = lambda l: 1 + l + l * l
        if k.w_strength:
            for ell, a, f in trig(k.w_strength * eps ** (3 - th), w2):
                self._add_symbol(ell, a, f, lambda xi: xi, K, delta0)
        if k.b_strength:
            for ell, a, f in trig(k.b_strength * eps**2, w2):
                self._add_symbol(ell, a, f, lambda xi: japanese(xi) ** 0.5, K, delta0)
        if k.R_strength:
            vec = self._random_vector(rng, np.abs(self.modes) <= K // 8, cfg.s + 1, k.R_strength * eps ** (2 - th))
            self.forcing.append((vec, rng.uniform(0.5, 1.5)))
        if k.Y_strength:
            vec = self._random_vector(rng, np.ones(len(self.modes), bool), cfg.s, k.Y_strength * eps ** (3 - th))
            self.forcing.append((vec, rng.uniform(0.5, 1.5)))
        self.drift = None
        if k.d_strength:
            size = k.d_strength * eps ** (4 - th)
            self.drift = (size, rng.uniform(0, 2 * np.pi, 2), rng.uniform(0.5, 1.5, 2))
        self.bundle = bundle
        self.delta0 = delta0
        if self.drift:
            self._transport_parts = self._transport_split()

    def _random_vector(self, rng, mask, s, target):
        vec = np.where(mask, rng.normal(size=len(self.modes)) + 1j * rng.normal(size=len(self.modes)), 0)
        return vec * target / sobolev_norm(vec, self.K, s)

    def _add_symbol(self, ell, amp, freq, profile, K, delta0):
        # real symbol: amp e^{i(lx + f t)} + conj
        plus = assemble_bw(lambda l, xi: profile(xi), [ell], K, delta0).matrix
        minus = assemble_bw(lambda l, xi: profile(xi), [-ell], K, delta0).matrix
        self.terms.append((sp.csr_matrix(plus), amp, freq))
        self.terms.append((sp.csr_matrix(minus), np.conj(amp), -freq))

    def _transport_split(self):
        d = self.bundle.d
        plus = assemble_bw(lambda l, xi: xi, [d], self.K, self.delta0).matrix
        minus = assemble_bw(lambda l, xi: xi, [-d], self.K, self.delta0).matrix
        return sp.csr_matrix(plus), sp.csr_matrix(minus)

    def _w_shift(self, t):
        """Change of z_n conj(z_m) caused by the Lambda-mode drift."""
        size, phase, freq = self.drift
        zm, zn = self.bundle.z_m0, self.bundle.z_n0
        dm = size * np.exp(1j * phase[0]) * (np.exp(1j * freq[0] * t) - 1) / (1j * freq[0])
        dn = size * np.exp(1j * phase[1]) * (np.exp(1j * freq[1] * t) - 1) / (1j * freq[1])
        return (zn + dn) * np.conj(zm + dm) - zn * np.conj(zm)

    def apply(self, t, u):
        out = np.zeros_like(u)
        for B, amp, f in self.terms:
            out += 1j * amp * np.exp(1j * f * t) * (B @ u)
        if self.drift:
            dw = self.bundle.vres * self._w_shift(t)
            plus, minus = self._transport_parts
            out += 1j * (dw * (plus @ u) + np.conj(dw) * (minus @ u))
        for vec, f in self.forcing:
            out += vec * np.exp(1j * f * t)
        return out


def _record(A, z, K, s, s0, t):
    return A.quad(z), sobolev_norm(z, K, s), sobolev_norm(z, K, s0), float(np.linalg.norm(z))


def evolve(cfg: ExperimentConfig, datum: Datum, A: BandedOperator | None = None,
           T: BandedOperator | None = None) -> TimeSeries:
    """Evolve the high-mode part in the moving frame and record the virial and norms."""
    bundle = datum.bundle
    delta0 = cfg.delta0 if cfg.delta0 is not None else default_delta0(datum.lam.n)
    A = A or assemble_mourre(bundle, cfg.s, cfg.R, cfg.K, delta0)
    T = T or assemble_transport(bundle, cfg.K, delta0)
    modes = mode_list(cfg.K)
    omega = omega_float(modes, datum.lam.vorticity)
    L = -1j * np.diag(omega) + 1j * T.matrix
    T_end = cfg.T_end if cfg.T_end is not None else 3.0 / (bundle.d * bundle.kappa)
    if cfg.dt_record is not None:
        dt = cfg.dt_record
        nrec = max(1, int(round(T_end / dt)))
    else:
        nrec = cfg.n_records
        dt = T_end / nrec
    times = dt * np.arange(nrec + 1)

    z = datum.perp.coeffs.astype(complex).copy()
    rec = [_record(A, z, cfg.K, cfg.s, cfg.s0, 0.0)]
    pert = _Perturbation(cfg, bundle, delta0) if cfg.knobs.active() else None
    if pert is None:
        E = sla.expm(L * dt)
        for i in range(nrec):
            z = E @ z
            if not np.all(np.isfinite(z)):
                raise NumericalAbort("non-finite state", times[i])
            rec.append(_record(A, z, cfg.K, cfg.s, cfg.s0, times[i + 1]))
    else:
        sub = max(1, math.ceil(dt / cfg.max_step))
        h = dt / sub
        E = sla.expm(L * h)
        Eh = sla.expm(L * h / 2)
        t = 0.0
        for i in range(nrec):
            for _ in range(sub):
                z = _lawson_rk4(z, t, h, E, Eh, pert.apply)
                t += h
            if not np.all(np.isfinite(z)):
                raise NumericalAbort("non-finite state", times[i])
            t = times[i + 1]
            rec.append(_record(A, z, cfg.K, cfg.s, cfg.s0, t))
    zm, zn = mode_evolution(bundle, times)
    rec = np.array(rec)
    return TimeSeries(times, rec[:, 0], rec[:, 1], rec[:, 2], rec[:, 3], np.abs(zm), np.abs(zn))


def _lawson_rk4(u, t, h, E, Eh, N):
    """One integrating-factor RK4 step for ``u' = L u + N(t, u)``."""
    k1 = N(t, u)
    k2 = N(t + h / 2, Eh @ (u + h / 2 * k1))
    k3 = N(t + h / 2, Eh @ u + h / 2 * k2)
    k4 = N(t + h, E @ u + h * (Eh @ k3))
    return E @ u + h / 6 * (E @ k1 + 2 * (Eh @ (k2 + k3)) + k4)


@dataclass
class GrowthFit:
    rate: float
    r2: float
    window: tuple


def fit_growth_rate(ts: TimeSeries, window=None) -> GrowthFit:
    """Least-squares slope of ``log A`` on ``window`` (default: final two thirds)."""
    t = ts.times
    if window is None:
        window = (t[-1] / 3, t[-1])
    sel = (t >= window[0] - 1e-12 * max(1.0, abs(window[0]))) & (t <= window[1])
    if sel.sum() < 2:
        raise ValueError("window holds fewer than two samples")
    a = ts.virial[sel]
    if np.any(a <= 0):
        raise ValueError("virial is not positive on the fit window")
    y = np.log(a)
    x = t[sel]
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid**2) / ss) if ss > 0 else 1.0
    return GrowthFit(float(slope), r2, (float(window[0]), float(window[1])))


def first_exceedance(ts: TimeSeries, factor: float) -> float | None:
    """First recorded time at which ``norm_s`` exceeds ``factor`` times its initial value."""
    hit = np.nonzero(ts.norm_s >= factor * ts.norm_s[0])[0]
    return float(ts.times[hit[0]]) if len(hit) else None


@dataclass
class GrowthSummary:
    predicted_rate: float
    fit: GrowthFit | None
    fit_error: str | None
    l2_drift: float
    norm_ratio: float
    low_norm_ratio: float
    band: tuple = (0.5, 1.5)

    @property
    def rate_ratio(self) -> float | None:
        return self.fit.rate / self.predicted_rate if self.fit else None

    @property
    def band_pass(self) -> bool:
        r = self.rate_ratio
        return r is not None and self.band[0] <= r <= self.band[1]

    def to_json(self) -> dict:
        return {
            "predicted_rate": self.predicted_rate,
            "fitted_rate": self.fit.rate if self.fit else None,
            "r2": self.fit.r2 if self.fit else None,
            "rate_ratio": self.rate_ratio,
            "fit_error": self.fit_error,
            "band": list(self.band),
            "band_pass": self.band_pass,
            "l2_drift": self.l2_drift,
            "norm_ratio": self.norm_ratio,
            "low_norm_ratio": self.low_norm_ratio,
        }


def summarize(ts: TimeSeries, bundle: NfCoefficients) -> GrowthSummary:
    try:
        fit, err = fit_growth_rate(ts), None
    except ValueError as exc:
        fit, err = None, str(exc)
    l2 = float(np.max(np.abs(ts.norm_L2 - ts.norm_L2[0])) / ts.norm_L2[0])
    low = ts.norm_s0 / ts.norm_s0[0]
    low_ratio = float(max(low.max(), 1 / low.min()))
    return GrowthSummary(bundle.d * bundle.kappa, fit, err, l2, float(ts.norm_s[-1] / ts.norm_s[0]), low_ratio)
