"""Normal-form and transport coefficients attached to a good set.

All Hamiltonian coefficients are those of the monomials with the ``2*pi``
prefactor of the Fourier expansion removed, so the assembled quartic
coefficients compare directly with the rational closed forms.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import permutations

import mpmath
import numpy as np
from mpmath import mp

from .dispersion import FrequencyTable, Vorticity, multipliers
from .exact import RadicalSum, Sign, fraction_str, radical_sum_sign
from .resonance import GoodSet, c3_constant

PREC = 256


class SmallDivisorError(ArithmeticError):
    pass


def _sgn(x) -> int:
    return (x > 0) - (x < 0)


def _check_momentum(k, s):
    if any(j == 0 for j in k):
        raise ValueError("indices must be nonzero")
    if sum(a * b for a, b in zip(k, s)) != 0:
        raise ValueError(f"momentum not conserved: {k} / {s}")


@lru_cache(maxsize=4096)
def _mult(j: int, gamma_sq: Fraction, prec: int):
    return multipliers(j, Vorticity(gamma_sq), prec)


def h3_coeff(k, s, v: Vorticity, prec: int = PREC) -> mpmath.mpf:
    """Cubic Hamiltonian coefficient (real)."""
    k1, k2, k3 = k
    s1, s2, s3 = s
    _check_momentum(k, s)
    g2 = v.gamma_sq
    m1, _, _ = _mult(k1, g2, prec)
    m2, n2, _ = _mult(k2, g2, prec)
    _, n3, _ = _mult(k3, g2, prec)
    with mp.workprec(prec):
        gamma = v.gamma(prec)
        first = mpmath.mpf(k2 * k3 * s2 * s3 + abs(k2) * abs(k3)) / 2 * s2 * s3 * m1 * n2 * n3
        second = s2 * s3 * gamma / 2 * _sgn(k2) * abs(k3) * m1 * m2 * n3
        return first + second


def h4_coeff(k, s, v: Vorticity, prec: int = PREC) -> mpmath.mpf:
    """Quartic Hamiltonian coefficient (real), three-line formula."""
    k1, k2, k3, k4 = k
    s1, s2, s3, s4 = s
    _check_momentum(k, s)
    g2 = v.gamma_sq
    m1 = _mult(k1, g2, prec)[0]
    m2 = _mult(k2, g2, prec)[0]
    m3, n3, _ = _mult(k3, g2, prec)
    m4, n4, _ = _mult(k4, g2, prec)
    with mp.workprec(prec):
        gamma = v.gamma(prec)
        g2f = mpmath.mpf(g2.numerator) / g2.denominator
        q23 = abs(s2 * k2 + s3 * k3)
        q34 = abs(s3 * k3 + s4 * k4)
        t1 = mpmath.mpf(s3 * s4 * (abs(k3) * k4 * k4 - q23 * abs(k3) * abs(k4))) / 2 * m1 * m2 * n3 * n4
        t2 = gamma / 4 * s3 * s4 * (_sgn(k3) * k4 * k4 + k3 * abs(k4) - 2 * q23 * _sgn(k3) * abs(k4)) * m1 * m2 * m3 * n4
        t3 = g2f / 8 * s1 * s4 * (k1 * _sgn(k4) - _sgn(k1) * _sgn(k4) * q34) * m1 * m2 * m3 * m4
        return t1 + t2 + t3


def three_wave_divisor(k, s, v: Vorticity) -> RadicalSum:
    table = FrequencyTable(v)
    return table.combination(k, s)


def check_divisor(k, s, v: Vorticity) -> RadicalSum:
    """Exact divisor ``sum s_i Omega_{k_i}``, certified to satisfy ``|D| >= c3``."""
    div = three_wave_divisor(k, s, v)
    sd = radical_sum_sign(div)
    if sd.sign in (Sign.ZERO, Sign.UNDECIDED):
        raise SmallDivisorError(f"three-wave divisor not certified nonzero at {k} / {s}")
    margin = (div if sd.sign is Sign.POSITIVE else -div) - c3_constant(v)
    if radical_sum_sign(margin).sign not in (Sign.POSITIVE, Sign.ZERO):
        raise SmallDivisorError(f"three-wave divisor below c3 at {k} / {s}")
    return div


@dataclass(frozen=True)
class F3Coefficient:
    """``F = -H / (i D)`` stored as the real numerator ``-H`` and divisor ``D``."""

    numerator: mpmath.mpf
    divisor: mpmath.mpf

    @property
    def ratio(self) -> mpmath.mpf:
        # F = i * ratio
        return -self.numerator / self.divisor

    @property
    def value(self) -> complex:
        return complex(0, float(self.ratio))


def f3_coeff(k, s, v: Vorticity, prec: int = PREC) -> F3Coefficient:
    div = check_divisor(k, s, v)
    h = h3_coeff(k, s, v, prec)
    with mp.workprec(prec):
        return F3Coefficient(-h, div.to_mpf(prec))


def _placements(ks, ss):
    seen = set()
    for p in permutations(range(len(ks))):
        key = tuple((ks[i], ss[i]) for i in p)
        if key not in seen:
            seen.add(key)
            yield tuple(k for k, _ in key), tuple(s for _, s in key)


def symmetrized_h3(ks, ss, v, prec=PREC):
    with mp.workprec(prec):
        return mpmath.fsum(h3_coeff(k, s, v, prec) for k, s in _placements(ks, ss))


def symmetrized_h4(ks, ss, v, prec=PREC):
    with mp.workprec(prec):
        return mpmath.fsum(h4_coeff(k, s, v, prec) for k, s in _placements(ks, ss))


def abc_closed(lam: GoodSet) -> tuple[Fraction, Fraction, Fraction]:
    m, n = lam.m, lam.n
    a = Fraction(m**3 * (17 * m**3 - 9 * m**2 * n + 3 * m * n**2 - 3 * n**3), 4 * (m - n) ** 2 * (n - 3 * m))
    c = Fraction(n**3 * (3 * m**3 - 3 * m**2 * n + 9 * m * n**2 - 17 * n**3), 4 * (m - 3 * n) * (m - n) ** 2)
    b = Fraction(
        m * n * (-19 * m**5 + 133 * m**4 * n - 222 * m**3 * n**2 + 106 * m**2 * n**3 - 31 * m * n**4 + n**5),
        4 * (m - 3 * n) * (m - n) ** 2 * (3 * m - n),
    )
    return a, b, c


def _channel(ks, ss, v, prec):
    """Contribution ``tH^2 / D`` of one cubic channel."""
    div = check_divisor(ks, ss, v)
    h = symmetrized_h3(ks, ss, v, prec)
    with mp.workprec(prec):
        return h * h / div.to_mpf(prec)


def _self_coeff(j, v, prec):
    quartic = symmetrized_h4((j, j, j, j), (1, 1, -1, -1), v, prec)
    minus = _channel((j, j, 2 * j), (1, 1, -1), v, prec)
    plus = _channel((j, j, -2 * j), (1, 1, 1), v, prec)
    with mp.workprec(prec):
        return quartic + minus - plus


def abc_birkhoff(lam: GoodSet, prec: int = PREC):
    """Assemble (a, b, c) from the cubic and quartic Hamiltonian coefficients."""
    v = lam.vorticity
    m, n = lam.m, lam.n
    a = _self_coeff(m, v, prec)
    c = _self_coeff(n, v, prec)
    channels = [
        ((m, n, n - m), (1, -1, 1)),
        ((m, n, -m - n), (1, 1, 1)),
        ((m, n, m - n), (-1, 1, 1)),
        ((m, n, m + n), (-1, -1, 1)),
    ]
    quartic = symmetrized_h4((m, m, n, n), (1, -1, 1, -1), v, prec)
    with mp.workprec(prec):
        b = quartic - mpmath.fsum(_channel(k, s, v, prec) for k, s in channels)
    return a, b, c


def v2_coeff(k1: int, k2: int, s1: int, s2: int, v: Vorticity, prec: int = PREC) -> mpmath.mpf:
    """Quadratic transport coefficient of the normal form (real)."""
    if k1 == 0 or k2 == 0:
        raise ValueError("indices must be nonzero")
    g2 = v.gamma_sq
    m1, _, e1 = _mult(k1, g2, prec)
    m2, _, e2 = _mult(k2, g2, prec)
    q = s1 * k1 + s2 * k2
    off = 0 if q == 0 else 1  # 1 - delta(q)
    with mp.workprec(prec):
        gamma = v.gamma(prec)
        g2f = mpmath.mpf(g2.numerator) / g2.denominator
        inner = _sgn(q) + (g2f * off / q if q else 0) + s1 * _sgn(k1) + g2f * s1 / k1
        t1 = -gamma * s2 * k2 * inner * m1 * m2
        bracket = (s1 * k1 * (abs(q) - abs(k1) + s1 * s2 * k1 * _sgn(k2))
                   + s2 * g2f * (k1 * k1 + k2 * k2) / k2 + g2f * s1 * k1 * off)
        t2 = s1 * bracket * e1 * m2
        t3 = -gamma / 2 * s1 * s2 * (s1 * s2 * k1 * k2 + abs(k1 * k2) + 2 * k2 * k2) * e1 * e2
        return t1 + t2 + t3


def vint_closed(j: int, lam: GoodSet) -> RadicalSum:
    """Resonant self-interaction coefficient, exact as ``r0 + r1*sqrt(S)``."""
    if j == 0:
        raise ValueError("j must be nonzero")
    m, n, d = lam.m, lam.n, lam.d
    S = 8 * abs(j) * d + (m + n) ** 2
    A = 4 * abs(j) * d + (m + n) ** 2
    # -A (|j|(m+n) + j sqrt S) / (2 d sqrt S) = -A j/(2d) - A|j|(m+n)/(2dS) sqrt S
    return RadicalSum([(Fraction(-A * j, 2 * d), 1), (Fraction(-A * abs(j) * (m + n), 2 * d * S), S)])


def vint_lambda(lam: GoodSet) -> tuple[Fraction, Fraction]:
    """The rational specializations at ``j = m`` and ``j = n``."""
    m, n = lam.m, lam.n
    vm = Fraction(2 * m * m * (5 * m * m - 2 * m * n + n * n), (3 * m - n) * (m - n))
    vn = Fraction(2 * n * n * (5 * n * n - 2 * m * n + m * m), (3 * n - m) * (m - n))
    return vm, vn


def vres_closed(lam: GoodSet) -> RadicalSum:
    m, n, d = lam.m, lam.n, lam.d
    P = m * n * (m - 3 * n) * (n - 3 * m)
    return RadicalSum([(Fraction(m * n * (m + n) ** 3, 2 * d * P), P)])


def vtilde_closed(lam: GoodSet) -> tuple[Fraction, Fraction]:
    m, n = lam.m, lam.n
    vm = Fraction(
        2 * m**6 - 25 * m**5 * n + 50 * m**4 * n**2 + 8 * m**3 * n**3 - 4 * m**2 * n**4 + m * n**5,
        4 * (3 * n - m) * (n - m) ** 3,
    )
    vn = Fraction(n * (19 * m**4 - 33 * m**3 * n - 53 * m**2 * n**2 + 29 * m * n**3 - 2 * n**4),
                  4 * (n - m) ** 2 * (n - 3 * m))
    return vm, vn


def vtilde_identity(lam: GoodSet) -> tuple[Fraction, Fraction]:
    a, b, c = abc_closed(lam)
    vm, vn = vint_lambda(lam)
    d = lam.d
    return vm + (b - 2 * a) / d, vn + (2 * c - b) / d


@dataclass(frozen=True)
class NfCoefficients:
    lam: GoodSet
    a: Fraction
    b: Fraction
    c: Fraction
    vint_m: Fraction
    vint_n: Fraction
    vres: float
    vres_exact: RadicalSum
    vtilde_m: Fraction
    vtilde_n: Fraction
    vtilde_m_identity: Fraction
    vtilde_n_identity: Fraction
    z_m0: complex
    z_n0: complex
    kappa: float
    nu0: float
    J: float

    @property
    def d(self) -> int:
        return self.lam.d

    @property
    def w(self) -> complex:
        return self.z_n0 * self.z_m0.conjugate()

    @property
    def constant_part(self) -> float:
        return float(self.vtilde_m) * abs(self.z_m0) ** 2 + float(self.vtilde_n) * abs(self.z_n0) ** 2

    # Fourier harmonics {l: coefficient of e^{ilx}} of the profiles
    def transport_harmonics(self) -> dict:
        out = {self.d: self.vres * self.w, -self.d: self.vres * self.w.conjugate()}
        if self.constant_part != 0:
            out[0] = complex(self.constant_part)
        return out

    def mourre_harmonics(self) -> dict:
        return {self.d: 0.5j * self.vres * self.w, -self.d: -0.5j * self.vres * self.w.conjugate()}

    def _phase(self, x):
        return self.w * np.exp(1j * self.d * np.asarray(x, dtype=float))

    def j_plus_v(self, x):
        return self.constant_part + 2 * self.vres * np.real(self._phase(x))

    def v_profile(self, x):
        return self.j_plus_v(x) - self.J

    def v_x(self, x):
        return -2 * self.d * self.vres * np.imag(self._phase(x))

    def t_profile(self, x):
        return -self.vres * np.imag(self._phase(x))

    def t_x(self, x):
        return -self.vres * self.d * np.real(self._phase(x))

    def a_functions(self, x, s: float):
        """Nonnegative functions ``(a1, a2)`` of the Poisson-bracket decomposition."""
        t, vx = self.t_profile(x), self.v_x(x)
        a2 = 2 * t * vx
        a1 = t * vx - self.j_plus_v(x) * self.t_x(x) - self.d * self.kappa * t + (2 * s - 1) * t * vx
        return a1, a2

    def to_json(self) -> dict:
        return {
            "lambda": [self.lam.m, self.lam.n],
            "gamma_sq": fraction_str(self.lam.gamma_sq),
            "a": fraction_str(self.a),
            "b": fraction_str(self.b),
            "c": fraction_str(self.c),
            "vint_m": fraction_str(self.vint_m),
            "vint_n": fraction_str(self.vint_n),
            "vres": self.vres,
            "vtilde_m": fraction_str(self.vtilde_m),
            "vtilde_n": fraction_str(self.vtilde_n),
            "kappa": self.kappa,
            "nu0": self.nu0,
            "J": self.J,
        }


def nu0_value(lam: GoodSet) -> float:
    vm, vn = vtilde_closed(lam)
    vres = float(vres_closed(lam))
    return abs(vres) * math.sqrt(-vn) * math.sqrt(vm) / (4 * float(vm - vn))


def transport_bundle(lam: GoodSet, z_m0: complex, z_n0: complex) -> NfCoefficients:
    a, b, c = abc_closed(lam)
    vint_m, vint_n = vint_lambda(lam)
    vres_exact = vres_closed(lam)
    vres = float(vres_exact)
    vm, vn = vtilde_closed(lam)
    vm_id, vn_id = vtilde_identity(lam)
    z_m0, z_n0 = complex(z_m0), complex(z_n0)
    if not (cmath.isfinite(z_m0) and cmath.isfinite(z_n0)):
        raise ValueError("amplitudes must be finite")
    am, an = abs(z_m0) ** 2, abs(z_n0) ** 2
    with mp.workprec(PREC):
        vres_mp = vres_exact.to_mpf(PREC)
        prod = abs(vres_mp * mpmath.mpf(abs(z_m0)) * mpmath.mpf(abs(z_n0)))
        lin = mpmath.mpf(vm.numerator) / vm.denominator * mpmath.mpf(abs(z_m0)) ** 2 \
            + mpmath.mpf(vn.numerator) / vn.denominator * mpmath.mpf(abs(z_n0)) ** 2
        kappa = float(2 * prod - abs(lin))
    d = lam.d
    J = float((2 * c - b) / d) * an + float((b - 2 * a) / d) * am
    return NfCoefficients(lam, a, b, c, vint_m, vint_n, vres, vres_exact, vm, vn, vm_id, vn_id,
                          z_m0, z_n0, kappa, nu0_value(lam), J)


def abs_squares_for_balance(lam: GoodSet, eps: Fraction) -> tuple[Fraction, Fraction]:
    """Exact ``|z_m|^2, |z_n|^2`` with ``Vm|z_m|^2 + Vn|z_n|^2 = 0`` and total ``eps^2/4``."""
    vm, vn = vtilde_closed(lam)
    return eps * eps * (-vn) / (4 * (vm - vn)), eps * eps * vm / (4 * (vm - vn))


def abc_residual(lam: GoodSet, prec: int = PREC) -> float:
    """Max relative gap between the assembled and closed-form (a, b, c)."""
    closed = abc_closed(lam)
    assembled = abc_birkhoff(lam, prec)
    with mp.workprec(prec):
        gaps = []
        for x, q in zip(assembled, closed):
            exact = mpmath.mpf(q.numerator) / q.denominator
            gaps.append(abs(x - exact) / abs(exact))
        return float(max(gaps))
