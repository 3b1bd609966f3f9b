"""Linear frequencies and Fourier multipliers for constant-vorticity water waves.

Gravity is normalized to ``g = 1`` and the vorticity is negative,
``gamma = -sqrt(gamma_sq)`` with ``gamma_sq`` rational.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
from mpmath import mp

from .exact import RadicalSum, RationalLike, as_fraction

DEFAULT_PREC = 256


def _sign(j: int) -> int:
    return 1 if j > 0 else -1


def _check_index(j: int) -> int:
    if isinstance(j, bool) or int(j) != j:
        raise TypeError(f"mode index must be an integer, got {j!r}")
    j = int(j)
    if j == 0:
        raise ValueError("mode index 0 is excluded (zero-mean fields)")
    return j


@dataclass(frozen=True)
class Vorticity:
    """Negative vorticity with rational square."""

    gamma_sq: Fraction

    def __post_init__(self):
        g2 = as_fraction(self.gamma_sq)
        if g2 <= 0:
            raise ValueError("gamma_sq must be positive; gamma = -sqrt(gamma_sq) < 0")
        object.__setattr__(self, "gamma_sq", g2)

    @classmethod
    def from_gamma(cls, gamma: float) -> "Vorticity":
        # only for rational-squared inputs given as floats in tests/CLI sugar
        if gamma >= 0:
            raise ValueError("positive vorticity is not reflected; pass gamma < 0")
        return cls(Fraction(gamma * gamma).limit_denominator(10**12))

    def gamma(self, prec: int = DEFAULT_PREC) -> mpmath.mpf:
        with mp.workprec(prec):
            return -mpmath.sqrt(mpmath.mpf(self.gamma_sq.numerator) / self.gamma_sq.denominator)

    def gamma_float(self) -> float:
        return -float(np.sqrt(float(self.gamma_sq)))


def omega_small(j: int, v: Vorticity) -> RadicalSum:
    """``sqrt(|j| + gamma^2/4)`` as an exact radical."""
    j = _check_index(j)
    return RadicalSum.sqrt(abs(j) + v.gamma_sq / 4)


def omega_big(j: int, v: Vorticity) -> RadicalSum:
    """``Omega_j = sqrt(|j| + gamma^2/4) + (gamma/2) sign(j)`` with ``gamma < 0``."""
    j = _check_index(j)
    return RadicalSum([(1, abs(j) + v.gamma_sq / 4), (Fraction(-_sign(j), 2), v.gamma_sq)])


def omega_lower_bound(v: Vorticity) -> RadicalSum:
    """``sqrt(1 + gamma^2/4) - |gamma|/2``, a lower bound for every Omega_j."""
    return RadicalSum([(1, 1 + v.gamma_sq / 4), (Fraction(-1, 2), v.gamma_sq)])


def omega_float(j, v: Vorticity) -> np.ndarray:
    """Vectorized float64 Omega_j (nonzero integer array input)."""
    j = np.asarray(j)
    g2 = float(v.gamma_sq)
    return np.sqrt(np.abs(j) + g2 / 4) - 0.5 * np.sqrt(g2) * np.sign(j)


def omega_mpf(j: int, v: Vorticity, prec: int = DEFAULT_PREC) -> mpmath.mpf:
    j = _check_index(j)
    with mp.workprec(prec):
        g2 = mpmath.mpf(v.gamma_sq.numerator) / v.gamma_sq.denominator
        return mpmath.sqrt(abs(j) + g2 / 4) + v.gamma(prec) / 2 * _sign(j)


def multipliers(j: int, v: Vorticity, prec: int = DEFAULT_PREC):
    """Return ``(m_j, n_j, e_j)``.

    ``m_j = 2**-0.5 * (4 j^2 / (4|j| + gamma^2))**(1/4)``, ``n_j`` uses the
    exponent ``-1/4`` and ``e_j = 1/(2 m_j) + gamma m_j / (2 j)``.
    """
    if prec < 128:
        raise ValueError("multipliers need at least 128 bits")
    j = _check_index(j)
    with mp.workprec(prec):
        g2 = mpmath.mpf(v.gamma_sq.numerator) / v.gamma_sq.denominator
        ratio = 4 * mpmath.mpf(j) ** 2 / (4 * abs(j) + g2)
        root = mpmath.root(ratio, 4)
        m = root / mpmath.sqrt(2)
        n = 1 / (mpmath.sqrt(2) * root)
        e = 1 / (2 * m) + v.gamma(prec) * m / (2 * j)
        return m, n, e


@dataclass
class FrequencyTable:
    """Append-only cache of Omega_j as radicals and as high-precision floats."""

    vorticity: Vorticity
    prec: int = DEFAULT_PREC
    _exact: dict = field(default_factory=dict, repr=False)
    _float: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def exact(self, j: int) -> RadicalSum:
        val = self._exact.get(j)
        if val is None:
            val = omega_big(j, self.vorticity)
            with self._lock:
                self._exact.setdefault(j, val)
        return val

    def mpf(self, j: int) -> mpmath.mpf:
        val = self._float.get(j)
        if val is None:
            val = omega_mpf(j, self.vorticity, self.prec)
            with self._lock:
                self._float.setdefault(j, val)
        return val

    def combination(self, indices, signs) -> RadicalSum:
        total = RadicalSum()
        for j, s in zip(indices, signs):
            total = total + (self.exact(j) if s > 0 else -self.exact(j))
        return total


def parse_gamma_sq(value: RationalLike | str) -> Vorticity:
    return Vorticity(Fraction(value) if isinstance(value, str) else as_fraction(value))
