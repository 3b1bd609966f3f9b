"""Exact rationals, sums of square roots, and validated ball enclosures.

Rationals are :class:`fractions.Fraction`.  A :class:`RadicalSum` stores
``sum(c_i * sqrt(core_i))`` with rational ``c_i`` and distinct square-free
integer cores, so structurally equal radicals always merge.  Because square
roots of distinct square-free integers are linearly independent over Q, a
canonical sum with any nonzero coefficient is a nonzero real number; the
sign decision therefore never needs to guess, only to refine precision.
"""
from __future__ import annotations

import enum
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import isqrt
from typing import Iterable, Mapping, Union

import mpmath
from mpmath import iv, mp

Rational = Fraction
RationalLike = Union[int, Fraction]

DEFAULT_PRECISION_CAP = 4096
MIN_PRECISION = 128

_IV_LOCK = threading.RLock()


@contextmanager
def iv_precision(prec: int):
    """Set the (process-global) interval precision for the enclosed block."""
    with _IV_LOCK:
        saved = iv.prec
        iv.prec = prec
        try:
            yield
        finally:
            iv.prec = saved


def _endpoints(interval) -> tuple[mpmath.mpf, mpmath.mpf]:
    lo, hi = interval._mpi_
    return mp.make_mpf(lo), mp.make_mpf(hi)


def as_fraction(x: RationalLike | str) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a rational")
    if isinstance(x, (int, str)):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


def fraction_str(x: Fraction) -> str:
    """Serialize as ``"p/q"`` (``"p/1"`` for integers)."""
    return f"{x.numerator}/{x.denominator}"


def parse_fraction(text: str) -> Fraction:
    return Fraction(text.strip())


@lru_cache(maxsize=1 << 16)
def _square_free_split(n: int) -> tuple[int, int]:
    """Return (s, c) with n = s**2 * c and c square-free."""
    if n <= 0:
        raise ValueError("n must be positive")
    root = isqrt(n)
    if root * root == n:
        return root, 1
    from sympy import factorint

    s, c = 1, 1
    for prime, exp in factorint(n).items():
        s *= prime ** (exp // 2)
        if exp % 2:
            c *= prime
    return s, c


def rational_sqrt_canonicalize(r: RationalLike) -> tuple[Fraction, int]:
    """Write ``sqrt(r) = scale * sqrt(core)`` with ``core`` square-free.

    >>> rational_sqrt_canonicalize(Fraction(49, 24))
    (Fraction(7, 12), 6)
    """
    r = as_fraction(r)
    if r < 0:
        raise ValueError(f"negative radicand {r}")
    if r == 0:
        return Fraction(0), 1
    # sqrt(p/q) = sqrt(p*q)/q
    p, q = r.numerator, r.denominator
    s, core = _square_free_split(p * q)
    return Fraction(s, q), core


class Sign(enum.Enum):
    NEGATIVE = -1
    ZERO = 0
    POSITIVE = 1
    UNDECIDED = None

    def __int__(self) -> int:
        if self is Sign.UNDECIDED:
            raise ValueError("undecided sign has no integer value")
        return self.value


@dataclass(frozen=True)
class Ball:
    """Closed ball ``[center - radius, center + radius]`` of mpmath floats."""

    center: mpmath.mpf
    radius: mpmath.mpf
    prec: int = MIN_PRECISION

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("negative radius")

    @classmethod
    def from_interval(cls, interval, prec: int) -> "Ball":
        a, b = _endpoints(interval)
        with mp.workprec(prec):
            center = (a + b) / 2
        with iv_precision(prec):
            # full width bounds the distance from any interior point to either end
            width = _endpoints(iv.mpf(b) - iv.mpf(a))[1]
        return cls(center, width, prec)

    @classmethod
    def exact(cls, x: RationalLike, prec: int = MIN_PRECISION) -> "Ball":
        x = as_fraction(x)
        with iv_precision(prec):
            interval = iv.mpf(x.numerator) / iv.mpf(x.denominator)
        return cls.from_interval(interval, prec)

    def interval(self):
        with iv_precision(self.prec):
            return iv.mpf(self.center) + iv.mpf([-self.radius, self.radius])

    @property
    def lower(self) -> mpmath.mpf:
        return _endpoints(self.interval())[0]

    @property
    def upper(self) -> mpmath.mpf:
        return _endpoints(self.interval())[1]

    def contains(self, x) -> bool:
        lo, hi = _endpoints(self.interval())
        return bool(lo <= x <= hi)

    def excludes_zero(self) -> bool:
        lo, hi = _endpoints(self.interval())
        return bool(lo > 0 or hi < 0)

    def _combine(self, other, op) -> "Ball":
        prec = min(self.prec, other.prec) if isinstance(other, Ball) else self.prec
        with iv_precision(prec):
            rhs = other.interval() if isinstance(other, Ball) else _iv_rational(as_fraction(other))
            return Ball.from_interval(op(self.interval(), rhs), prec)

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._combine(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._combine(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __neg__(self) -> "Ball":
        return Ball(-self.center, self.radius, self.prec)

    def sqrt(self) -> "Ball":
        if self.lower < 0:
            raise ValueError("sqrt of a ball reaching below zero")
        with iv_precision(self.prec):
            return Ball.from_interval(iv.sqrt(self.interval()), self.prec)


def _iv_rational(x: Fraction):
    return iv.mpf(x.numerator) / iv.mpf(x.denominator)


class RadicalSum:
    """Immutable formal sum ``sum_core coeff * sqrt(core)``."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Iterable[tuple[RationalLike, RationalLike]] = ()):
        merged: dict[int, Fraction] = {}
        for coeff, radicand in terms:
            coeff = as_fraction(coeff)
            if coeff == 0:
                continue
            scale, core = rational_sqrt_canonicalize(radicand)
            if scale == 0:
                continue
            merged[core] = merged.get(core, Fraction(0)) + coeff * scale
        self._terms = {c: v for c, v in sorted(merged.items()) if v != 0}
        self._hash = None

    @classmethod
    def _from_cores(cls, cores: Mapping[int, Fraction]) -> "RadicalSum":
        obj = cls.__new__(cls)
        obj._terms = {c: v for c, v in sorted(cores.items()) if v != 0}
        obj._hash = None
        return obj

    @classmethod
    def rational(cls, x: RationalLike) -> "RadicalSum":
        return cls._from_cores({1: as_fraction(x)})

    @classmethod
    def sqrt(cls, r: RationalLike) -> "RadicalSum":
        return cls([(1, r)])

    @property
    def terms(self) -> dict[int, Fraction]:
        """Canonical ``{core: coefficient}`` view (copy)."""
        return dict(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_rational(self) -> bool:
        return set(self._terms) <= {1}

    def as_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"{self!r} is irrational")
        return self._terms.get(1, Fraction(0))

    def __add__(self, other):
        if not isinstance(other, RadicalSum):
            other = RadicalSum.rational(as_fraction(other))
        out = dict(self._terms)
        for core, coeff in other._terms.items():
            out[core] = out.get(core, Fraction(0)) + coeff
        return RadicalSum._from_cores(out)

    __radd__ = __add__

    def __neg__(self) -> "RadicalSum":
        return RadicalSum._from_cores({c: -v for c, v in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, RadicalSum):
            out: dict[int, Fraction] = {}
            for c1, v1 in self._terms.items():
                for c2, v2 in other._terms.items():
                    scale, core = rational_sqrt_canonicalize(c1 * c2)
                    out[core] = out.get(core, Fraction(0)) + v1 * v2 * scale
            return RadicalSum._from_cores(out)
        k = as_fraction(other)
        return RadicalSum._from_cores({c: v * k for c, v in self._terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1 / as_fraction(other))

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = RadicalSum.rational(other)
        if not isinstance(other, RadicalSum):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self._terms.items()))
        return self._hash

    def __repr__(self) -> str:
        if not self._terms:
            return "RadicalSum(0)"
        parts = [f"{v}" if c == 1 else f"{v}*sqrt({c})" for c, v in self._terms.items()]
        return "RadicalSum(" + " + ".join(parts) + ")"

    def enclose(self, prec: int = MIN_PRECISION) -> Ball:
        with iv_precision(prec):
            total = iv.mpf(0)
            for core, coeff in self._terms.items():
                total += _iv_rational(coeff) * iv.sqrt(iv.mpf(core))
            return Ball.from_interval(total, prec)

    def to_mpf(self, prec: int = 256) -> mpmath.mpf:
        with mp.workprec(prec + 16):
            total = mpmath.mpf(0)
            for core, coeff in self._terms.items():
                total += mpmath.mpf(coeff.numerator) / coeff.denominator * mpmath.sqrt(core)
        with mp.workprec(prec):
            return +total

    def __float__(self) -> float:
        return float(self.to_mpf(64))


@dataclass(frozen=True)
class SignCertificate:
    sign: Sign
    method: str  # "structural", "exact", "ball" or "none"
    precision: int = 0
    ball: Ball | None = None


def radical_sum_sign(x: RadicalSum, precision_cap: int = DEFAULT_PRECISION_CAP) -> SignCertificate:
    """Certified sign of ``x``.

    Structural cancellation gives ZERO; with at most two distinct cores the
    sign is decided in exact arithmetic by comparing squares; otherwise the
    ball enclosure is refined 128, 256, ... bits up to ``precision_cap``.
    """
    if precision_cap < 64:
        raise ValueError("precision_cap must be at least 64 bits")
    if len(x) > 8:
        raise ValueError("at most 8 distinct radicals are supported")
    terms = list(x._terms.items())
    if not terms:
        return SignCertificate(Sign.ZERO, "structural")
    if len(terms) == 1:
        return SignCertificate(Sign.POSITIVE if terms[0][1] > 0 else Sign.NEGATIVE, "exact")
    if len(terms) == 2:
        (a, ca), (b, cb) = terms
        if (ca > 0) == (cb > 0):
            return SignCertificate(Sign.POSITIVE if ca > 0 else Sign.NEGATIVE, "exact")
        # |ca|sqrt(a) vs |cb|sqrt(b); cores differ so the squares differ
        dominant = ca if ca * ca * a > cb * cb * b else cb
        return SignCertificate(Sign.POSITIVE if dominant > 0 else Sign.NEGATIVE, "exact")
    prec = MIN_PRECISION
    ball = None
    while prec <= precision_cap:
        ball = x.enclose(prec)
        if ball.excludes_zero():
            return SignCertificate(Sign.POSITIVE if ball.center > 0 else Sign.NEGATIVE, "ball", prec, ball)
        prec *= 2
    return SignCertificate(Sign.UNDECIDED, "none", precision_cap, ball)
