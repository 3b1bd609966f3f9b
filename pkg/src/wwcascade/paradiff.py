"""Bony-Weyl quantization on truncated Fourier modes and the Mourre check.

Operators act on the nonzero modes ``{-K..K} \\ {0}``.  Entry ``(k, j)`` of
``Op(a)`` is ``chi(k-j, (k+j)/2) * a_hat(k-j, (k+j)/2)`` where ``a_hat(l, xi)``
is the ``l``-th Fourier coefficient in ``x`` of ``a(x, xi)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .nfcoeffs import NfCoefficients

log = logging.getLogger(__name__)

DELTA0_MAX = 0.1
HERMITIAN_TOL = 1e-14


def default_delta0(n: int) -> float:
    return min(0.1, 1.0 / (2 * n + 3))


def step(y):
    """Smooth step: 0 for y <= 1, 1 for y >= 2, exponential bridge between."""
    y = np.asarray(y, dtype=float)
    out = np.where(y >= 2, 1.0, 0.0)
    mid = (y > 1) & (y < 2)
    if np.any(mid):
        ym = y[mid]
        a = np.exp(-1.0 / (ym - 1))
        b = np.exp(-1.0 / (2 - ym))
        out[mid] = a / (a + b)
    return out if out.ndim else float(out)


def phi_R(xi, R: float):
    """High-frequency step ``phi(xi / R)``; vanishes for ``xi <= R`` (including all xi < 0)."""
    if R < 1:
        raise ValueError("R must be at least 1")
    return step(np.asarray(xi, dtype=float) / R)


def japanese(xi):
    return np.sqrt(1.0 + np.asarray(xi, dtype=float) ** 2)


def chi(xp, xi, delta0: float):
    """Cutoff equal to 1 for ``|xp| <= delta0<xi>/2`` and 0 for ``|xp| >= delta0<xi>``."""
    if not 0 < delta0 <= DELTA0_MAX:
        raise ValueError(f"delta0 must lie in (0, {DELTA0_MAX}]")
    xp = np.abs(np.asarray(xp, dtype=float))
    br = delta0 * japanese(xi)
    # map [br/2, br] onto [1, 2] and reuse the step profile
    out = 1.0 - step(2 * xp / br)
    return out if np.ndim(out) else float(out)


def mode_list(K: int) -> np.ndarray:
    if K < 1:
        raise ValueError("K must be positive")
    return np.array([j for j in range(-K, K + 1) if j])


@dataclass
class BandedOperator:
    """Dense matrix on nonzero modes with its cutoff support recorded."""

    K: int
    matrix: np.ndarray
    support: np.ndarray = field(repr=False)  # True where the cutoff allows a nonzero entry
    harmonics: tuple = ()

    @property
    def modes(self) -> np.ndarray:
        return mode_list(self.K)

    def index(self, j: int) -> int:
        return j + self.K if j < 0 else j + self.K - 1

    def entry(self, k: int, j: int) -> complex:
        return complex(self.matrix[self.index(k), self.index(j)])

    def hermitian_error(self) -> float:
        scale = max(1.0, float(np.abs(self.matrix).max()))
        return float(np.abs(self.matrix - self.matrix.conj().T).max()) / scale

    @property
    def is_hermitian(self) -> bool:
        return self.hermitian_error() < HERMITIAN_TOL

    def band_violation(self) -> float:
        return float(np.abs(self.matrix[~self.support]).max(initial=0.0))

    def norm_inf(self) -> float:
        """Max absolute row sum."""
        return float(np.abs(self.matrix).sum(axis=1).max())

    def quad(self, z: np.ndarray) -> float:
        return float(np.vdot(z, self.matrix @ z).real)

    def __matmul__(self, other):
        if isinstance(other, BandedOperator):
            return self.matrix @ other.matrix
        return self.matrix @ other


def assemble_bw(symbol, harmonics, K: int, delta0: float) -> BandedOperator:
    """Quantize ``a(x, xi) = sum_l symbol(l, xi) e^{ilx}``.

    ``symbol(l, xi)`` is called with an integer ``l`` and a float array of
    midpoints ``xi = (k+j)/2`` and must return an array of the same shape.
    """
    modes = mode_list(K)
    size = len(modes)
    kk, jj = np.meshgrid(modes, modes, indexing="ij")
    support = chi(kk - jj, (kk + jj) / 2, delta0) > 0
    mat = np.zeros((size, size), dtype=complex)
    for ell in sorted(set(int(h) for h in harmonics)):
        rows = np.nonzero((modes - ell != 0) & (np.abs(modes - ell) <= K))[0]
        k = modes[rows]
        j = k - ell
        cols = np.where(j < 0, j + K, j + K - 1)
        xi = (k + j) / 2.0
        vals = chi(ell, xi, delta0) * np.asarray(symbol(ell, xi), dtype=complex)
        mat[rows, cols] = vals
    mat[~support] = 0.0
    return BandedOperator(K, mat, support, tuple(sorted(set(harmonics))))


def assemble_transport(bundle: NfCoefficients, K: int, delta0: float | None = None) -> BandedOperator:
    """``Op((J + v(x)) xi)`` for the given transport data."""
    delta0 = default_delta0(bundle.lam.n) if delta0 is None else delta0
    coeffs = bundle.transport_harmonics()
    return assemble_bw(lambda ell, xi: coeffs[ell] * xi, coeffs.keys(), K, delta0)


def assemble_mourre(bundle: NfCoefficients, s: float, R: float, K: int,
                    delta0: float | None = None) -> BandedOperator:
    """``Op(t(x) |xi|^{2s} phi_R(xi)^2)``."""
    if s <= 0:
        raise ValueError("s must be positive")
    if 2 * R >= K:
        log.warning("2R >= K: the Mourre operator is degenerate on this truncation")
    delta0 = default_delta0(bundle.lam.n) if delta0 is None else delta0
    coeffs = bundle.mourre_harmonics()

    def symbol(ell, xi):
        return coeffs[ell] * np.abs(xi) ** (2 * s) * phi_R(xi, R) ** 2

    return assemble_bw(symbol, coeffs.keys(), K, delta0)


@dataclass
class MourreReport:
    kappa: float
    min_eig: float
    window: tuple
    a1_min: float
    a2_min: float
    norm_A: float
    threshold: float
    grid_tol: float
    hermitian_A: float
    hermitian_T: float
    min_eig_positive: float = float("nan")  # same window restricted to j > 0

    @property
    def eig_pass(self) -> bool:
        return self.min_eig >= self.threshold

    @property
    def grid_pass(self) -> bool:
        return self.a1_min >= -self.grid_tol and self.a2_min >= -self.grid_tol

    @property
    def passed(self) -> bool:
        return self.eig_pass and self.grid_pass

    def to_json(self) -> dict:
        return {
            "kappa": self.kappa,
            "min_eig": self.min_eig,
            "window": list(self.window),
            "a1_min": self.a1_min,
            "a2_min": self.a2_min,
            "min_eig_positive": self.min_eig_positive,
            "norm_A": self.norm_A,
            "threshold": self.threshold,
            "pass": self.passed,
        }


def commutator_form(A: BandedOperator, T: BandedOperator, rate: float) -> np.ndarray:
    """Hermitian part of ``i[A, T] - rate * A``."""
    M = 1j * (A.matrix @ T.matrix - T.matrix @ A.matrix) - rate * A.matrix
    return 0.5 * (M + M.conj().T)


def mourre_gap_check(bundle: NfCoefficients, s: float, R: float, K: int,
                     delta0: float | None = None, tol_factor: float = 1e-3,
                     grid_tol: float = 1e-12, grid_points: int = 2048) -> MourreReport:
    """Discrete positive-commutator check on the window ``2R <= |j| <= K - d``."""
    d = bundle.d
    A = assemble_mourre(bundle, s, R, K, delta0)
    T = assemble_transport(bundle, K, delta0)
    H = commutator_form(A, T, d * bundle.kappa)
    modes = mode_list(K)
    lo, hi = 2 * R, K - d
    sel = np.nonzero((np.abs(modes) >= lo) & (np.abs(modes) <= hi))[0]
    min_eig = float(np.linalg.eigvalsh(H[np.ix_(sel, sel)]).min()) if len(sel) else float("nan")
    pos = sel[modes[sel] > 0]
    min_pos = float(np.linalg.eigvalsh(H[np.ix_(pos, pos)]).min()) if len(pos) else float("nan")
    x = 2 * np.pi * np.arange(grid_points) / grid_points
    a1, a2 = bundle.a_functions(x, s)
    norm_A = A.norm_inf()
    return MourreReport(
        kappa=bundle.kappa,
        min_eig=min_eig,
        window=(lo, hi),
        a1_min=float(a1.min()),
        a2_min=float(a2.min()),
        norm_A=norm_A,
        threshold=-tol_factor * d * bundle.kappa * norm_A,
        grid_tol=grid_tol,
        hermitian_A=A.hermitian_error(),
        hermitian_T=T.hermitian_error(),
        min_eig_positive=min_pos,
    )
