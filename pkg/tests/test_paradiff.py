import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wwcascade.nfcoeffs import abs_squares_for_balance, transport_bundle
from wwcascade.paradiff import (BandedOperator, assemble_bw, assemble_mourre, assemble_transport,
                                chi, commutator_form, default_delta0, japanese, mode_list,
                                mourre_gap_check, phi_R)
from wwcascade.resonance import GoodSet

LAM = GoodSet.certified(-2, 3)
D0 = default_delta0(3)


def balanced_bundle(eps=Fraction(1, 20), phase=0.0):
    am, an = abs_squares_for_balance(LAM, eps)
    return transport_bundle(LAM, math.sqrt(am), math.sqrt(an) * cmath.exp(1j * phase))


def generic_bundle():
    return transport_bundle(LAM, 0.02 * cmath.exp(0.4j), 0.01 * cmath.exp(-1.1j))


# ------------------------------------------------------------ cutoffs

def test_chi_examples():
    for xi in (-50.0, -0.5, 0.0, 3.0, 200.0):
        assert chi(0.0, xi, 0.1) == 1.0
        edge = 0.1 * float(japanese(xi))
        assert chi(edge, xi, 0.1) == 0.0
        assert chi(edge / 2, xi, 0.1) == 1.0


@given(st.floats(-100, 100), st.floats(-500, 500), st.floats(0.001, 0.1))
def test_chi_even_and_bounded(xp, xi, d0):
    v = chi(xp, xi, d0)
    assert 0.0 <= v <= 1.0
    assert chi(-xp, xi, d0) == v == chi(xp, -xi, d0)


def test_chi_monotone_bridge():
    xp = np.linspace(0, 2, 1001)
    v = chi(xp, 10.0, 0.1)
    assert np.all(np.diff(v) <= 0)


def test_chi_rejects_delta0():
    for d0 in (0.0, -0.1, 0.2):
        with pytest.raises(ValueError):
            chi(0.0, 1.0, d0)


def test_phi_examples():
    R = 16.0
    assert phi_R(R, R) == 0.0
    assert phi_R(2 * R, R) == 1.0
    assert phi_R(1.5 * R, R) == pytest.approx(0.5, abs=1e-15)
    assert phi_R(-3 * R, R) == 0.0
    xi = np.linspace(-3 * R, 3 * R, 1000)
    assert np.all(np.diff(phi_R(xi, R)) >= 0)
    with pytest.raises(ValueError):
        phi_R(1.0, 0.5)


def test_default_delta0():
    assert default_delta0(3) == 0.1
    assert default_delta0(10) == pytest.approx(1 / 23)


# ------------------------------------------------------------ quantization

def test_x_independent_symbol_is_diagonal():
    K = 20
    op = assemble_bw(lambda ell, xi: xi**2 + 1, [0], K, 0.1)
    assert np.allclose(op.matrix, np.diag(mode_list(K) ** 2 + 1.0))
    op = assemble_bw(lambda ell, xi: 3.5 * xi, [0], K, 0.1)
    assert np.allclose(op.matrix, np.diag(3.5 * mode_list(K)))


def test_single_harmonic_bands():
    K, d, w = 80, 5, 0.3 - 0.7j
    coeffs = {d: w, -d: w.conjugate()}
    op = assemble_bw(lambda ell, xi: coeffs[ell] * xi, coeffs, K, D0)
    for k in mode_list(K):
        for j in mode_list(K):
            e = op.entry(k, j)
            if k - j in (d, -d):
                xi = (k + j) / 2
                expected = chi(k - j, xi, D0) * coeffs[k - j] * xi
                assert e == pytest.approx(expected, rel=1e-14, abs=1e-15)
            else:
                assert e == 0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 12), st.complex_numbers(max_magnitude=2, allow_nan=False)),
                min_size=1, max_size=4),
       st.floats(-2, 2))
def test_real_symbol_gives_skew_generator(harm, c0):
    K = 48
    coeffs = {0: complex(c0)}
    for ell, c in harm:
        coeffs[ell] = c
        coeffs[-ell] = c.conjugate()
    op = assemble_bw(lambda ell, xi: coeffs[ell] * xi, coeffs, K, 0.1)
    X = 1j * op.matrix
    assert np.abs(X + X.conj().T).sum(axis=1).max() < 1e-13
    assert op.band_violation() == 0.0


def test_band_soundness():
    b = generic_bundle()
    for op in (assemble_transport(b, 128), assemble_mourre(b, 4, 16, 128)):
        modes = mode_list(128)
        kk, jj = np.meshgrid(modes, modes, indexing="ij")
        outside = np.abs(kk - jj) >= D0 * np.sqrt(1 + ((kk + jj) / 2) ** 2)
        assert np.all(op.matrix[outside] == 0)
        assert op.band_violation() == 0.0


def test_transport_hermitian_and_diagonal():
    b = generic_bundle()
    T = assemble_transport(b, 128)
    assert T.is_hermitian
    modes = mode_list(128)
    assert np.allclose(np.diag(T.matrix).real, b.constant_part * modes, rtol=1e-13, atol=1e-18)
    Tb = assemble_transport(balanced_bundle(), 128)
    assert np.all(np.diag(Tb.matrix) == 0)


def test_mourre_properties():
    b = generic_bundle()
    K, R = 128, 16
    A = assemble_mourre(b, 4, R, K)
    assert A.hermitian_error() < 1e-14
    modes = mode_list(K)
    band = {abs(k - j) for k in modes for j in modes if A.entry(k, j) != 0}
    assert band <= {b.d}
    for k in modes[modes <= R]:
        assert np.all(A.matrix[A.index(k)] == 0)


def test_mourre_warns_when_degenerate(caplog):
    with caplog.at_level("WARNING"):
        assemble_mourre(generic_bundle(), 2, 40, 64)
    assert "degenerate" in caplog.text
    with pytest.raises(ValueError):
        assemble_mourre(generic_bundle(), 0, 4, 64)


def test_mourre_form_positive_on_high_pair():
    b = balanced_bundle()
    K = 128
    A = assemble_mourre(b, 4, 16, K)
    z = np.zeros(2 * K, dtype=complex)
    z[A.index(90)] = 1.0
    z[A.index(95)] = -1j
    # the sign of the pair's relative phase makes the form positive
    assert A.quad(z) > 0
    z[A.index(95)] = 1j
    assert A.quad(z) < 0


def test_projector_identities():
    delta0 = min(0.1, 1 / (2 * LAM.n + 3))
    b = generic_bundle()
    d = b.d
    coeffs = {d: 0.3 + 0.1j, -d: 0.3 - 0.1j, 2 * d: 0.2j, -2 * d: -0.2j}
    m2 = assemble_bw(lambda ell, xi: coeffs[ell] * xi**2, coeffs, 64, delta0)
    T = assemble_transport(b, 64, delta0)
    top = [m2.index(LAM.m), m2.index(LAM.n)]
    perp = [i for i in range(m2.matrix.shape[0]) if i not in top]
    assert np.all(m2.matrix[np.ix_(top, top)] == 0)
    Toff = T.matrix.copy()
    np.fill_diagonal(Toff, 0)
    assert np.all(Toff[np.ix_(top, top)] == 0)
    assert np.all(T.matrix[np.ix_(top, perp)] == 0)
    assert np.all(T.matrix[np.ix_(perp, top)] == 0)


@given(st.floats(0, 2 * math.pi))
@settings(max_examples=20, deadline=None)
def test_translation_covariance(x0):
    K = 64
    base = {5: 0.4 + 0.2j, -5: 0.4 - 0.2j, 0: 0.1 + 0j}
    shifted = {ell: c * cmath.exp(-1j * ell * x0) for ell, c in base.items()}
    A = assemble_bw(lambda ell, xi: base[ell] * xi, base, K, 0.1).matrix
    B = assemble_bw(lambda ell, xi: shifted[ell] * xi, shifted, K, 0.1).matrix
    D = np.diag(np.exp(1j * mode_list(K) * x0))
    assert np.allclose(B, D.conj() @ A @ D, atol=1e-13)


def test_banded_operator_helpers():
    op = assemble_bw(lambda ell, xi: 1.0 + 0 * xi, [0], 4, 0.1)
    assert isinstance(op, BandedOperator)
    assert op.norm_inf() == 1.0
    z = np.arange(8, dtype=complex)
    assert np.allclose(op @ z, z)
    assert op.quad(z) == pytest.approx(float(np.vdot(z, z).real))


def test_commutator_form_hermitian():
    b = generic_bundle()
    A = assemble_mourre(b, 3, 8, 48)
    T = assemble_transport(b, 48)
    H = commutator_form(A, T, 0.5)
    assert np.allclose(H, H.conj().T)


def test_mourre_gap_check_small():
    b = balanced_bundle()
    rep = mourre_gap_check(b, 4, 16, 96)
    assert rep.window == (32, 96 - 5)
    assert rep.grid_pass
    assert rep.eig_pass
    assert rep.hermitian_A < 1e-14 and rep.hermitian_T < 1e-14
    assert set(rep.to_json()) >= {"kappa", "min_eig", "window", "a1_min", "a2_min", "pass"}
