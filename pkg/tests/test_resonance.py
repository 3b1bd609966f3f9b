import math
from fractions import Fraction
from itertools import product

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from wwcascade.dispersion import Vorticity, omega_big, omega_mpf
from wwcascade.exact import RadicalSum, Sign, radical_sum_sign
from wwcascade.resonance import (Classification, CertificationError, GoodSet, ResonanceError,
                                 c3_constant, certify_good_set, classify_tuple, construct_family,
                                 construct_good_sets, construction_case, family_member,
                                 four_wave_classify, induced_gamma_sq, sign_polynomial,
                                 smallest_accepted, three_wave_min, two_adic_valuation,
                                 two_wave_gap_scan, two_wave_partner, upsilon_enclosure,
                                 upsilon_proxy)

V10 = Vorticity(Fraction(1, 10))
V256 = Vorticity(Fraction(25, 6))
LAM = GoodSet.certified(-2, 3)


# ------------------------------------------------------------ good sets

def test_certify_reference_example():
    cert = certify_good_set(-2, 3, V10)
    assert cert.ok
    assert cert.gamma_sq == Fraction(1, 10)
    assert Fraction(3 * 3 - 2, 8) == Fraction(7, 8)
    assert Fraction(3 * -2 + 3, 8) == Fraction(-3, 8)
    assert sign_polynomial(Fraction(-2, 3)) > 0
    assert cert.proxy_upsilon and cert.proxy_consistent


def test_certify_g4_failure():
    cert = certify_good_set(-2, 4)
    assert cert.failures() == ["G4"]


def test_certify_g3_failure():
    cert = certify_good_set(-1, 3)
    assert "G3" in cert.failures()
    # independent evaluation of p(-1/3)
    lam = Fraction(-1, 3)
    p = 2 * lam**6 - 25 * lam**5 + 50 * lam**4 + 8 * lam**3 - 4 * lam**2 + lam
    assert p <= 0
    assert cert.items["G3"].witness.endswith(str(p))


def test_certify_g1_wrong_gamma():
    cert = certify_good_set(-2, 3, Vorticity(Fraction(1, 9)))
    assert "G1" in cert.failures()


def test_certified_raises():
    with pytest.raises(CertificationError):
        GoodSet.certified(-2, 4)
    with pytest.raises(ValueError):
        certify_good_set(2, 3)


def test_upsilon_enclosure_window():
    enc = upsilon_enclosure(64)
    assert Fraction(2493, 1000) < enc.upsilon_lo <= enc.upsilon_hi < Fraction(2495, 1000)
    assert sign_polynomial(enc.lam_lo) * sign_polynomial(enc.lam_hi) <= 0


@settings(max_examples=300)
@given(st.integers(1, 400), st.integers(1, 1000))
def test_proxy_consistency(m_abs, n):
    m = -m_abs
    assume(m + n > 0)
    cert = certify_good_set(m, n)
    assert cert.proxy_consistent
    assert upsilon_proxy(m, n) == (sign_polynomial(Fraction(m, n)) > 0)


def test_family_examples():
    assert construction_case(1, 10) == 4
    assert family_member(1, 10, 1) == (-2, 3)
    assert construction_case(3, 4) == 3
    assert family_member(3, 4, 3) == (-99, 117)
    assert induced_gamma_sq(-99, 117) == Fraction(3, 4)
    report = construct_family(3, 4, [3, 5, 7])
    assert [a for a, _ in report.accepted] == [3, 5, 7]
    assert not report.skipped
    assert construct_good_sets(1, 10, [1])[0] == GoodSet(-2, 3, Fraction(1, 10), None)


def test_family_cases_cover_all():
    cases = {construction_case(p, q) for p, q in [(1, 10), (3, 4), (5, 3), (4, 3), (8, 3)]}
    assert cases == {1, 2, 3, 4}
    assert two_adic_valuation(8) == 3 and two_adic_valuation(12) == 2 and two_adic_valuation(5) == 0


def test_family_input_errors():
    with pytest.raises(ValueError):
        construct_family(2, 4, [1])
    with pytest.raises(ValueError):
        construct_family(1, 10, [2])
    with pytest.raises(ValueError):
        construct_family(0, 10, [1])


coprime_pairs = st.tuples(st.integers(1, 40), st.integers(1, 40)).filter(lambda t: math.gcd(*t) == 1)


@settings(max_examples=60, deadline=None)
@given(coprime_pairs, st.lists(st.integers(0, 15).map(lambda k: 2 * k + 1), min_size=1, max_size=4, unique=True))
def test_constructed_sets_certify(pq, a_list):
    p, q = pq
    for a, g in construct_family(p, q, a_list).accepted:
        assert g.gamma_sq == Fraction(p, q)
        assert certify_good_set(g.m, g.n, Vorticity(Fraction(p, q))).ok
        assert omega_big(g.m, g.vorticity) == omega_big(g.n, g.vorticity)


@pytest.mark.parametrize("pq", [(1, 10), (3, 4), (5, 3), (4, 3), (8, 3)])
def test_ratio_tends_to_one(pq):
    ratios = [abs(g.n / g.m + 1) for _, g in smallest_accepted(*pq, 8).accepted]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))


# ------------------------------------------------------------ 2 waves

def test_partner_examples():
    assert two_wave_partner(3, V10) == -2
    assert two_wave_partner(3, Vorticity(1)) is None
    # brute force over m in [-10^6, -1]
    m = -np.arange(1, 10**6 + 1, dtype=np.int64)
    hits = m[((m + 3) ** 2 == 2 * (3 - m)) & (m + 3 > 0)]
    assert hits.size == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 300), st.fractions(min_value=Fraction(1, 50), max_value=20, max_denominator=60))
def test_partner_uniqueness(n, g2):
    assume(g2 > 0)
    v = Vorticity(g2)
    m = two_wave_partner(n, v)
    found = [k for k in range(-5000, 0) if k + n > 0 and (k + n) ** 2 == 2 * g2 * (n - k)]
    assert found == ([] if m is None else [m])
    if m is not None:
        assert certify_good_set(m, n, v).items["G1"].passed
    # only n itself among positive indices
    for k in range(1, 60):
        if k != n:
            assert omega_big(k, v) != omega_big(n, v)


def test_gap_scan():
    report = two_wave_gap_scan(V10, 50)
    assert report.lower_bound > 0
    assert (-2, 3) in report.resonant_pairs
    assert report.witness[0] != report.witness[1]
    # independent check of the bound on all non-resonant pairs
    with mpmath.workprec(200):
        vals, resonant = [], []
        for j in range(-50, 51):
            for k in range(j + 1, 51):
                if j and k:
                    gap = abs(omega_mpf(j, V10, 200) - omega_mpf(k, V10, 200))
                    if gap < mpmath.mpf(10) ** -50:
                        resonant.append((j, k))
                    else:
                        vals.append(gap * (abs(j) ** 1.5 + abs(k) ** 1.5))
        best = min(vals)
    assert sorted(resonant) == sorted(report.resonant_pairs)
    assert report.lower_bound <= float(best) <= report.lower_bound * (1 + 1e-9)


# ------------------------------------------------------------ 3 waves

def test_c3_values():
    v = V10
    assert c3_constant(v) == omega_big(1, v) * 2 - omega_big(2, v)
    # gamma -> 0 limit of the constant is 2 - sqrt(2)
    g = Fraction(1, 10**30)
    assert abs(float(c3_constant(Vorticity(g))) - (2 - math.sqrt(2))) < 1e-14
    assert radical_sum_sign(c3_constant(V256)).sign is Sign.POSITIVE


def brute_three_wave(v, J):
    idx = [j for j in range(-J, J + 1) if j]
    best = math.inf
    with mpmath.workprec(200):
        om = {j: omega_mpf(j, v, 200) for j in idx}
        for j1, j2 in product(idx, idx):
            for s1, s2, s3 in product((1, -1), repeat=3):
                rest = -(s1 * j1 + s2 * j2)
                if rest % s3 == 0:
                    j3 = rest * s3
                    if j3 and abs(j3) <= J:
                        best = min(best, abs(s1 * om[j1] + s2 * om[j2] + s3 * om[j3]))
    return float(best)


@pytest.mark.parametrize("g2", [Fraction(1, 10), Fraction(25, 6), Fraction(7, 3)])
def test_three_wave_against_brute_force(g2):
    v = Vorticity(g2)
    report = three_wave_min(v, 12)
    assert report.ok and not report.undecided
    assert report.minimum == pytest.approx(brute_three_wave(v, 12), rel=1e-13)
    assert report.minimum >= report.c3 * (1 - 1e-15)


def test_three_wave_argmin_is_c3_triple():
    report = three_wave_min(V10, 20)
    idx, sg = report.argmin
    value = sum(s * omega_mpf(j, V10) for j, s in zip(idx, sg))
    assert abs(float(value)) == pytest.approx(report.c3, rel=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.fractions(min_value=Fraction(1, 40), max_value=30, max_denominator=40), st.integers(2, 30))
def test_three_wave_above_c3(g2, J):
    assume(g2 > 0)
    assert three_wave_min(Vorticity(g2), J).ok


def test_three_wave_parallel_matches_serial():
    a = three_wave_min(V256, 30, jobs=1)
    b = three_wave_min(V256, 30, jobs=2)
    assert a.to_json() == b.to_json()


# ------------------------------------------------------------ 4 waves

def test_non_integrable_witness():
    res = classify_tuple((-1, -1, 4, -6), (-1, -1, 1, 1), V256)
    assert res.classification is Classification.NON_INTEGRABLE
    assert res.value.is_zero()
    for j in (-1, 4, -6):
        assert set(omega_big(j, V256).terms) == {6}


def test_integrable_pattern_example():
    for ell in (1, 7, -40, 123):
        res = classify_tuple((-2, -2, ell, ell), (1, -1, 1, -1), V10)
        assert res.classification is Classification.INTEGRABLE


def test_momentum_rejected():
    with pytest.raises(ValueError):
        classify_tuple((1, 2, 3, 4), (1, 1, 1, 1), V10)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-60, 60).filter(bool), min_size=3, max_size=3),
       st.lists(st.sampled_from((1, -1)), min_size=4, max_size=4),
       st.permutations(range(4)))
def test_classification_covariance(js, signs, perm):
    rest = -sum(j * s for j, s in zip(js, signs[:3]))
    assume(rest != 0 and rest % signs[3] == 0)
    idx = tuple(js) + (rest * signs[3],)
    base = classify_tuple(idx, signs, V256)
    permuted = classify_tuple([idx[i] for i in perm], [signs[i] for i in perm], V256)
    flipped = classify_tuple(idx, [-s for s in signs], V256)
    assert permuted.classification is base.classification
    assert permuted.value == base.value
    assert flipped.classification is base.classification
    assert flipped.value == -base.value


def _canon(indices, signs):
    return tuple(sorted(zip(indices, signs)))


def brute_layer(lam, layer, J):
    v = lam.vorticity
    members = {lam.m, lam.n}
    idx = [j for j in range(-J, J + 1) if j]
    found = set()
    with mpmath.workprec(200):
        om = {j: omega_mpf(j, v, 200) for j in idx}
        for j1, j2, j3 in product(idx, repeat=3):
            for signs in product((1, -1), repeat=4):
                rest = -(signs[0] * j1 + signs[1] * j2 + signs[2] * j3)
                j4 = rest * signs[3]
                if not j4 or abs(j4) > J:
                    continue
                tup = (j1, j2, j3, j4)
                if sum(j not in members for j in tup) != layer:
                    continue
                if abs(sum(s * om[j] for j, s in zip(tup, signs))) < mpmath.mpf(10) ** -40:
                    found.add(_canon(tup, signs))
    return found


@pytest.mark.parametrize("layer", [0, 1, 2])
def test_layers_against_brute_force(layer):
    J = 9
    report = four_wave_classify(LAM, layer, J)
    got = {_canon(r.indices, r.signs) for r in report.resonances}
    assert got == brute_layer(LAM, layer, J)
    assert report.ok and not report.undecided


def test_layer1_empty_and_layer2_gap():
    assert four_wave_classify(LAM, 1, 200).resonances == []
    rep = four_wave_classify(LAM, 2, 200)
    assert rep.ok and rep.gap_bound > 0
    assert all(r.classification is Classification.INTEGRABLE for r in rep.resonances)


def test_four_wave_rejects_non_good_input():
    # gamma^2 = 25/6 comes from {-1, 11}; the witness family lives in layer 2 of that set
    lam = GoodSet(-1, 11, Fraction(25, 6), None)
    with pytest.raises(ResonanceError):
        four_wave_classify(lam, 2, 20)


def test_four_wave_argument_errors():
    with pytest.raises(ValueError):
        four_wave_classify(LAM, 3, 10)
    with pytest.raises(ValueError):
        four_wave_classify(LAM, 0, 2)
