import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kamtorus import (ConfigError, CoordinateWindow, EmptyRangeError, FourierField, Frequency,
                      IndexNorm, ResonanceError, appendix_bound_check, delta_max, diophantine_verify,
                      homological_solve, lattice_census, parse_approximation, parse_frequency,
                      sigma_norm)
from kamtorus.nonresonance import GOLDEN, DiophantineSpec, inverse_divisor_max, parse_diophantine

import oracles

W2 = CoordinateWindow.first(2)
GOLD = Frequency(W2, (1.0, GOLDEN))


def test_delta_max_golden_k3():
    Delta, k = delta_max(GOLD, 3, IndexNorm.sup(W2))
    assert tuple(k) == (-3, 2)
    assert 3 / Delta == pytest.approx(0.236068, abs=1e-6)
    assert Delta == pytest.approx(12.7082, abs=1e-4)
    assert Delta == 12.708203932499364


def test_delta_max_matches_oracle():
    for K in (1, 2, 5, 13):
        worst = min(d for _, d in oracles.small_divisors((1.0, GOLDEN), K))
        assert delta_max(GOLD, K, IndexNorm.sup(W2))[0] == pytest.approx(K / worst, rel=1e-14)


def test_resonant_frequency_raises():
    with pytest.raises(ResonanceError) as info:
        delta_max(Frequency(W2, (1.0, 1.0)), 1, IndexNorm.sup(W2))
    assert info.value.k in {(1, -1), (-1, 1)}


def test_empty_range():
    norm = IndexNorm.eta_weighted(CoordinateWindow((3,)), 1.0)
    with pytest.raises(EmptyRangeError):
        delta_max(Frequency(CoordinateWindow((3,)), (1.0,)), 2, norm)


def test_diophantine_golden_passes():
    rep = diophantine_verify(GOLD, parse_diophantine("ratio:id:0.3333333333333333"), 200)
    assert rep.passed and rep.worst_margin >= 1


def test_rational_frequency_fails():
    rep = diophantine_verify(Frequency(W2, (1.0, 0.5)), parse_diophantine("ratio:id:0.1"), 10)
    assert not rep.passed and rep.worst_k == (1, -2)
    rep = diophantine_verify(Frequency(W2, (1.0, 1.0)), parse_diophantine("ratio:poly:1:0.333"), 10)
    assert not rep.passed and rep.worst_k == (1, -1)


def test_product_spec_single_entry():
    window = CoordinateWindow((0, 2, -3))
    spec = DiophantineSpec("product", gamma=0.5, mu=2.0)
    norm = IndexNorm.sup(window)
    for label in window.labels:
        k = window.mode({label: 1})[None, :]
        expect = 0.5 / (1 + max(1, abs(label)) ** 2)
        assert spec.lower_bounds(k, norm)[0] == pytest.approx(expect, rel=1e-15)


def test_parse_frequency_tokens(tmp_path):
    assert parse_frequency("1,phi").values == (1.0, GOLDEN)
    p = tmp_path / "omega.txt"
    p.write_text("1 0.5\n")
    assert parse_frequency(str(p)).values == (1.0, 0.5)
    with pytest.raises(ConfigError):
        parse_frequency("1,x")


def test_homological_example():
    f = FourierField.from_terms(W2, {(1, -1): 1.0})
    g = homological_solve(f, GOLD, 2, IndexNorm.sup(W2))
    assert g.coeff((1, -1))[0] == pytest.approx(1.618034j, abs=1e-6)
    assert g.coeff((1, -1))[0] == pytest.approx(1 / (1j * (1 - GOLDEN)), rel=1e-15)
    high = FourierField.from_terms(W2, {(5, 0): 1.0})
    assert homological_solve(high, GOLD, 2, IndexNorm.sup(W2)).is_zero()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 2.0), st.integers(1, 6))
def test_homological_solves_truncated_equation(seed, sigma, K):
    from kamtorus.lemmas import random_field
    rng = np.random.default_rng(seed)
    norm = IndexNorm.eta_weighted(W2, 0.5)
    omega = Frequency(W2, (1.0, float(rng.uniform(1.1, 1.9))))
    f = random_field(rng, W2, 20, 8)
    g = homological_solve(f, omega, K, norm)
    low = f.restrict((norm.values(f.modes) <= K) & np.any(f.modes != 0, axis=1))
    assert g.directional_derivative(omega.array).max_abs_diff(low) <= 1e-12 * sigma_norm(f, 0, norm)
    assert sigma_norm(g, sigma, norm) <= inverse_divisor_max(omega, K, norm) * sigma_norm(f, sigma, norm) * (1 + 1e-12)


def test_appendix_examples():
    rep = appendix_bound_check(1.0, 2.0, 4, CoordinateWindow((0,)))
    assert rep.sup_product == 10.0
    Cs = [appendix_bound_check(1.0, 2.0, N, CoordinateWindow.symmetric(3)).fitted_C for N in (5, 10, 20)]
    assert Cs == pytest.approx([0.8034142170474436, 0.9404031245138992, 1.0819860844819411], rel=1e-12)


def test_appendix_sup_matches_enumeration():
    window = CoordinateWindow.symmetric(1)
    for N in (3, 5, 8):
        rep = appendix_bound_check(1.0, 2.0, N, window)
        assert rep.sup_product == oracles.appendix_sup(window.brackets, 1.0, 2.0, N)


def test_census_examples():
    w = parse_approximation("id")
    assert lattice_census(1, w, CoordinateWindow((0,))).count == 0
    rep = lattice_census(3, w, CoordinateWindow((0,)))
    assert rep.count == 2 and rep.holds
