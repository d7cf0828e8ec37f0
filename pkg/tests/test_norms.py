import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kamtorus import (ConfigError, CoordinateWindow, FourierField, IndexNorm, make_weight, m_norm,
                      parse_approximation, parse_index_norm, sigma_norm)
from kamtorus.fourier import product
from kamtorus.norms import index_norm

W = CoordinateWindow((0, 1, -1))
W2 = CoordinateWindow.first(2)


def test_index_norm_examples():
    k = W.mode({0: 1, 1: 2, -1: 0})
    assert index_norm(np.zeros(3, int), IndexNorm.eta_weighted(W, 1.0)) == 0
    assert index_norm(k, IndexNorm.eta_weighted(W, 1.0)) == 3
    assert index_norm(k, IndexNorm.sup(W)) == 2


def test_sigma_norm_examples():
    norm = IndexNorm.sup(W2)
    f = FourierField.from_terms(W2, {(3, 1): 2.0})
    assert sigma_norm(f, 0.5, norm) == pytest.approx(2 * math.exp(1.5), rel=1e-15)
    assert sigma_norm(f, 0.5, norm) == pytest.approx(8.96338, abs=1e-5)
    g = FourierField.from_terms(W2, {(2, 0): 1.0})
    assert sigma_norm(g, 0.7, norm) == pytest.approx(math.exp(1.4), rel=1e-15)
    c = FourierField.constant(W2, -4.0)
    for s in (0.0, 1.0, 5.0):
        assert sigma_norm(c, s, norm) == 4.0


def test_m_norm_examples():
    norm = IndexNorm.sup(W2)
    f = FourierField.from_terms(W2, {(2, 1): 3.0})
    assert m_norm(f, make_weight("weight:poly:1"), norm) == pytest.approx(12.0)
    assert m_norm(FourierField.zeros(W2), make_weight("weight:poly:1"), norm) == 0.0
    g = FourierField.from_terms(W2, {(0, 0): 5.0, (1, 0): 1.0, (0, 2): -2.0})
    assert m_norm(g, make_weight("weight:one"), norm) == pytest.approx(
        sigma_norm(g.without_constant(), 0.0, norm))


def test_weight_examples():
    assert make_weight("weight:gevrey:1")(8.0) == pytest.approx(math.exp(math.sqrt(8.0)))
    assert make_weight("weight:gevrey:1")(8.0) == pytest.approx(16.92, abs=0.01)
    assert make_weight("weight:poly:1")(4.0) == pytest.approx(16.0)


@pytest.mark.parametrize("spec", ["weight:gevrey:0.5", "weight:logpow:1.5:2", "weight:poly:2",
                                  "weight:exppow:0.5", "weight:one"])
def test_weights_non_decreasing(spec):
    m = make_weight(spec)
    t = np.linspace(0.0, 1e3, 10_000)
    assert np.all(np.diff(m(t)) >= 0)


@pytest.mark.parametrize("spec", ["id", "poly:2", "exppow:0.5", "logpow:2", "logpow:1.5:2"])
def test_approximation_functions(spec):
    w = parse_approximation(spec)
    w.validate()
    for y in float(w(1.0)) * np.array([2.0, 10.0, 100.0]):
        assert w(w.inverse(y)) == pytest.approx(y, rel=1e-10)
    assert w.inverse(0.5 * float(w(1.0))) == 1.0


def test_bad_specs_rejected():
    for text in ("weight:gevrey:-1", "weight:nope:1", "weight:logpow:1:0.5"):
        with pytest.raises(ConfigError):
            make_weight(text)
    with pytest.raises(ConfigError):
        parse_index_norm("foo:1", W2)


def _rand(seed, n_modes=6):
    rng = np.random.default_rng(seed)
    terms = {tuple(rng.integers(-4, 5, size=2).tolist()): complex(*rng.normal(size=2))
             for _ in range(n_modes)}
    return FourierField.from_terms(W2, terms)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(0, 2**31 - 1), st.floats(0, 2), st.floats(0, 1.5))
def test_sigma_norm_algebra_and_monotonicity(sa, sb, sigma, eta):
    norm = IndexNorm.eta_weighted(W2, eta)
    f, g = _rand(sa), _rand(sb)
    fg = sigma_norm(product(f, g), sigma, norm)
    assert fg <= sigma_norm(f, sigma, norm) * sigma_norm(g, sigma, norm) * (1 + 1e-12)
    assert sigma_norm(f + g, sigma, norm) <= (sigma_norm(f, sigma, norm) + sigma_norm(g, sigma, norm)) * (1 + 1e-12)
    assert sigma_norm(f, sigma, norm) <= sigma_norm(f, sigma + 0.1, norm)


@settings(max_examples=50, deadline=None)
@given(st.integers(-6, 6), st.integers(-6, 6), st.integers(-6, 6), st.integers(-6, 6),
       st.floats(0, 2))
def test_eta_norm_is_subadditive(a, b, c, d, eta):
    norm = IndexNorm.eta_weighted(W2, eta)
    k, l = np.array([a, b]), np.array([c, d])
    assert norm(k + l) <= norm(k) + norm(l) + 1e-12
