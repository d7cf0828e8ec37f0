import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kamtorus import (ComponentMismatchError, CoordinateWindow, DomainViolation, FourierField,
                      IndexNorm, MatrixFourierField, NeumannError, WindowMismatchError, compose_shift,
                      jacobian, neumann_inverse, numeric_settings, product, pullback, sigma_norm,
                      truncate_residual)
from kamtorus.fourier import derivative_dot, dumps_field, series_order
from kamtorus.lattice import additive_ball, box_modes, group_sum, lex_order

import oracles

W1 = CoordinateWindow.first(1)
W2 = CoordinateWindow.first(2)


def scalar(window, terms, real=False):
    return FourierField.from_terms(window, terms, real=real)


def as_dict(f):
    return {tuple(k): complex(c[0]) for k, c in zip(f.modes.tolist(), f.coeffs)}


# -- lattice helpers ----------------------------------------------------------------

def test_group_sum_merges_duplicates_in_lex_order():
    modes = np.array([[1, 0], [0, 1], [1, 0], [-1, 2]])
    coeffs = np.array([[1.0], [2.0], [3.0], [4.0]])
    m, c = group_sum(modes, coeffs)
    assert m.tolist() == [[-1, 2], [0, 1], [1, 0]]
    assert c[:, 0].tolist() == [4.0, 2.0, 4.0]


def test_lex_order_is_lexicographic():
    modes = np.array([[2, -1], [0, 5], [0, -3], [-1, 0]])
    assert modes[lex_order(modes)].tolist() == [[-1, 0], [0, -3], [0, 5], [2, -1]]


def test_additive_ball_matches_box_filter():
    w = np.array([1.0, 2.0])
    ball = additive_ball(w, 5.0)
    box = box_modes([5, 2])
    expect = box[np.abs(box) @ w <= 5.0]
    assert sorted(map(tuple, ball.tolist())) == sorted(map(tuple, expect.tolist()))


def test_window_mismatch_is_rejected():
    f = scalar(W1, {(1,): 1.0})
    g = scalar(CoordinateWindow((5,)), {(1,): 1.0})
    with pytest.raises(WindowMismatchError):
        f + g


# -- products -----------------------------------------------------------------------

def test_single_mode_product_adds_phases():
    f = scalar(W2, {(1, 2): 1.0})
    g = scalar(W2, {(-3, 1): 1.0})
    assert as_dict(product(f, g)) == {(-2, 3): 1.0}


def test_two_term_square():
    f = scalar(W1, {(0,): 1.0, (1,): 1.0})
    assert as_dict(product(f, f)) == {(0,): 1.0, (1,): 2.0, (2,): 1.0}


def test_product_with_zero():
    f = scalar(W1, {(0,): 1.0, (3,): 2.0})
    assert product(f, FourierField.zeros(W1)).is_zero()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_product_matches_brute_force_convolution(seed):
    rng = np.random.default_rng(seed)
    a = {tuple(rng.integers(-4, 5, size=2).tolist()): complex(*rng.normal(size=2)) for _ in range(6)}
    b = {tuple(rng.integers(-4, 5, size=2).tolist()): complex(*rng.normal(size=2)) for _ in range(6)}
    got = as_dict(product(scalar(W2, a), scalar(W2, b)))
    expect = oracles.convolve(a, b)
    for k in set(got) | set(expect):
        assert abs(got.get(k, 0) - expect.get(k, 0)) <= 1e-13


# -- derivatives --------------------------------------------------------------------

def test_derivative_dot_examples():
    f = scalar(W1, {(1,): 1.0})
    c = FourierField.constant(W1, 0.7)
    assert as_dict(derivative_dot(f, c)) == {(1,): 0.7j}
    assert as_dict(derivative_dot(f, f)) == {(2,): 1j}
    assert derivative_dot(f, FourierField.zeros(W1)).is_zero()


def test_jacobian_entries():
    phi = FourierField.from_terms(W2, {(1, 0): (1.0, 0.0)})
    D = jacobian(phi)
    assert D.entry(0, 0).coeff((1, 0))[0] == 1j
    for i, j in [(0, 1), (1, 0), (1, 1)]:
        assert D.entry(i, j).is_zero()
    assert jacobian(FourierField.constant(W2, [1.0, 2.0])).is_zero()
    assert jacobian(FourierField.zeros(W2, 2)).is_zero()


# -- composition --------------------------------------------------------------------

def test_compose_identity_shift():
    f = scalar(W1, {(1,): 1.0, (-2,): 0.5})
    assert compose_shift(f, FourierField.zeros(W1)).max_abs_diff(f) == 0.0


def test_compose_constant_shift_is_phase():
    f = scalar(W1, {(1,): 1.0})
    c = 0.3
    g = compose_shift(f, FourierField.constant(W1, c), tol=1e-16)
    assert abs(g.coeff((1,))[0] - np.exp(1j * c)) <= 1e-15
    assert g.n_modes == 1


def test_series_order_example():
    J = series_order(0.3, 1e-12)
    assert J <= 12
    assert oracles.factorial_tail(0.3, 12) == pytest.approx(1.1e-15, rel=0.05)


def test_compose_component_mismatch():
    f = scalar(W2, {(1, 0): 1.0})
    with pytest.raises(ComponentMismatchError):
        compose_shift(f, FourierField.from_terms(W2, {(1, 0): 0.1}))


def test_compose_radius_guard():
    f = scalar(W1, {(50,): 1.0})
    with pytest.raises(DomainViolation):
        compose_shift(f, FourierField.from_terms(W1, {(1,): 1.0}))


def _compose_oracle(f, phi, points=64):
    n = f.window.size
    x = oracles.grid(n, points)
    y = x + oracles.evaluate(phi.modes, phi.coeffs, x).real
    vals = oracles.evaluate(f.modes, f.coeffs, y)
    return oracles.dft_coefficients(vals, n, points)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_compose_matches_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    from kamtorus.lemmas import random_field
    f = random_field(rng, W2, 10, 3, d=2)
    phi = random_field(rng, W2, 4, 2, d=2, scale=0.05)
    g = compose_shift(f, phi, 1e-15)
    ref = _compose_oracle(f, phi)
    assert np.abs(oracles.coefficient_grid(g.modes, g.coeffs, 2) - ref).max() <= 1e-10


def test_compose_preserves_realness():
    rng = np.random.default_rng(3)
    from kamtorus.lemmas import random_field
    f = random_field(rng, W2, 8, 3, d=2)
    phi = random_field(rng, W2, 4, 2, d=2, scale=0.1)
    g = compose_shift(f, phi)
    assert g.real and g.is_real_consistent(1e-12)


# -- Neumann inverse and pullback ---------------------------------------------------

def test_neumann_identity():
    I = MatrixFourierField.identity(W2, 2)
    assert neumann_inverse(I).max_abs_diff(I) == 0.0


def test_neumann_geometric_series():
    M = MatrixFourierField(W1, [[0], [1]], [[[1.0]], [[0.1]]])
    N = neumann_inverse(M, tol=1e-16)
    for k, c in oracles.geometric_inverse_1d(0.1, 20).items():
        assert abs(N.coeff(k)[0, 0] - c) <= 1e-15


def test_neumann_bound_example():
    norm = IndexNorm.l1(W1)
    M = MatrixFourierField(W1, [[0], [1]], [[[1.0]], [[0.1]]])
    N = neumann_inverse(M, 0.0, 1e-15, norm)
    I = MatrixFourierField.identity(W1, 1)
    assert sigma_norm(N - I, 0.0, norm) <= 1 / 9


def test_neumann_divergent():
    M = MatrixFourierField(W1, [[0], [1]], [[[1.0]], [[1.0]]])
    with pytest.raises(NeumannError):
        neumann_inverse(M)


def test_pullback_identity_and_constant():
    v = FourierField.from_terms(W1, {(1,): 1.0, (-1,): 1.0}, real=True)
    assert pullback(v, FourierField.zeros(W1)).max_abs_diff(v) == 0.0
    w = FourierField.constant(W1, 1.3)
    out = pullback(w, FourierField.constant(W1, 0.4))
    assert out.max_abs_diff(w) <= 1e-15


def test_pullback_matches_grid_oracle_1d():
    v = scalar(W1, {(1,): 1.0})
    psi = scalar(W1, {(1,): 0.01})
    got = pullback(v, psi, 1e-15)
    x = oracles.grid(1)
    psi_x = oracles.evaluate(psi.modes, psi.coeffs, x)[:, 0]
    dpsi_x = oracles.evaluate(psi.modes, 1j * psi.coeffs, x)[:, 0]
    vals = oracles.evaluate(v.modes, v.coeffs, x + psi_x[:, None])[:, 0] / (1 + dpsi_x)
    ref = oracles.dft_coefficients(vals[:, None], 1)
    assert np.abs(oracles.coefficient_grid(got.modes, got.coeffs, 1) - ref).max() <= 1e-12


# -- truncation ---------------------------------------------------------------------

def test_truncation_split_and_partition():
    norm = IndexNorm.sup(W2)
    f = scalar(W2, {(1, 0): 1.0, (5, 0): 2.0, (0, 0): 3.0})
    low, high = truncate_residual(f, 3, norm)
    assert set(as_dict(low)) == {(0, 0), (1, 0)}
    assert set(as_dict(high)) == {(5, 0)}
    assert (low + high).max_abs_diff(f) == 0.0
    low, high = truncate_residual(f, 100, norm)
    assert low.max_abs_diff(f) == 0.0 and high.is_zero()


# -- settings and serialization -----------------------------------------------------

def test_numeric_settings_drop_threshold():
    with numeric_settings(drop_threshold=1e-3):
        f = scalar(W1, {(1,): 1e-4, (2,): 1.0})
        assert f.n_modes == 1
    assert scalar(W1, {(1,): 1e-4}).n_modes == 1


def test_json_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    from kamtorus.lemmas import random_field
    f = random_field(rng, W2, 10, 4, d=2)
    path = tmp_path / "f.json"
    f.save(path)
    g = FourierField.load(path)
    assert g.max_abs_diff(f) == 0.0 and g.real
    assert dumps_field(g) == path.read_text()
