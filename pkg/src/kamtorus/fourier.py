"""Finitely supported Fourier series on a coordinate window.

Coefficients live in dense arrays aligned with a lexicographically sorted,
duplicate-free ``modes`` array.  Vector fields carry ``(N, d)`` coefficients,
matrix fields ``(N, d, d)``.  All operations return new objects; inputs are
never mutated.
"""
from __future__ import annotations

import contextlib
import json
import math
from contextvars import ContextVar
from pathlib import Path

import numpy as np

from .errors import (ComponentMismatchError, DomainViolation, NeumannError,
                     ResourceError)
from .lattice import CoordinateWindow, as_modes, group_sum, require_same_window
from .norms import IndexNorm, sigma_norm

_drop_threshold: ContextVar[float] = ContextVar("drop_threshold", default=1e-300)
_mode_budget: ContextVar[int] = ContextVar("mode_budget", default=1_000_000)

# pair arrays beyond this size are processed in blocks
_BLOCK_PAIRS = 2_000_000


@contextlib.contextmanager
def numeric_settings(drop_threshold: float | None = None, mode_budget: int | None = None):
    """Temporarily override the coefficient drop threshold and mode budget."""
    tokens = []
    if drop_threshold is not None:
        tokens.append((_drop_threshold, _drop_threshold.set(float(drop_threshold))))
    if mode_budget is not None:
        tokens.append((_mode_budget, _mode_budget.set(int(mode_budget))))
    try:
        yield
    finally:
        for var, tok in reversed(tokens):
            var.reset(tok)


def drop_threshold() -> float:
    return _drop_threshold.get()


def _mode_magnitude(coeffs: np.ndarray) -> np.ndarray:
    a = np.abs(coeffs)
    if a.ndim == 1:
        return a
    if a.ndim == 2:
        return a.max(axis=1)
    return a.sum(axis=2).max(axis=1)


def _canonical(modes: np.ndarray, coeffs: np.ndarray):
    modes, coeffs = group_sum(modes, coeffs)
    if len(modes) == 0:
        return modes, coeffs
    keep = np.abs(coeffs).reshape(len(coeffs), -1).max(axis=1) >= _drop_threshold.get()
    modes, coeffs = modes[keep], coeffs[keep]
    if len(modes) > _mode_budget.get():
        raise ResourceError(f"result has {len(modes)} modes, budget is {_mode_budget.get()}")
    return modes, coeffs


class _Series:
    """Shared storage and linear algebra for scalar/vector/matrix series."""

    __slots__ = ("window", "modes", "coeffs", "real")

    def __init__(self, window: CoordinateWindow, modes, coeffs, real: bool = False,
                 _canonical_input: bool = False):
        modes = as_modes(np.asarray(modes, dtype=np.int64).reshape(-1, window.size), window.size)
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape[0] != modes.shape[0]:
            raise ValueError("modes and coefficients disagree in length")
        if not _canonical_input:
            modes, coeffs = _canonical(modes, coeffs)
        self.window = window
        self.modes = modes
        self.coeffs = coeffs
        self.real = bool(real)
        modes.setflags(write=False)
        coeffs.setflags(write=False)

    # subclasses define the coefficient shape
    def _shape(self) -> tuple:
        raise NotImplementedError

    def _like(self, modes, coeffs, real, canonical=False):
        obj = object.__new__(type(self))
        _Series.__init__(obj, self.window, modes, coeffs, real, _canonical_input=canonical)
        return obj

    def __len__(self):
        return len(self.modes)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def is_zero(self) -> bool:
        return len(self.modes) == 0

    def coeff(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64).reshape(-1)
        hit = np.flatnonzero(np.all(self.modes == k, axis=1))
        if len(hit):
            return self.coeffs[hit[0]].copy()
        return np.zeros(self._shape(), dtype=complex)

    def constant_term(self) -> np.ndarray:
        return self.coeff(np.zeros(self.window.size, dtype=np.int64))

    def _binary(self, other, sign):
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        require_same_window(self.window, other.window)
        if self._shape() != other._shape():
            raise ComponentMismatchError(f"shapes {self._shape()} and {other._shape()} differ")
        modes = np.concatenate([self.modes, other.modes])
        coeffs = np.concatenate([self.coeffs, sign * other.coeffs])
        return self._like(modes, coeffs, self.real and other.real)

    def __add__(self, other):
        return self._binary(other, 1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __neg__(self):
        return self._like(self.modes, -self.coeffs, self.real, canonical=True)

    def scale(self, c):
        c = complex(c)
        real = self.real and c.imag == 0
        return self._like(self.modes, self.coeffs * c, real)

    def __mul__(self, c):
        if isinstance(c, (int, float, complex, np.number)):
            return self.scale(c)
        return NotImplemented

    __rmul__ = __mul__

    def restrict(self, mask) -> "_Series":
        mask = np.asarray(mask, dtype=bool)
        return self._like(self.modes[mask], self.coeffs[mask], self.real, canonical=True)

    def without_constant(self):
        return self.restrict(np.any(self.modes != 0, axis=1))

    def reflect_conj(self):
        """The series of conj(u(x)): coefficient conj(u(-k)) at k."""
        return self._like(-self.modes, np.conj(self.coeffs), self.real)

    def realness_defect(self) -> float:
        """max_k |u(k) - conj(u(-k))|, zero for real-valued fields."""
        diff = self._binary(self.reflect_conj(), -1.0)
        return float(np.abs(diff.coeffs).max(initial=0.0))

    def is_real_consistent(self, rtol: float = 1e-12) -> bool:
        scale = float(np.abs(self.coeffs).max(initial=0.0))
        return self.realness_defect() <= rtol * max(scale, 1e-300)

    def max_abs_diff(self, other) -> float:
        return float(np.abs(self._binary(other, -1.0).coeffs).max(initial=0.0))

    def evaluate(self, x) -> np.ndarray:
        """Point values at ``x`` of shape (P, n); returns (P, *coeff_shape)."""
        x = np.atleast_2d(np.asarray(x))
        if self.is_zero():
            return np.zeros((x.shape[0],) + self._shape(), dtype=complex)
        phase = np.exp(1j * (x @ self.modes.T.astype(float)))
        flat = self.coeffs.reshape(len(self.modes), -1)
        out = phase @ flat
        return out.reshape((x.shape[0],) + self._shape())

    def __repr__(self):
        return (f"{type(self).__name__}(window={self.window.labels}, shape={self._shape()}, "
                f"modes={len(self.modes)}, real={self.real})")


class FourierField(_Series):
    """Vector-valued (d components) finitely supported Fourier series."""

    __slots__ = ()

    def __init__(self, window, modes, coeffs, real: bool = False, _canonical_input: bool = False):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim == 1:
            coeffs = coeffs.reshape(-1, 1)
        if coeffs.ndim != 2 or coeffs.shape[1] < 1:
            raise ValueError("FourierField coefficients must have shape (N, d)")
        super().__init__(window, modes, coeffs, real, _canonical_input)
        self._d = coeffs.shape[1]

    __slots__ = ("_d",)

    def _like(self, modes, coeffs, real, canonical=False):
        obj = object.__new__(FourierField)
        _Series.__init__(obj, self.window, modes, coeffs, real, _canonical_input=canonical)
        obj._d = self._d
        return obj

    def _shape(self):
        return (self._d,)

    @property
    def components(self) -> int:
        return self._d

    @classmethod
    def zeros(cls, window, d: int = 1) -> "FourierField":
        return cls(window, np.zeros((0, window.size), np.int64), np.zeros((0, d)), real=True)

    @classmethod
    def constant(cls, window, value) -> "FourierField":
        value = np.atleast_1d(np.asarray(value, dtype=complex))
        return cls(window, np.zeros((1, window.size), np.int64), value.reshape(1, -1),
                   real=bool(np.all(value.imag == 0)))

    @classmethod
    def from_terms(cls, window, terms, d: int | None = None, real: bool = False) -> "FourierField":
        """Build from ``{k: coeff}`` (or pairs); k is a tuple aligned with the window."""
        items = list(terms.items()) if isinstance(terms, dict) else list(terms)
        if not items:
            return cls.zeros(window, d or 1)
        modes = np.array([np.asarray(k, dtype=np.int64).reshape(-1) for k, _ in items])
        coeffs = np.array([np.atleast_1d(np.asarray(c, dtype=complex)) for _, c in items])
        if d is not None and coeffs.shape[1] == 1 and d > 1:
            coeffs = np.repeat(coeffs, d, axis=1)
        return cls(window, modes, coeffs, real=real)

    def component(self, i: int) -> "FourierField":
        return FourierField(self.window, self.modes, self.coeffs[:, i:i + 1], self.real)

    @staticmethod
    def stack(fields) -> "FourierField":
        fields = list(fields)
        window = require_same_window(*(f.window for f in fields))
        modes = np.concatenate([f.modes for f in fields])
        blocks = []
        offset = 0
        total = sum(f.components for f in fields)
        for f in fields:
            block = np.zeros((len(f.modes), total), dtype=complex)
            block[:, offset:offset + f.components] = f.coeffs
            blocks.append(block)
            offset += f.components
        return FourierField(window, modes, np.concatenate(blocks) if blocks else np.zeros((0, total)),
                            real=all(f.real for f in fields))

    def directional_derivative(self, omega) -> "FourierField":
        """omega . d/dx applied componentwise: coefficient i (k . omega) u(k)."""
        omega = np.asarray(omega, dtype=float)
        factor = 1j * (self.modes @ omega)
        return self._like(self.modes, self.coeffs * factor[:, None], self.real)

    # -- serialization --------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "coords": list(self.window.labels),
            "components": self.components,
            "real": self.real,
            "modes": [
                {"k": [int(v) for v in k],
                 "coeff": [[float(f"{c.real:.17g}"), float(f"{c.imag:.17g}")] for c in row]}
                for k, row in zip(self.modes, self.coeffs)
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "FourierField":
        window = CoordinateWindow(tuple(data["coords"]))
        d = int(data["components"])
        entries = data.get("modes", [])
        modes = np.array([e["k"] for e in entries], dtype=np.int64).reshape(-1, window.size)
        coeffs = np.array([[complex(re, im) for re, im in e["coeff"]] for e in entries],
                          dtype=complex).reshape(-1, d)
        if coeffs.shape[1] != d:
            raise ComponentMismatchError("coefficient length does not match 'components'")
        field = cls(window, modes, coeffs, real=bool(data.get("real", False)))
        if field.real and not field.is_real_consistent(1e-12):
            raise ValueError("field flagged real but coefficients are not conjugate-symmetric")
        return field

    def save(self, path) -> None:
        Path(path).write_text(dumps_field(self), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FourierField":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def dumps_field(field: FourierField) -> str:
    """JSON text with 17 significant digits per coefficient part."""
    d = field.to_json_dict()
    lines = [
        "{",
        f'  "coords": {json.dumps(d["coords"])},',
        f'  "components": {d["components"]},',
        f'  "real": {json.dumps(d["real"])},',
        '  "modes": [',
    ]
    rows = []
    for k, row in zip(field.modes, field.coeffs):
        pairs = ", ".join(f"[{c.real:.17g}, {c.imag:.17g}]" for c in row)
        rows.append(f'    {{"k": {json.dumps([int(v) for v in k])}, "coeff": [{pairs}]}}')
    lines.append(",\n".join(rows))
    lines.append("  ]")
    lines.append("}")
    return "\n".join(line for line in lines if line != "") + "\n"


class MatrixFourierField(_Series):
    """Square matrix of scalar series sharing one window, stored as (N, d, d)."""

    __slots__ = ()

    def __init__(self, window, modes, coeffs, real: bool = False, _canonical_input: bool = False):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim != 3:
            raise ValueError("MatrixFourierField coefficients must have shape (N, r, c)")
        super().__init__(window, modes, coeffs, real, _canonical_input)
        self._rc = coeffs.shape[1:]

    __slots__ = ("_rc",)

    def _like(self, modes, coeffs, real, canonical=False):
        obj = object.__new__(MatrixFourierField)
        _Series.__init__(obj, self.window, modes, coeffs, real, _canonical_input=canonical)
        obj._rc = self._rc
        return obj

    def _shape(self):
        return tuple(self._rc)

    @property
    def rows(self) -> int:
        return self._rc[0]

    @property
    def cols(self) -> int:
        return self._rc[1]

    @classmethod
    def identity(cls, window, d: int) -> "MatrixFourierField":
        return cls(window, np.zeros((1, window.size), np.int64), np.eye(d)[None].astype(complex), real=True)

    @classmethod
    def zeros(cls, window, d: int) -> "MatrixFourierField":
        return cls(window, np.zeros((0, window.size), np.int64), np.zeros((0, d, d)), real=True)

    def entry(self, i: int, j: int) -> FourierField:
        return FourierField(self.window, self.modes, self.coeffs[:, i, j:j + 1], self.real)

    def __matmul__(self, other):
        if isinstance(other, MatrixFourierField):
            return matmul(self, other)
        if isinstance(other, FourierField):
            return matvec(self, other)
        return NotImplemented


# -- convolution core ---------------------------------------------------------

def _convolve(ma, ca, mb, cb, combine):
    """Sum over pairs (a, b) of combine(ca, cb) placed at mode a + b."""
    n = ma.shape[1]
    if len(ma) == 0 or len(mb) == 0:
        shape = combine(ca[:0], cb[:0]).shape[2:]
        return np.zeros((0, n), np.int64), np.zeros((0,) + shape, complex)
    block = max(1, _BLOCK_PAIRS // len(mb))
    parts_m, parts_c = [], []
    for start in range(0, len(ma), block):
        sa, sc = ma[start:start + block], ca[start:start + block]
        modes = (sa[:, None, :] + mb[None, :, :]).reshape(-1, n)
        coeffs = combine(sc, cb)
        coeffs = coeffs.reshape((modes.shape[0],) + coeffs.shape[2:])
        gm, gc = group_sum(modes, coeffs)
        parts_m.append(gm)
        parts_c.append(gc)
    if len(parts_m) == 1:
        return parts_m[0], parts_c[0]
    return group_sum(np.concatenate(parts_m), np.concatenate(parts_c))


def _scalar_vector(ca, cb):
    # ca (A,), cb (B, d) -> (A, B, d)
    return ca[:, None, None] * cb[None, :, :]


def _vector_vector(ca, cb):
    # componentwise product of same-length vectors
    return ca[:, None, :] * cb[None, :, :]


def _matrix_matrix(ca, cb):
    return np.einsum("ail,blj->abij", ca, cb)


def _matrix_vector(ca, cb):
    return np.einsum("ail,bl->abi", ca, cb)


def product(f: FourierField, g: FourierField) -> FourierField:
    """Exact product of two series (scalar*scalar, scalar*vector or componentwise)."""
    require_same_window(f.window, g.window)
    if f.components == 1 and g.components >= 1:
        modes, coeffs = _convolve(f.modes, f.coeffs[:, 0], g.modes, g.coeffs, _scalar_vector)
    elif g.components == 1:
        modes, coeffs = _convolve(g.modes, g.coeffs[:, 0], f.modes, f.coeffs, _scalar_vector)
    elif f.components == g.components:
        modes, coeffs = _convolve(f.modes, f.coeffs, g.modes, g.coeffs, _vector_vector)
    else:
        raise ComponentMismatchError(f"cannot multiply {f.components} by {g.components} components")
    return FourierField(f.window, modes, coeffs, real=f.real and g.real)


def matmul(A: MatrixFourierField, B: MatrixFourierField) -> MatrixFourierField:
    require_same_window(A.window, B.window)
    if A.cols != B.rows:
        raise ComponentMismatchError("matrix shapes do not chain")
    modes, coeffs = _convolve(A.modes, A.coeffs, B.modes, B.coeffs, _matrix_matrix)
    return MatrixFourierField(A.window, modes, coeffs, real=A.real and B.real)


def matvec(A: MatrixFourierField, v: FourierField) -> FourierField:
    require_same_window(A.window, v.window)
    if A.cols != v.components:
        raise ComponentMismatchError(f"matrix has {A.cols} columns, vector {v.components} components")
    modes, coeffs = _convolve(A.modes, A.coeffs, v.modes, v.coeffs, _matrix_vector)
    return FourierField(A.window, modes, coeffs, real=A.real and v.real)


def matvec_constant(A: MatrixFourierField, vec) -> FourierField:
    """A(x) . c for a constant vector c."""
    vec = np.asarray(vec, dtype=complex)
    coeffs = np.einsum("nij,j->ni", A.coeffs, vec)
    return FourierField(A.window, A.modes, coeffs, real=A.real and bool(np.all(vec.imag == 0)))


def derivative_dot(f: FourierField, phi: FourierField) -> FourierField:
    """Df . phi = i sum_{k,l} (k . phi(l)) f(k) e^{i(k+l)x} for scalar f."""
    require_same_window(f.window, phi.window)
    if f.components != 1:
        raise ComponentMismatchError("derivative_dot expects a scalar f")
    if phi.components != f.window.size:
        raise ComponentMismatchError(
            f"direction field has {phi.components} components, window has {f.window.size}")
    kf = f.modes.astype(float)

    def combine(ca, cb):
        # ca carries (f(k), k_1..k_n) packed as columns
        fk, k = ca[:, 0], ca[:, 1:]
        return (1j * fk[:, None] * np.einsum("aj,bj->ab", k, cb))[:, :, None]

    packed = np.concatenate([f.coeffs, kf.astype(complex)], axis=1)
    modes, coeffs = _convolve(f.modes, packed, phi.modes, phi.coeffs, combine)
    return FourierField(f.window, modes, coeffs, real=f.real and phi.real)


def jacobian(phi: FourierField) -> MatrixFourierField:
    """Entry (i, j) = d phi_i / d x_j, coefficient i k_j phi_i(k)."""
    coeffs = 1j * phi.coeffs[:, :, None] * phi.modes[:, None, :].astype(float)
    return MatrixFourierField(phi.window, phi.modes, coeffs, real=phi.real)


def truncate_residual(f, K: float, norm: IndexNorm):
    """Split f into modes with index norm <= K and > K; k = 0 stays in the first part."""
    values = norm.values(f.modes)
    low = values <= K
    low |= ~np.any(f.modes != 0, axis=1)
    return f.restrict(low), f.restrict(~low)


# -- pruning and series helpers -----------------------------------------------

def _symmetrize(modes, coeffs):
    m = np.concatenate([modes, -modes])
    c = np.concatenate([coeffs, np.conj(coeffs)])
    gm, gc = group_sum(m, c)
    return gm, 0.5 * gc


def _prune(modes, coeffs, log_weights, budget: float, real: bool):
    """Drop the smallest modes while their weighted mass stays within ``budget``.

    Dropping is by a magnitude threshold, so conjugate pairs of a real series
    (equal magnitudes after symmetrization) are dropped together.
    """
    if real and len(modes):
        modes, coeffs = _symmetrize(modes, coeffs)
    if budget <= 0 or len(modes) < 2:
        return modes, coeffs
    with np.errstate(divide="ignore", over="ignore"):
        mass = np.exp(np.log(_mode_magnitude(coeffs)) + log_weights(modes))
    order = np.argsort(mass, kind="stable")
    csum = np.cumsum(mass[order])
    n_drop = int(np.searchsorted(csum, budget, side="right"))
    if n_drop == 0:
        return modes, coeffs
    if n_drop >= len(order):
        n_drop = len(order) - 1
    cut = mass[order[n_drop]]
    keep = mass >= cut
    return modes[keep], coeffs[keep]


def series_order(x: float, tol: float) -> int:
    """Smallest J with x**J / J! <= tol."""
    if x <= 0:
        return 0
    J, term = 0, 1.0
    while term > tol:
        J += 1
        term *= x / J
        if J > 10_000:
            raise DomainViolation(f"series for argument {x} does not reach tolerance {tol}")
    return J


def _log_weights(norm: IndexNorm, sigma: float):
    if sigma == 0:
        return lambda m: np.zeros(len(m))
    return lambda m: sigma * norm.values(m)


def compose_shift(f: FourierField, phi_hat: FourierField, tol: float = 1e-14,
                  sigma: float = 0.0, norm: IndexNorm | None = None,
                  radius: float = 40.0) -> FourierField:
    """f o (id + phi_hat), expanded mode by mode.

    Each mode contributes f(k) e^{ikx} exp(i h_k) with h_k = k . phi_hat; the
    exponential is summed as a power series up to the order J where
    ||h_k||^J / J! <= tol, with norms taken at ``sigma``.
    """
    window = require_same_window(f.window, phi_hat.window)
    if phi_hat.components != window.size:
        raise ComponentMismatchError(
            f"shift has {phi_hat.components} components, window has {window.size}")
    if phi_hat.is_zero() or f.is_zero():
        return f
    norm = norm or IndexNorm.l1(window)
    wfn = _log_weights(norm, sigma)
    pm = phi_hat.modes
    pw = np.exp(wfn(pm))
    real = f.real and phi_hat.real

    # h_k coefficients for every mode of f: (N_f, M)
    H = f.coeffs.shape[0] and (f.modes.astype(float) @ phi_hat.coeffs.T)
    H = np.asarray(H, dtype=complex)
    xs = np.abs(H) @ pw
    if np.any(xs > radius):
        bad = int(np.argmax(xs))
        raise DomainViolation(
            f"|k . phi_hat| = {xs[bad]:.3g} exceeds radius {radius} at k={f.modes[bad].tolist()}")

    out_modes, out_coeffs = [], []
    done = np.zeros(len(f.modes), dtype=bool)
    index_of = {tuple(k): i for i, k in enumerate(f.modes.tolist())}
    for i in range(len(f.modes)):
        if done[i]:
            continue
        k = f.modes[i]
        h = H[i]
        nz = h != 0
        if not np.any(nz):
            E_m = np.zeros((1, window.size), np.int64)
            E_c = np.ones(1, complex)
        else:
            hm, hc = pm[nz], 1j * h[nz]
            J = series_order(float(xs[i]), tol)
            budget = 0.01 * tol / max(J, 1)
            terms_m = [np.zeros((1, window.size), np.int64)]
            terms_c = [np.ones(1, complex)]
            tm, tc = terms_m[0], terms_c[0]
            for n in range(1, J + 1):
                tm, tc = _convolve(tm, tc, hm, hc / n, lambda a, b: (a[:, None] * b[None, :]))
                tm, tc = _prune(tm, tc, wfn, budget, real=False)
                terms_m.append(tm)
                terms_c.append(tc)
            E_m, E_c = group_sum(np.concatenate(terms_m), np.concatenate(terms_c))
        out_modes.append(E_m + k)
        out_coeffs.append(E_c[:, None] * f.coeffs[i][None, :])
        done[i] = True
        # for real data exp(i h_{-k}) is the conjugate reflection of exp(i h_k)
        if real:
            j = index_of.get(tuple((-k).tolist()))
            if j is not None and not done[j]:
                out_modes.append(-E_m - k)
                out_coeffs.append(np.conj(E_c)[:, None] * f.coeffs[j][None, :])
                done[j] = True
    modes, coeffs = group_sum(np.concatenate(out_modes), np.concatenate(out_coeffs))
    return FourierField(window, modes, coeffs, real=real)


def neumann_inverse(M: MatrixFourierField, sigma: float = 0.0, tol: float = 1e-14,
                    norm: IndexNorm | None = None) -> MatrixFourierField:
    """sum_{j<=J} (I - M)^j with mu^{J+1}/(1-mu) <= tol, mu = ||I - M||_sigma."""
    if M.rows != M.cols:
        raise ComponentMismatchError("Neumann inverse needs a square matrix field")
    norm = norm or IndexNorm.l1(M.window)
    I = MatrixFourierField.identity(M.window, M.rows)
    A = I - M
    mu = sigma_norm(A, sigma, norm)
    if mu >= 1:
        raise NeumannError(mu)
    if mu == 0:
        return I
    J = 0
    while mu ** (J + 1) / (1 - mu) > tol:
        J += 1
    wfn = _log_weights(norm, sigma)
    budget = 0.1 * tol / max(J, 1)
    terms_m, terms_c = [I.modes], [I.coeffs]
    pm, pc = I.modes, I.coeffs
    for _ in range(J):
        pm, pc = _convolve(pm, pc, A.modes, A.coeffs, _matrix_matrix)
        pm, pc = _prune(pm, pc, wfn, budget, real=M.real)
        terms_m.append(pm)
        terms_c.append(pc)
    modes, coeffs = group_sum(np.concatenate(terms_m), np.concatenate(terms_c))
    return MatrixFourierField(M.window, modes, coeffs, real=M.real)


def pullback(v: FourierField, psi_hat: FourierField, tol: float = 1e-14,
             sigma: float = 0.0, norm: IndexNorm | None = None) -> FourierField:
    """Psi^* v = DPsi^{-1} . (v o Psi) for Psi = id + psi_hat."""
    window = require_same_window(v.window, psi_hat.window)
    if psi_hat.is_zero():
        return v
    DPsi = MatrixFourierField.identity(window, window.size) + jacobian(psi_hat)
    inv = neumann_inverse(DPsi, sigma, tol, norm)
    return matvec(inv, compose_shift(v, psi_hat, tol, sigma, norm))


def trig_grid(window: CoordinateWindow, points: int) -> np.ndarray:
    """Equispaced tensor grid on the torus, shape (points**n, n)."""
    axis = 2 * math.pi * np.arange(points) / points
    grids = np.meshgrid(*([axis] * window.size), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)
