"""Lattice index norms, the analytic sigma-norm and m-weighted norms.

Fields are consumed duck-typed: anything with ``modes`` (N, n) and ``coeffs``
(N, ...) arrays.  A vector coefficient is measured by the sup over its
components; a matrix field by the row-sum operator norm built from the
entrywise sigma-norms, which makes the matrix norm submultiplicative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, WindowMismatchError
from .lattice import CoordinateWindow, as_modes


# -- approximation functions and weights -------------------------------------

@dataclass(frozen=True)
class ApproximationFunction:
    """Continuous, strictly increasing, unbounded map [1, inf) -> [1, inf)."""

    func: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    tag: str
    params: tuple = ()

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=float))

    def inverse(self, y: float) -> float:
        """Solve self(t) = y for t >= 1; values below self(1) map to 1."""
        if y <= float(self(1.0)):
            return 1.0
        hi = 2.0
        while float(self(hi)) < y:
            hi *= 2.0
            if hi > 1e300:
                raise ValueError(f"{self.tag} does not reach {y}")
        return brentq(lambda t: float(self(t)) - y, 1.0, hi, xtol=1e-14, rtol=1e-15)

    def validate(self, grid=None) -> None:
        t = np.geomspace(1.0, 1e6, 10_000) if grid is None else np.asarray(grid, float)
        with np.errstate(over="ignore"):
            v = self(t)
        if np.any(np.isnan(v)):
            raise ConfigError(f"{self.tag}: NaN values on the grid")
        # fast growers overflow to inf; check the finite prefix only
        finite = np.isfinite(v)
        n_lead = len(v) if finite.all() else int(np.argmin(finite))
        if np.any(finite[n_lead:]):
            raise ConfigError(f"{self.tag}: non-finite values inside the grid")
        v = v[:n_lead]
        if len(v) < 2:
            raise ConfigError(f"{self.tag}: fewer than two finite values on the grid")
        if np.any(v < 1.0 - 1e-12):
            raise ConfigError(f"{self.tag}: values below 1")
        if np.any(np.diff(v) <= 0):
            raise ConfigError(f"{self.tag}: not strictly increasing on the grid")
        if v[-1] <= v[0]:
            raise ConfigError(f"{self.tag}: does not grow")

    def __str__(self):
        return ":".join([self.tag, *map(repr, self.params)])


def polynomial(L: float) -> ApproximationFunction:
    """t -> t**L."""
    if L <= 0:
        raise ConfigError(f"polynomial exponent must be positive, got {L}")
    return ApproximationFunction(lambda t: t ** L, "poly", (float(L),))


def exponential_power(zeta: float) -> ApproximationFunction:
    """t -> exp(t**zeta)."""
    if zeta <= 0:
        raise ConfigError(f"exponential-power exponent must be positive, got {zeta}")
    return ApproximationFunction(lambda t: np.exp(t ** zeta), "exppow", (float(zeta),))


def log_power(a: float, kappa: float = 1.0) -> ApproximationFunction:
    """t -> exp((kappa * ln t)**a)."""
    if a <= 1 or kappa <= 0:
        raise ConfigError(f"log-power needs a > 1 and kappa > 0, got a={a}, kappa={kappa}")
    return ApproximationFunction(lambda t: np.exp((kappa * np.log(t)) ** a),
                                 "logpow", (float(kappa), float(a)))


def table_function(points) -> ApproximationFunction:
    """Piecewise linear through (t, value) points, extended linearly to the right."""
    pts = np.asarray(points, dtype=float)
    ts, vs = pts[:, 0], pts[:, 1]
    if ts[0] != 1.0 or np.any(np.diff(ts) <= 0) or np.any(np.diff(vs) <= 0):
        raise ConfigError("table must start at t=1 and be strictly increasing")
    slope = (vs[-1] - vs[-2]) / (ts[-1] - ts[-2])

    def f(t):
        return np.where(t <= ts[-1], np.interp(t, ts, vs), vs[-1] + slope * (t - ts[-1]))

    return ApproximationFunction(f, "table", tuple(map(tuple, pts.tolist())))


def parse_approximation(text: str) -> ApproximationFunction:
    """``id``, ``poly:L``, ``exppow:zeta``, ``logpow:a`` or ``logpow:kappa:a``."""
    parts = text.split(":")
    kind, args = parts[0], [float(p) for p in parts[1:]]
    if kind == "id" and not args:
        return polynomial(1.0)
    if kind == "poly" and len(args) == 1:
        return polynomial(args[0])
    if kind == "exppow" and len(args) == 1:
        return exponential_power(args[0])
    if kind == "logpow" and len(args) == 1:
        return log_power(args[0])
    if kind == "logpow" and len(args) == 2:
        return log_power(args[1], kappa=args[0])
    raise ConfigError(f"cannot parse approximation function {text!r}")


@dataclass(frozen=True)
class Weight:
    """Non-decreasing regularity weight m(t) >= 0, applied as m(|k|)."""

    func: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    tag: str
    params: tuple = ()

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=float))

    def validate(self, grid=None) -> None:
        t = np.linspace(0.0, 1e3, 10_000) if grid is None else np.asarray(grid, float)
        v = self(t)
        if np.any(v < 0) or np.any(np.diff(v) < 0):
            raise ConfigError(f"weight {self.tag} is negative or decreasing on the grid")

    def __str__(self):
        return ":".join(["weight", self.tag, *map(repr, self.params)])


def make_weight(spec) -> Weight:
    """Weight from a spec string or ``(tag, *params)`` tuple.

    ``weight:gevrey:eta_p``      exp(t**(1/(1+eta_p)))
    ``weight:logpow:kappa:a``    exp(kappa * max(ln t, 0)**a)
    ``weight:poly:beta``         t**(beta+1)
    ``weight:exppow:z``          exp(t**z)
    ``weight:one``               1
    """
    if isinstance(spec, str):
        parts = spec.split(":")
        if parts[0] == "weight":
            parts = parts[1:]
        tag, args = parts[0], [float(p) for p in parts[1:]]
    else:
        tag, args = spec[0], [float(p) for p in spec[1:]]

    if tag == "gevrey" and len(args) == 1:
        (eta_p,) = args
        if eta_p <= 0:
            raise ConfigError(f"gevrey weight needs eta' > 0, got {eta_p}")
        s = 1.0 / (1.0 + eta_p)
        w = Weight(lambda t: np.exp(np.maximum(t, 0.0) ** s), "gevrey", (eta_p,))
    elif tag == "logpow" and len(args) == 2:
        kappa, a = args
        if kappa <= 0 or a <= 1:
            raise ConfigError(f"log-power weight needs kappa > 0, a > 1, got {kappa}, {a}")

        def f(t, kappa=kappa, a=a):
            with np.errstate(divide="ignore"):
                lg = np.log(np.where(t > 0, t, 1.0))
            return np.exp(kappa * np.maximum(lg, 0.0) ** a)

        w = Weight(f, "logpow", (kappa, a))
    elif tag == "poly" and len(args) == 1:
        (beta,) = args
        if beta <= 0:
            raise ConfigError(f"polynomial weight needs beta > 0, got {beta}")
        w = Weight(lambda t: np.maximum(t, 0.0) ** (beta + 1.0), "poly", (beta,))
    elif tag == "exppow" and len(args) == 1:
        (z,) = args
        if z <= 0:
            raise ConfigError(f"exponential-power weight needs z > 0, got {z}")
        w = Weight(lambda t: np.exp(np.maximum(t, 0.0) ** z), "exppow", (z,))
    elif tag == "one" and not args:
        w = Weight(lambda t: np.ones_like(t), "one", ())
    else:
        raise ConfigError(f"cannot parse weight spec {spec!r}")
    return w


# -- index norms --------------------------------------------------------------

@dataclass(frozen=True)
class IndexNorm:
    """|k|_eta, ||k||_w or |k|_sup on a coordinate window."""

    kind: str
    window: CoordinateWindow
    eta: float | None = None
    w: ApproximationFunction | None = None

    def __post_init__(self):
        if self.kind == "eta":
            if self.eta is None or self.eta < 0:
                raise ConfigError(f"eta-weighted norm needs eta >= 0, got {self.eta}")
        elif self.kind == "w":
            if self.w is None:
                raise ConfigError("w-weighted norm needs an approximation function")
        elif self.kind != "sup":
            raise ConfigError(f"unknown index norm kind {self.kind!r}")

    @classmethod
    def eta_weighted(cls, window, eta: float) -> "IndexNorm":
        return cls("eta", window, eta=float(eta))

    @classmethod
    def w_weighted(cls, window, w: ApproximationFunction) -> "IndexNorm":
        return cls("w", window, w=w)

    @classmethod
    def sup(cls, window) -> "IndexNorm":
        return cls("sup", window)

    @classmethod
    def l1(cls, window) -> "IndexNorm":
        return cls("eta", window, eta=0.0)

    @property
    def coordinate_weights(self) -> np.ndarray | None:
        """Per-label weight of |k_j| for the additive kinds, None for sup."""
        if self.kind == "eta":
            return self.window.brackets ** self.eta
        if self.kind == "w":
            return np.asarray(self.w(self.window.brackets), dtype=float)
        return None

    def values(self, modes) -> np.ndarray:
        modes = as_modes(modes, self.window.size)
        if self.kind == "sup":
            return np.abs(modes).max(axis=1).astype(float) if len(modes) else np.zeros(0)
        return np.abs(modes) @ self.coordinate_weights

    def __call__(self, k) -> float:
        return float(self.values(k)[0])

    def coordinate_bounds(self, K: float) -> np.ndarray:
        """Largest |k_j| compatible with index value <= K."""
        if self.kind == "sup":
            return np.full(self.window.size, int(math.floor(K)), dtype=np.int64)
        return np.floor(K / self.coordinate_weights).astype(np.int64)

    def __str__(self):
        if self.kind == "eta":
            return f"eta:{self.eta!r}"
        if self.kind == "w":
            return f"w:{self.w}"
        return "sup"


def parse_index_norm(text: str, window: CoordinateWindow) -> IndexNorm:
    """``eta:<eta>``, ``w:<approximation spec>``, ``sup`` or ``l1``."""
    if text == "sup":
        return IndexNorm.sup(window)
    if text == "l1":
        return IndexNorm.l1(window)
    head, _, rest = text.partition(":")
    if head == "eta" and rest:
        return IndexNorm.eta_weighted(window, float(rest))
    if head == "w" and rest:
        return IndexNorm.w_weighted(window, parse_approximation(rest))
    raise ConfigError(f"cannot parse index norm {text!r}")


def index_norm(k, norm: IndexNorm) -> float:
    return norm(k)


def _check_window(f, norm: IndexNorm):
    if f.window != norm.window:
        raise WindowMismatchError(f"field window {f.window.labels} vs norm window {norm.window.labels}")


def coefficient_magnitudes(coeffs: np.ndarray) -> np.ndarray:
    """|c| per mode: sup over vector components, row-sum operator norm for matrices."""
    a = np.abs(coeffs)
    if a.ndim == 1:
        return a
    if a.ndim == 2:
        return a.max(axis=1) if a.shape[1] else np.zeros(len(a))
    raise ValueError("matrix coefficients are measured with the operator norm")


def sigma_norm(f, sigma: float, norm: IndexNorm) -> float:
    """sum_k |f(k)| exp(sigma |k|) (operator norm for matrix fields)."""
    _check_window(f, norm)
    if len(f.modes) == 0:
        return 0.0
    weights = np.exp(sigma * norm.values(f.modes))
    a = np.abs(f.coeffs)
    if a.ndim == 3:
        entry = np.einsum("nij,n->ij", a, weights)
        return float(entry.sum(axis=1).max())
    return float(coefficient_magnitudes(f.coeffs) @ weights)


def m_norm(f, m: Weight, norm: IndexNorm, require_zero_mean: bool = False) -> float:
    """sum_{k != 0} |f(k)| m(|k|)."""
    _check_window(f, norm)
    if len(f.modes) == 0:
        return 0.0
    nonzero = np.any(f.modes != 0, axis=1)
    if require_zero_mean and not np.all(nonzero):
        const = coefficient_magnitudes(f.coeffs)[~nonzero]
        if np.any(const > 0):
            raise ValueError("field has a nonzero constant mode")
    mags = coefficient_magnitudes(f.coeffs)[nonzero]
    return float(mags @ m(norm.values(f.modes[nonzero])))
