"""Small divisors: nonresonance checks, Delta maxima, the homological solver and
lattice diagnostics (appendix product bound, shell census)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyRangeError, ResonanceError
from .fourier import FourierField
from .lattice import CoordinateWindow, additive_ball, box_modes, require_same_window
from .norms import ApproximationFunction, IndexNorm, parse_approximation

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
RESONANCE_RTOL = 1e-15


@dataclass(frozen=True)
class Frequency:
    window: CoordinateWindow
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) != self.window.size:
            raise ConfigError(f"{len(vals)} frequency values for a window of size {self.window.size}")
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError("frequency entries must be finite")
        if not any(vals):
            raise ConfigError("frequency must have a nonzero entry")
        object.__setattr__(self, "values", vals)

    @classmethod
    def of(cls, values, labels=None) -> "Frequency":
        values = tuple(float(v) for v in values)
        window = CoordinateWindow(tuple(labels)) if labels is not None else CoordinateWindow.first(len(values))
        return cls(window, values)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.values)

    def scaled(self, c: float) -> "Frequency":
        return Frequency(self.window, tuple(c * v for v in self.values))


def parse_frequency(text: str, labels=None) -> Frequency:
    """Comma list such as ``1,phi`` or ``1,1.618``; a path to a file with that content also works."""
    path = Path(text)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    tokens = [t for t in text.replace("\n", ",").replace(" ", ",").split(",") if t]
    values = []
    for t in tokens:
        if t.lower() == "phi":
            values.append(GOLDEN)
        else:
            try:
                values.append(float(t))
            except ValueError:
                raise ConfigError(f"cannot parse frequency entry {t!r}") from None
    return Frequency.of(values, labels)


# -- enumeration -------------------------------------------------------------

def enumerate_modes(norm: IndexNorm, K: float, strict: bool = False,
                    half: bool = False, budget: int = 20_000_000) -> np.ndarray:
    """Nonzero modes with index norm <= K (< K if strict), in graded lexicographic order.

    With ``half`` only one of each pair +-k is kept (first nonzero entry positive).
    """
    if norm.kind == "sup":
        modes = box_modes(norm.coordinate_bounds(K))
    else:
        modes = additive_ball(norm.coordinate_weights, K, strict=strict, budget=budget)
    values = norm.values(modes)
    keep = np.any(modes != 0, axis=1)
    keep &= (values < K) if strict else (values <= K)
    if half:
        first = np.argmax(modes != 0, axis=1)
        keep &= modes[np.arange(len(modes)), first] > 0
    modes, values = modes[keep], values[keep]
    order = np.lexsort(tuple(modes.T[::-1]) + (values,))
    return modes[order]


def _resonance_tol(modes: np.ndarray, omega: np.ndarray) -> np.ndarray:
    return RESONANCE_RTOL * (1.0 + np.abs(modes).max(axis=1) * np.abs(omega).max())


def _orient(k: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Representative of +-k with k . omega >= 0 (first nonzero entry positive on ties)."""
    return -k if float(k @ omega) < 0 else k


def _scan(omega: Frequency, K: float, norm: IndexNorm):
    require_same_window(omega.window, norm.window)
    modes = enumerate_modes(norm, K, half=True)
    if len(modes) == 0:
        raise EmptyRangeError(f"no nonzero mode with index norm <= {K}")
    om = omega.array
    dots = np.abs(modes @ om)
    return modes, dots, om


def delta_max(omega: Frequency, K: float, norm: IndexNorm):
    """Delta = K * max_{0<|k|<=K} |k . omega|^-1 and a mode attaining it."""
    modes, dots, om = _scan(omega, K, norm)
    resonant = dots <= _resonance_tol(modes, om)
    if np.any(resonant):
        i = int(np.flatnonzero(resonant)[0])
        raise ResonanceError(_orient(modes[i], om), float(dots[i]))
    i = int(np.argmin(dots))
    return float(K / dots[i]), _orient(modes[i], om)


def delta_sequence(omega: Frequency, norm: IndexNorm, Ks) -> np.ndarray:
    """Delta(K) = K max_{0<|k|<=K} |k . omega|^-1 for several radii from one enumeration."""
    Ks = np.asarray(Ks, dtype=float)
    modes, dots, om = _scan(omega, float(Ks.max()), norm)
    resonant = dots <= _resonance_tol(modes, om)
    values = norm.values(modes)
    out = np.empty(len(Ks))
    for i, K in enumerate(Ks):
        inside = values <= K
        if not np.any(inside):
            raise EmptyRangeError(f"no nonzero mode with index norm <= {K}")
        if np.any(resonant & inside):
            j = int(np.flatnonzero(resonant & inside)[0])
            raise ResonanceError(_orient(modes[j], om), float(dots[j]))
        out[i] = K / dots[inside].min()
    return out


def inverse_divisor_max(omega: Frequency, K: float, norm: IndexNorm) -> float:
    """max_{0<|k|<=K} |k . omega|^-1."""
    Delta, _ = delta_max(omega, K, norm)
    return Delta / K


@dataclass(frozen=True)
class DiophantineSpec:
    """``ratio``: |k.omega| >= gamma / Delta(|k|);  ``product``: |k.omega| >= gamma / prod_j (1 + <j>^mu |k_j|^mu)."""

    kind: str
    gamma: float
    mu: float | None = None
    Delta: ApproximationFunction | None = field(default=None)

    def __post_init__(self):
        if self.kind == "ratio":
            if self.gamma <= 0 or self.Delta is None:
                raise ConfigError("ratio nonresonance needs gamma > 0 and an approximation function")
        elif self.kind == "product":
            if not (0 < self.gamma < 1) or self.mu is None or self.mu <= 1:
                raise ConfigError("product nonresonance needs 0 < gamma < 1 and mu > 1")
        else:
            raise ConfigError(f"unknown nonresonance kind {self.kind!r}")

    def lower_bounds(self, modes: np.ndarray, norm: IndexNorm) -> np.ndarray:
        """Right-hand side of the nonresonance inequality per mode."""
        if self.kind == "ratio":
            return self.gamma / np.asarray(self.Delta(norm.values(modes)), dtype=float)
        weights = norm.window.brackets ** self.mu
        prod = np.prod(1.0 + weights[None, :] * np.abs(modes).astype(float) ** self.mu, axis=1)
        return self.gamma / prod

    def __str__(self):
        if self.kind == "ratio":
            return f"ratio:{self.Delta}:{self.gamma!r}"
        return f"product:{self.gamma!r}:{self.mu!r}"


def parse_diophantine(text: str) -> DiophantineSpec:
    """``ratio:<approximation spec>:<gamma>`` or ``product:<gamma>:<mu>``."""
    parts = text.split(":")
    try:
        if parts[0] == "ratio" and len(parts) >= 3:
            return DiophantineSpec("ratio", float(parts[-1]), Delta=parse_approximation(":".join(parts[1:-1])))
        if parts[0] == "product" and len(parts) == 3:
            return DiophantineSpec("product", float(parts[1]), mu=float(parts[2]))
    except ValueError as exc:
        raise ConfigError(f"cannot parse nonresonance spec {text!r}: {exc}") from None
    raise ConfigError(f"cannot parse nonresonance spec {text!r}")


@dataclass(frozen=True)
class NonresonanceReport:
    passed: bool
    worst_k: tuple[int, ...]
    worst_margin: float
    delta: float | None
    checked: int

    def to_dict(self) -> dict:
        return {"pass": self.passed, "worst_k": list(self.worst_k), "worst_margin": self.worst_margin,
                "delta": self.delta, "checked": self.checked}


def diophantine_verify(omega: Frequency, spec: DiophantineSpec, K_max: float,
                       norm: IndexNorm | None = None) -> NonresonanceReport:
    """Check the nonresonance inequality on all 0 < |k| <= K_max; margin = |k.omega| / bound (pass iff >= 1)."""
    norm = norm or IndexNorm.sup(omega.window)
    modes, dots, om = _scan(omega, K_max, norm)
    margins = dots / spec.lower_bounds(modes, norm)
    i = int(np.argmin(margins))
    resonant = dots <= _resonance_tol(modes, om)
    delta = None if np.any(resonant) else float(K_max / dots.min())
    return NonresonanceReport(bool(margins[i] >= 1.0), tuple(int(v) for v in _orient(modes[i], om)),
                              float(margins[i]), delta, 2 * len(modes))


def homological_solve(f: FourierField, omega: Frequency, K: float, norm: IndexNorm) -> FourierField:
    """g = L T_K f: g(k) = f(k) / (i k.omega) for 0 < |k| <= K, zero elsewhere."""
    require_same_window(f.window, omega.window, norm.window)
    om = omega.array
    values = norm.values(f.modes)
    active = np.any(f.modes != 0, axis=1) & (values <= K)
    modes = f.modes[active]
    dots = modes @ om
    bad = np.abs(dots) <= _resonance_tol(modes, om) if len(modes) else np.zeros(0, bool)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ResonanceError(modes[i], float(abs(dots[i])))
    coeffs = f.coeffs[active] / (1j * dots)[:, None]
    return FourierField(f.window, modes, coeffs, real=f.real, _canonical_input=True)


# -- diagnostics -------------------------------------------------------------

@dataclass(frozen=True)
class AppendixReport:
    N: float
    sup_product: float
    argmax: tuple[int, ...]
    fitted_C: float
    bound_value: float
    count: int

    def to_dict(self) -> dict:
        return {"N": self.N, "sup_product": self.sup_product, "argmax": list(self.argmax),
                "fitted_C": self.fitted_C, "bound_value": self.bound_value, "count": self.count}


def appendix_bound_check(eta: float, mu: float, N: float, window: CoordinateWindow,
                         C: float | None = None, budget: int = 20_000_000) -> AppendixReport:
    """sup over |k|_eta < N of prod_j (1 + <j>^mu |k_j|^mu) against exp(C N^{1/(1+eta)} ln(1+N)).

    The product only sees |k_j|, so the scan runs over nonnegative vectors.
    ``fitted_C`` is the smallest C for which the bound holds; ``bound_value``
    uses ``C`` if given, otherwise the fitted value.
    """
    if eta <= 0 or mu <= 1 or N <= 0:
        raise ConfigError("appendix check needs eta > 0, mu > 1, N > 0")
    weights = window.brackets ** eta
    modes = additive_ball(weights, N, strict=True, budget=budget, nonnegative=True)
    factors = 1.0 + (window.brackets ** mu)[None, :] * modes.astype(float) ** mu
    products = np.prod(factors, axis=1)
    i = int(np.argmax(products))
    scale = N ** (1.0 / (1.0 + eta)) * math.log1p(N)
    fitted = float(math.log(products[i]) / scale)
    while math.exp(fitted * scale) < products[i]:
        fitted = math.nextafter(fitted, math.inf)
    used = fitted if C is None else float(C)
    return AppendixReport(float(N), float(products[i]), tuple(int(v) for v in modes[i]),
                          fitted, float(math.exp(used * scale)), int(len(modes)))


@dataclass(frozen=True)
class CensusReport:
    nu: int
    count: int
    bound: float
    J: int

    @property
    def holds(self) -> bool:
        return self.count <= self.bound

    def to_dict(self) -> dict:
        return {"nu": self.nu, "count": self.count, "bound": self.bound, "J": self.J, "holds": self.holds}


def lattice_census(nu: int, w: ApproximationFunction, window: CoordinateWindow,
                   budget: int = 20_000_000) -> CensusReport:
    """Count 0 != k with ||k||_w in [nu-1, nu) against 2^{2J+1} C(nu+J, nu), J = [w^{-1}(nu)]."""
    if nu < 1:
        raise ConfigError("census shell index must be a positive integer")
    norm = IndexNorm.w_weighted(window, w)
    modes = additive_ball(norm.coordinate_weights, float(nu), strict=True, budget=budget)
    values = norm.values(modes)
    nonzero = np.any(modes != 0, axis=1)
    count = int(np.count_nonzero(nonzero & (values >= nu - 1)))
    J = int(math.floor(w.inverse(float(nu)))) if nu >= float(w(1.0)) else 0
    bound = 2.0 ** (2 * J + 1) * math.comb(nu + J, nu)
    return CensusReport(int(nu), count, float(bound), J)
