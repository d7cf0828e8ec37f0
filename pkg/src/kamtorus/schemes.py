"""Balancing sequences, per-regime scheme configurations and the
finite-horizon admissibility reports for the summability condition and the
weight condition."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .lattice import CoordinateWindow
from .nonresonance import Frequency, appendix_bound_check, delta_sequence
from .norms import (ApproximationFunction, IndexNorm, Weight, exponential_power,
                    log_power, make_weight, parse_approximation, polynomial)


@dataclass(frozen=True)
class BalancingSequence:
    """d_j >= 0 for j >= 0, with the convention d_{-1} = 0."""

    kind: str
    theta: float | None = None
    A: float | None = None
    a: float | None = None
    table: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "geometric":
            if self.theta is None or self.theta <= 0:
                raise ConfigError("geometric balancing needs theta > 0")
        elif self.kind == "power":
            if self.A is None or self.a is None or self.A < 0 or self.a < 1:
                raise ConfigError("power balancing needs A >= 0 and a >= 1")
        elif self.kind == "table":
            if not self.table or min(self.table) < 0:
                raise ConfigError("table balancing needs nonnegative entries")
            object.__setattr__(self, "table", tuple(float(v) for v in self.table))
        elif self.kind != "constant_zero":
            raise ConfigError(f"unknown balancing kind {self.kind!r}")

    @classmethod
    def zero(cls) -> "BalancingSequence":
        return cls("constant_zero")

    @classmethod
    def geometric(cls, theta: float) -> "BalancingSequence":
        return cls("geometric", theta=float(theta))

    @classmethod
    def power(cls, A: float, a: float) -> "BalancingSequence":
        return cls("power", A=float(A), a=float(a))

    def d(self, j: int) -> float:
        if j < 0:
            return 0.0
        if self.kind == "constant_zero":
            return 0.0
        if self.kind == "geometric":
            return self.theta ** j
        if self.kind == "power":
            return self.A * j ** (self.a - 1.0) if j > 0 or self.a == 1 else 0.0
        return self.table[min(j, len(self.table) - 1)]

    def values(self, n: int) -> np.ndarray:
        return np.array([self.d(j) for j in range(n)])

    def partial_sum(self, start: int, stop: int) -> float:
        """sum_{j=start}^{stop-1} d_j (zero when stop <= start)."""
        return float(sum(self.d(j) for j in range(max(start, 0), stop)))

    def ratio_limsup(self) -> float:
        """Estimate of limsup d_{j+1}/d_j (1 for sequences without geometric growth)."""
        if self.kind == "geometric":
            return self.theta
        if self.kind == "table":
            t = self.table
            tail = [t[j + 1] / t[j] for j in range(len(t) // 2, len(t) - 1) if t[j] > 0]
            return max(tail) if tail else 1.0
        return 1.0

    def lam(self, b: float) -> float:
        """lambda = b^-1 limsup d_{j+1}/d_j; the zero sequence uses the actual ratio 1/b."""
        return self.ratio_limsup() / b

    def __str__(self):
        if self.kind == "geometric":
            return f"geometric:{self.theta!r}"
        if self.kind == "power":
            return f"power:{self.A!r}:{self.a!r}"
        if self.kind == "table":
            return "table:" + ",".join(map(repr, self.table))
        return "constant_zero"


TAGS = ("gevrey_3_1", "cinf_3_2", "dio_4_1_i", "subexp_4_1_ii", "logpow_4_1_iii")


@dataclass(frozen=True)
class SchemeConfig:
    tag: str
    params: dict
    b: float
    balancing: BalancingSequence
    lam: float
    weight: Weight
    norm_spec: str
    q: float = 0.1
    r: float = 10.0
    Delta: ApproximationFunction | None = None
    gamma_star: float | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def alpha(self) -> float:
        return (1.0 + self.lam) / 2.0

    @property
    def gamma(self) -> float:
        return 0.75 * (1.0 - self.lam)

    @property
    def kappa_ball(self) -> float:
        return min(0.25, 1.0 / self.alpha - 1.0)

    def index_norm(self, window: CoordinateWindow) -> IndexNorm:
        kind, _, rest = self.norm_spec.partition(":")
        if kind == "sup":
            return IndexNorm.sup(window)
        if kind == "eta":
            return IndexNorm.eta_weighted(window, float(rest))
        return IndexNorm.w_weighted(window, parse_approximation(rest))

    def summary(self) -> dict:
        return {
            "tag": self.tag,
            "params": dict(self.params),
            "b": self.b, "q": self.q, "r": self.r,
            "balancing": str(self.balancing),
            "lambda": self.lam, "alpha": self.alpha, "gamma": self.gamma,
            "kappa_ball": self.kappa_ball,
            "weight": str(self.weight),
            "norm": self.norm_spec,
            "notes": list(self.notes),
        }


def _need(params: dict, *names):
    missing = [n for n in names if n not in params]
    if missing:
        raise ConfigError(f"missing scheme parameters: {', '.join(missing)}")
    return [float(params[n]) for n in names]


def make_scheme(tag: str, params: dict) -> SchemeConfig:
    """Build a scheme; ``q`` and ``r`` default to 0.1 and 10."""
    params = dict(params)
    q = float(params.pop("q", 0.1))
    r = float(params.pop("r", 10.0))
    if not 0 < q < 1:
        raise ConfigError(f"q must lie in (0, 1), got {q}")
    if r <= 0:
        raise ConfigError(f"r must be positive, got {r}")
    b = float(params.get("b", 2.0))
    if b <= 1:
        raise ConfigError(f"b must exceed 1, got {b}")
    notes = []

    if tag == "gevrey_3_1":
        eta, eta_p, theta = _need(params, "eta", "eta_p", "theta")
        if eta <= 0:
            raise ConfigError(f"eta must be positive, got {eta}")
        if not 0 < eta_p < eta:
            raise ConfigError(f"need 0 < eta' < eta, got eta'={eta_p}, eta={eta}")
        if not b ** (1.0 / (1.0 + eta)) < theta < b:
            raise ConfigError(f"need b^(1/(1+eta)) < theta < b, got theta={theta}, "
                              f"b^(1/(1+eta))={b ** (1.0 / (1.0 + eta)):.6g}")
        bal = BalancingSequence.geometric(theta)
        return SchemeConfig(tag, {"b": b, "eta": eta, "eta_p": eta_p, "theta": theta}, b, bal,
                            bal.lam(b), make_weight(("gevrey", eta_p)), f"eta:{eta!r}", q, r,
                            exponential_power(1.0 / (1.0 + eta)), notes=tuple(notes))

    if tag == "cinf_3_2":
        a, A, kappa = _need(params, "a", "A", "kappa_reg")
        w = str(params.get("w", "id"))
        if a <= 1:
            raise ConfigError(f"need a > 1, got {a}")
        lam = 1.0 / b
        gamma = 0.75 * (1.0 - lam)
        lower = a / gamma * math.log(b) ** a
        if not A > lower:
            raise ConfigError(f"need A > a gamma^-1 (ln b)^a = {lower:.6g}, got A={A}")
        if kappa <= 0:
            raise ConfigError(f"kappa_reg must be positive, got {kappa}")
        parse_approximation(w)
        bal = BalancingSequence.power(A, a)
        return SchemeConfig(tag, {"b": b, "a": a, "A": A, "kappa_reg": kappa, "w": w}, b, bal, lam,
                            make_weight(("logpow", kappa, a)), f"w:{w}", q, r, log_power(a),
                            notes=tuple(notes))

    if tag == "dio_4_1_i":
        (beta,) = _need(params, "beta")
        n = int(params.get("n", 2))
        needed = 1.0 if n == 1 else float(n - 1)
        if beta < needed:
            raise ConfigError(f"need beta >= {needed:g} for n = {n}, got {beta}")
        gamma_star = float(params.get("gamma_star", 1.0 / 3.0))
        if q >= b ** (-beta - 1):
            notes.append(f"q={q} is not below b^-(beta+1)={b ** (-beta - 1):.6g}; the summability series need not converge")
        bal = BalancingSequence.zero()
        return SchemeConfig(tag, {"b": b, "beta": beta, "n": n, "gamma_star": gamma_star}, b, bal,
                            bal.lam(b), make_weight(("poly", beta)), "sup", q, r, polynomial(beta),
                            gamma_star, notes=tuple(notes))

    if tag == "subexp_4_1_ii":
        zeta, zeta_p, theta = _need(params, "zeta", "zeta_p", "theta")
        if not 0 < zeta < 1:
            raise ConfigError(f"need 0 < zeta < 1, got {zeta}")
        if not zeta_p > zeta:
            raise ConfigError(f"need zeta' > zeta, got zeta'={zeta_p}, zeta={zeta}")
        if not b ** zeta < theta < b:
            raise ConfigError(f"need b^zeta < theta < b, got theta={theta}, b^zeta={b ** zeta:.6g}")
        bal = BalancingSequence.geometric(theta)
        return SchemeConfig(tag, {"b": b, "zeta": zeta, "zeta_p": zeta_p, "theta": theta}, b, bal,
                            bal.lam(b), make_weight(("exppow", zeta_p)), "sup", q, r,
                            exponential_power(zeta), notes=tuple(notes))

    if tag == "logpow_4_1_iii":
        a, A, kappa = _need(params, "a", "A", "kappa_reg")
        if a <= 1:
            raise ConfigError(f"need a > 1, got {a}")
        if kappa <= 1:
            raise ConfigError(f"need kappa_reg > 1, got {kappa}")
        lam = 1.0 / b
        gamma = 0.75 * (1.0 - lam)
        lower = a / gamma * math.log(b) ** a
        if not A > lower:
            raise ConfigError(f"need A > a gamma^-1 (ln b)^a = {lower:.6g}, got A={A}")
        bal = BalancingSequence.power(A, a)
        return SchemeConfig(tag, {"b": b, "a": a, "A": A, "kappa_reg": kappa}, b, bal, lam,
                            make_weight(("logpow", kappa, a)), "sup", q, r, log_power(a),
                            notes=tuple(notes))

    raise ConfigError(f"unknown scheme tag {tag!r}; expected one of {', '.join(TAGS)}")


def parse_scheme(text: str) -> SchemeConfig:
    """``tag:key=value,key=value`` e.g. ``dio_4_1_i:beta=1,b=2``."""
    tag, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"scheme parameter {item!r} is not key=value")
        key = key.strip()
        params[key] = value.strip() if key == "w" else float(value)
    return make_scheme(tag.strip(), params)


# -- admissibility reports ------------------------------------------------------

def _verdict_ratios(ratios: np.ndarray) -> str:
    if len(ratios) == 0:
        return "undetermined"
    tail = ratios[-max(1, len(ratios) // 4):]
    return "bounded-so-far" if np.all(tail < 1.0) else "not-bounded-so-far"


def gevrey_crossover(config: SchemeConfig, C: float, nu_limit: int = 100_000) -> int | None:
    """Smallest nu >= 1 with (3(1-theta/b)/(4b(theta-1))) theta^nu >= C nu b^{nu/(1+eta)}."""
    b, theta, eta = config.b, config.params["theta"], config.params["eta"]
    const = 3.0 * (1.0 - theta / b) / (4.0 * b * (theta - 1.0))
    for nu in range(1, nu_limit + 1):
        lhs = math.log(const) + nu * math.log(theta)
        rhs = math.log(C * nu) + nu * math.log(b) / (1.0 + eta) if C > 0 else -math.inf
        if lhs >= rhs:
            return nu
    return None


def fitted_appendix_constant(eta: float, mu: float = 2.0, Ns=(5, 10, 20),
                             window: CoordinateWindow | None = None) -> float:
    """Largest fitted product-bound constant over the sample radii (one C valid for all)."""
    window = window or CoordinateWindow.symmetric(3)
    return max(appendix_bound_check(eta, mu, N, window).fitted_C for N in Ns)


def series_condition_I(config: SchemeConfig, omega: Frequency, horizon: int) -> dict:
    """Terms q^nu exp(-gamma sum_{j<nu} d_j) Delta_nu for nu < horizon, with partial sums and ratios."""
    if horizon < 1:
        raise ConfigError("horizon must be at least 1")
    norm = config.index_norm(omega.window)
    Ks = [config.b ** nu for nu in range(horizon)]
    deltas = delta_sequence(omega, norm, Ks)
    terms = np.array([config.q ** nu * math.exp(-config.gamma * config.balancing.partial_sum(0, nu)) * deltas[nu]
                      for nu in range(horizon)])
    ratios = terms[1:] / terms[:-1]
    report = {
        "scheme": config.summary(),
        "horizon": horizon,
        "Delta": deltas.tolist(),
        "terms": terms.tolist(),
        "partial_sums": np.cumsum(terms).tolist(),
        "ratios": ratios.tolist(),
        "verdict": _verdict_ratios(ratios),
        "verdict_kind": "finite-horizon heuristic",
    }
    if config.tag == "gevrey_3_1":
        C = fitted_appendix_constant(config.params["eta"])
        cross = gevrey_crossover(config, C)
        report["appendix_C"] = C
        report["crossover"] = cross
        if cross is not None:
            after = ratios[max(cross - 1, 0):]
            report["ratios_below_one_after_crossover"] = bool(np.all(after < 1.0))
    if config.tag == "dio_4_1_i" and config.gamma_star:
        growth = config.q * config.b ** (config.params["beta"] + 1.0)
        report["closed_form_bound"] = [growth ** nu / config.gamma_star for nu in range(horizon)]
    return report


def rho_weight_check(config: SchemeConfig, omega: Frequency, m: Weight, horizon: int) -> dict:
    """rho(mu) over the horizon and the ratio rho(mu) e^{(1+lambda) b d_{mu-1}/2} / m(b^{mu-1})."""
    if horizon < 1:
        raise ConfigError("horizon must be at least 1")
    norm = config.index_norm(omega.window)
    Ks = [config.b ** nu for nu in range(horizon + 1)]
    deltas = delta_sequence(omega, norm, Ks)
    q, g, bal, b = config.q, config.gamma, config.balancing, config.b
    rho, ratio = [], []
    for mu in range(1, horizon + 1):
        s = sum(q ** (nu - mu) * math.exp(-g * bal.partial_sum(mu, nu)) * deltas[nu]
                for nu in range(mu, horizon + 1))
        rho.append(s)
        ratio.append(s * math.exp(0.5 * (1 + config.lam) * b * bal.d(mu - 1)) / float(m(b ** (mu - 1))))
    ratio = np.array(ratio)
    tail = ratio[-max(1, len(ratio) // 4):]
    bounded = bool(tail.max() <= 2.0 * np.median(ratio))
    return {
        "scheme": config.summary(),
        "weight": str(m),
        "horizon": horizon,
        "mu": list(range(1, horizon + 1)),
        "rho": rho,
        "ratio": ratio.tolist(),
        "verdict": "bounded-so-far" if bounded else "not-bounded-so-far",
        "verdict_kind": "finite-horizon heuristic",
    }
