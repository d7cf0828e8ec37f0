"""The step contraction solver and the full iteration driver."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (BallExitError, ConfigError, ConvergenceError, KamError,
                     SmallnessError)
from .fourier import (FourierField, MatrixFourierField, compose_shift, jacobian,
                      matmul, matvec, matvec_constant, neumann_inverse, pullback,
                      trig_grid, truncate_residual)
from .nonresonance import Frequency, delta_max, homological_solve
from .norms import IndexNorm, Weight, m_norm, sigma_norm
from .schemes import BalancingSequence

SERIES_TOL = 1e-14
BALL_SLACK = 1e-9


def _sup(v) -> float:
    return float(np.abs(np.asarray(v)).max(initial=0.0))


@dataclass(frozen=True)
class StepInput:
    psi_hat: FourierField
    Q: FourierField
    omega: Frequency
    sigma: float
    lam: float
    K: float
    norm: IndexNorm
    tol: float | None = None
    enforce_smallness: bool = True
    max_iter: int = 200
    series_tol: float = SERIES_TOL

    @property
    def alpha(self) -> float:
        return (1.0 + self.lam) / 2.0

    @property
    def gamma(self) -> float:
        return 0.75 * (1.0 - self.lam)

    @property
    def kappa_ball(self) -> float:
        return min(0.25, 1.0 / self.alpha - 1.0)


@dataclass(frozen=True)
class StepDiagnostics:
    iterations: int
    final_metric: float
    contraction_factor: float
    Delta: float
    Q_norm: float
    ball_radius: float
    ball_lhs: float
    residual_lhs: float
    residual_rhs: float
    warnings: tuple[str, ...] = ()

    @property
    def ball_ok(self) -> bool:
        return self.ball_lhs <= self.ball_radius * (1 + BALL_SLACK) + 1e-300

    @property
    def residual_ok(self) -> bool:
        return self.residual_lhs <= self.residual_rhs


@dataclass(frozen=True)
class StepOutput:
    omega_prime: np.ndarray
    phi_hat: FourierField
    q_plus: FourierField
    T: FourierField
    diagnostics: StepDiagnostics


def theta_of(psi_hat: FourierField, sigma: float, tol: float = SERIES_TOL,
             norm: IndexNorm | None = None) -> MatrixFourierField:
    """Theta = DPsi^-1 (DPsi - I) for Psi = id + psi_hat."""
    d = psi_hat.window.size
    if psi_hat.is_zero():
        return MatrixFourierField.zeros(psi_hat.window, d)
    Dpsi = jacobian(psi_hat)
    inv = neumann_inverse(MatrixFourierField.identity(psi_hat.window, d) + Dpsi, sigma, tol, norm)
    return matmul(inv, Dpsi)


def _transform(Q, Theta, omega_prime, phi_hat, sigma_out, norm, tol):
    F = Q
    if np.any(omega_prime != 0) and not Theta.is_zero():
        F = Q + matvec_constant(Theta, omega_prime)
    return compose_shift(F, phi_hat, tol, sigma=sigma_out, norm=norm)


def contraction_apply(omega_prime, phi_hat: FourierField, *, Q: FourierField,
                      Theta: MatrixFourierField, omega: Frequency, K: float, sigma: float,
                      alpha: float, norm: IndexNorm, tol: float = SERIES_TOL,
                      return_T: bool = False):
    """One application of the step map: T = (Q + Theta w') o (id + phi_hat),
    w'_1 = constant mode of T, phi_1 = L (T_K - T_0) T."""
    omega_prime = np.asarray(omega_prime, dtype=complex)
    T = _transform(Q, Theta, omega_prime, phi_hat, alpha * sigma, norm, tol)
    w1 = T.constant_term()
    if T.real:
        w1 = w1.real
    phi1 = homological_solve(T, omega, K, norm)
    return (w1, phi1, T) if return_T else (w1, phi1)


def step_metric(dw, dphi: FourierField, Delta: float, K: float, sigma_phi: float,
                norm: IndexNorm) -> float:
    """max(Delta |dw|, K ||dphi||_{sigma_phi})."""
    return max(Delta * _sup(dw), K * sigma_norm(dphi, sigma_phi, norm))


def kam_step(inp: StepInput) -> StepOutput:
    """Solve the step equations by plain iteration of the contraction from (0, 0)."""
    Q, norm, omega = inp.Q, inp.norm, inp.omega
    sigma, K, lam, alpha = inp.sigma, inp.K, inp.lam, inp.alpha
    window = Q.window
    if not 0 < lam < 1:
        raise ConfigError(f"lambda must lie in (0, 1), got {lam}")
    d = window.size
    warnings = []

    Delta, _ = delta_max(omega, K, norm)
    Qn = sigma_norm(Q, sigma, norm)
    radius = 4.0 * Delta * Qn
    Dpsi_norm = sigma_norm(jacobian(inp.psi_hat), sigma, norm) if not inp.psi_hat.is_zero() else 0.0
    checks = [
        (sigma * K >= 1.0 / (1.0 - lam) * (1 - 1e-12), f"sigma K = {sigma * K:.6g} < (1-lambda)^-1 = {1 / (1 - lam):.6g}"),
        (radius <= inp.kappa_ball, f"4 Delta ||Q||_sigma = {radius:.6g} exceeds kappa_ball = {inp.kappa_ball:.6g}"),
        (Dpsi_norm <= 1.0 / 7.0, f"||DPsi - I||_sigma = {Dpsi_norm:.6g} exceeds 1/7"),
    ]
    for ok, message in checks:
        if not ok:
            if inp.enforce_smallness:
                raise SmallnessError(message)
            warnings.append(message)

    zero_w = np.zeros(d)
    if Q.is_zero():
        zero = FourierField.zeros(window, d)
        diag = StepDiagnostics(0, 0.0, math.nan, Delta, 0.0, 0.0, 0.0, 0.0, 0.0, tuple(warnings))
        return StepOutput(zero_w, zero, zero, zero, diag)

    tol = inp.tol if inp.tol is not None else 1e-13 * (1.0 + Qn)
    Theta = theta_of(inp.psi_hat, sigma, inp.series_tol, norm)
    w, phi = zero_w, FourierField.zeros(window, d)
    metrics = []
    T = None
    for it in range(1, inp.max_iter + 1):
        w1, phi1, T = contraction_apply(w, phi, Q=Q, Theta=Theta, omega=omega, K=K, sigma=sigma,
                                        alpha=alpha, norm=norm, tol=inp.series_tol, return_T=True)
        metric = step_metric(w1 - w, phi1 - phi, Delta, K, alpha * sigma, norm)
        metrics.append(metric)
        w, phi = w1, phi1
        if metric <= tol:
            break
    else:
        raise ConvergenceError(f"step map did not converge in {inp.max_iter} iterations "
                               f"(last metric {metrics[-1]:.3g}, tol {tol:.3g})")

    # ratio of successive step sizes while they are well above the stopping level
    ratios = [metrics[i] / metrics[i - 1] for i in range(1, len(metrics))
              if metrics[i - 1] > 1e3 * tol]
    factor = max(ratios) if ratios else math.nan

    ball_lhs = max(Delta * _sup(w), K * sigma_norm(phi, alpha * sigma, norm))
    if ball_lhs > radius * (1 + BALL_SLACK) and inp.enforce_smallness:
        raise BallExitError(f"fixed point left the ball: {ball_lhs:.6g} > {radius:.6g}")

    _, residual = truncate_residual(T, K, norm)
    if residual.is_zero():
        q_plus = FourierField.zeros(window, d)
    else:
        DPhi = MatrixFourierField.identity(window, d) + jacobian(phi)
        q_plus = matvec(neumann_inverse(DPhi, lam * sigma, inp.series_tol, norm), residual)
    res_lhs = sigma_norm(q_plus, lam * sigma, norm)
    res_rhs = 12.0 * math.exp(-inp.gamma * sigma * K) * Qn
    diag = StepDiagnostics(len(metrics), metrics[-1], factor, Delta, Qn, radius, ball_lhs,
                           res_lhs, res_rhs, tuple(warnings))
    return StepOutput(np.asarray(w), phi, q_plus, T, diag)


# -- iteration ------------------------------------------------------------------

@dataclass(frozen=True)
class IterationConfig:
    b: float
    r: float
    q: float
    balancing: BalancingSequence
    nu_max: int
    tol: float | None = None
    enforce_smallness: bool = True
    smallness_threshold: float | None = None
    series_tol: float = SERIES_TOL
    defect_points: int = 64

    def __post_init__(self):
        if self.b <= 1:
            raise ConfigError(f"b must exceed 1, got {self.b}")
        if self.r <= 0 or not 0 < self.q < 1:
            raise ConfigError("need r > 0 and q in (0, 1)")
        if self.nu_max < 0:
            raise ConfigError("nu_max must be nonnegative")
        if not 0 < self.lam < 1:
            raise ConfigError(f"lambda = {self.lam} is not in (0, 1)")
        if self.enforce_smallness and self.contraction_margin > self.q:
            raise ConfigError(f"12 exp(-gamma r) = {self.contraction_margin:.6g} exceeds q = {self.q}")

    @property
    def lam(self) -> float:
        return self.balancing.lam(self.b)

    @property
    def alpha(self) -> float:
        return (1.0 + self.lam) / 2.0

    @property
    def gamma(self) -> float:
        return 0.75 * (1.0 - self.lam)

    @property
    def contraction_margin(self) -> float:
        return 12.0 * math.exp(-self.gamma * self.r)

    def K(self, nu: int) -> float:
        return self.b ** nu

    def sigma(self, nu: int) -> float:
        return self.b ** (-nu) * (self.r + self.balancing.d(nu))

    def warnings(self) -> list[str]:
        out = []
        if self.contraction_margin > self.q:
            out.append(f"12 exp(-gamma r) = {self.contraction_margin:.6g} exceeds q = {self.q}")
        return out


TRACE_COLUMNS = ("nu", "K_nu", "sigma_nu", "Delta_nu", "Q_norm", "eps_bound", "delta_bound",
                 "omega_tilde_sup", "step_iters", "contraction_factor", "defect")


@dataclass
class TraceRow:
    nu: int
    K_nu: float
    sigma_nu: float
    Delta_nu: float
    Q_norm: float
    eps_bound: float
    delta_bound: float
    omega_tilde_sup: float
    step_iters: int
    contraction_factor: float
    defect: float
    omega_step: float = math.nan
    dpsi_step: float = math.nan
    dpsi_norm: float = 0.0
    sigma_ratio: float = math.nan


@dataclass
class IterationTrace:
    rows: list[TraceRow] = field(default_factory=list)
    C: float = math.nan
    warnings: list[str] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def checks(self, rtol: float = 1e-12) -> dict:
        """The iteration inequalities evaluated on the recorded rows."""
        rows = self.rows
        Qn, eps = self.column("Q_norm"), self.column("eps_bound")
        stepped = [r for r in rows if not math.isnan(r.omega_step)]
        return {
            "Q_below_eps": bool(np.all(Qn <= eps * (1 + rtol) + 1e-300)),
            "Q_strictly_decreasing": bool(np.all(np.diff(Qn) < 0)),
            "omega_step": all(r.omega_step <= 4 * r.eps_bound * (1 + rtol) + 1e-300 for r in stepped),
            "dpsi_step": all(r.dpsi_step <= 12 * r.Delta_nu * r.eps_bound * (1 + rtol) + 1e-300 for r in stepped),
            "dpsi_below_delta": all(r.dpsi_norm <= r.delta_bound * (1 + rtol) + 1e-300 for r in rows),
        }


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_trace_csv(trace: IterationTrace, stream, digest: str | None = None) -> None:
    if digest:
        stream.write(f"# manifest: {digest}\n")
    stream.write(",".join(TRACE_COLUMNS) + "\n")
    for r in trace.rows:
        stream.write(",".join(_fmt(getattr(r, c)) for c in TRACE_COLUMNS) + "\n")


def conjugacy_defect(psi_hat: FourierField, omega_tilde, P: FourierField, omega: Frequency,
                     grid_points: int = 64, max_points: int = 1 << 18) -> float:
    """max_x |DPsi(x) omega - (omega - omega_tilde + P)(Psi(x))| over a torus grid."""
    window = P.window
    n = window.size
    om = omega.array
    if grid_points ** n <= max_points:
        x = trig_grid(window, grid_points)
    else:
        x = np.random.default_rng(0).uniform(0, 2 * np.pi, size=(max_points, n))
    y = x + psi_hat.evaluate(x).real if not psi_hat.is_zero() else x
    lhs = np.broadcast_to(om, x.shape).copy()
    if not psi_hat.is_zero():
        lhs += np.einsum("pij,j->pi", jacobian(psi_hat).evaluate(x).real, om)
    rhs = om - np.asarray(omega_tilde, dtype=float) + P.evaluate(y).real
    return float(np.abs(lhs - rhs).max())


def mode_shells(P: FourierField, norm: IndexNorm, b: float, nu_max: int):
    """Delta*P_nu: modes with K_{nu-1} < |k| <= K_nu (nu >= 1) and 0 < |k| <= 1 for nu = 0."""
    values = norm.values(P.modes)
    shells = []
    for nu in range(nu_max + 1):
        hi = b ** nu
        mask = (values <= hi) & np.any(P.modes != 0, axis=1)
        if nu > 0:
            mask &= values > b ** (nu - 1)
        shells.append(P.restrict(mask))
    return shells


def epsilon_sums(shell_m: np.ndarray, cfg: IterationConfig, m: Weight) -> np.ndarray:
    """S_nu such that eps_nu = C S_nu, with m(b^-1) = 1 and d_{-1} = 0."""
    q, g, lam, b, bal = cfg.q, cfg.gamma, cfg.lam, cfg.b, cfg.balancing
    S = np.zeros(len(shell_m))
    for nu in range(len(shell_m)):
        total = 0.0
        for mu in range(nu + 1):
            if shell_m[mu] == 0:
                continue
            m_val = 1.0 if mu == 0 else float(m(b ** (mu - 1)))
            total += (q ** (nu - mu) * math.exp(-g * bal.partial_sum(mu, nu))
                      * math.exp(0.5 * (1 + lam) * b * bal.d(mu - 1)) / m_val * shell_m[mu])
        S[nu] = total
    return S


class IterationError(KamError):
    """A step failed; ``trace`` holds the rows recorded so far."""

    def __init__(self, cause: KamError, trace: IterationTrace, nu: int):
        super().__init__(f"iteration aborted at nu={nu}: {cause}")
        self.cause = cause
        self.trace = trace
        self.nu = nu


@dataclass
class IterationResult:
    omega_tilde: np.ndarray
    psi_hat: FourierField
    trace: IterationTrace
    final_defect: float


def kam_iterate(P: FourierField, omega: Frequency, config: IterationConfig, m: Weight,
                norm: IndexNorm) -> IterationResult:
    """Run steps nu = 0 .. nu_max-1; trace rows cover nu = 0 .. nu_max."""
    window = P.window
    d = window.size
    if P.components != d:
        raise ConfigError(f"perturbation has {P.components} components, window has {d}")
    if np.any(np.abs(P.constant_term()) > 0):
        raise ConfigError("perturbation must have zero constant mode")
    if config.smallness_threshold is not None:
        eps = m_norm(P, m, norm)
        if eps > config.smallness_threshold:
            raise SmallnessError(f"||P||_m = {eps:.6g} exceeds threshold {config.smallness_threshold:.6g}")

    trace = IterationTrace(warnings=config.warnings())
    shells = mode_shells(P, norm, config.b, config.nu_max + 1)
    shell_m = np.array([m_norm(s, m, norm) for s in shells])
    S = epsilon_sums(shell_m, config, m)

    omega_tilde = np.zeros(d)
    psi = FourierField.zeros(window, d)
    Q = shells[0]
    C = math.nan
    delta_prod = 1.0
    prev_dpsi = None
    P_partial = shells[0]

    for nu in range(config.nu_max + 1):
        K, sig = config.K(nu), config.sigma(nu)
        try:
            Delta, _ = delta_max(omega, K, norm)
        except KamError as exc:
            raise IterationError(exc, trace, nu) from exc
        Qn = sigma_norm(Q, sig, norm)
        if math.isnan(C) and S[nu] > 0:
            C = Qn / S[nu]
        eps = (C if not math.isnan(C) else 0.0) * S[nu]
        dpsi_norm = sigma_norm(jacobian(psi), sig, norm) if not psi.is_zero() else 0.0
        defect = conjugacy_defect(psi, omega_tilde, P_partial, omega, config.defect_points)
        row = TraceRow(nu, K, sig, Delta, Qn, eps, delta_prod - 1.0, _sup(omega_tilde), 0, math.nan,
                       defect, dpsi_norm=dpsi_norm,
                       sigma_ratio=config.sigma(nu + 1) / sig)
        trace.rows.append(row)
        if nu == config.nu_max:
            break

        inp = StepInput(psi, Q, omega, sig, config.lam, K, norm, config.tol,
                        config.enforce_smallness, series_tol=config.series_tol)
        try:
            out = kam_step(inp)
        except KamError as exc:
            raise IterationError(exc, trace, nu) from exc
        for w in out.diagnostics.warnings:
            trace.warnings.append(f"nu={nu}: {w}")
        if not out.diagnostics.residual_ok:
            trace.warnings.append(f"nu={nu}: residual bound 12 exp(-gamma sigma K) ||Q|| not met")
        row.step_iters = out.diagnostics.iterations
        row.contraction_factor = out.diagnostics.contraction_factor

        omega_next = omega_tilde + out.omega_prime.real
        sig_next = config.sigma(nu + 1)
        try:
            psi_next = out.phi_hat + compose_shift(psi, out.phi_hat, config.series_tol,
                                                   sigma=sig_next, norm=norm) if not psi.is_zero() else out.phi_hat
            Q_next = out.q_plus
            if not shells[nu + 1].is_zero():
                Q_next = Q_next + pullback(shells[nu + 1], psi_next, config.series_tol, sig_next, norm)
        except KamError as exc:
            raise IterationError(exc, trace, nu) from exc

        row.omega_step = _sup(omega_next - omega_tilde)
        diff = psi_next - psi
        row.dpsi_step = sigma_norm(jacobian(diff), 0.0, norm) if not diff.is_zero() else 0.0
        delta_prod *= 1.0 + 4.0 * Delta * eps

        omega_tilde, psi, Q = omega_next, psi_next, Q_next
        P_partial = P_partial + shells[nu + 1]

    trace.C = C
    final = conjugacy_defect(psi, omega_tilde, P, omega, config.defect_points)
    return IterationResult(omega_tilde, psi, trace, final)
