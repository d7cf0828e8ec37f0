"""Seeded property suite for the norm lemmas: Neumann inverse bounds, the
composition bound, the Cauchy estimates, the small divisor bound and residual
decay.  Each check records lhs / rhs; a lemma passes when every ratio is at
most 1 + slack."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fourier import (FourierField, MatrixFourierField, compose_shift, derivative_dot,
                      jacobian, neumann_inverse, truncate_residual)
from .lattice import CoordinateWindow
from .nonresonance import Frequency, homological_solve, inverse_divisor_max
from .norms import IndexNorm, sigma_norm

LEMMAS = ("neumann", "transformation", "cauchy", "cauchy_truncated", "cauchy_sup",
          "small_divisor", "residual")


@dataclass
class LemmaStats:
    worst_ratio: float = 0.0
    worst_case: int = -1
    checks: int = 0

    def add(self, lhs: float, rhs: float, case: int) -> None:
        self.checks += 1
        if rhs <= 0:
            ratio = 0.0 if lhs <= 0 else math.inf
        else:
            ratio = lhs / rhs
        if ratio > self.worst_ratio:
            self.worst_ratio, self.worst_case = ratio, case


@dataclass
class SuiteResult:
    seed: int
    cases: int
    slack: float
    stats: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(s.worst_ratio <= 1.0 + self.slack for s in self.stats.values())

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "cases": self.cases,
            "slack": self.slack,
            "pass": self.passed,
            "lemmas": {
                name: {"worst_ratio": s.worst_ratio,
                       "worst_slack": 1.0 - s.worst_ratio,
                       "worst_case": s.worst_case,
                       "checks": s.checks,
                       "pass": s.worst_ratio <= 1.0 + self.slack}
                for name, s in self.stats.items()
            },
        }


def random_window(rng: np.random.Generator, max_dim: int = 2) -> CoordinateWindow:
    n = int(rng.integers(1, max_dim + 1))
    labels = rng.choice(np.arange(-3, 4), size=n, replace=False)
    return CoordinateWindow(tuple(int(j) for j in labels))


def random_field(rng: np.random.Generator, window: CoordinateWindow, n_modes: int, max_index: int,
                 d: int = 1, scale: float = 1.0, real: bool = True, zero_mean: bool = False,
                 decay: float = 0.0) -> FourierField:
    """Random real (conjugate-symmetric) field with about ``n_modes`` modes of sup index <= max_index."""
    n = window.size
    half = max(1, n_modes // 2) if real else n_modes
    modes = rng.integers(-max_index, max_index + 1, size=(half, n))
    if zero_mean:
        zero = ~np.any(modes != 0, axis=1)
        modes[zero, 0] = 1
    coeffs = (rng.normal(size=(half, d)) + 1j * rng.normal(size=(half, d)))
    if decay:
        coeffs *= np.exp(-decay * np.abs(modes).sum(axis=1))[:, None]
    if real:
        modes = np.concatenate([modes, -modes])
        coeffs = np.concatenate([coeffs, np.conj(coeffs)]) / 2.0
    f = FourierField(window, modes, coeffs, real=real)
    total = float(np.abs(f.coeffs).max(axis=1).sum()) if len(f.modes) else 1.0
    return f.scale(scale / total) if total > 0 else f


def random_matrix_field(rng, window, n_modes, max_index, d, mu_target, sigma, norm):
    """I - A with ||A||_sigma = mu_target."""
    n = window.size
    modes = rng.integers(-max_index, max_index + 1, size=(n_modes, n))
    coeffs = rng.normal(size=(n_modes, d, d)) + 1j * rng.normal(size=(n_modes, d, d))
    A = MatrixFourierField(window, modes, coeffs)
    A = A.scale(mu_target / sigma_norm(A, sigma, norm))
    return MatrixFourierField.identity(window, d) - A, sigma_norm(A, sigma, norm)


def run_lemma_suite(seed: int = 42, cases: int = 200, slack: float = 1e-9,
                    max_modes: int = 50, max_index: int = 8) -> SuiteResult:
    rng = np.random.default_rng(seed)
    stats = {name: LemmaStats() for name in LEMMAS}
    for case in range(cases):
        window = random_window(rng)
        n = window.size
        norm = IndexNorm.eta_weighted(window, float(rng.uniform(0.0, 1.5)))
        sigma = float(rng.uniform(0.2, 2.0))
        alpha = float(rng.uniform(0.3, 0.9))
        n_modes = int(rng.integers(2, max_modes + 1))
        f = random_field(rng, window, n_modes, max_index, zero_mean=True)

        # Neumann bounds
        d = n
        mu = float(rng.uniform(0.05, 0.85))
        M, mu_actual = random_matrix_field(rng, window, int(rng.integers(1, 4)), 2, d, mu, sigma, norm)
        N = neumann_inverse(M, sigma, 1e-13, norm)
        stats["neumann"].add(sigma_norm(N, sigma, norm), 1.0 / (1.0 - mu_actual), case)
        stats["neumann"].add(sigma_norm(N - MatrixFourierField.identity(window, d), sigma, norm),
                             mu_actual / (1.0 - mu_actual), case)

        # composition bound ||f o phi||_sigma <= ||f||_{sigma + a}
        a_target = float(rng.uniform(0.0, 0.05))
        g = random_field(rng, window, 20, max_index // 2, zero_mean=True, decay=0.5)
        phi = random_field(rng, window, int(rng.integers(1, 5)), 2, d=n, scale=1.0)
        phi = phi.scale(a_target / max(sigma_norm(phi, sigma, norm), 1e-300))
        a = sigma_norm(phi, sigma, norm)
        comp = compose_shift(g, phi, 1e-15, sigma=sigma, norm=norm)
        stats["transformation"].add(sigma_norm(comp, sigma, norm), sigma_norm(g, sigma + a, norm), case)

        # Cauchy estimate for Df . phi
        psi = random_field(rng, window, int(rng.integers(1, 8)), 3, d=n)
        lhs = sigma_norm(derivative_dot(f, psi), alpha * sigma, norm)
        rhs = sigma_norm(f, sigma, norm) * sigma_norm(psi, alpha * sigma, norm) / (math.e * (1 - alpha) * sigma)
        stats["cauchy"].add(lhs, rhs, case)

        # Cauchy type: truncated derivative and sup bound
        K = max(float(rng.integers(1, 3 * max_index)), float(norm.coordinate_weights.min()))
        fK, _ = truncate_residual(f, K, norm)
        stats["cauchy_truncated"].add(sigma_norm(jacobian(fK), alpha * sigma, norm),
                                      K * sigma_norm(fK, alpha * sigma, norm), case)
        stats["cauchy_sup"].add(sigma_norm(jacobian(f), 0.0, norm),
                                sigma_norm(f, sigma, norm) / (math.e * sigma), case)

        # small divisor bound for the homological solution
        omega = Frequency(window, tuple(rng.uniform(1.0, 2.0, size=n)))
        gsol = homological_solve(f, omega, K, norm)
        stats["small_divisor"].add(sigma_norm(gsol, sigma, norm),
                                   inverse_divisor_max(omega, K, norm) * sigma_norm(f, sigma, norm), case)

        # residual decay
        _, fR = truncate_residual(f, K, norm)
        stats["residual"].add(sigma_norm(fR, alpha * sigma, norm),
                              math.exp(-(1 - alpha) * sigma * K) * sigma_norm(fR, sigma, norm), case)
    return SuiteResult(seed, cases, slack, stats)


# -- step lemma suite -------------------------------------------------------------

def random_step_input(rng: np.random.Generator, eta: float | None = None):
    """A StepInput meeting the step hypotheses: sigma K >= (1-lambda)^-1,
    4 Delta ||Q||_sigma <= kappa_ball and ||DPsi - I||_sigma <= 1/7."""
    from .engine import StepInput
    from .nonresonance import delta_max

    window = CoordinateWindow.first(2)
    norm = IndexNorm.eta_weighted(window, float(rng.uniform(0.0, 1.0)) if eta is None else eta)
    omega = Frequency(window, (1.0, float(rng.uniform(1.05, 1.95))))
    lam = float(rng.uniform(0.3, 0.7))
    K = float(rng.integers(2, 5))
    sigma = float(rng.uniform(1.0, 1.5)) / ((1.0 - lam) * K)
    Delta, _ = delta_max(omega, K, norm)
    alpha = (1 + lam) / 2
    kappa = min(0.25, 1 / alpha - 1)
    Q = random_field(rng, window, int(rng.integers(2, 9)), 3, d=2, zero_mean=bool(rng.integers(0, 2)))
    Q = Q.scale(float(rng.uniform(0.1, 0.9)) * kappa / (4 * Delta * sigma_norm(Q, sigma, norm)))
    psi = random_field(rng, window, 2, 2, d=2, zero_mean=True)
    Dn = sigma_norm(jacobian(psi), sigma, norm)
    psi = psi.scale(float(rng.uniform(0.0, 0.9)) / (7.0 * Dn))
    return StepInput(psi, Q, omega, sigma, lam, K, norm), Delta


def random_ball_point(rng, inp, Delta: float):
    """(omega', phi_hat) with Delta |omega'| and K ||phi_hat||_{alpha sigma} inside the ball radius."""
    R = 4.0 * Delta * sigma_norm(inp.Q, inp.sigma, inp.norm)
    w = rng.uniform(-1, 1, size=2)
    w *= float(rng.uniform(0, 1)) * R / (Delta * np.abs(w).max())
    phi = random_field(rng, inp.Q.window, int(rng.integers(2, 7)), int(inp.K), d=2, zero_mean=True)
    phi, _ = truncate_residual(phi, inp.K, inp.norm)
    phi = phi.without_constant()
    nrm = sigma_norm(phi, inp.alpha * inp.sigma, inp.norm)
    if nrm > 0:
        phi = phi.scale(float(rng.uniform(0, 1)) * R / (inp.K * nrm))
    return w, phi


def run_step_suite(seed: int = 7, cases: int = 50, pairs: int = 4) -> dict:
    """Contraction factor of the step map and the ball / residual bounds of the step output."""
    from .engine import contraction_apply, kam_step, step_metric, theta_of

    rng = np.random.default_rng(seed)
    worst_factor = 0.0
    worst_ball = 0.0
    worst_residual = 0.0
    records = []
    for case in range(cases):
        inp, Delta = random_step_input(rng)
        Theta = theta_of(inp.psi_hat, inp.sigma, inp.series_tol, inp.norm)
        kw = dict(Q=inp.Q, Theta=Theta, omega=inp.omega, K=inp.K, sigma=inp.sigma,
                  alpha=inp.alpha, norm=inp.norm, tol=inp.series_tol)
        case_factor = 0.0
        for _ in range(pairs):
            wa, pa = random_ball_point(rng, inp, Delta)
            wb, pb = random_ball_point(rng, inp, Delta)
            wa1, pa1 = contraction_apply(wa, pa, **kw)
            wb1, pb1 = contraction_apply(wb, pb, **kw)
            before = step_metric(wa - wb, pa - pb, Delta, inp.K, inp.alpha * inp.sigma, inp.norm)
            after = step_metric(wa1 - wb1, pa1 - pb1, Delta, inp.K, inp.alpha * inp.sigma, inp.norm)
            if before > 0:
                case_factor = max(case_factor, after / before)
        out = kam_step(inp)
        dg = out.diagnostics
        ball = dg.ball_lhs / dg.ball_radius if dg.ball_radius > 0 else 0.0
        res = dg.residual_lhs / dg.residual_rhs if dg.residual_rhs > 0 else 0.0
        worst_factor = max(worst_factor, case_factor)
        worst_ball = max(worst_ball, ball)
        worst_residual = max(worst_residual, res)
        records.append({"case": case, "factor": case_factor, "ball_ratio": ball,
                        "residual_ratio": res, "iterations": dg.iterations})
    return {"seed": seed, "cases": cases, "pairs": pairs, "worst_factor": worst_factor,
            "worst_ball_ratio": worst_ball, "worst_residual_ratio": worst_residual,
            "records": records}
