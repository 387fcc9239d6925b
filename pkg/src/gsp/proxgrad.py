"""First-order solvers: soft-thresholding iteration and projected gradient.

Both methods initialize the step size with the Barzilai-Borwein secant
estimate.  The signed solver backtracks until the closed loop stays positive
definite and the quadratic upper model holds, which makes the objective trace
monotone; the resistive solver uses a non-monotone max-of-recent acceptance
rule and needs no feasibility check (the cone is automatically feasible for
connected plants).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .duality import DualCertificate, certify
from .errors import (
    CertificateInvalidError,
    CertificateUnavailableError,
    InfeasiblePointError,
    InfeasibleStartError,
    InvalidInputError,
)
from .graphs import Problem
from .objective import Objective


@dataclass
class ProxGradOptions:
    """Tuning knobs for the first-order solvers."""

    max_iters: int = 10000
    alpha_fallback: float = 1.0  # initial step when the BB estimate is undefined
    backtrack_shrink: float = 0.5
    alpha_min: float = 1e-12
    alpha_max: float = 1e12
    tol_gap: float = 1e-4
    tol_rd: float = 1e-3
    nonmonotone_memory: int = 10  # resistive only
    report_every: int = 10  # certification interval

    def __post_init__(self):
        if not 0 < self.alpha_min <= self.alpha_max:
            raise InvalidInputError("need 0 < alpha_min <= alpha_max")
        if not 0 < self.backtrack_shrink < 1:
            raise InvalidInputError("backtrack_shrink must lie in (0, 1)")
        if self.tol_gap <= 0 or self.tol_rd <= 0:
            raise InvalidInputError("tolerances must be positive")


@dataclass
class SolveReport:
    """Iterate history and termination summary of one solver run."""

    iterations: int = 0
    objective_trace: list = field(default_factory=list)
    step_trace: list = field(default_factory=list)
    gap_trace: list = field(default_factory=list)
    status: str = "max_iters"
    wall_time: float = 0.0
    final_gap: float = float("nan")
    final_rd_norm: float = float("nan")
    certificate: DualCertificate | None = None


def soft_threshold(v, kappa):
    """Elementwise shrinkage ``sign(v) max(|v| - kappa, 0)``."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.clip(np.abs(v) - kappa, 0.0, None)


def bb_step(x_k, x_prev, g_k, g_prev, opts: ProxGradOptions) -> float:
    """Secant step estimate, clamped; falls back on degenerate curvature."""
    dx = np.asarray(x_k) - np.asarray(x_prev)
    dg = np.asarray(g_k) - np.asarray(g_prev)
    denom = float(dx @ dg)
    if not np.isfinite(denom) or denom <= 0.0:
        return opts.alpha_fallback
    alpha = float(dx @ dx) / denom
    if not np.isfinite(alpha):
        return opts.alpha_fallback
    return float(np.clip(alpha, opts.alpha_min, opts.alpha_max))


def _gamma_vector(problem: Problem, weights) -> np.ndarray:
    g = np.full(problem.m, problem.gamma)
    if weights is not None:
        g = g * np.asarray(weights, dtype=float).reshape(-1)
    return g


class _Certifier:
    """Runs certification with graceful degradation to objective-change stops."""

    def __init__(self, problem, objective, weights):
        self.problem = problem
        self.objective = objective
        self.weights = weights
        self.available = problem.scalar_r is not None

    def __call__(self, state):
        if not self.available:
            return None
        try:
            return certify(self.problem, self.objective, state, self.weights)
        except (CertificateUnavailableError, CertificateInvalidError):
            return None


def _finish(report, t0, cert):
    report.wall_time = time.perf_counter() - t0
    if cert is not None:
        report.final_gap = cert.gap
        report.final_rd_norm = cert.rd_norm
        report.certificate = cert
    return report


def solve_ista(problem: Problem, x0=None, opts: ProxGradOptions | None = None,
               weights=None):
    """Soft-thresholding iteration for the signed problem.

    Returns ``(x, SolveReport)``.  ``weights`` optionally replaces the uniform
    penalty with a per-edge weighted one.
    """
    if problem.resistive:
        raise InvalidInputError("solve_ista handles the signed problem; "
                                "use solve_projected for resistive problems")
    opts = opts or ProxGradOptions()
    obj = Objective(problem)
    gam = _gamma_vector(problem, weights)
    t0 = time.perf_counter()

    if x0 is None:
        x0 = np.ones(problem.m)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    try:
        st = obj.state(x0)
    except InfeasiblePointError as exc:
        raise InfeasibleStartError(str(exc)) from exc

    certifier = _Certifier(problem, obj, weights)
    report = SolveReport()
    x = x0
    F = st.J + float(gam @ np.abs(x))
    report.objective_trace.append(F)
    cert = None
    x_prev = g_prev = None
    flat_count = 0

    if problem.m == 0:
        report.status = "converged"
        return x, _finish(report, t0, certifier(st))

    for k in range(1, opts.max_iters + 1):
        if x_prev is None:
            alpha = opts.alpha_fallback
        else:
            alpha = bb_step(x, x_prev, st.grad, g_prev, opts)

        # backtrack until feasible and majorized
        while True:
            trial = soft_threshold(x - alpha * st.grad, alpha * gam)
            delta = trial - x
            step_sq = float(delta @ delta)
            if step_sq == 0.0:
                trial_cl, J_trial = st.cl, st.J
                break
            trial_cl = obj.closed_loop(trial)
            if trial_cl.positive_definite:
                J_trial = obj.value_at(trial_cl, trial)
                bound = st.J + float(st.grad @ delta) + step_sq / (2.0 * alpha)
                if J_trial <= bound + 1e-12:
                    break
            if alpha <= opts.alpha_min:
                break
            alpha = max(alpha * opts.backtrack_shrink, opts.alpha_min)

        x_prev, g_prev = x, st.grad
        x = trial
        st = obj.state(x, trial_cl)
        F_new = st.J + float(gam @ np.abs(x))
        report.iterations = k
        report.step_trace.append(alpha)
        report.objective_trace.append(F_new)

        if abs(F_new - F) <= 1e-10 * max(1.0, abs(F_new)):
            flat_count += 1
        else:
            flat_count = 0
        F = F_new

        # an exact fixed point of the prox map is optimal for the convex problem
        stationary = step_sq == 0.0
        if k % opts.report_every == 0 or stationary or flat_count >= 5:
            cert = certifier(st)
            if cert is not None:
                report.gap_trace.append(cert.gap)
                if stationary or (cert.gap <= opts.tol_gap
                                  and cert.rd_norm <= opts.tol_rd):
                    report.status = "converged"
                    return x, _finish(report, t0, cert)
            elif flat_count >= 5 or stationary:
                report.status = "converged"
                return x, _finish(report, t0, None)

    report.status = "max_iters"
    return x, _finish(report, t0, certifier(st))


def solve_projected(problem: Problem, x0=None,
                    opts: ProxGradOptions | None = None, weights=None):
    """Projected gradient with non-monotone BB steps for resistive problems."""
    if not problem.resistive:
        raise InvalidInputError("solve_projected requires a resistive problem")
    opts = opts or ProxGradOptions()
    obj = Objective(problem)
    gam = _gamma_vector(problem, weights)
    t0 = time.perf_counter()

    if x0 is None:
        x0 = np.zeros(problem.m)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size and x0.min() < 0:
        raise InvalidInputError("resistive starting point must be non-negative")

    certifier = _Certifier(problem, obj, weights)
    report = SolveReport()
    x = x0
    st = obj.state(x)
    f = st.J + float(gam @ x)
    grad_f = st.grad + gam
    report.objective_trace.append(f)
    recent = [f]
    cert = None
    x_prev = g_prev = None

    if problem.m == 0:
        report.status = "converged"
        return x, _finish(report, t0, certifier(st))

    for k in range(1, opts.max_iters + 1):
        if x_prev is None:
            alpha = opts.alpha_fallback
        else:
            alpha = bb_step(x, x_prev, grad_f, g_prev, opts)

        f_ref = max(recent)
        while True:
            trial = np.clip(x - alpha * grad_f, 0.0, None)
            delta = trial - x
            step_sq = float(delta @ delta)
            if step_sq == 0.0:
                trial_cl, J_trial = st.cl, st.J
                break
            trial_cl = obj.closed_loop(trial)
            J_trial = obj.value_at(trial_cl, trial)
            if J_trial + float(gam @ trial) <= f_ref - 1e-4 * step_sq / alpha:
                break
            if alpha <= opts.alpha_min:
                break
            alpha = max(alpha * opts.backtrack_shrink, opts.alpha_min)

        x_prev, g_prev = x, grad_f
        x = trial
        st = obj.state(x, trial_cl)
        f = st.J + float(gam @ x)
        grad_f = st.grad + gam
        recent.append(f)
        if len(recent) > opts.nonmonotone_memory:
            recent.pop(0)
        report.iterations = k
        report.step_trace.append(alpha)
        report.objective_trace.append(f)

        # an exact fixed point of the projection map is optimal
        stationary = step_sq == 0.0
        if k % opts.report_every == 0 or stationary:
            cert = certifier(st)
            if cert is not None:
                report.gap_trace.append(cert.gap)
                if stationary or (cert.gap <= opts.tol_gap
                                  and cert.rd_norm <= opts.tol_rd):
                    report.status = "converged"
                    return x, _finish(report, t0, cert)
            elif stationary:
                report.status = "converged"
                return x, _finish(report, t0, None)

    report.status = "max_iters"
    return x, _finish(report, t0, certifier(st))
