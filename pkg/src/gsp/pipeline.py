"""End-to-end design flows: gamma sweeps, reweighting, polishing, gamma_max."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InfeasibleSupportError, InfeasibleStartError, InvalidInputError, UnsupportedError
from .graphs import Problem
from .objective import Objective, edge_quad_diag
from .proxgrad import ProxGradOptions, solve_ista, solve_projected
from .proxnewton import NewtonOptions, solve_newton

#: absolute threshold for support detection before polishing
ZERO_TOL = 1e-6

#: default epsilon in the reweighting update 1 / (|x| + eps)
REWEIGHT_EPS = 1e-3


@dataclass(frozen=True)
class TradeoffPoint:
    """One point on the sparsity/performance tradeoff curve."""

    gamma: float
    cardinality: int
    J_sparse: float  # objective of the thresholded solve
    J_polished: float
    rel_performance_loss: float  # (J_polished - J_c) / J_c
    rel_cardinality: float
    iterations: int
    wall_time: float


def gamma_max(problem: Problem) -> float:
    """Smallest penalty for which the optimal design adds no edges.

    Defined for connected plants as the infinity norm of
    ``diag(E^T G_p^-1 Q G_p^-1 E)``, evaluated per edge from four entries of
    the dense middle matrix.
    """
    if not problem.plant.connected:
        raise UnsupportedError("gamma_max is defined for connected plants only")
    if problem.m == 0:
        return 0.0
    c = scipy.linalg.cho_factor(problem.plant.G, lower=True, check_finite=False)
    M = scipy.linalg.cho_solve(c, scipy.linalg.cho_solve(c, problem.Q).T,
                               check_finite=False)
    M = 0.5 * (M + M.T)
    return float(np.max(edge_quad_diag(M, problem.candidates.pairs)))


def default_gamma_grid(problem: Problem, count: int = 50,
                       lo_frac: float = 1e-3) -> np.ndarray:
    """Logarithmic grid spanning ``[lo_frac * gamma_max, gamma_max]``."""
    gmax = gamma_max(problem)
    return np.geomspace(lo_frac * gmax, gmax, count)


def _solve(problem: Problem, method: str, x0, opts, weights=None):
    """Dispatch one solve by method name: proxbb, proxn or projgrad."""
    if method == "proxn":
        nopts = opts if isinstance(opts, NewtonOptions) else NewtonOptions()
        return solve_newton(problem, x0, nopts, weights)
    gopts = opts if isinstance(opts, ProxGradOptions) else ProxGradOptions()
    if problem.resistive:
        if method in ("proxbb", "projgrad"):
            return solve_projected(problem, x0, gopts, weights)
    elif method == "proxbb":
        return solve_ista(problem, x0, gopts, weights)
    elif method == "projgrad":
        raise InvalidInputError("projgrad requires a resistive problem")
    raise InvalidInputError(f"unknown method {method!r}")


def solve_centralized(problem: Problem, method: str = "proxn", opts=None):
    """Solve the unpenalized problem (the dense baseline design)."""
    return _solve(problem.with_gamma(0.0), method, None, opts)


def polish(problem: Problem, support) -> tuple[np.ndarray, float]:
    """Re-optimize weights on a fixed support with the penalty removed.

    Returns the weights embedded back into the full candidate space together
    with the polished objective value.
    """
    support = np.asarray(support, dtype=np.intp).reshape(-1)
    obj = Objective(problem)
    if support.size == 0:
        if not problem.plant.connected:
            raise InfeasibleSupportError("empty support on a disconnected plant")
        x0 = np.zeros(problem.m)
        return x0, obj.value(x0)
    reduced = problem.restrict(support).with_gamma(0.0)
    try:
        x0 = np.zeros(support.size) if reduced.resistive else None
        x_red, _ = solve_newton(reduced, x0)
    except InfeasibleStartError as exc:
        raise InfeasibleSupportError(
            "support cannot make the closed loop positive definite"
        ) from exc
    x = np.zeros(problem.m)
    x[support] = x_red
    return x, obj.value(x)


def reweight_update(x, epsilon: float = REWEIGHT_EPS) -> np.ndarray:
    """Penalty weights inversely proportional to the current magnitudes."""
    return 1.0 / (np.abs(np.asarray(x, dtype=float)) + epsilon)


def reweighted_path(problem: Problem, gammas, epsilon: float = REWEIGHT_EPS,
                    solver: str = "proxn", opts=None,
                    passes_per_gamma: int = 1):
    """Path-following solves with iteratively reweighted penalties.

    The unpenalized solution initializes the weights; each subsequent gamma is
    warm-started from the previous solution and followed by a weight update.
    ``passes_per_gamma > 1`` enables the fixed-gamma multi-pass mode (stops
    early once the weights settle below 1e-6).
    """
    gammas = np.asarray(gammas, dtype=float).reshape(-1)
    if gammas.size and np.any(np.diff(gammas) < 0):
        raise InvalidInputError("gammas must be ascending")
    if epsilon <= 0:
        raise InvalidInputError("epsilon must be positive")
    x_c, _ = solve_centralized(problem, solver, opts)
    w = reweight_update(x_c, epsilon)
    x_prev = x_c
    out = []
    for g in gammas:
        prob_g = problem.with_gamma(float(g))
        x = x_prev
        for _ in range(max(1, passes_per_gamma)):
            try:
                x, _ = _solve(prob_g, solver, x, opts, weights=w)
            except InfeasibleStartError:
                x, _ = _solve(prob_g, solver, np.ones(problem.m), opts, weights=w)
            w_new = reweight_update(x, epsilon)
            settled = np.max(np.abs(w_new - w), initial=0.0) <= 1e-6
            w = w_new
            if settled:
                break
        out.append((float(g), x))
        x_prev = x
    return out


def sweep(problem: Problem, gammas, solver: str = "proxn", opts=None,
          use_reweighting: bool = False, zero_tol: float = ZERO_TOL,
          warm_start: bool = True, jobs: int = 1) -> list[TradeoffPoint]:
    """Tradeoff curve: solve, threshold, polish and normalize for each gamma.

    Gamma points may only run concurrently (``jobs > 1``) when both
    warm-starting and reweighting are disabled; the path-following modes are
    sequential by construction.
    """
    gammas = np.asarray(gammas, dtype=float).reshape(-1)
    if jobs > 1 and (warm_start or use_reweighting):
        raise InvalidInputError("parallel sweeps require cold starts and "
                                "no reweighting")
    obj = Objective(problem)
    x_c, _ = solve_centralized(problem, solver, opts)
    J_c = obj.value(x_c)
    card_c = int(np.count_nonzero(np.abs(x_c) > zero_tol))

    points = []
    if use_reweighting:
        solutions = [(g, x, 0) for g, x in
                     reweighted_path(problem, gammas, solver=solver, opts=opts)]
    elif not warm_start:
        def one(g):
            x, rep = _solve(problem.with_gamma(float(g)), solver, None, opts)
            return float(g), x, rep.iterations

        if jobs > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=jobs) as pool:
                solutions = list(pool.map(one, gammas))
        else:
            solutions = [one(g) for g in gammas]
    else:
        solutions = []
        x_prev = x_c
        for g in gammas:
            prob_g = problem.with_gamma(float(g))
            try:
                x, rep = _solve(prob_g, solver, x_prev, opts)
            except InfeasibleStartError:
                x, rep = _solve(prob_g, solver, None, opts)
            solutions.append((float(g), x, rep.iterations))
            x_prev = x

    for (g, x, iters) in solutions:
        t0 = time.perf_counter()
        prob_g = problem.with_gamma(g)
        support = np.flatnonzero(np.abs(x) > zero_tol)
        J_sparse = obj.value(np.where(np.abs(x) > zero_tol, x, 0.0))
        x_pol, J_pol = polish(prob_g, support)
        card = int(support.size)
        points.append(TradeoffPoint(
            gamma=g,
            cardinality=card,
            J_sparse=J_sparse,
            J_polished=J_pol,
            rel_performance_loss=(J_pol - J_c) / J_c,
            rel_cardinality=card / card_c if card_c else float("nan"),
            iterations=iters,
            wall_time=time.perf_counter() - t0,
        ))
    return points
