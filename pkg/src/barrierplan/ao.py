"""Alternating-optimization baseline: exact plane solves, then theta steps.

Each iteration first solves every pair's plane subproblem exactly (same
inner Newton as the implicit solver, warm-started), then freezes the
planes and takes one adjusted-Newton step on theta using only the
theta-blocks of the gradient and Hessian — no plane/configuration cross
terms.  Dropping the coupling is what limits the scheme to first-order
convergence; it shares the barrier, line search, feasibility filter, and
stopping test with the second-order solvers so benchmark comparisons
isolate exactly that coupling.

The traced objective is the full inner energy (pair penalties plus the
norm-barrier terms), which both half-steps decrease monotonically.
"""

from __future__ import annotations

import numpy as np

from .barrier import norm_barrier_value, pair_penalty_blocks
from .common import (
    CONVERGED,
    MAX_ITERS,
    STALLED,
    IterationRecord,
    SolveResult,
    SolverSettings,
    SolveTrace,
    Stopwatch,
    backtrack_line_search,
    eigen_adjust,
)
from .icb import _solve_all_inner


def ao_solve(problem, settings=None):
    """Minimize the barrier-augmented objective by alternating exact
    plane solves with theta-only block Newton steps.

    Returns a SolveResult; converged when the theta-gradient infinity
    norm at the freshly solved planes falls below ``settings.eps`` (the
    plane residuals are at the inner tolerance by construction).
    """
    settings = settings or SolverSettings()
    watch = Stopwatch()
    theta = problem.theta0.copy()
    pairs = problem.check_feasible_start(theta).copy()

    inner_counts = []
    trace = SolveTrace(
        iterates=[] if settings.record_iterates else None,
        inner_iterations=inner_counts,
    )
    if settings.record_iterates:
        trace.iterates.append(theta.copy())
    pending_alpha = None
    iteration = 0

    while True:
        _solve_all_inner(problem, theta, pairs, settings, inner_counts)
        obj_value, obj_grad, obj_hess = problem.objective_eval(theta)
        kins = problem.kinematics_map(theta, pairs.keys())
        value = obj_value
        grad = obj_grad.copy()
        hess = obj_hess.copy()
        for key in pairs.keys():
            a, b, s = key
            blocks = pair_penalty_blocks(
                problem.barrier, pairs.plane(key), kins[(a, s)], kins[(b, s)]
            )
            value += blocks.value + norm_barrier_value(
                problem.barrier, pairs.plane(key).n
            )
            grad += blocks.grad_theta
            hess += blocks.H_thetatheta
        grad_inf = float(np.max(np.abs(grad))) if grad.size else 0.0

        if pending_alpha is None:
            trace.initial_objective = value
            trace.initial_grad_inf_norm = grad_inf
        else:
            trace.records.append(
                IterationRecord(
                    iter=iteration,
                    objective=value,
                    grad_inf_norm=grad_inf,
                    alpha=pending_alpha,
                    active_pairs=len(pairs),
                    elapsed_s=watch.elapsed(),
                )
            )
        if grad_inf <= settings.eps:
            trace.termination = CONVERGED
            break
        if iteration >= settings.max_iters:
            trace.termination = MAX_ITERS
            break

        delta = np.linalg.solve(eigen_adjust(hess, settings.eps1), -grad)
        planes = {key: pairs.plane(key) for key in pairs.keys()}

        def trial_value(alpha):
            theta_t = theta + alpha * delta
            if problem.activation_blocked(theta_t, pairs):
                return np.inf
            pair_total = problem.pairs_value(
                theta_t, pairs.keys(), planes, include_norm_barrier=True
            )
            if not np.isfinite(pair_total):
                return np.inf
            return problem.objective_value(theta_t) + pair_total

        alpha, _ = backtrack_line_search(
            value, trial_value, shrink=settings.shrink, min_step=settings.min_step
        )
        if alpha is None:
            trace.termination = STALLED
            break

        theta = theta + alpha * delta
        pairs = problem.broadphase(theta, pairs)
        pending_alpha = alpha
        iteration += 1
        if settings.record_iterates:
            trace.iterates.append(theta.copy())

    return SolveResult(theta=theta, pairs=pairs, trace=trace)
