"""Implicit-plane Newton solver over the configuration alone.

Each pair's plane is the unique minimizer of the smoothed plane
subproblem (pair penalty plus a barrier on 1 - |n|), solved to high
accuracy per outer iteration with warm starts.  The plane is then an
implicit function of the configuration; its first and second derivatives
follow from the stationarity condition, and one Newton step is taken on
the reduced objective

    value(theta) = objective(theta) + sum of pair penalties at the
                   implicit planes,

which by default excludes the norm-barrier regularization term (it only
exists to make the inner map well-defined; a flag adds it for
consistency checks).  The line search re-solves every inner subproblem
at each trial point; trials that lose a separating plane or newly
activate a touching pair evaluate to +inf.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .barrier import (
    norm_barrier_derivs,
    norm_barrier_third,
    pair_penalty_value,
    pair_side_data,
    plane_energy,
)
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
from .errors import BoundaryViolationError, InnerSolveError, NoSeparatingPlaneError
from .geometry import SeparatingPlane, closest_points, midplane_from_closest


@dataclass
class InnerSolveState:
    """Solution of one pair's plane subproblem.

    The plane has |n| strictly below 1; ``G_tilde``/``H_tilde`` are the
    gradient and Hessian of the inner energy at the solution.
    """

    plane: SeparatingPlane
    G_tilde: np.ndarray  # (4,)
    H_tilde: np.ndarray  # (4, 4)
    converged: bool
    warm: bool
    iterations: int = 0
    energy: float = np.nan


@dataclass
class ImplicitPlaneDerivatives:
    dp_dtheta: np.ndarray  # (4, dim)
    d2p_dtheta2: np.ndarray  # (4, dim, dim), symmetric in the theta indices


def _cold_start(verts_first, verts_second, contact_threshold):
    res = closest_points(verts_first, verts_second)
    if res.distance <= contact_threshold:
        raise NoSeparatingPlaneError(
            f"no separating plane: closest distance {res.distance:.3e}"
        )
    # shrinking the whole midplane vector keeps every margin positive and
    # leaves slack in the norm barrier
    return 0.99 * midplane_from_closest(res).as_vector()


def inner_solve(
    barrier,
    verts_first,
    verts_second,
    warm_start=None,
    tol=1e-10,
    max_iters=80,
    contact_threshold=1e-9,
    cold_fallback=True,
):
    """Newton solve of one plane subproblem: pair penalty + norm barrier.

    ``warm_start`` is tried first and silently replaced by the scaled
    midplane when it is infeasible at the current vertices; passing
    ``cold_fallback=False`` turns that replacement into a
    NoSeparatingPlaneError instead, which pins the solve to the branch of
    the implicit plane the warm start belongs to (a trial step that flips
    a body to the other side of its plane must not be certified by a
    freshly re-seeded plane).  Raises NoSeparatingPlaneError when the
    bodies touch or overlap and InnerSolveError when Newton fails to
    reach ``tol``.
    """
    warm = False
    p = None
    if warm_start is not None:
        cand = warm_start.as_vector().astype(float, copy=True)
        try:
            value, grad, hess = plane_energy(barrier, cand, verts_first, verts_second)
            p, warm = cand, True
        except BoundaryViolationError as err:
            if not cold_fallback:
                raise NoSeparatingPlaneError(
                    f"warm-start plane infeasible and cold restarts disabled: {err}"
                ) from err
            p = None
    if p is None:
        p = _cold_start(verts_first, verts_second, contact_threshold)
        try:
            value, grad, hess = plane_energy(barrier, p, verts_first, verts_second)
        except BoundaryViolationError as err:
            # the scaled midplane is the constructive feasible point; when
            # even it violates in floats the bodies are numerically touching
            raise NoSeparatingPlaneError(
                f"midplane infeasible at float resolution: {err}"
            ) from err

    iterations = 0
    converged = False
    while iterations < max_iters:
        if np.max(np.abs(grad)) <= tol:
            converged = True
            break
        try:
            delta = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError as err:
            raise InnerSolveError(f"singular inner Hessian: {err}") from err
        # affine-invariant fallback: in heavily squeezed states the
        # gradient scale explodes with the barrier curvature and the
        # absolute test above is unattainable; the Newton decrement
        # sqrt(g' H^-1 g) is the same test in the metric of the problem
        decrement_sq = float(-grad @ delta)
        if 0.0 <= decrement_sq <= tol * tol:
            converged = True
            break

        def trial(alpha, p=p, delta=delta):
            q = p + alpha * delta
            return pair_penalty_value(
                barrier,
                SeparatingPlane(n=q[:3], d=q[3]),
                verts_first,
                verts_second,
                include_norm_barrier=True,
            )

        alpha, _ = backtrack_line_search(value, trial)
        if alpha is None:
            # the remaining decrease is below float resolution of the
            # energy; fall back to full steps judged by the gradient norm
            q = p + delta
            try:
                v2, g2, h2 = plane_energy(barrier, q, verts_first, verts_second)
            except BoundaryViolationError:
                break
            if np.max(np.abs(g2)) >= np.max(np.abs(grad)):
                break
            p, value, grad, hess = q, v2, g2, h2
            iterations += 1
            continue
        p = p + alpha * delta
        value, grad, hess = plane_energy(barrier, p, verts_first, verts_second)
        iterations += 1

    if not converged:
        raise InnerSolveError(
            f"inner solve stopped at residual {np.max(np.abs(grad)):.3e} "
            f"after {iterations} iterations"
        )
    return InnerSolveState(
        plane=SeparatingPlane(n=p[:3].copy(), d=float(p[3])),
        G_tilde=grad,
        H_tilde=hess,
        converged=converged,
        warm=warm,
        iterations=iterations,
        energy=value,
    )


@dataclass
class _PairAssembly:
    """Everything the outer step needs from one pair at its inner plane."""

    value: float
    grad_theta: np.ndarray  # (dim,) total derivative of the pair value
    hess_theta: np.ndarray  # (dim, dim) total second derivative
    derivs: ImplicitPlaneDerivatives


def implicit_derivatives(state, barrier, kin_first, kin_second):
    """First and second derivatives of the implicit plane in theta.

    Differentiates the inner stationarity condition; needs barrier third
    derivatives and the vertex position Hessians.  Cost is linear in the
    pair's vertex count.
    """
    if not state.converged:
        raise InnerSolveError("implicit derivatives require a converged inner state")
    plane = state.plane
    dim = kin_first.jacobian.shape[2]
    H = state.H_tilde

    G_theta = np.zeros((4, dim))
    G_thth = np.zeros((4, dim, dim))
    dH_dtheta = np.zeros((4, 4, dim))
    dH_dp = np.zeros((4, 4, 4))
    for sign, kin in ((-1.0, kin_first), (1.0, kin_second)):
        s = pair_side_data(barrier, sign, kin, plane)
        G_theta += np.einsum("v,va,vm->am", s.p2, s.y, s.g)
        G_theta += sign * np.einsum("v,vam->am", s.p1, s.Y)
        G_thth += sign * np.einsum("v,vm,vn,va->amn", s.p3, s.g, s.g, s.y)
        G_thth += np.einsum("v,vmn,va->amn", s.p2, s.h, s.y)
        G_thth += np.einsum("v,vm,van->amn", s.p2, s.g, s.Y)
        G_thth += np.einsum("v,vn,vam->amn", s.p2, s.g, s.Y)
        G_thth[:3] += sign * np.einsum("v,vamn->amn", s.p1, s.hessian)
        dH_dtheta += sign * np.einsum("v,vm,va,vb->abm", s.p3, s.g, s.y, s.y)
        dH_dtheta += np.einsum("v,vam,vb->abm", s.p2, s.Y, s.y)
        dH_dtheta += np.einsum("v,va,vbm->abm", s.p2, s.y, s.Y)
        dH_dp += sign * np.einsum("v,va,vb,vc->abc", s.p3, s.y, s.y, s.y)
    dH_dp[:3, :3, :3] += norm_barrier_third(barrier, plane.n)

    S = -np.linalg.solve(H, G_theta)
    bracket = (
        G_thth
        + np.einsum("abn,bm->amn", dH_dtheta, S)
        + np.einsum("abm,bn->amn", dH_dtheta, S)
        + np.einsum("abc,bm,cn->amn", dH_dp, S, S)
    )
    D2 = -np.linalg.solve(H, bracket.reshape(4, dim * dim)).reshape(4, dim, dim)
    return ImplicitPlaneDerivatives(dp_dtheta=S, d2p_dtheta2=D2)


def _assemble_pair(state, barrier, kin_first, kin_second, include_norm_barrier):
    """Value and total theta-derivatives of one pair at its implicit plane."""
    plane = state.plane
    dim = kin_first.jacobian.shape[2]
    value = 0.0
    grad_p = np.zeros(4)
    grad_theta = np.zeros(dim)
    H_pp = np.zeros((4, 4))
    H_ptheta = np.zeros((4, dim))
    H_thth = np.zeros((dim, dim))
    for sign, kin in ((-1.0, kin_first), (1.0, kin_second)):
        s = pair_side_data(barrier, sign, kin, plane)
        value += float(barrier.value(s.margins).sum())
        grad_p += sign * s.p1 @ s.y
        grad_theta += sign * s.p1 @ s.g
        H_pp += np.einsum("v,va,vb->ab", s.p2, s.y, s.y)
        H_ptheta += np.einsum("v,va,vm->am", s.p2, s.y, s.g)
        H_ptheta += sign * np.einsum("v,vam->am", s.p1, s.Y)
        H_thth += np.einsum("v,vm,vn->mn", s.p2, s.g, s.g)
        H_thth += sign * np.einsum("v,vmn->mn", s.p1, s.h)
    if include_norm_barrier:
        nval, ngrad, nhess = norm_barrier_derivs(barrier, plane.n)
        value += nval
        grad_p[:3] += ngrad
        H_pp[:3, :3] += nhess

    derivs = implicit_derivatives(state, barrier, kin_first, kin_second)
    S = derivs.dp_dtheta
    total_grad = grad_theta + S.T @ grad_p
    cross = H_ptheta.T @ S
    total_hess = (
        H_thth
        + cross
        + cross.T
        + S.T @ H_pp @ S
        + np.einsum("a,amn->mn", grad_p, derivs.d2p_dtheta2)
    )
    return _PairAssembly(
        value=value, grad_theta=total_grad, hess_theta=total_hess, derivs=derivs
    )


def implicit_objective(problem, theta, pair_states, include_norm_barrier=False):
    """Reduced objective with every plane at its inner solution.

    ``pair_states`` maps pair key to a converged InnerSolveState.  Returns
    ``(value, grad, hess)`` with total derivatives through the implicit
    planes; with no pairs this is exactly the problem objective.
    """
    value, grad, hess = problem.objective_eval(theta)
    if not pair_states:
        return value, grad, hess
    kins = problem.kinematics_map(theta, pair_states.keys())
    grad = grad.copy()
    hess = hess.copy()
    for key, state in pair_states.items():
        a, b, s = key
        assembled = _assemble_pair(
            state, problem.barrier, kins[(a, s)], kins[(b, s)], include_norm_barrier
        )
        value += assembled.value
        grad += assembled.grad_theta
        hess += assembled.hess_theta
    return value, grad, hess


def _solve_all_inner(problem, theta, pairs, settings, counts=None):
    """Inner-solve every pair at theta, warm-starting from stored planes.

    Returns the states by key and stores each solution plane back into
    ``pairs``.  Propagates NoSeparatingPlaneError / InnerSolveError.
    """
    positions = problem.positions_map(theta, pairs.keys())
    states = {}
    for key in pairs.keys():
        a, b, s = key
        state = inner_solve(
            problem.barrier,
            positions[(a, s)],
            positions[(b, s)],
            warm_start=pairs.plane(key),
            tol=settings.inner_tol,
            max_iters=settings.inner_max_iters,
            contact_threshold=problem.contact_threshold,
        )
        states[key] = state
        pairs.set_plane(key, state.plane)
        if counts is not None:
            counts.append(state.iterations)
    return states


def icb_solve(problem, settings=None, include_norm_barrier=False):
    """Minimize the reduced objective by Newton steps on theta alone,
    with every separating plane implicitly at its inner optimum.

    Returns a SolveResult; ``trace.inner_iterations`` collects the Newton
    iteration count of every inner solve, accepted or tried.
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
        states = _solve_all_inner(problem, theta, pairs, settings, inner_counts)
        value, grad, hess = implicit_objective(
            problem, theta, states, include_norm_barrier
        )
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
        accepted_planes = {}

        def trial_value(alpha):
            theta_t = theta + alpha * delta
            if problem.activation_blocked(theta_t, pairs):
                return np.inf
            positions = problem.positions_map(theta_t, pairs.keys())
            total = problem.objective_value(theta_t)
            accepted_planes.clear()
            for key in pairs.keys():
                a, b, s = key
                try:
                    state = inner_solve(
                        problem.barrier,
                        positions[(a, s)],
                        positions[(b, s)],
                        warm_start=pairs.plane(key),
                        tol=settings.inner_tol,
                        max_iters=settings.inner_max_iters,
                        contact_threshold=problem.contact_threshold,
                    )
                except (NoSeparatingPlaneError, InnerSolveError, BoundaryViolationError):
                    return np.inf
                if float(state.plane.n @ pairs.plane(key).n) <= 0.0:
                    # the re-solved normal flipped hemispheres: the trial
                    # moved a body to the other side of its plane, and a
                    # freshly seeded plane must not certify the swap
                    return np.inf
                inner_counts.append(state.iterations)
                accepted_planes[key] = state.plane
                total += pair_penalty_value(
                    problem.barrier,
                    state.plane,
                    positions[(a, s)],
                    positions[(b, s)],
                    include_norm_barrier=include_norm_barrier,
                )
            return total

        alpha, _ = backtrack_line_search(
            value, trial_value, shrink=settings.shrink, min_step=settings.min_step
        )
        if alpha is None:
            trace.termination = STALLED
            break

        theta = theta + alpha * delta
        for key, plane in accepted_planes.items():
            pairs.set_plane(key, plane)
        pairs = problem.broadphase(theta, pairs)
        pending_alpha = alpha
        iteration += 1
        if settings.record_iterates:
            trace.iterates.append(theta.copy())

    return SolveResult(theta=theta, pairs=pairs, trace=trace)
