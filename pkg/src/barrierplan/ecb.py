"""Joint Newton solver over the configuration and the separating planes.

Each iteration assembles the barrier-augmented objective

    value(theta, planes) = objective(theta) + sum of pair penalties,

takes one Newton step on (theta, all planes) subject to unit plane
normals, and renormalizes the normals after stepping.  The KKT system is
never formed densely: each plane's 4x4 block is eliminated in closed form
(its inverse projected onto the constraint tangent), leaving a Schur
system in theta alone, and the plane steps are recovered by back
substitution.  Eigenvalue floors keep both the per-plane blocks (eps1)
and the reduced system (eps2) positive definite.  The line search accepts
the first halved step with a strict decrease, evaluating trial planes
after renormalization, so accepted iterates always keep every vertex
strictly clear of its plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .barrier import pair_penalty_blocks
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
from .geometry import SeparatingPlane, closest_points, midplane_from_closest


@dataclass
class PlaneElimination:
    """Closed-form elimination of one plane's KKT block.

    ``H_ij`` maps plane-space residuals to constrained Newton steps; it is
    symmetric positive semidefinite and annihilates the constraint normal.
    """

    H_ij: np.ndarray  # (4, 4)
    adjusted_H_pp: np.ndarray  # (4, 4)
    inv_adjusted: np.ndarray  # (4, 4)
    n4: np.ndarray  # (4,) constraint gradient (n, 0)


@dataclass
class SchurSystem:
    H_theta: np.ndarray  # (dim, dim) reduced Hessian after the eigenvalue floor
    H_theta_raw: np.ndarray  # (dim, dim) before the floor
    rhs: np.ndarray  # (dim,) right-hand side of H_theta @ delta = rhs
    grad_theta: np.ndarray  # (dim,) full theta gradient at the current point


@dataclass
class EcbWorkspace:
    """Everything assembled at one iterate: per-pair blocks, eliminations,
    the reduced system, and the stopping metric."""

    value: float
    blocks: dict  # key -> PairPenaltyBlocks
    elims: dict  # key -> PlaneElimination
    schur: SchurSystem
    grad_inf_norm: float


def eliminate_plane(H_pp, n, eps1):
    """Eliminate one plane block from the KKT system.

    The block is floored to ``eps1`` before inversion; the inverse is then
    projected onto the tangent of the unit-normal constraint at ``n``.
    """
    H_pp = 0.5 * (H_pp + H_pp.T)
    eigvals, eigvecs = np.linalg.eigh(H_pp)
    if eigvals.min() >= eps1:
        adjusted = H_pp
        clamped = eigvals
    else:
        clamped = np.maximum(eigvals, eps1)
        adjusted = (eigvecs * clamped) @ eigvecs.T
    inv_adjusted = (eigvecs / clamped) @ eigvecs.T
    n4 = np.concatenate([np.asarray(n, dtype=float), [0.0]])
    w = inv_adjusted @ n4
    H_ij = inv_adjusted - np.outer(w, w) / float(n4 @ w)
    return PlaneElimination(H_ij=H_ij, adjusted_H_pp=adjusted, inv_adjusted=inv_adjusted, n4=n4)


def assemble_schur_theta(obj_grad, obj_hess, pair_items, eps2):
    """Reduce the KKT system to the configuration block.

    ``pair_items`` is a list of ``(blocks, elimination)`` per active pair.
    Solving ``H_theta @ delta = rhs`` gives the descent step in theta; the
    raw reduced Hessian is kept alongside the floored one.
    """
    grad = obj_grad.copy()
    H_raw = obj_hess.copy()
    rhs_coupling = np.zeros_like(grad)
    for blocks, elim in pair_items:
        grad += blocks.grad_theta
        H_raw += blocks.H_thetatheta
        coupled = elim.H_ij @ blocks.H_ptheta
        H_raw -= blocks.H_ptheta.T @ coupled
        rhs_coupling += blocks.H_ptheta.T @ (elim.H_ij @ blocks.grad_p)
    H_theta = eigen_adjust(H_raw, eps2)
    return SchurSystem(H_theta=H_theta, H_theta_raw=H_raw, rhs=-grad + rhs_coupling, grad_theta=grad)


def back_substitute_planes(pair_items, delta_theta):
    """Recover each plane's step and constraint multiplier from the
    configuration step.  Returns a list of ``(delta_p, lam)``."""
    out = []
    for blocks, elim in pair_items:
        b = blocks.grad_p + blocks.H_ptheta @ delta_theta
        delta_p = -elim.H_ij @ b
        w = elim.inv_adjusted @ elim.n4
        lam = -float(elim.n4 @ (elim.inv_adjusted @ b)) / float(elim.n4 @ w)
        out.append((delta_p, lam))
    return out


def projected_gradient_inf_norm(grad_theta, blocks_by_key, planes):
    """Infinity norm of the full gradient with each plane's normal
    component projected onto the unit-sphere tangent."""
    worst = float(np.max(np.abs(grad_theta))) if grad_theta.size else 0.0
    for key, blocks in blocks_by_key.items():
        n = planes[key].n
        unit = n / np.linalg.norm(n)
        g_n = blocks.grad_p[:3]
        tangent = g_n - (g_n @ unit) * unit
        worst = max(worst, float(np.max(np.abs(tangent))), abs(float(blocks.grad_p[3])))
    return worst


def initialize_planes(problem, theta, pairs):
    """Give every new pair the midplane between its closest points."""
    positions = problem.positions_map(theta, [k for k in pairs.keys() if pairs.plane(k) is None])
    for key in pairs.keys():
        if pairs.plane(key) is None:
            a, b, s = key
            res = closest_points(positions[(a, s)], positions[(b, s)])
            pairs.set_plane(key, midplane_from_closest(res))


def build_workspace(problem, theta, pairs, settings):
    """Assemble blocks, eliminations, and the reduced system at theta."""
    obj_value, obj_grad, obj_hess = problem.objective_eval(theta)
    kins = problem.kinematics_map(theta, pairs.keys())
    blocks_by_key = {}
    elims_by_key = {}
    value = obj_value
    planes = {key: pairs.plane(key) for key in pairs.keys()}
    for key in pairs.keys():
        a, b, s = key
        blocks = pair_penalty_blocks(
            problem.barrier, planes[key], kins[(a, s)], kins[(b, s)]
        )
        blocks_by_key[key] = blocks
        elims_by_key[key] = eliminate_plane(blocks.H_pp, planes[key].n, settings.eps1)
        value += blocks.value
    pair_items = [(blocks_by_key[k], elims_by_key[k]) for k in pairs.keys()]
    schur = assemble_schur_theta(obj_grad, obj_hess, pair_items, settings.eps2)
    grad_inf = projected_gradient_inf_norm(schur.grad_theta, blocks_by_key, planes)
    return EcbWorkspace(
        value=value,
        blocks=blocks_by_key,
        elims=elims_by_key,
        schur=schur,
        grad_inf_norm=grad_inf,
    )


def _trial_planes(pairs, deltas, alpha):
    """Planes after a step of length alpha, pulled back to unit normals.

    The whole 4-vector is divided by the normal's length: that scales
    every margin by the same positive factor, so a separating raw step
    stays separating after the pullback.
    """
    out = {}
    for key, (delta_p, _) in zip(pairs.keys(), deltas):
        p = pairs.plane(key).as_vector() + alpha * delta_p
        norm = np.linalg.norm(p[:3])
        if norm < 1e-12:
            return None
        out[key] = SeparatingPlane(n=p[:3] / norm, d=p[3] / norm)
    return out


def ecb_solve(problem, settings=None):
    """Minimize the barrier-augmented objective by joint Newton steps on
    the configuration and all separating planes.

    Returns a SolveResult; the trace records one row per accepted step.
    """
    settings = settings or SolverSettings()
    watch = Stopwatch()
    theta = problem.theta0.copy()
    pairs = problem.check_feasible_start(theta).copy()
    initialize_planes(problem, theta, pairs)

    trace = SolveTrace(iterates=[] if settings.record_iterates else None)
    if settings.record_iterates:
        trace.iterates.append(theta.copy())
    pending_alpha = None
    iteration = 0

    while True:
        ws = build_workspace(problem, theta, pairs, settings)
        if pending_alpha is None:
            trace.initial_objective = ws.value
            trace.initial_grad_inf_norm = ws.grad_inf_norm
        else:
            trace.records.append(
                IterationRecord(
                    iter=iteration,
                    objective=ws.value,
                    grad_inf_norm=ws.grad_inf_norm,
                    alpha=pending_alpha,
                    active_pairs=len(pairs),
                    elapsed_s=watch.elapsed(),
                )
            )
        if ws.grad_inf_norm <= settings.eps:
            trace.termination = CONVERGED
            break
        if iteration >= settings.max_iters:
            trace.termination = MAX_ITERS
            break

        delta_theta = np.linalg.solve(ws.schur.H_theta, ws.schur.rhs)
        pair_items = [(ws.blocks[k], ws.elims[k]) for k in pairs.keys()]
        deltas = back_substitute_planes(pair_items, delta_theta)

        def trial_value(alpha):
            planes = _trial_planes(pairs, deltas, alpha)
            if planes is None:
                return np.inf
            theta_trial = theta + alpha * delta_theta
            pair_total = problem.pairs_value(theta_trial, pairs.keys(), planes)
            if not np.isfinite(pair_total):
                return np.inf
            if problem.activation_blocked(theta_trial, pairs):
                return np.inf
            return problem.objective_value(theta_trial) + pair_total

        alpha, _ = backtrack_line_search(
            ws.value, trial_value, shrink=settings.shrink, min_step=settings.min_step
        )
        if alpha is None:
            trace.termination = STALLED
            break

        theta = theta + alpha * delta_theta
        for key, plane in _trial_planes(pairs, deltas, alpha).items():
            pairs.set_plane(key, plane)
        pairs = problem.broadphase(theta, pairs)
        initialize_planes(problem, theta, pairs)
        pending_alpha = alpha
        iteration += 1
        if settings.record_iterates:
            trace.iterates.append(theta.copy())

    return SolveResult(theta=theta, pairs=pairs, trace=trace)
