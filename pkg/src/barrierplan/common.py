"""Shared solver settings, iteration traces, and small numerics."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

CONVERGED = "converged"
STALLED = "stalled"
MAX_ITERS = "max-iters"


@dataclass
class SolverSettings:
    """Settings shared by all solvers.

    ``eps`` is the stopping tolerance on the infinity norm of the gradient;
    ``eps1`` and ``eps2`` floor the eigenvalues of the per-plane and
    configuration Hessian blocks.
    """

    eps: float = 1e-4
    eps1: float = 1e-3
    eps2: float = 1e-3
    max_iters: int = 10000
    shrink: float = 0.5
    min_step: float = 1e-12
    inner_tol: float = 1e-10
    inner_max_iters: int = 80
    record_iterates: bool = False


@dataclass
class IterationRecord:
    iter: int
    objective: float
    grad_inf_norm: float
    alpha: float
    active_pairs: int
    elapsed_s: float


@dataclass
class SolveTrace:
    """Per-iteration history of a solve."""

    records: list = field(default_factory=list)
    termination: str = MAX_ITERS
    initial_objective: float = np.nan
    initial_grad_inf_norm: float = np.nan
    iterates: list = None
    inner_iterations: list = None  # per inner solve, solvers with subproblems only

    def iterations_to(self, eps):
        """Newton iterations until the gradient norm first reached eps;
        0 if already there at the start, None if never reached."""
        if self.initial_grad_inf_norm <= eps:
            return 0
        for rec in self.records:
            if rec.grad_inf_norm <= eps:
                return rec.iter
        return None

    def time_to(self, eps):
        """Elapsed seconds until the gradient norm first reached eps."""
        if self.initial_grad_inf_norm <= eps:
            return 0.0
        for rec in self.records:
            if rec.grad_inf_norm <= eps:
                return rec.elapsed_s
        return None


@dataclass
class SolveResult:
    theta: np.ndarray
    pairs: object  # CollisionPairSet with final planes
    trace: SolveTrace

    @property
    def converged(self):
        return self.trace.termination == CONVERGED


def eigen_adjust(H, floor):
    """Clamp the eigenvalues of a symmetric matrix to at least ``floor``.

    Returns the input object unchanged when no eigenvalue is below the
    floor, so matrices that are already sufficiently positive definite are
    exact fixed points.
    """
    H = np.asarray(H, dtype=float)
    sym = 0.5 * (H + H.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    if eigvals.min() >= floor:
        return H
    clamped = np.maximum(eigvals, floor)
    return (eigvecs * clamped) @ eigvecs.T


def backtrack_line_search(current_value, trial_value, shrink=0.5, min_step=1e-12):
    """First step length with a strict decrease, halving from 1.

    ``trial_value`` maps a step length to the objective value (may return
    +inf for infeasible trials).  Returns ``(alpha, value)``, or
    ``(None, current_value)`` when the step shrank below ``min_step``.
    """
    alpha = 1.0
    while alpha >= min_step:
        value = trial_value(alpha)
        if value < current_value:
            return alpha, value
        alpha *= shrink
    return None, current_value


class Stopwatch:
    def __init__(self):
        self.start = time.perf_counter()

    def elapsed(self):
        return time.perf_counter() - self.start
