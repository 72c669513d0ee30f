"""Inverse-barrier penalties attached to separating planes.

Each candidate collision pair carries a plane ``n . x + d = 0``; the pair's
penalty sums a barrier over the signed clearances of every hull vertex from
that plane, keeping the first body on the negative side and the second on
the positive side.  The penalty blows up as any vertex approaches the
plane, which is what keeps accepted iterates collision free.  An optional
norm barrier on ``1 - |n|`` regularizes the plane itself; the per-pair
subproblem solver relies on it.

All derivative blocks here are analytic.  ``grad_p``/``H_pp`` differentiate
in the stacked plane vector ``(n, d)``, the theta blocks differentiate
through the kinematics of the two bodies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryViolationError


@dataclass(frozen=True)
class InverseBarrier:
    """Barrier P(x) = eta / x on x > 0."""

    eta: float = 1e-4

    variant = "inverse"

    def value(self, x):
        return self.eta / x

    def d1(self, x):
        return -self.eta / (x * x)

    def d2(self, x):
        return 2.0 * self.eta / (x * x * x)

    def d3(self, x):
        return -6.0 * self.eta / (x * x * x * x)


def make_barrier(eta=1e-4, variant="inverse"):
    if variant != "inverse":
        raise ValueError(f"unknown barrier variant {variant!r}")
    if eta <= 0.0:
        raise ValueError("barrier weight eta must be positive")
    return InverseBarrier(eta=float(eta))


def barrier_eval(barrier, x, order=0):
    """Evaluate a barrier or one of its first three derivatives.

    Raises BoundaryViolationError when any argument is outside the domain
    x > 0.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
        raise BoundaryViolationError(f"barrier argument must be positive, got {x}")
    if order == 0:
        out = barrier.value(x)
    elif order == 1:
        out = barrier.d1(x)
    elif order == 2:
        out = barrier.d2(x)
    elif order == 3:
        out = barrier.d3(x)
    else:
        raise ValueError(f"unsupported derivative order {order}")
    return float(out) if out.ndim == 0 else out


@dataclass
class PairPenaltyBlocks:
    """Value and derivative blocks of one pair's plane penalty.

    ``grad_p``/``H_pp`` are in the plane vector (n, d); the theta blocks are
    in the model configuration.
    """

    value: float
    grad_p: np.ndarray  # (4,)
    grad_theta: np.ndarray  # (dim,)
    H_pp: np.ndarray  # (4, 4)
    H_ptheta: np.ndarray  # (4, dim)
    H_thetatheta: np.ndarray  # (dim, dim)


@dataclass
class PairSideData:
    """Per-vertex quantities for one side of a pair, reused by the blocks
    and by the third-derivative tensors of the plane subproblem."""

    sign: float
    margins: np.ndarray  # (V,)
    p1: np.ndarray  # (V,) barrier first derivatives at the margins
    p2: np.ndarray  # (V,)
    p3: np.ndarray  # (V,)
    y: np.ndarray  # (V, 4) homogeneous vertex coordinates
    g: np.ndarray  # (V, dim) jacobian-transposed normal
    Y: np.ndarray  # (V, 4, dim) theta-derivative of y
    h: np.ndarray  # (V, dim, dim) normal-contracted vertex hessians
    hessian: np.ndarray  # (V, 3, dim, dim) raw vertex hessians


def pair_side_data(barrier, sign, kin, plane):
    """Margins and barrier derivatives for one side of a pair.

    ``sign`` is -1 for the pair's first body (negative side of the plane)
    and +1 for the second.  Raises BoundaryViolationError when any vertex
    is on or beyond the plane.
    """
    X = kin.positions
    n = plane.n
    margins = sign * (X @ n + plane.d)
    if np.any(margins <= 0.0):
        raise BoundaryViolationError(
            f"vertex on or beyond separating plane (min margin {margins.min():.3e})"
        )
    nv, _, dim = kin.jacobian.shape
    y = np.concatenate([X, np.ones((nv, 1))], axis=1)
    g = np.einsum("vcm,c->vm", kin.jacobian, n)
    Y = np.concatenate([kin.jacobian, np.zeros((nv, 1, dim))], axis=1)
    h = np.einsum("c,vcmn->vmn", n, kin.hessian)
    return PairSideData(
        sign=float(sign),
        margins=margins,
        p1=barrier.d1(margins),
        p2=barrier.d2(margins),
        p3=barrier.d3(margins),
        y=y,
        g=g,
        Y=Y,
        h=h,
        hessian=kin.hessian,
    )


def norm_barrier_value(barrier, n):
    """Barrier on 1 - |n|; +inf at or beyond the unit sphere."""
    s = 1.0 - float(np.linalg.norm(n))
    if s <= 0.0:
        return np.inf
    return float(barrier.value(s))


def norm_barrier_derivs(barrier, n):
    """Value, gradient, and Hessian in n of the barrier on 1 - |n|."""
    r = float(np.linalg.norm(n))
    s = 1.0 - r
    if s <= 0.0 or r == 0.0:
        raise BoundaryViolationError(f"norm barrier undefined at |n| = {r}")
    u = np.asarray(n, dtype=float) / r
    p1 = float(barrier.d1(s))
    p2 = float(barrier.d2(s))
    uu = np.outer(u, u)
    grad = -p1 * u
    hess = p2 * uu - (p1 / r) * (np.eye(3) - uu)
    return float(barrier.value(s)), grad, hess


def norm_barrier_third(barrier, n):
    """Third-derivative tensor in n of the barrier on 1 - |n|."""
    r = float(np.linalg.norm(n))
    s = 1.0 - r
    if s <= 0.0 or r == 0.0:
        raise BoundaryViolationError(f"norm barrier undefined at |n| = {r}")
    u = np.asarray(n, dtype=float) / r
    T = np.eye(3) - np.outer(u, u)
    p1 = float(barrier.d1(s))
    p2 = float(barrier.d2(s))
    p3 = float(barrier.d3(s))
    sym = (
        np.einsum("ab,c->abc", T, u)
        + np.einsum("ac,b->abc", T, u)
        + np.einsum("bc,a->abc", T, u)
    )
    return -p3 * np.einsum("a,b,c->abc", u, u, u) + (p2 / r + p1 / (r * r)) * sym


def pair_penalty_blocks(barrier, plane, kin_first, kin_second, include_norm_barrier=False):
    """Penalty value and derivative blocks for one pair.

    Parameters
    ----------
    barrier : InverseBarrier
    plane : SeparatingPlane
        Current plane of the pair; the first body must clear its negative
        side, the second its positive side.
    kin_first, kin_second : BodyKinematics
        Posed kinematics of the two bodies, in pair order.
    include_norm_barrier : bool
        Add the barrier on 1 - |n| (value, grad_p, H_pp only; it does not
        depend on theta).

    Raises
    ------
    BoundaryViolationError
        When a vertex touches or crosses the plane, or, with the norm
        barrier enabled, when |n| >= 1.
    """
    dim = kin_first.jacobian.shape[2]
    value = 0.0
    grad_p = np.zeros(4)
    grad_theta = np.zeros(dim)
    H_pp = np.zeros((4, 4))
    H_ptheta = np.zeros((4, dim))
    H_thth = np.zeros((dim, dim))

    for sign, kin in ((-1.0, kin_first), (1.0, kin_second)):
        side = pair_side_data(barrier, sign, kin, plane)
        value += float(barrier.value(side.margins).sum())
        grad_p += sign * side.p1 @ side.y
        grad_theta += sign * side.p1 @ side.g
        H_pp += np.einsum("v,va,vb->ab", side.p2, side.y, side.y)
        H_ptheta += np.einsum("v,va,vm->am", side.p2, side.y, side.g)
        H_ptheta += sign * np.einsum("v,vam->am", side.p1, side.Y)
        H_thth += np.einsum("v,vm,vn->mn", side.p2, side.g, side.g)
        H_thth += sign * np.einsum("v,vmn->mn", side.p1, side.h)

    if include_norm_barrier:
        nval, ngrad, nhess = norm_barrier_derivs(barrier, plane.n)
        value += nval
        grad_p[:3] += ngrad
        H_pp[:3, :3] += nhess

    return PairPenaltyBlocks(
        value=value,
        grad_p=grad_p,
        grad_theta=grad_theta,
        H_pp=H_pp,
        H_ptheta=H_ptheta,
        H_thetatheta=H_thth,
    )


def pair_penalty_value(barrier, plane, verts_first, verts_second, include_norm_barrier=False):
    """Penalty value from posed vertices alone; +inf when any vertex is on
    or beyond the plane (or |n| >= 1 with the norm barrier)."""
    m_first = plane.margins_first(verts_first)
    m_second = plane.margins_second(verts_second)
    if m_first.min() <= 0.0 or m_second.min() <= 0.0:
        return np.inf
    value = float(barrier.value(m_first).sum() + barrier.value(m_second).sum())
    if include_norm_barrier:
        value += norm_barrier_value(barrier, plane.n)
    return value


def plane_energy(barrier, p, verts_first, verts_second):
    """Value, gradient, and Hessian in the plane vector (n, d) of the pair
    penalty plus the norm barrier, at fixed vertex positions.

    This is the objective of the per-pair plane subproblem; it avoids any
    kinematic derivatives so inner iterations stay cheap.
    """
    plane_n = p[:3]
    plane_d = p[3]
    value = 0.0
    grad = np.zeros(4)
    hess = np.zeros((4, 4))
    for sign, X in ((-1.0, verts_first), (1.0, verts_second)):
        margins = sign * (X @ plane_n + plane_d)
        if margins.min() <= 0.0:
            raise BoundaryViolationError("vertex on or beyond separating plane")
        y = np.concatenate([X, np.ones((X.shape[0], 1))], axis=1)
        p1 = barrier.d1(margins)
        p2 = barrier.d2(margins)
        value += float(barrier.value(margins).sum())
        grad += sign * p1 @ y
        hess += np.einsum("v,va,vb->ab", p2, y, y)
    r = float(np.linalg.norm(plane_n))
    s = 1.0 - r
    if s <= 0.0 or r == 0.0:
        raise BoundaryViolationError(f"norm barrier undefined at |n| = {r}")
    u = plane_n / r
    uu = np.outer(u, u)
    value += float(barrier.value(s))
    grad[:3] += -float(barrier.d1(s)) * u
    hess[:3, :3] += float(barrier.d2(s)) * uu - (float(barrier.d1(s)) / r) * (
        np.eye(3) - uu
    )
    return value, grad, hess
