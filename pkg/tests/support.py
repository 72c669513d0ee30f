"""Shared test helpers: finite differences and independent brute-force oracles.

Everything here is deliberately written from scratch, without reusing the
package's own numerics, so tests compare two independent implementations.
"""

import numpy as np


def rel_err(actual, expected):
    """Max absolute difference over max(1, scale of expected)."""
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    scale = max(1.0, float(np.max(np.abs(expected))) if expected.size else 0.0)
    diff = float(np.max(np.abs(actual - expected))) if expected.size else 0.0
    return diff / scale


def fd_gradient(f, x, h=1e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros(x.size)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def fd_jacobian(f, x, h=1e-6):
    """Central-difference jacobian of an array-valued function.

    Output shape is f(x).shape + (x.size,).
    """
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x), dtype=float)
    out = np.zeros(f0.shape + (x.size,))
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        out[..., i] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * h)
    return out


def _project_simplex_reference(v):
    """Simplex projection by explicit KKT search over support sizes."""
    n = v.size
    order = np.argsort(v)[::-1]
    best = None
    for k in range(1, n + 1):
        idx = order[:k]
        tau = (v[idx].sum() - 1.0) / k
        w = np.maximum(v - tau, 0.0)
        active = w > 0
        if active.sum() == k and np.all(active[idx]):
            best = w
            break
    if best is None:
        w = np.maximum(v - (v.sum() - 1.0) / n, 0.0)
        best = w / w.sum()
    return best


def pgd_closest_distance(verts_a, verts_b, iters=20000):
    """Brute-force closest distance: plain projected gradient at a tiny
    fixed step on the convex-combination weight QP."""
    A = np.asarray(verts_a, dtype=float)
    B = np.asarray(verts_b, dtype=float)
    na = A.shape[0]
    M = np.vstack([A, -B])
    step = 1.0 / (2.0 * np.linalg.norm(M, "fro") ** 2 + 1e-12)
    w = np.concatenate([np.full(na, 1.0 / na), np.full(B.shape[0], 1.0 / B.shape[0])])
    for _ in range(iters):
        grad = 2.0 * (M @ (M.T @ w))
        u = w - step * grad
        w = np.concatenate(
            [_project_simplex_reference(u[:na]), _project_simplex_reference(u[na:])]
        )
    v = M.T @ w
    return float(np.linalg.norm(v)), w[:na], w[na:]


def random_hull(rng, num_vertices=8, center=(0.0, 0.0, 0.0), radius=0.5):
    """Random full-dimensional vertex cloud around a center."""
    center = np.asarray(center, dtype=float)
    while True:
        pts = center + radius * rng.uniform(-1.0, 1.0, size=(num_vertices, 3))
        if np.linalg.matrix_rank(pts - pts.mean(axis=0), tol=1e-9) == 3:
            return pts


def random_rotation(rng):
    """Uniform random rotation matrix via scipy."""
    from scipy.spatial.transform import Rotation

    return Rotation.random(rng=rng).as_matrix()


def descend_plane_energy(barrier, verts_a, verts_b, p0, tol=1e-9, max_iters=40000):
    """Long-run first-order minimization of the inner plane energy.

    Barzilai-Borwein steps with an Armijo backtracking safeguard; shares
    only the energy definition with the package's Newton inner solver.
    Returns (plane_vector, final_gradient_inf_norm).
    """
    from barrierplan.barrier import pair_penalty_value, plane_energy
    from barrierplan.geometry import SeparatingPlane

    def value_at(q):
        return pair_penalty_value(
            barrier,
            SeparatingPlane(n=q[:3], d=q[3]),
            verts_a,
            verts_b,
            include_norm_barrier=True,
        )

    p = np.asarray(p0, dtype=float).copy()
    value, grad, _ = plane_energy(barrier, p, verts_a, verts_b)
    p_prev = grad_prev = None
    step = 1e-3
    for _ in range(max_iters):
        if np.max(np.abs(grad)) <= tol:
            break
        if p_prev is not None:
            dp = p - p_prev
            dg = grad - grad_prev
            denom = float(dg @ dg)
            if denom > 0:
                step = min(max(abs(float(dp @ dg) / denom), 1e-12), 1e3)
        t = step
        accepted = None
        while t >= 1e-16:
            cand = p - t * grad
            v = value_at(cand)
            if v < value - 1e-4 * t * float(grad @ grad):
                accepted = (cand, v)
                break
            t *= 0.5
        if accepted is None:
            break
        p_prev, grad_prev = p, grad
        p, value = accepted
        _, grad, _ = plane_energy(barrier, p, verts_a, verts_b)
    return p, float(np.max(np.abs(grad)))
