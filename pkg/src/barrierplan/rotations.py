"""Rotation-vector (exponential map) utilities with analytic derivatives.

A rotation vector w acts on a point v as

    R(w) v = v + A(t) (w x v) + B(t) (w x (w x v)),    t = w . w,

with A(t) = sin(sqrt(t))/sqrt(t) and B(t) = (1 - cos(sqrt(t)))/t.  Writing
the map in terms of t keeps every coefficient smooth through w = 0, so the
derivatives below are exact everywhere, with series expansions taking over
near the origin.
"""

from __future__ import annotations

from math import factorial

import numpy as np

# The closed forms below divide differences of trig terms by powers of t and
# lose precision to cancellation as t -> 0, so a truncated power series takes
# over below this threshold.  With 10 series terms the truncation error at
# the switch is ~1e-26 while the closed forms are still good to ~5e-13.
_SERIES_THRESHOLD = 0.1

_A_SERIES = np.polynomial.Polynomial(
    [(-1.0) ** k / factorial(2 * k + 1) for k in range(10)]
)
_B_SERIES = np.polynomial.Polynomial(
    [(-1.0) ** k / factorial(2 * k + 2) for k in range(10)]
)
_A1_SERIES = _A_SERIES.deriv()
_A2_SERIES = _A1_SERIES.deriv()
_B1_SERIES = _B_SERIES.deriv()
_B2_SERIES = _B1_SERIES.deriv()


def skew(u):
    """Cross-product matrix: skew(u) @ x == u x x."""
    return np.array(
        [
            [0.0, -u[2], u[1]],
            [u[2], 0.0, -u[0]],
            [-u[1], u[0], 0.0],
        ]
    )


def skew_batch(U):
    """Cross-product matrices of the rows of a (V, 3) array, shape (V, 3, 3)."""
    U = np.asarray(U, dtype=float)
    S = np.zeros(U.shape[:-1] + (3, 3))
    x, y, z = U[..., 0], U[..., 1], U[..., 2]
    S[..., 0, 1] = -z
    S[..., 0, 2] = y
    S[..., 1, 0] = z
    S[..., 1, 2] = -x
    S[..., 2, 0] = -y
    S[..., 2, 1] = x
    return S


def rotation_coefficients(t):
    """Coefficients A(t), B(t) and their first two t-derivatives.

    Returns (A, A1, A2, B, B1, B2).
    """
    t = float(t)
    if t < _SERIES_THRESHOLD:
        return (
            _A_SERIES(t),
            _A1_SERIES(t),
            _A2_SERIES(t),
            _B_SERIES(t),
            _B1_SERIES(t),
            _B2_SERIES(t),
        )
    phi = np.sqrt(t)
    s, c = np.sin(phi), np.cos(phi)
    A = s / phi
    A1 = (phi * c - s) / (2.0 * phi ** 3)
    A2 = (3.0 * s - 3.0 * phi * c - t * s) / (4.0 * phi ** 5)
    B = (1.0 - c) / t
    B1 = (phi * s - 2.0 * (1.0 - c)) / (2.0 * phi ** 4)
    B2 = (2.0 * t * c - 10.0 * phi * s + 16.0 - 16.0 * c) / (8.0 * phi ** 6)
    return A, A1, A2, B, B1, B2


def rotation_matrix(w):
    """Rotation matrix of a rotation vector."""
    w = np.asarray(w, dtype=float).reshape(3)
    A, _, _, B, _, _ = rotation_coefficients(w @ w)
    W = skew(w)
    return np.eye(3) + A * W + B * (W @ W)


def axis_angle_matrix(axis, angle):
    """Rotation about a unit axis by an angle."""
    U = skew(np.asarray(axis, dtype=float))
    return np.eye(3) + np.sin(angle) * U + (1.0 - np.cos(angle)) * (U @ U)


def rotate_vertices(w, vertices):
    """Apply R(w) to rows of a (V, 3) array."""
    vertices = np.asarray(vertices, dtype=float)
    return vertices @ rotation_matrix(np.asarray(w, dtype=float)).T


def rotate_vertices_derivs(w, vertices):
    """Rotated points with first and second derivatives in w.

    Parameters
    ----------
    w : (3,) array
        Rotation vector.
    vertices : (V, 3) array
        Points to rotate.

    Returns
    -------
    x : (V, 3) array
    jac : (V, 3, 3) array
        ``jac[v, a, j] = d x[v, a] / d w[j]``.
    hess : (V, 3, 3, 3) array
        ``hess[v, a, j, k] = d^2 x[v, a] / d w[j] d w[k]``.
    """
    w = np.asarray(w, dtype=float).reshape(3)
    V = np.asarray(vertices, dtype=float)
    A, A1, A2, B, B1, B2 = rotation_coefficients(w @ w)

    c1 = np.cross(np.broadcast_to(w, V.shape), V)  # w x v
    c2 = np.cross(np.broadcast_to(w, V.shape), c1)  # w x (w x v)
    x = V + A * c1 + B * c2

    W = skew(w)
    # column j of dc1 is e_j x v, of dc2 is e_j x c1 + w x (e_j x v)
    Sv = skew_batch(V)
    dc1 = -Sv
    dc2 = -skew_batch(c1) - np.einsum("ab,vbc->vac", W, Sv)

    u = A1 * c1 + B1 * c2
    p = A2 * c1 + B2 * c2
    q = A1 * dc1 + B1 * dc2

    jac = 2.0 * np.einsum("va,j->vaj", u, w) + A * dc1 + B * dc2

    eye = np.eye(3)
    hess = (
        2.0 * np.einsum("va,jk->vajk", u, eye)
        + 4.0 * np.einsum("va,j,k->vajk", p, w, w)
        + 2.0 * np.einsum("vak,j->vajk", q, w)
        + 2.0 * np.einsum("vaj,k->vajk", q, w)
        + B
        * (
            np.einsum("ak,vj->vajk", eye, V)
            + np.einsum("aj,vk->vajk", eye, V)
            - 2.0 * np.einsum("va,jk->vajk", V, eye)
        )
    )
    return x, jac, hess
