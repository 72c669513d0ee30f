"""Convex-hull collision geometry.

Bodies are finite vertex sets whose convex hulls are posed by a kinematic
model.  This module provides the purely geometric layer: closest points
between two posed hulls (a small QP over convex-combination weights),
separating midplanes built from closest-point witnesses, and an AABB
broadphase that maintains a monotone set of candidate collision pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePairError


@dataclass
class ConvexBody:
    """A convex hull given by its vertices in a local frame.

    Parameters
    ----------
    id : str
        Unique name of the body.
    local_vertices : (V, 3) array
        Hull vertices in the frame referenced by ``frame_ref``.
    frame_ref : str
        Name of the kinematic frame the body is rigidly attached to.
    volume_nonzero : bool, optional
        Whether the hull spans all three dimensions.  Computed from the
        vertices when not given.
    """

    id: str
    local_vertices: np.ndarray
    frame_ref: str
    volume_nonzero: bool = None

    def __post_init__(self):
        verts = np.asarray(self.local_vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 3 or verts.shape[0] == 0:
            raise ValueError(f"body {self.id!r}: vertices must be (V, 3) with V >= 1")
        if not np.all(np.isfinite(verts)):
            raise ValueError(f"body {self.id!r}: vertices must be finite")
        self.local_vertices = verts
        if self.volume_nonzero is None:
            centered = verts - verts.mean(axis=0)
            self.volume_nonzero = bool(np.linalg.matrix_rank(centered, tol=1e-12) == 3)

    @classmethod
    def box(cls, id, frame_ref, half_extents, center=(0.0, 0.0, 0.0)):
        """Axis-aligned box hull with the given half extents in its local frame."""
        h = np.asarray(half_extents, dtype=float)
        c = np.asarray(center, dtype=float)
        corners = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=float,
        )
        return cls(id=id, local_vertices=c + corners * h, frame_ref=frame_ref)

    @property
    def num_vertices(self):
        return self.local_vertices.shape[0]


@dataclass
class SeparatingPlane:
    """Plane n . x + d = 0 keeping the first body of a pair on the
    negative side and the second on the positive side."""

    n: np.ndarray
    d: float

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=float).reshape(3)
        self.d = float(self.d)

    def as_vector(self):
        """Stack into the 4-vector (n, d)."""
        return np.concatenate([self.n, [self.d]])

    @classmethod
    def from_vector(cls, p):
        p = np.asarray(p, dtype=float).reshape(4)
        return cls(n=p[:3].copy(), d=p[3])

    def normalized(self):
        """Copy with the normal rescaled to unit length, offset unchanged."""
        return SeparatingPlane(n=self.n / np.linalg.norm(self.n), d=self.d)

    def margins_first(self, world_vertices):
        """Signed clearances of the pair's first body, positive when separated."""
        return -(world_vertices @ self.n) - self.d

    def margins_second(self, world_vertices):
        """Signed clearances of the pair's second body, positive when separated."""
        world_vertices = np.asarray(world_vertices, dtype=float)
        return world_vertices @ self.n + self.d


@dataclass
class Aabb:
    """Axis-aligned bounding box."""

    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def from_points(cls, points):
        points = np.asarray(points, dtype=float)
        return cls(lower=points.min(axis=0), upper=points.max(axis=0))

    def inflated(self, margin):
        return Aabb(lower=self.lower - margin, upper=self.upper + margin)

    def overlaps(self, other):
        return bool(np.all(self.lower <= other.upper) and np.all(other.lower <= self.upper))


@dataclass
class ClosestPointResult:
    """Closest points between two posed hulls.

    ``point_a``/``point_b`` are the witness points, ``weights_a`` and
    ``weights_b`` the convex-combination weights over the hulls' posed
    vertices that realize them.
    """

    point_a: np.ndarray
    point_b: np.ndarray
    distance: float
    weights_a: np.ndarray
    weights_b: np.ndarray


def project_to_simplex(v):
    """Euclidean projection of a vector onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = idx[u - css / idx > 0][-1]
    tau = css[rho - 1] / rho
    return np.maximum(v - tau, 0.0)


def _frank_wolfe_gap(grad, w, na):
    """Duality gap of the weight QP at w; zero exactly at the optimum."""
    return float(grad @ w - grad[:na].min() - grad[na:].min())


def _polish_support(A, B, lam, mu, support_tol=1e-9):
    """Re-solve the weight QP restricted to the active support.

    The active-set equality problem is a small linear KKT system; when its
    solution stays inside the simplex faces it is exact, which sharpens the
    iterative solution to near machine precision.  Returns None when the
    polished point leaves the feasible region.
    """
    sa = np.flatnonzero(lam > support_tol)
    sb = np.flatnonzero(mu > support_tol)
    if sa.size == 0 or sb.size == 0:
        return None
    Z = np.vstack([A[sa], -B[sb]])
    k = Z.shape[0]
    C = np.zeros((2, k))
    C[0, : sa.size] = 1.0
    C[1, sa.size :] = 1.0
    kkt = np.zeros((k + 2, k + 2))
    kkt[:k, :k] = 2.0 * (Z @ Z.T)
    kkt[:k, k:] = C.T
    kkt[k:, :k] = C
    rhs = np.zeros(k + 2)
    rhs[k:] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    z = sol[:k]
    if z.min() < -1e-10:
        return None
    z = np.maximum(z, 0.0)
    lam2 = np.zeros_like(lam)
    mu2 = np.zeros_like(mu)
    lam2[sa] = z[: sa.size] / z[: sa.size].sum()
    mu2[sb] = z[sa.size :] / z[sa.size :].sum()
    return lam2, mu2


def closest_points(vertices_a, vertices_b, gap_tol=1e-12, max_iters=2000):
    """Closest points between the convex hulls of two posed vertex sets.

    Minimizes ``|A^T lam - B^T mu|^2`` over the product of probability
    simplices with an accelerated projected-gradient iteration, stopping on
    the Frank-Wolfe duality gap, then polishes the active support with an
    exact equality-constrained solve.

    Parameters
    ----------
    vertices_a, vertices_b : (V, 3) arrays
        World-frame vertices of the two hulls.
    gap_tol : float
        Duality-gap target, relative to max(1, squared distance).
    max_iters : int
        Iteration cap for the projected-gradient phase.

    Returns
    -------
    ClosestPointResult
    """
    A = np.asarray(vertices_a, dtype=float)
    B = np.asarray(vertices_b, dtype=float)
    if A.ndim != 2 or A.shape[1] != 3 or B.ndim != 2 or B.shape[1] != 3:
        raise ValueError("vertex arrays must have shape (V, 3)")
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("vertex arrays must be non-empty")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ValueError("vertex arrays must be finite")

    na, nb = A.shape[0], B.shape[0]
    M = np.vstack([A, -B])
    smax = np.linalg.norm(M, 2)
    lipschitz = max(2.0 * smax * smax, 1e-30)

    w = np.concatenate([np.full(na, 1.0 / na), np.full(nb, 1.0 / nb)])
    v = M.T @ w
    f = float(v @ v)
    y = w.copy()
    t_mom = 1.0

    def _project(u):
        return np.concatenate([project_to_simplex(u[:na]), project_to_simplex(u[na:])])

    for _ in range(max_iters):
        grad_y = 2.0 * (M @ (M.T @ y))
        w_new = _project(y - grad_y / lipschitz)
        v_new = M.T @ w_new
        f_new = float(v_new @ v_new)
        if f_new > f:
            # adaptive restart: drop momentum and retake a plain step
            t_mom = 1.0
            grad_w = 2.0 * (M @ v)
            w_new = _project(w - grad_w / lipschitz)
            v_new = M.T @ w_new
            f_new = float(v_new @ v_new)
        grad_new = 2.0 * (M @ v_new)
        gap = _frank_wolfe_gap(grad_new, w_new, na)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = w_new + ((t_mom - 1.0) / t_next) * (w_new - w)
        w, v, f, t_mom = w_new, v_new, f_new, t_next
        if gap <= gap_tol * max(1.0, f):
            break

    lam, mu = w[:na], w[na:]
    polished = _polish_support(A, B, lam, mu)
    if polished is not None:
        lam2, mu2 = polished
        v2 = A.T @ lam2 - B.T @ mu2
        if float(v2 @ v2) <= f:
            lam, mu = lam2, mu2

    point_a = A.T @ lam
    point_b = B.T @ mu
    return ClosestPointResult(
        point_a=point_a,
        point_b=point_b,
        distance=float(np.linalg.norm(point_a - point_b)),
        weights_a=lam,
        weights_b=mu,
    )


def midplane_from_closest(result):
    """Separating plane halfway between the closest-point witnesses.

    The normal points from the first hull toward the second, so the first
    hull lies on the negative side.  Each hull clears the plane by at least
    half the witness distance.

    Raises
    ------
    DegeneratePairError
        If the witness distance is zero (touching or overlapping hulls).
    """
    dist = result.distance
    if not np.isfinite(dist) or dist <= 0.0:
        raise DegeneratePairError(f"midplane undefined at distance {dist}")
    n = (result.point_b - result.point_a) / dist
    mid = 0.5 * (result.point_a + result.point_b)
    return SeparatingPlane(n=n, d=-float(n @ mid))


PairKey = tuple  # (body_id_a, body_id_b, time_index) with body_id_a < body_id_b


def make_pair_key(body_id_a, body_id_b, time_index=0):
    if body_id_a == body_id_b:
        raise ValueError(f"pair of body {body_id_a!r} with itself")
    a, b = sorted((body_id_a, body_id_b))
    return (a, b, int(time_index))


@dataclass
class CollisionPairSet:
    """Ordered set of candidate collision pairs with cached planes.

    Keys are ``(body_id_a, body_id_b, time_index)`` with the ids sorted.
    The cached plane per pair is the solver's warm start; a pair may be
    present with no plane yet.
    """

    _planes: dict = field(default_factory=dict)

    def add(self, key):
        """Insert a pair with no cached plane; returns True if new."""
        if key in self._planes:
            return False
        self._planes[key] = None
        return True

    def __contains__(self, key):
        return key in self._planes

    def __len__(self):
        return len(self._planes)

    def keys(self):
        return sorted(self._planes)

    def items(self):
        return [(k, self._planes[k]) for k in self.keys()]

    def plane(self, key):
        return self._planes[key]

    def set_plane(self, key, plane):
        if key not in self._planes:
            raise KeyError(key)
        self._planes[key] = plane

    def copy(self):
        return CollisionPairSet(dict(self._planes))


def normalize_exemptions(exempt):
    """Normalize exempt body-id pairs into a set of sorted tuples."""
    out = set()
    for pair in exempt:
        a, b = tuple(pair)
        out.add(tuple(sorted((a, b))))
    return out


def broadphase_pairs(posed, existing, margin=0.1, exempt=()):
    """Update the candidate pair set from inflated bounding boxes.

    A pair activates when the bodies' AABBs, each inflated by ``margin``,
    overlap (axis gap below twice the margin).  Pairs are never removed,
    so the returned set contains all of ``existing``.  Bodies on the same
    frame and exempted pairs are skipped.

    Parameters
    ----------
    posed : dict
        Maps time index to a list of ``(body, world_vertices)`` entries.
    existing : CollisionPairSet
        Current pair set; not modified.
    margin : float
        Inflation margin per box.
    exempt : iterable
        Body-id pairs that never collide (e.g. adjacent chain links).

    Returns
    -------
    CollisionPairSet
        Copy of ``existing`` with newly activated pairs added.
    """
    exempt_set = normalize_exemptions(exempt)
    updated = existing.copy()
    for time_index, entries in posed.items():
        boxes = [Aabb.from_points(verts).inflated(margin) for _, verts in entries]
        for i in range(len(entries)):
            body_i = entries[i][0]
            for j in range(i + 1, len(entries)):
                body_j = entries[j][0]
                if body_i.frame_ref == body_j.frame_ref:
                    continue
                if tuple(sorted((body_i.id, body_j.id))) in exempt_set:
                    continue
                if boxes[i].overlaps(boxes[j]):
                    updated.add(make_pair_key(body_i.id, body_j.id, time_index))
    return updated
