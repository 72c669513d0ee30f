"""Problem container shared by all solvers.

A problem bundles the kinematic model, the posed bodies, the smooth
objective, the barrier, and the collision bookkeeping (broadphase margin,
exempt pairs, contact threshold).  Solvers only see problems.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .barrier import InverseBarrier, pair_penalty_value
from .errors import InfeasibleStartError
from .geometry import (
    CollisionPairSet,
    broadphase_pairs,
    closest_points,
    normalize_exemptions,
)
from .objectives import Objective


@dataclass
class Problem:
    model: object
    bodies: list
    objective: Objective
    theta0: np.ndarray
    barrier: InverseBarrier = field(default_factory=InverseBarrier)
    broadphase_margin: float = 0.1
    exempt: tuple = ()
    contact_threshold: float = 1e-9

    def __post_init__(self):
        self.theta0 = np.asarray(self.theta0, dtype=float).reshape(-1)
        if self.theta0.size != self.model.dim:
            raise ValueError(
                f"theta0 has {self.theta0.size} entries, model has {self.model.dim} dof"
            )
        self.bodies_by_id = {}
        for body in self.bodies:
            if body.id in self.bodies_by_id:
                raise ValueError(f"duplicate body id {body.id!r}")
            self.bodies_by_id[body.id] = body
        self.exempt = normalize_exemptions(self.exempt)
        # fail early on dangling frame references
        for body in self.bodies:
            self.model.body_positions(self.theta0, body, 0)

    @property
    def dim(self):
        return self.model.dim

    def body(self, body_id):
        return self.bodies_by_id[body_id]

    def pair_bodies(self, key):
        """Bodies of a pair key in order; the first is on the plane's
        negative side."""
        return self.bodies_by_id[key[0]], self.bodies_by_id[key[1]]

    def posed(self, theta):
        """World vertices of every body at every sample time."""
        return {
            s: [(body, self.model.body_positions(theta, body, s)) for body in self.bodies]
            for s in range(self.model.num_samples)
        }

    def positions_map(self, theta, keys):
        """World vertices for the bodies appearing in the given pair keys."""
        out = {}
        for a, b, s in keys:
            for body_id in (a, b):
                if (body_id, s) not in out:
                    out[(body_id, s)] = self.model.body_positions(
                        theta, self.bodies_by_id[body_id], s
                    )
        return out

    def kinematics_map(self, theta, keys):
        """Posed kinematics for the bodies appearing in the given pair keys."""
        out = {}
        for a, b, s in keys:
            for body_id in (a, b):
                if (body_id, s) not in out:
                    out[(body_id, s)] = self.model.body_kinematics(
                        theta, self.bodies_by_id[body_id], s
                    )
        return out

    def broadphase(self, theta, existing):
        return broadphase_pairs(
            self.posed(theta), existing, margin=self.broadphase_margin, exempt=self.exempt
        )

    def pairs_value(self, theta, keys, planes, include_norm_barrier=False):
        """Sum of pair penalties at given planes; +inf when infeasible.

        ``planes`` maps pair key to SeparatingPlane.
        """
        positions = self.positions_map(theta, keys)
        total = 0.0
        for key in keys:
            a, b, s = key
            value = pair_penalty_value(
                self.barrier,
                planes[key],
                positions[(a, s)],
                positions[(b, s)],
                include_norm_barrier=include_norm_barrier,
            )
            if not np.isfinite(value):
                return np.inf
            total += value
        return total

    def objective_eval(self, theta):
        return self.objective.evaluate(self.model, self.bodies_by_id, theta)

    def objective_value(self, theta):
        return self.objective.value(self.model, self.bodies_by_id, theta)

    def audit_pairs(self):
        """All hull pairs subject to the collision audit: distinct frames,
        not exempted, at every sample time."""
        keys = []
        ids = sorted(self.bodies_by_id)
        for i, a in enumerate(ids):
            for b in ids[i + 1 :]:
                if self.bodies_by_id[a].frame_ref == self.bodies_by_id[b].frame_ref:
                    continue
                if (a, b) in self.exempt:
                    continue
                for s in range(self.model.num_samples):
                    keys.append((a, b, s))
        return keys

    def audit_distances(self, theta, gap_tol=1e-12, max_iters=2000):
        """Closest distance of every auditable pair, bypassing the
        broadphase entirely."""
        out = []
        positions = self.positions_map(theta, self.audit_pairs())
        for a, b, s in self.audit_pairs():
            res = closest_points(
                positions[(a, s)], positions[(b, s)], gap_tol=gap_tol, max_iters=max_iters
            )
            out.append(((a, b, s), res.distance))
        return out

    def min_clearance(self, theta, **kw):
        dists = self.audit_distances(theta, **kw)
        if not dists:
            return np.inf, None
        key, dist = min(((k, d) for k, d in dists), key=lambda kd: kd[1])
        return dist, key

    def activation_blocked(self, theta, pairs):
        """True when moving to theta would activate a pair that is already
        touching or overlapping.

        Line searches treat such trials as +inf: a pair entering the
        broadphase margin in a touching state has no feasible plane, which
        is what stops steps from tunneling into contact before a barrier
        exists for the pair.
        """
        trial_pairs = self.broadphase(theta, pairs)
        new_keys = [k for k in trial_pairs.keys() if k not in pairs]
        if not new_keys:
            return False
        positions = self.positions_map(theta, new_keys)
        for a, b, s in new_keys:
            res = closest_points(positions[(a, s)], positions[(b, s)])
            if res.distance <= self.contact_threshold:
                return True
        return False

    def check_feasible_start(self, theta=None, pairs=None):
        """Verify the starting configuration is collision free.

        Checks the broadphase-active pairs; raises InfeasibleStartError
        naming the worst pair when any clearance is at or below the contact
        threshold.  Returns the active pair set.
        """
        theta = self.theta0 if theta is None else theta
        if pairs is None:
            pairs = self.broadphase(theta, CollisionPairSet())
        positions = self.positions_map(theta, pairs.keys())
        worst = (np.inf, None)
        for a, b, s in pairs.keys():
            res = closest_points(positions[(a, s)], positions[(b, s)])
            if res.distance < worst[0]:
                worst = (res.distance, (a, b, s))
        if worst[1] is not None and worst[0] <= self.contact_threshold:
            raise InfeasibleStartError(
                f"bodies {worst[1][0]!r} and {worst[1][1]!r} touch or overlap "
                f"at the start (distance {worst[0]:.3e} at sample {worst[1][2]})",
                pair=worst[1],
            )
        return pairs
