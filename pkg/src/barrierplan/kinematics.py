"""Kinematic models that pose convex bodies from a configuration vector.

A scene model owns a list of frame units (static poses, free rigid bodies,
serial revolute chains), concatenates their degrees of freedom into one
configuration vector, and maps body-local vertices to world positions with
analytic first and second derivatives.  A trajectory model wraps a scene
model with a clamped uniform B-spline over its configuration and exposes
the same interface per sample time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .rotations import (
    axis_angle_matrix,
    rotate_vertices,
    rotate_vertices_derivs,
    rotation_matrix,
)


@dataclass
class VertexKinematics:
    """World position of one body vertex with configuration derivatives."""

    position: np.ndarray  # (3,)
    jacobian: np.ndarray  # (3, dim)
    hessian: np.ndarray  # (3, dim, dim)


@dataclass
class BodyKinematics:
    """World positions of all body vertices with configuration derivatives."""

    positions: np.ndarray  # (V, 3)
    jacobian: np.ndarray  # (V, 3, dim)
    hessian: np.ndarray  # (V, 3, dim, dim)


class StaticFrame:
    """A fixed world pose; contributes no degrees of freedom."""

    def __init__(self, id, translation=(0.0, 0.0, 0.0), rotation=(0.0, 0.0, 0.0)):
        self.id = id
        self.translation = np.asarray(translation, dtype=float).reshape(3)
        self.rotation = np.asarray(rotation, dtype=float).reshape(3)
        self._R = rotation_matrix(self.rotation)

    dof = 0

    @property
    def frame_names(self):
        return [self.id]

    def positions(self, q, link_index, local_vertices):
        return local_vertices @ self._R.T + self.translation

    def kinematics(self, q, link_index, local_vertices):
        x = self.positions(q, link_index, local_vertices)
        nv = x.shape[0]
        return x, np.zeros((nv, 3, 0)), np.zeros((nv, 3, 0, 0))


class FreeBodyFrame:
    """A free rigid body: translation plus rotation vector, 6 dof."""

    def __init__(self, id):
        self.id = id

    dof = 6

    @property
    def frame_names(self):
        return [self.id]

    def positions(self, q, link_index, local_vertices):
        return rotate_vertices(q[3:], local_vertices) + q[:3]

    def kinematics(self, q, link_index, local_vertices):
        x_rot, jac_rot, hess_rot = rotate_vertices_derivs(q[3:], local_vertices)
        nv = local_vertices.shape[0]
        jac = np.zeros((nv, 3, 6))
        jac[:, :, :3] = np.eye(3)
        jac[:, :, 3:] = jac_rot
        hess = np.zeros((nv, 3, 6, 6))
        hess[:, :, 3:, 3:] = hess_rot
        return x_rot + q[:3], jac, hess


class RevoluteChain:
    """Serial chain of revolute joints; one named link frame per joint.

    Joint ``i`` rotates about ``axes[i]`` (unit vector in the parent frame)
    through a pivot at ``offsets[i]`` from the parent frame origin.  Bodies
    attach to link frames by name.
    """

    def __init__(self, id, link_names, axes, offsets, base_translation=(0.0, 0.0, 0.0), base_rotation=(0.0, 0.0, 0.0)):
        self.id = id
        self.link_names = list(link_names)
        self.axes = np.asarray(axes, dtype=float).reshape(-1, 3)
        self.offsets = np.asarray(offsets, dtype=float).reshape(-1, 3)
        n = len(self.link_names)
        if self.axes.shape[0] != n or self.offsets.shape[0] != n:
            raise ValueError(f"chain {id!r}: need one axis, offset, and link name per joint")
        norms = np.linalg.norm(self.axes, axis=1)
        if np.any(norms < 1e-12):
            raise ValueError(f"chain {id!r}: zero joint axis")
        self.axes = self.axes / norms[:, None]
        self.base_translation = np.asarray(base_translation, dtype=float).reshape(3)
        self.base_rotation = np.asarray(base_rotation, dtype=float).reshape(3)
        self._base_R = rotation_matrix(self.base_rotation)

    @property
    def dof(self):
        return len(self.link_names)

    @property
    def frame_names(self):
        return list(self.link_names)

    def _link_frames(self, q):
        """World joint origins, world joint axes, and link poses along the chain."""
        R = self._base_R
        t = self.base_translation
        origins, axes_w, poses = [], [], []
        for i in range(self.dof):
            origin = R @ self.offsets[i] + t
            axis_w = R @ self.axes[i]
            R = R @ axis_angle_matrix(self.axes[i], q[i])
            t = origin
            origins.append(origin)
            axes_w.append(axis_w)
            poses.append((R, t))
        return np.array(origins), np.array(axes_w), poses

    def positions(self, q, link_index, local_vertices):
        _, _, poses = self._link_frames(q)
        R, t = poses[link_index]
        return local_vertices @ R.T + t

    def kinematics(self, q, link_index, local_vertices):
        origins, axes_w, poses = self._link_frames(q)
        R, t = poses[link_index]
        x = local_vertices @ R.T + t
        nv = x.shape[0]
        n = self.dof
        jac = np.zeros((nv, 3, n))
        hess = np.zeros((nv, 3, n, n))
        for i in range(link_index + 1):
            jac[:, :, i] = np.cross(axes_w[i], x - origins[i])
        for j in range(link_index + 1):
            r = x - origins[j]
            for i in range(j + 1):
                uij = np.cross(axes_w[i], axes_w[j])
                block = np.cross(uij, r) + np.cross(axes_w[j], np.cross(axes_w[i], r))
                hess[:, :, i, j] = block
                hess[:, :, j, i] = block
        return x, jac, hess


class SceneModel:
    """Poses bodies from the concatenated configurations of its frame units."""

    def __init__(self, units):
        self.units = list(units)
        self._frame_map = {}
        self._slices = []
        offset = 0
        for ui, unit in enumerate(self.units):
            for li, name in enumerate(unit.frame_names):
                if name in self._frame_map:
                    raise ValueError(f"duplicate frame name {name!r}")
                self._frame_map[name] = (ui, li)
            self._slices.append(slice(offset, offset + unit.dof))
            offset += unit.dof
        self._dim = offset

    @property
    def dim(self):
        return self._dim

    num_samples = 1

    @property
    def frame_names(self):
        return list(self._frame_map)

    def _resolve(self, frame_ref):
        try:
            ui, li = self._frame_map[frame_ref]
        except KeyError:
            raise KeyError(f"unknown frame {frame_ref!r}") from None
        return self.units[ui], self._slices[ui], li

    def frame_config_slice(self, frame_ref):
        """Slice of the configuration vector driving the given frame."""
        _, sl, _ = self._resolve(frame_ref)
        return sl

    def body_positions(self, theta, body, time_index=0):
        if time_index != 0:
            raise IndexError("pose model has a single sample at index 0")
        unit, sl, li = self._resolve(body.frame_ref)
        return unit.positions(np.asarray(theta, dtype=float)[sl], li, body.local_vertices)

    def body_kinematics(self, theta, body, time_index=0):
        if time_index != 0:
            raise IndexError("pose model has a single sample at index 0")
        theta = np.asarray(theta, dtype=float)
        unit, sl, li = self._resolve(body.frame_ref)
        x, jac_u, hess_u = unit.kinematics(theta[sl], li, body.local_vertices)
        nv = x.shape[0]
        jac = np.zeros((nv, 3, self._dim))
        hess = np.zeros((nv, 3, self._dim, self._dim))
        jac[:, :, sl] = jac_u
        hess[:, :, sl, sl] = hess_u
        return BodyKinematics(positions=x, jacobian=jac, hessian=hess)


def clamped_uniform_knots(control_count, degree):
    """Clamped knot vector on [0, 1] with uniform interior knots."""
    if control_count <= degree:
        raise ValueError("need more control points than the spline degree")
    interior = np.linspace(0.0, 1.0, control_count - degree + 1)[1:-1]
    return np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])


class SplineTrajectoryModel:
    """Clamped uniform B-spline over an inner model's configuration.

    The configuration vector stacks ``control_count`` control points of the
    inner model's configuration; collision pairs and objective terms see the
    trajectory through its sample times.  Defaults to degree 3 with two
    uniform samples per knot span (plus the final endpoint).
    """

    def __init__(self, inner, control_count, degree=3, samples_per_span=2, sample_times=None):
        self.inner = inner
        self.control_count = int(control_count)
        self.degree = int(degree)
        self.knots = clamped_uniform_knots(self.control_count, self.degree)
        if sample_times is None:
            spans = self.control_count - self.degree
            sample_times = np.linspace(0.0, 1.0, samples_per_span * spans + 1)
        self.sample_times = np.asarray(sample_times, dtype=float)
        if self.sample_times.ndim != 1 or self.sample_times.size == 0:
            raise ValueError("sample_times must be a non-empty 1-d sequence")
        if np.any(self.sample_times < 0.0) or np.any(self.sample_times > 1.0):
            raise ValueError("sample times must lie in [0, 1]")
        self.basis = BSpline.design_matrix(
            self.sample_times, self.knots, self.degree, extrapolate=False
        ).toarray()

    @property
    def dim(self):
        return self.control_count * self.inner.dim

    @property
    def num_samples(self):
        return self.sample_times.size

    @property
    def frame_names(self):
        return self.inner.frame_names

    def control_points(self, theta):
        """View of theta as (control_count, inner.dim) control points."""
        return np.asarray(theta, dtype=float).reshape(self.control_count, self.inner.dim)

    def config_at(self, theta, time_index):
        """Inner configuration at a sample time; linear in theta."""
        return self.basis[time_index] @ self.control_points(theta)

    def body_positions(self, theta, body, time_index=0):
        return self.inner.body_positions(self.config_at(theta, time_index), body)

    def body_kinematics(self, theta, body, time_index=0):
        w = self.basis[time_index]
        kin = self.inner.body_kinematics(self.config_at(theta, time_index), body)
        nv = kin.positions.shape[0]
        q = self.inner.dim
        jac = np.einsum("k,vam->vakm", w, kin.jacobian).reshape(nv, 3, self.dim)
        hess = np.einsum("k,l,vamn->vakmln", w, w, kin.hessian).reshape(
            nv, 3, self.dim, self.dim
        )
        return BodyKinematics(positions=kin.positions, jacobian=jac, hessian=hess)


def vertex_kinematics(model, theta, body, vertex_index, time_index=0):
    """Kinematics of a single body vertex under a model."""
    kin = model.body_kinematics(theta, body, time_index)
    return VertexKinematics(
        position=kin.positions[vertex_index],
        jacobian=kin.jacobian[vertex_index],
        hessian=kin.hessian[vertex_index],
    )


def trajectory_sample_kinematics(model, theta, time_index, body, vertex_index):
    """Kinematics of a body vertex at one trajectory sample time."""
    return vertex_kinematics(model, theta, body, vertex_index, time_index=time_index)
