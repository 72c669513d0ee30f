"""Smooth objective terms over model configurations.

Every term evaluates to ``(value, gradient, hessian)`` in the full
configuration vector.  Terms needing body geometry receive the problem's
body table; trajectory terms require a spline model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GravityPotential:
    """Sum of mass * g * centroid height over the given bodies.

    The centroid is the mean of the hull vertices.  Pose models only.
    """

    masses: dict
    g: float = 9.81

    def evaluate(self, model, bodies, theta):
        if model.num_samples != 1:
            raise ValueError("gravity potential is defined for pose models only")
        value = 0.0
        grad = np.zeros(model.dim)
        hess = np.zeros((model.dim, model.dim))
        for body_id, mass in sorted(self.masses.items()):
            kin = model.body_kinematics(theta, bodies[body_id])
            weight = mass * self.g
            value += weight * kin.positions[:, 2].mean()
            grad += weight * kin.jacobian[:, 2, :].mean(axis=0)
            hess += weight * kin.hessian[:, 2, :, :].mean(axis=0)
        return value, grad, hess

    def value(self, model, bodies, theta):
        if model.num_samples != 1:
            raise ValueError("gravity potential is defined for pose models only")
        return sum(
            mass * self.g * model.body_positions(theta, bodies[body_id])[:, 2].mean()
            for body_id, mass in self.masses.items()
        )


@dataclass
class ConfigRegularizer:
    """weight * |theta - reference|^2."""

    weight: float
    reference: np.ndarray

    def evaluate(self, model, bodies, theta):
        diff = theta - self.reference
        value = self.weight * float(diff @ diff)
        grad = 2.0 * self.weight * diff
        hess = 2.0 * self.weight * np.eye(theta.size)
        return value, grad, hess

    def value(self, model, bodies, theta):
        diff = theta - self.reference
        return self.weight * float(diff @ diff)


@dataclass
class TargetPoint:
    """weight * squared distance from a body point to a world target.

    The point is a vertex when ``vertex_index`` is given, otherwise the
    vertex centroid.  ``time_index`` picks the trajectory sample (negative
    indices count from the end).
    """

    weight: float
    body_id: str
    target: np.ndarray
    vertex_index: int = None
    time_index: int = 0

    def _sample(self, model):
        s = self.time_index
        return s % model.num_samples if s < 0 else s

    def evaluate(self, model, bodies, theta):
        kin = model.body_kinematics(theta, bodies[self.body_id], self._sample(model))
        if self.vertex_index is None:
            x = kin.positions.mean(axis=0)
            jac = kin.jacobian.mean(axis=0)
            hess_x = kin.hessian.mean(axis=0)
        else:
            x = kin.positions[self.vertex_index]
            jac = kin.jacobian[self.vertex_index]
            hess_x = kin.hessian[self.vertex_index]
        diff = x - np.asarray(self.target, dtype=float)
        value = self.weight * float(diff @ diff)
        grad = 2.0 * self.weight * (jac.T @ diff)
        hess = 2.0 * self.weight * (jac.T @ jac + np.einsum("c,cmn->mn", diff, hess_x))
        return value, grad, hess

    def value(self, model, bodies, theta):
        x = model.body_positions(theta, bodies[self.body_id], self._sample(model))
        point = x.mean(axis=0) if self.vertex_index is None else x[self.vertex_index]
        diff = point - np.asarray(self.target, dtype=float)
        return self.weight * float(diff @ diff)


@dataclass
class TrajectorySmoothness:
    """weight * sum of squared second differences of the sampled
    configurations of a spline trajectory model."""

    weight: float
    _quadratic: dict = field(default_factory=dict, repr=False)

    def _matrix(self, model):
        key = id(model)
        if key not in self._quadratic:
            basis = model.basis  # (S, K)
            S = basis.shape[0]
            if S < 3:
                raise ValueError("smoothness needs at least three samples")
            D = np.zeros((S - 2, S))
            for s in range(S - 2):
                D[s, s : s + 3] = [1.0, -2.0, 1.0]
            L = np.kron(D @ basis, np.eye(model.inner.dim))
            self._quadratic[key] = L.T @ L
        return self._quadratic[key]

    def evaluate(self, model, bodies, theta):
        Q = self._matrix(model)
        grad = 2.0 * self.weight * (Q @ theta)
        return self.weight * float(theta @ Q @ theta), grad, 2.0 * self.weight * Q

    def value(self, model, bodies, theta):
        Q = self._matrix(model)
        return self.weight * float(theta @ Q @ theta)


class Objective:
    """Sum of smooth terms."""

    def __init__(self, terms):
        self.terms = list(terms)

    def evaluate(self, model, bodies, theta):
        theta = np.asarray(theta, dtype=float)
        value = 0.0
        grad = np.zeros(model.dim)
        hess = np.zeros((model.dim, model.dim))
        for term in self.terms:
            v, g, h = term.evaluate(model, bodies, theta)
            value += v
            grad += g
            hess += h
        return value, grad, hess

    def value(self, model, bodies, theta):
        theta = np.asarray(theta, dtype=float)
        return sum(term.value(model, bodies, theta) for term in self.terms)
