"""Scenario files: schema, loading, validation, and the bundled suite.

A scenario is one YAML document describing a complete optimization
problem.  Top-level keys::

    name:       string (defaults to the file stem)
    models:     list of kinematic units, each one of
                  {kind: static, id, translation?, rotation?}
                  {kind: free, id}
                  {kind: chain, id, links, axes, offsets,
                   base_translation?, base_rotation?}
    samples:    optional; wraps the scene in a B-spline trajectory:
                  {control_points, degree?, per_span?, times?}
    bodies:     list of convex hulls, each
                  {id, frame, box: {half_extents, center?}}  or
                  {id, frame, vertices: [[x, y, z], ...]}
    objective:  list of weighted terms, each one of
                  {term: gravity-potential, masses: {body: mass}, g?}
                  {term: configuration-regularizer, weight,
                   reference: initial | [floats]}
                  {term: end-effector-target, weight, body, target,
                   vertex?, time?}
                  {term: trajectory-smoothness, weight}
    pairs:      optional; {exempt: [[body_a, body_b], ...]}
    initial:    starting configuration: a flat list of model-dim floats;
                for trajectory models alternatively one row per control
                point, or {interpolate: {from: [...], to: [...]}}
    solver:     optional defaults: eps, eps1, eps2, max_iters, inner_tol,
                eta (barrier stiffness), broadphase_margin

All numbers are parsed with float() so plain "1e-4" spellings work.
Loading validates every cross-reference and, by default, that the
initial configuration is collision free.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .barrier import InverseBarrier
from .common import SolverSettings
from .errors import ScenarioError
from .geometry import ConvexBody
from .kinematics import (
    FreeBodyFrame,
    RevoluteChain,
    SceneModel,
    SplineTrajectoryModel,
    StaticFrame,
)
from .objectives import (
    ConfigRegularizer,
    GravityPotential,
    Objective,
    TargetPoint,
    TrajectorySmoothness,
)
from .problem import Problem

DATA_DIR = Path(__file__).resolve().parent / "data"


@dataclass
class Scenario:
    """A loaded scenario: the problem plus its solver defaults."""

    name: str
    problem: Problem
    settings: SolverSettings
    path: str = None


def bundled_scenarios():
    """Name -> path of every scenario shipped inside the package."""
    return {p.stem: p for p in sorted(DATA_DIR.glob("*.yaml"))}


def _fail(path, message):
    raise ScenarioError(f"{path}: {message}")


def _floats(value, path, context):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        _fail(path, f"{context} must be a list of numbers")
    if not np.all(np.isfinite(arr)):
        _fail(path, f"{context} contains non-finite values")
    return arr


def _build_units(spec, path):
    if not isinstance(spec, list) or not spec:
        _fail(path, "'models' must be a non-empty list")
    units = []
    for entry in spec:
        if not isinstance(entry, dict) or "kind" not in entry or "id" not in entry:
            _fail(path, "every model needs 'kind' and 'id' keys")
        kind = entry["kind"]
        if kind == "static":
            units.append(
                StaticFrame(
                    entry["id"],
                    translation=tuple(_floats(entry.get("translation", (0, 0, 0)), path, "translation")),
                    rotation=tuple(_floats(entry.get("rotation", (0, 0, 0)), path, "rotation")),
                )
            )
        elif kind == "free":
            units.append(FreeBodyFrame(entry["id"]))
        elif kind == "chain":
            for key in ("links", "axes", "offsets"):
                if key not in entry:
                    _fail(path, f"chain model {entry['id']!r} needs {key!r}")
            units.append(
                RevoluteChain(
                    entry["id"],
                    link_names=list(entry["links"]),
                    axes=_floats(entry["axes"], path, "axes"),
                    offsets=_floats(entry["offsets"], path, "offsets"),
                    base_translation=tuple(
                        _floats(entry.get("base_translation", (0, 0, 0)), path, "base_translation")
                    ),
                    base_rotation=tuple(
                        _floats(entry.get("base_rotation", (0, 0, 0)), path, "base_rotation")
                    ),
                )
            )
        else:
            _fail(path, f"unknown model kind {kind!r}")
    return units


def _build_model(doc, path):
    units = _build_units(doc.get("models"), path)
    try:
        scene = SceneModel(units)
    except ValueError as err:
        _fail(path, str(err))
    samples = doc.get("samples")
    if samples is None:
        return scene
    if not isinstance(samples, dict) or "control_points" not in samples:
        _fail(path, "'samples' needs at least 'control_points'")
    kwargs = {
        "control_count": int(samples["control_points"]),
        "degree": int(samples.get("degree", 3)),
    }
    if "times" in samples:
        kwargs["sample_times"] = _floats(samples["times"], path, "samples.times")
    else:
        kwargs["samples_per_span"] = int(samples.get("per_span", 2))
    try:
        return SplineTrajectoryModel(scene, **kwargs)
    except ValueError as err:
        _fail(path, str(err))


def _build_bodies(spec, path):
    if not isinstance(spec, list) or not spec:
        _fail(path, "'bodies' must be a non-empty list")
    bodies = []
    for entry in spec:
        if not isinstance(entry, dict) or "id" not in entry or "frame" not in entry:
            _fail(path, "every body needs 'id' and 'frame' keys")
        if "box" in entry:
            box = entry["box"]
            if not isinstance(box, dict) or "half_extents" not in box:
                _fail(path, f"body {entry['id']!r}: 'box' needs 'half_extents'")
            try:
                body = ConvexBody.box(
                    entry["id"],
                    entry["frame"],
                    _floats(box["half_extents"], path, "half_extents"),
                    center=_floats(box.get("center", (0, 0, 0)), path, "center"),
                )
            except ValueError as err:
                _fail(path, str(err))
        elif "vertices" in entry:
            try:
                body = ConvexBody(
                    entry["id"], _floats(entry["vertices"], path, "vertices"), entry["frame"]
                )
            except ValueError as err:
                _fail(path, str(err))
        else:
            _fail(path, f"body {entry['id']!r} needs either 'box' or 'vertices'")
        bodies.append(body)
    return bodies


def _build_initial(doc, model, path):
    spec = doc.get("initial")
    if spec is None:
        _fail(path, "missing 'initial' configuration")
    if isinstance(spec, dict):
        if "interpolate" not in spec or not isinstance(model, SplineTrajectoryModel):
            _fail(path, "'initial' as a mapping is only {interpolate: ...} on trajectory models")
        ends = spec["interpolate"]
        if not isinstance(ends, dict) or "from" not in ends or "to" not in ends:
            _fail(path, "'interpolate' needs 'from' and 'to'")
        lo = _floats(ends["from"], path, "initial.interpolate.from")
        hi = _floats(ends["to"], path, "initial.interpolate.to")
        if lo.shape != (model.inner.dim,) or hi.shape != (model.inner.dim,):
            _fail(path, f"interpolation endpoints must have {model.inner.dim} entries")
        w = np.linspace(0.0, 1.0, model.control_count)[:, None]
        return ((1.0 - w) * lo + w * hi).reshape(-1)
    theta = _floats(spec, path, "initial")
    if theta.ndim == 2:
        if not isinstance(model, SplineTrajectoryModel):
            _fail(path, "nested 'initial' rows are only valid on trajectory models")
        if theta.shape != (model.control_count, model.inner.dim):
            _fail(
                path,
                f"'initial' rows must be {model.control_count} x {model.inner.dim}, "
                f"got {theta.shape[0]} x {theta.shape[1]}",
            )
        return theta.reshape(-1)
    if theta.shape != (model.dim,):
        _fail(path, f"'initial' must have {model.dim} entries, got {theta.size}")
    return theta


def _build_objective(spec, model, body_ids, theta0, path):
    if not isinstance(spec, list) or not spec:
        _fail(path, "'objective' must be a non-empty list of terms")
    terms = []
    for entry in spec:
        if not isinstance(entry, dict) or "term" not in entry:
            _fail(path, "every objective entry needs a 'term' key")
        kind = entry["term"]
        if kind == "gravity-potential":
            masses = entry.get("masses")
            if not isinstance(masses, dict) or not masses:
                _fail(path, "gravity-potential needs a non-empty 'masses' mapping")
            for body_id in masses:
                if body_id not in body_ids:
                    _fail(path, f"gravity-potential references unknown body {body_id!r}")
            terms.append(
                GravityPotential(
                    masses={k: float(v) for k, v in masses.items()},
                    g=float(entry.get("g", 9.81)),
                )
            )
        elif kind == "configuration-regularizer":
            ref = entry.get("reference", "initial")
            if isinstance(ref, str):
                if ref != "initial":
                    _fail(path, f"unknown regularizer reference {ref!r}")
                ref = theta0.copy()
            else:
                ref = _floats(ref, path, "regularizer reference")
                if ref.shape != (model.dim,):
                    _fail(path, f"regularizer reference must have {model.dim} entries")
            terms.append(ConfigRegularizer(weight=float(entry["weight"]), reference=ref))
        elif kind == "end-effector-target":
            body_id = entry.get("body")
            if body_id not in body_ids:
                _fail(path, f"end-effector-target references unknown body {body_id!r}")
            terms.append(
                TargetPoint(
                    weight=float(entry["weight"]),
                    body_id=body_id,
                    target=_floats(entry["target"], path, "target"),
                    vertex_index=entry.get("vertex"),
                    time_index=int(entry.get("time", 0)),
                )
            )
        elif kind == "trajectory-smoothness":
            if not isinstance(model, SplineTrajectoryModel):
                _fail(path, "trajectory-smoothness requires a trajectory model")
            terms.append(TrajectorySmoothness(weight=float(entry["weight"])))
        else:
            _fail(path, f"unknown objective term {kind!r}")
        if "weight" in entry and float(entry["weight"]) < 0.0:
            _fail(path, f"objective term {kind!r} has a negative weight")
    return Objective(terms)


def _build_exemptions(doc, body_ids, path):
    pairs = doc.get("pairs") or {}
    if not isinstance(pairs, dict):
        _fail(path, "'pairs' must be a mapping")
    exempt = pairs.get("exempt", [])
    out = []
    for item in exempt:
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            _fail(path, "every exemption must be a [body_a, body_b] pair")
        a, b = item
        for body_id in (a, b):
            if body_id not in body_ids:
                _fail(path, f"exemption references unknown body {body_id!r}")
        out.append((a, b))
    return tuple(out)


_SOLVER_KEYS = {"eps", "eps1", "eps2", "max_iters", "inner_tol", "eta", "broadphase_margin"}


def _build_settings(doc, path):
    spec = doc.get("solver") or {}
    if not isinstance(spec, dict):
        _fail(path, "'solver' must be a mapping")
    unknown = set(spec) - _SOLVER_KEYS
    if unknown:
        _fail(path, f"unknown solver keys: {sorted(unknown)}")
    settings = SolverSettings(max_iters=50000)
    for key in ("eps", "eps1", "eps2", "inner_tol"):
        if key in spec:
            setattr(settings, key, float(spec[key]))
    if "max_iters" in spec:
        settings.max_iters = int(spec["max_iters"])
    eta = float(spec.get("eta", 1e-4))
    margin = float(spec.get("broadphase_margin", 0.1))
    return settings, eta, margin


def load_scenario(path, check_feasibility=True):
    """Parse and validate one scenario file.

    Raises ScenarioError on any structural problem and, when
    ``check_feasibility`` is left on, InfeasibleStartError if the initial
    configuration has touching or overlapping hulls.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ScenarioError(f"{path}: cannot read file ({err})") from err
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ScenarioError(f"{path}: invalid YAML ({err})") from err
    if not isinstance(doc, dict):
        _fail(path, "top level must be a mapping")
    for key in ("models", "bodies", "objective", "initial"):
        if key not in doc:
            _fail(path, f"missing required key {key!r}")

    model = _build_model(doc, path)
    bodies = _build_bodies(doc["bodies"], path)
    body_ids = {b.id for b in bodies}
    frame_names = set(model.frame_names)
    for body in bodies:
        if body.frame_ref not in frame_names:
            _fail(path, f"body {body.id!r} references unknown frame {body.frame_ref!r}")
    theta0 = _build_initial(doc, model, path)
    objective = _build_objective(doc["objective"], model, body_ids, theta0, path)
    exempt = _build_exemptions(doc, body_ids, path)
    settings, eta, margin = _build_settings(doc, path)

    try:
        problem = Problem(
            model=model,
            bodies=bodies,
            objective=objective,
            theta0=theta0,
            barrier=InverseBarrier(eta),
            broadphase_margin=margin,
            exempt=exempt,
        )
    except (ValueError, KeyError) as err:
        _fail(path, str(err))
    if check_feasibility:
        problem.check_feasible_start()
    return Scenario(
        name=str(doc.get("name", path.stem)),
        problem=problem,
        settings=settings,
        path=str(path),
    )
