"""On-disk formats: YAML scene and benchmark-spec files, plus the structured
text formats for planned paths, velocity profiles, and trajectories.

Scene files double as documentation; see the shipped corpus under
``sccplan/scenes/``.  Every file carries an explicit ``schema`` version and
unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

import numpy as np
import yaml

from .geometry import Box, Obstacle, RobotShape, TaskPose
from .planner import PlannerConfig, TrackingErrorModel
from .scene import Scene
from .velocity import Trajectory, VelocityProfile

SCHEMA_VERSION = 1
PATH_HEADER = "sccplan-path 1"
PROFILE_HEADER = "sccplan-velocity-profile 1"
TRAJECTORY_HEADER = "sccplan-trajectory 1"

METHODS = ("scenario", "bounding_volume", "chance_constraint", "max_prob")


class SceneFileError(ValueError):
    """Malformed scene or spec file; the message names the offending field."""


def _require_mapping(node, where):
    if not isinstance(node, dict):
        raise SceneFileError(f"{where}: expected a mapping, got {type(node).__name__}")
    return node


def _check_keys(node, allowed, where):
    unknown = set(node) - set(allowed)
    if unknown:
        raise SceneFileError(f"{where}: unknown keys {sorted(unknown)}")


def _get(node, key, where, required=True, default=None):
    if key not in node:
        if required:
            raise SceneFileError(f"{where}: missing required key {key!r}")
        return default
    return node[key]


def _check_schema(node, where):
    version = _get(node, "schema", where)
    if version != SCHEMA_VERSION:
        raise SceneFileError(f"{where}: unsupported schema version {version!r}")


def _parse_pose(node, where) -> TaskPose:
    node = _require_mapping(node, where)
    _check_keys(node, ("x", "phi"), where)
    try:
        return TaskPose(np.asarray(_get(node, "x", where), dtype=float),
                        float(node.get("phi", 0.0)))
    except (TypeError, ValueError) as exc:
        raise SceneFileError(f"{where}: {exc}") from exc


def _parse_obstacle(node, where) -> Obstacle:
    node = _require_mapping(node, where)
    _check_keys(
        node,
        ("kind", "center", "radius", "half_extents", "yaw", "d_stop", "sigma"),
        where,
    )
    try:
        return Obstacle(
            kind=_get(node, "kind", where),
            center=np.asarray(_get(node, "center", where), dtype=float),
            radius=node.get("radius"),
            half_extents=(
                np.asarray(node["half_extents"], dtype=float)
                if "half_extents" in node
                else None
            ),
            yaw=float(node.get("yaw", 0.0)),
            d_stop=node.get("d_stop"),
            sigma=node.get("sigma"),
        )
    except (TypeError, ValueError) as exc:
        raise SceneFileError(f"{where}: {exc}") from exc


def _parse_gamma_tilde(node, where) -> TrackingErrorModel:
    node = _require_mapping(node, where)
    _check_keys(node, ("speeds", "errors"), where)
    try:
        return TrackingErrorModel(
            np.asarray(_get(node, "speeds", where), dtype=float),
            np.asarray(_get(node, "errors", where), dtype=float),
        )
    except (TypeError, ValueError) as exc:
        raise SceneFileError(f"{where}: {exc}") from exc


_PLANNER_KEYS = tuple(f.name for f in dc_fields(PlannerConfig))


def _parse_planner(node, where) -> PlannerConfig:
    node = _require_mapping(node, where)
    _check_keys(node, _PLANNER_KEYS, where)
    kwargs = dict(node)
    if "gamma_tilde" in kwargs:
        kwargs["gamma_tilde"] = _parse_gamma_tilde(
            kwargs["gamma_tilde"], f"{where}.gamma_tilde"
        )
    try:
        return PlannerConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise SceneFileError(f"{where}: {exc}") from exc


def parse_scene(doc, where="scene") -> tuple[Scene, PlannerConfig]:
    doc = _require_mapping(doc, where)
    _check_keys(
        doc, ("schema", "workspace", "robot", "start", "goal", "obstacles", "planner"), where
    )
    _check_schema(doc, where)
    ws = _require_mapping(_get(doc, "workspace", where), f"{where}.workspace")
    _check_keys(ws, ("lo", "hi"), f"{where}.workspace")
    try:
        bounds = Box(
            np.asarray(_get(ws, "lo", f"{where}.workspace"), dtype=float),
            np.asarray(_get(ws, "hi", f"{where}.workspace"), dtype=float),
        )
    except (TypeError, ValueError) as exc:
        raise SceneFileError(f"{where}.workspace: {exc}") from exc
    robot_node = _require_mapping(_get(doc, "robot", where), f"{where}.robot")
    _check_keys(robot_node, ("semi_axes",), f"{where}.robot")
    try:
        robot = RobotShape(
            np.asarray(_get(robot_node, "semi_axes", f"{where}.robot"), dtype=float)
        )
    except (TypeError, ValueError) as exc:
        raise SceneFileError(f"{where}.robot: {exc}") from exc
    start = _parse_pose(_get(doc, "start", where), f"{where}.start")
    goal = _parse_pose(_get(doc, "goal", where), f"{where}.goal")
    obstacles_node = doc.get("obstacles", []) or []
    if not isinstance(obstacles_node, list):
        raise SceneFileError(f"{where}.obstacles: expected a list")
    obstacles = tuple(
        _parse_obstacle(o, f"{where}.obstacles[{i}]")
        for i, o in enumerate(obstacles_node)
    )
    cfg = _parse_planner(doc.get("planner", {}) or {}, f"{where}.planner")
    scene = Scene(bounds=bounds, obstacles=obstacles, robot=robot, start=start, goal=goal)
    return scene, cfg


def load_scene(path) -> tuple[Scene, PlannerConfig]:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise SceneFileError(f"{path}: {exc}") from exc
    return parse_scene(doc, where=str(path))


def packaged_scene_path(name: str) -> Path:
    """Path of a scene shipped with the package (e.g. "cluttered")."""
    res = importlib.resources.files("sccplan") / "scenes" / f"{name}.yaml"
    if not res.is_file():
        raise SceneFileError(f"no packaged scene named {name!r}")
    return Path(str(res))


def resolve_scene_ref(ref: str, relative_to: Path | None = None) -> Path:
    """Resolve a scene reference: an existing path wins, then packaged names."""
    p = Path(ref)
    if p.is_file():
        return p
    if relative_to is not None and (relative_to / p).is_file():
        return relative_to / p
    if p.suffix == "" and "/" not in ref:
        return packaged_scene_path(ref)
    raise SceneFileError(f"scene file not found: {ref}")


@dataclass
class BenchmarkSpec:
    """A benchmark campaign: one sweep over one scene for several methods."""

    scene_path: Path
    sweep_variable: str  # "dtilde" (= 2 sigma) or "obstacle_count"
    sweep_values: list
    methods: list = field(default_factory=lambda: list(METHODS))
    runs: int = 100
    k_resample: int = 50
    scenario_backend: str = "analytic"  # or "raster"
    raster_cell_size: float = 0.025
    obstacle_radius: float = 0.15
    obstacle_dtilde: float = 0.2
    obstacle_keep_clear: float = 0.6
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sweep_variable not in ("dtilde", "obstacle_count"):
            raise SceneFileError(f"unknown sweep variable {self.sweep_variable!r}")
        if not self.sweep_values:
            raise SceneFileError("sweep values must be non-empty")
        if self.runs < 1:
            raise SceneFileError("runs must be >= 1")
        for m in self.methods:
            if m not in METHODS:
                raise SceneFileError(f"unknown method {m!r}")
        if self.scenario_backend not in ("analytic", "raster"):
            raise SceneFileError(f"unknown scenario backend {self.scenario_backend!r}")


def load_benchmark_spec(path) -> BenchmarkSpec:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise SceneFileError(f"{path}: {exc}") from exc
    where = str(path)
    doc = _require_mapping(doc, where)
    _check_keys(
        doc,
        (
            "schema",
            "scene",
            "sweep",
            "methods",
            "runs",
            "k_resample",
            "scenario_backend",
            "raster_cell_size",
            "obstacles",
            "overrides",
        ),
        where,
    )
    _check_schema(doc, where)
    sweep = _require_mapping(_get(doc, "sweep", where), f"{where}.sweep")
    _check_keys(sweep, ("variable", "values"), f"{where}.sweep")
    obst = _require_mapping(doc.get("obstacles", {}) or {}, f"{where}.obstacles")
    _check_keys(obst, ("radius", "dtilde", "keep_clear"), f"{where}.obstacles")
    overrides = _require_mapping(doc.get("overrides", {}) or {}, f"{where}.overrides")
    _check_keys(overrides, _PLANNER_KEYS, f"{where}.overrides")
    kwargs = dict(
        scene_path=resolve_scene_ref(str(_get(doc, "scene", where)), path.parent),
        sweep_variable=_get(sweep, "variable", f"{where}.sweep"),
        sweep_values=list(_get(sweep, "values", f"{where}.sweep")),
        overrides=dict(overrides),
    )
    if "methods" in doc:
        kwargs["methods"] = list(doc["methods"])
    for key in ("runs", "k_resample", "scenario_backend", "raster_cell_size"):
        if key in doc:
            kwargs[key] = doc[key]
    if "radius" in obst:
        kwargs["obstacle_radius"] = float(obst["radius"])
    if "dtilde" in obst:
        kwargs["obstacle_dtilde"] = float(obst["dtilde"])
    if "keep_clear" in obst:
        kwargs["obstacle_keep_clear"] = float(obst["keep_clear"])
    return BenchmarkSpec(**kwargs)


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def write_path(poses: np.ndarray, path) -> None:
    poses = np.asarray(poses, dtype=float)
    lines = [PATH_HEADER, f"count {len(poses)}"]
    lines += ["pose " + " ".join(_fmt(v) for v in p) for p in poses]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_path(path) -> np.ndarray:
    return _read_table(path, PATH_HEADER, "pose", 4)


def write_profile(profile: VelocityProfile, path) -> None:
    lines = [PROFILE_HEADER, f"count {len(profile.s)}"]
    lines += [
        f"sample {_fmt(s)} {_fmt(v)} {_fmt(d)}"
        for s, v, d in zip(profile.s, profile.v, profile.d_o)
    ]
    for w in profile.warnings:
        lines.append(f"# warning {w}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_profile(path) -> VelocityProfile:
    table = _read_table(path, PROFILE_HEADER, "sample", 3)
    return VelocityProfile(s=table[:, 0], v=table[:, 1], d_o=table[:, 2])


def write_trajectory(traj: Trajectory, path) -> None:
    lines = [TRAJECTORY_HEADER, f"count {len(traj.t)}"]
    lines += [
        f"knot {_fmt(t)} " + " ".join(_fmt(v) for v in pose) + f" {_fmt(vel)}"
        for t, pose, vel in zip(traj.t, traj.poses, traj.v)
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trajectory(path) -> Trajectory:
    table = _read_table(path, TRAJECTORY_HEADER, "knot", 6)
    return Trajectory(t=table[:, 0], poses=table[:, 1:5], v=table[:, 5])


def _read_table(path, header: str, tag: str, width: int) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0].strip() != header:
        raise SceneFileError(f"{path}: expected header {header!r}")
    try:
        count = int(text[1].split()[1])
    except (IndexError, ValueError) as exc:
        raise SceneFileError(f"{path}: malformed count line") from exc
    rows = []
    for line in text[2:]:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] != tag or len(parts) != width + 1:
            raise SceneFileError(f"{path}: malformed row {line!r}")
        rows.append([float(v) for v in parts[1:]])
    if len(rows) != count:
        raise SceneFileError(f"{path}: expected {count} rows, found {len(rows)}")
    arr = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise SceneFileError(f"{path}: non-finite values")
    return arr
