"""Asymptotically optimal tree search in the 4D task space with scenario
chance-constrained (or baseline) collision checking.

The planner is plain RRT* over poses (x, y, z, yaw): sample, steer toward the
sample, connect to the cheapest safe neighbor, rewire the neighborhood.  The
line cost of a segment is the squared position distance plus a weighted
squared yaw change, and the nearest-neighbor metric is the square root of the
same quadratic form so steering and cost agree.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .collision import SafetyConfig, SegmentChecker
from .geometry import SampleRegion, TaskPose, wrap_angle
from .scene import Scene


class UnsafeEndpointError(RuntimeError):
    """Start or goal pose fails the safety check."""

    def __init__(self, which: str):
        super().__init__(f"{which} pose fails the safety check")
        self.which = which


@dataclass(frozen=True, eq=False)
class TrackingErrorModel:
    """Non-decreasing piecewise-linear bound on the workspace tracking error
    as a function of reference speed.

    Evaluation clamps to the first/last knot value outside the knot range.
    """

    speeds: np.ndarray
    errors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.speeds, dtype=float)
        g = np.asarray(self.errors, dtype=float)
        if v.ndim != 1 or v.shape != g.shape or len(v) < 1:
            raise ValueError("knot arrays must be 1D and of equal length")
        if np.any(np.diff(v) <= 0):
            raise ValueError("knot speeds must be strictly increasing")
        if np.any(np.diff(g) < 0) or g[0] < 0:
            raise ValueError("error bound must be non-negative and non-decreasing")
        object.__setattr__(self, "speeds", v)
        object.__setattr__(self, "errors", g)

    @classmethod
    def affine(cls, v_max: float, error_at_v_max: float = 0.01) -> "TrackingErrorModel":
        return cls(np.array([0.0, v_max]), np.array([0.0, error_at_v_max]))

    def __call__(self, v):
        return np.interp(v, self.speeds, self.errors)

    def inverse(self, d: float, v_cap: float, tol: float = 1e-6) -> float:
        """Largest speed v <= v_cap with bound(v) <= d, by bisection line search.

        The returned value always satisfies the bound (converges from below).
        """
        if self(v_cap) <= d:
            return float(v_cap)
        if self(0.0) > d:
            return 0.0
        lo, hi = 0.0, float(v_cap)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if self(mid) <= d:
                lo = mid
            else:
                hi = mid
        return lo


@dataclass
class PlannerConfig:
    """Planner and safety parameters (defaults follow the simulation setup)."""

    delta: float = 0.05
    n_x: int = 100
    delta_p: float = 0.05
    n_iter: int = 2000
    v_min: float = 0.01
    v_max: float = 0.2
    gamma_tilde: TrackingErrorModel | None = None
    r: float = 0.1
    steer_step: float | None = None
    goal_bias: float = 0.05
    rewire_radius_factor: float = 0.3
    continuous_cover: bool = False
    shared_scenarios: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.v_min <= self.v_max:
            raise ValueError("need 0 < v_min <= v_max")
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if self.r < 0:
            raise ValueError("orientation weight r must be >= 0")
        if not 0.0 <= self.goal_bias < 1.0:
            raise ValueError("goal_bias must lie in [0, 1)")
        if self.gamma_tilde is None:
            self.gamma_tilde = TrackingErrorModel.affine(self.v_max)

    def safety(self) -> SafetyConfig:
        return SafetyConfig(
            delta=self.delta,
            n_x=self.n_x,
            delta_p=self.delta_p,
            continuous_cover=self.continuous_cover,
            shared_scenarios=self.shared_scenarios,
        )

    def planning_inflation(self) -> float:
        infl = float(self.gamma_tilde(self.v_min))
        if self.continuous_cover:
            infl += 0.5 * self.delta_p
        return infl


@dataclass(frozen=True)
class SafetyCertificate:
    """Record of the check parameters every returned segment passed."""

    checker: str
    delta: float
    n_x: int
    delta_p: float
    inflation: float
    continuous_cover: bool
    shared_scenarios: bool
    seed: int


@dataclass(eq=False)
class PathResult:
    poses: np.ndarray  # (k, 4), start to goal
    cost: float
    success: bool
    status: str
    iterations: int
    n_nodes: int
    best_cost_history: np.ndarray
    certificate: SafetyCertificate
    plan_time: float = 0.0
    check_time: float = 0.0
    n_checks: int = 0

    def to_text(self) -> str:
        """Canonical serialization (used for byte-level reproducibility)."""
        lines = [
            f"status {self.status}",
            f"cost {self.cost!r}",
            f"iterations {self.iterations}",
            f"nodes {self.n_nodes}",
        ]
        for p in self.poses:
            lines.append("pose " + " ".join(repr(float(v)) for v in p))
        return "\n".join(lines) + "\n"


def line_cost(p: TaskPose, q: TaskPose, r: float) -> float:
    """Segment cost: squared position distance plus weighted squared yaw change."""
    dx = q.x - p.x
    dphi = wrap_angle(q.phi - p.phi)
    return float(dx @ dx + r * dphi * dphi)


def _line_cost_arr(a: np.ndarray, b: np.ndarray, r: float):
    d = b[..., :3] - a[..., :3]
    dphi = wrap_angle(b[..., 3] - a[..., 3])
    return np.sum(d * d, axis=-1) + r * dphi * dphi


class SearchTree:
    """Grow-only RRT* tree with a brute-force weighted-metric neighbor index.

    At the node counts used here (a few thousand) one vectorized distance
    pass beats a kd-tree with the custom yaw-wrapped metric.
    """

    def __init__(self, root: np.ndarray, r: float, capacity: int = 4096):
        self.r = r
        self._poses = np.zeros((capacity, 4))
        self._poses[0] = root
        self.parent = [-1]
        self.cost = [0.0]
        self.children = [[]]
        self.n = 1

    @property
    def poses(self) -> np.ndarray:
        return self._poses[: self.n]

    def _metric_sq(self, pose: np.ndarray) -> np.ndarray:
        return _line_cost_arr(self.poses, pose, self.r)

    def nearest(self, pose: np.ndarray) -> int:
        return int(np.argmin(self._metric_sq(pose)))

    def near(self, pose: np.ndarray, radius: float) -> np.ndarray:
        return np.flatnonzero(self._metric_sq(pose) <= radius * radius)

    def add(self, pose: np.ndarray, parent: int, cost: float) -> int:
        if self.n == len(self._poses):
            self._poses = np.vstack([self._poses, np.zeros_like(self._poses)])
        idx = self.n
        self._poses[idx] = pose
        self.parent.append(parent)
        self.cost.append(cost)
        self.children.append([])
        self.children[parent].append(idx)
        self.n += 1
        return idx

    def reparent(self, idx: int, new_parent: int, new_cost: float) -> None:
        """Attach idx under new_parent and propagate the cost change below."""
        old_parent = self.parent[idx]
        self.children[old_parent].remove(idx)
        self.parent[idx] = new_parent
        self.children[new_parent].append(idx)
        delta = new_cost - self.cost[idx]
        stack = [idx]
        while stack:
            k = stack.pop()
            self.cost[k] += delta
            stack.extend(self.children[k])

    def path_to(self, idx: int) -> np.ndarray:
        chain = []
        while idx != -1:
            chain.append(idx)
            idx = self.parent[idx]
        return self.poses[chain[::-1]].copy()


def _metric_diagonal(bounds, r: float) -> float:
    return math.sqrt(bounds.diagonal**2 + r * math.pi**2)


def plan(
    scene: Scene,
    cfg: PlannerConfig,
    checker: str = "scenario",
    field_=None,
    start: TaskPose | None = None,
    goal: TaskPose | None = None,
) -> PathResult:
    """Plan a safe path from start to goal with RRT*.

    ``checker`` selects the segment validity test: "scenario" (against the
    occupancy field; pass ``field_`` to override the scene's analytic field,
    e.g. with a fused raster) or one of the parametric baselines
    ("bounding_volume", "chance_constraint", "max_prob").

    Raises :class:`UnsafeEndpointError` if an endpoint fails its pose check;
    an exhausted iteration budget is reported via ``status="no_path"``, not
    an exception.  Identical (scene, cfg, seed) reproduce the result exactly.
    """
    start = scene.start if start is None else start
    goal = scene.goal if goal is None else goal
    bounds = scene.bounds
    if not np.all(np.isfinite(bounds.lo)) or not np.all(np.isfinite(bounds.hi)):
        raise ValueError("workspace bounds must be finite")

    t_begin = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    region = SampleRegion(scene.robot, cfg.planning_inflation())
    safety = cfg.safety()
    if checker == "scenario":
        chk = SegmentChecker(
            "scenario",
            field=scene.analytic_field() if field_ is None else field_,
            region=region,
            cfg=safety,
            rng=rng,
        )
    else:
        chk = SegmentChecker(
            checker, obstacles=scene.obstacles, region=region, cfg=safety
        )
    certificate = SafetyCertificate(
        checker=checker,
        delta=cfg.delta,
        n_x=cfg.n_x,
        delta_p=cfg.delta_p,
        inflation=region.inflation,
        continuous_cover=cfg.continuous_cover,
        shared_scenarios=cfg.shared_scenarios,
        seed=cfg.seed,
    )

    if not chk.pose_safe(start):
        raise UnsafeEndpointError("start")
    if not chk.pose_safe(goal):
        raise UnsafeEndpointError("goal")

    steer = cfg.steer_step
    if steer is None:
        steer = _metric_diagonal(bounds, cfg.r) / 10.0
    diag = _metric_diagonal(bounds, cfg.r)
    goal_arr = goal.as_array()

    tree = SearchTree(start.as_array(), cfg.r)
    goal_idx = None
    history = np.full(cfg.n_iter, np.inf)

    def try_segment(a: np.ndarray, b: np.ndarray) -> bool:
        return chk.segment_safe(TaskPose.from_array(a), TaskPose.from_array(b))

    for it in range(cfg.n_iter):
        if rng.random() < cfg.goal_bias:
            target = goal_arr.copy()
        else:
            target = np.empty(4)
            target[:3] = rng.uniform(bounds.lo, bounds.hi)
            target[3] = rng.uniform(-math.pi, math.pi)

        near_idx = tree.nearest(target)
        near_pose = tree.poses[near_idx]
        d = math.sqrt(_line_cost_arr(near_pose, target, cfg.r))
        if d < 1e-12:
            history[it] = tree.cost[goal_idx] if goal_idx is not None else np.inf
            continue
        t = min(1.0, steer / d)
        new = np.empty(4)
        new[:3] = near_pose[:3] + t * (target[:3] - near_pose[:3])
        new[3] = wrap_angle(near_pose[3] + t * wrap_angle(target[3] - near_pose[3]))

        n = tree.n
        radius = cfg.rewire_radius_factor * diag * (math.log(n + 1) / (n + 1)) ** 0.25
        neighbors = tree.near(new, radius)
        if near_idx not in neighbors:
            neighbors = np.append(neighbors, near_idx)

        seg_costs = _line_cost_arr(tree.poses[neighbors], new, cfg.r)
        tentative = np.asarray(tree.cost)[neighbors] + seg_costs
        order = np.argsort(tentative, kind="stable")

        new_idx = None
        for o in order:
            nb = int(neighbors[o])
            if try_segment(tree.poses[nb], new):
                new_idx = tree.add(new, nb, float(tentative[o]))
                break
        if new_idx is None:
            history[it] = tree.cost[goal_idx] if goal_idx is not None else np.inf
            continue

        # rewire: route neighbors through the new node when strictly cheaper
        new_cost = tree.cost[new_idx]
        for o in order:
            nb = int(neighbors[o])
            if nb == tree.parent[new_idx]:
                continue
            cand = new_cost + float(seg_costs[o])
            if cand < tree.cost[nb] - 1e-12 and try_segment(new, tree.poses[nb]):
                tree.reparent(nb, new_idx, cand)

        # explicit goal connection attempt
        gd = math.sqrt(_line_cost_arr(new, goal_arr, cfg.r))
        if gd <= steer:
            gcost = new_cost + float(_line_cost_arr(new, goal_arr, cfg.r))
            if goal_idx is None:
                if try_segment(new, goal_arr):
                    goal_idx = tree.add(goal_arr, new_idx, gcost)
            elif gcost < tree.cost[goal_idx] - 1e-12:
                if try_segment(new, goal_arr):
                    tree.reparent(goal_idx, new_idx, gcost)

        history[it] = tree.cost[goal_idx] if goal_idx is not None else np.inf

    plan_time = time.perf_counter() - t_begin
    if goal_idx is None:
        return PathResult(
            poses=np.vstack([start.as_array()]),
            cost=math.inf,
            success=False,
            status="no_path",
            iterations=cfg.n_iter,
            n_nodes=tree.n,
            best_cost_history=history,
            certificate=certificate,
            plan_time=plan_time,
            check_time=chk.check_time,
            n_checks=chk.n_checks,
        )
    return PathResult(
        poses=tree.path_to(goal_idx),
        cost=float(tree.cost[goal_idx]),
        success=True,
        status="ok",
        iterations=cfg.n_iter,
        n_nodes=tree.n,
        best_cost_history=history,
        certificate=certificate,
        plan_time=plan_time,
        check_time=chk.check_time,
        n_checks=chk.n_checks,
    )


def path_lengths(poses: np.ndarray) -> np.ndarray:
    """Cumulative position arc length over a pose polyline, starting at 0."""
    seg = np.linalg.norm(np.diff(poses[:, :3], axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def path_pose(poses: np.ndarray, s) -> np.ndarray:
    """Pose at normalized arc-length position s in [0, 1] on the polyline."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    cum = path_lengths(poses)
    total = cum[-1]
    out = np.empty((len(s), 4))
    if total <= 0.0:
        # degenerate path: interpolate yaw by the raw parameter
        frac = np.clip(s, 0.0, 1.0)
        out[:, :3] = poses[0, :3]
        dphi = wrap_angle(poses[-1, 3] - poses[0, 3])
        out[:, 3] = wrap_angle(poses[0, 3] + frac * dphi)
        return out
    target = np.clip(s, 0.0, 1.0) * total
    seg = np.clip(np.searchsorted(cum, target, side="right") - 1, 0, len(poses) - 2)
    seg_len = cum[seg + 1] - cum[seg]
    frac = np.where(seg_len > 0, (target - cum[seg]) / np.maximum(seg_len, 1e-300), 0.0)
    a, b = poses[seg], poses[seg + 1]
    out[:, :3] = a[:, :3] + frac[:, None] * (b[:, :3] - a[:, :3])
    out[:, 3] = wrap_angle(a[:, 3] + frac * wrap_angle(b[:, 3] - a[:, 3]))
    return out


def interpolate_path(result, K: int) -> np.ndarray:
    """Resample a planned path to K poses uniform in position arc length.

    Accepts a :class:`PathResult` or a raw (n, 4) pose array; endpoints are
    preserved exactly.
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    poses = result.poses if isinstance(result, PathResult) else np.asarray(result)
    out = path_pose(poses, np.linspace(0.0, 1.0, K))
    out[0] = poses[0]
    out[-1] = poses[-1]
    return out
