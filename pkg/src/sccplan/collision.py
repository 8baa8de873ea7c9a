"""Delta-safety checks: the scenario (sampling) checker and three parametric
per-obstacle baselines used for planner comparisons.

The scenario check draws points uniformly from the robot sample region,
maps them through the pose's rigid motion and requires the occupancy field
to report a free probability of at least 1 - delta at every point (boundary
equality counts as safe).  Segments are checked at poses spaced ``delta_p``
apart along the straight task-space line, endpoints included.

The baselines assume Gaussian-distributed obstacle positions
(x_o ~ N(x_hat, sigma^2 I)) with known geometry and over-approximate the
robot region by its enclosing sphere:

* bounding volume — obstacles inflated by 2 sigma, deterministic overlap test;
* chance constraint — clearance to the nominal surface of at least
  sigma * z(1 - delta), z the standard-normal quantile;
* max-probability — collision probability bounded by the volume of the
  combined body times the peak Gaussian density over it; safe if <= delta.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .geometry import (
    SampleRegion,
    TaskPose,
    distance_point_to_obstacle,
    sample_region_uniform,
    segment_poses,
)


@dataclass
class SafetyConfig:
    """Knobs of the segment safety evaluation."""

    delta: float = 0.05
    n_x: int = 100
    delta_p: float = 0.05
    continuous_cover: bool = False
    shared_scenarios: bool = False

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.n_x < 1:
            raise ValueError("n_x must be >= 1")
        if self.delta_p <= 0:
            raise ValueError("delta_p must be positive")

    @property
    def cover_radius(self) -> float:
        """Extra inflation making the discrete pose checks cover the segment."""
        return 0.5 * self.delta_p if self.continuous_cover else 0.0


def _transform_batches(poses: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Apply each pose's rigid motion to its own block of base samples.

    ``poses``: (k, 4); ``base``: (k, n, 3) or (n, 3) shared across poses.
    Returns a flat (k*n, 3) point array.
    """
    if base.ndim == 2:
        base = np.broadcast_to(base, (len(poses),) + base.shape)
    c = np.cos(poses[:, 3])[:, None]
    s = np.sin(poses[:, 3])[:, None]
    out = np.empty_like(base)
    out[:, :, 0] = c * base[:, :, 0] - s * base[:, :, 1] + poses[:, 0:1]
    out[:, :, 1] = s * base[:, :, 0] + c * base[:, :, 1] + poses[:, 1:2]
    out[:, :, 2] = base[:, :, 2] + poses[:, 2:3]
    return out.reshape(-1, 3)


def _points_safe(field, points: np.ndarray, delta: float) -> bool:
    """Scenario acceptance test: all points free with probability >= 1-delta."""
    return bool(np.all(field.query(points) >= 1.0 - delta))


def pose_is_delta_safe(field, p: TaskPose, region: SampleRegion, cfg: SafetyConfig,
                       rng, base_samples=None) -> bool:
    """Scenario check of a single pose.

    The region is expected to already carry the tracking-error inflation
    (plus cover radius when enabled).  Fresh samples are drawn unless
    ``base_samples`` provides a fixed scenario set.
    """
    if base_samples is None:
        base_samples = sample_region_uniform(region, cfg.n_x, rng)
    pts = _transform_batches(p.as_array()[None, :], np.asarray(base_samples))
    return _points_safe(field, pts, cfg.delta)


def segment_is_delta_safe(field, p1: TaskPose, p2: TaskPose, region: SampleRegion,
                          cfg: SafetyConfig, rng, base_samples=None) -> bool:
    """Scenario check of the straight segment [p1, p2] at delta_p spacing."""
    poses = segment_poses(p1, p2, cfg.delta_p)
    if base_samples is not None:
        base = np.asarray(base_samples)
    elif cfg.shared_scenarios:
        base = sample_region_uniform(region, cfg.n_x, rng)
    else:
        base = sample_region_uniform(region, cfg.n_x * len(poses), rng).reshape(
            len(poses), cfg.n_x, 3
        )
    pts = _transform_batches(poses, base)
    return _points_safe(field, pts, cfg.delta)


def _min_surface_distances(obstacles, centers: np.ndarray):
    """Per-obstacle minimum surface distance over the pose centers."""
    for o in obstacles:
        yield o, float(np.min(distance_point_to_obstacle(centers, o)))


def _require_sigma(obstacles):
    for o in obstacles:
        if o.sigma is None:
            raise ValueError("baseline checkers require sigma on every obstacle")


def baseline_bounding_volume(obstacles, p1: TaskPose, p2: TaskPose,
                             region: SampleRegion, cfg: SafetyConfig) -> bool:
    """Deterministic check against obstacles inflated by 2 sigma."""
    _require_sigma(obstacles)
    centers = segment_poses(p1, p2, cfg.delta_p)[:, :3]
    rho = region.enclosing_radius
    for o, d in _min_surface_distances(obstacles, centers):
        if d < 2.0 * o.sigma + rho:
            return False
    return True


def baseline_chance_constraint(obstacles, p1: TaskPose, p2: TaskPose,
                               region: SampleRegion, cfg: SafetyConfig) -> bool:
    """Gaussian tail bound: clearance >= sigma * z(1 - delta) per obstacle."""
    _require_sigma(obstacles)
    centers = segment_poses(p1, p2, cfg.delta_p)[:, :3]
    rho = region.enclosing_radius
    z = float(norm.ppf(1.0 - cfg.delta))
    for o, d in _min_surface_distances(obstacles, centers):
        if d - rho < z * o.sigma:
            return False
    return True


def _minkowski_volume(o, rho: float) -> float:
    """Volume of the obstacle shape grown by a ball of radius rho."""
    if o.kind == "sphere":
        return 4.0 / 3.0 * math.pi * (o.radius + rho) ** 3
    h1, h2, h3 = o.half_extents
    vol = 8.0 * h1 * h2 * h3
    area = 8.0 * (h1 * h2 + h2 * h3 + h1 * h3)
    edges = 8.0 * (h1 + h2 + h3)
    return (
        vol
        + area * rho
        + 0.25 * math.pi * rho**2 * edges
        + 4.0 / 3.0 * math.pi * rho**3
    )


def max_prob_bound(o, center_distance_to_surface: float, rho: float) -> float:
    """Upper bound on the collision probability for one obstacle and pose.

    The probability that the Gaussian-distributed obstacle position falls
    into the combined body (obstacle shape grown by the region's enclosing
    sphere) is bounded by that body's volume times the peak density over it.
    """
    vol = _minkowski_volume(o, rho)
    gap = max(0.0, center_distance_to_surface - rho)
    if o.sigma == 0.0:
        return 0.0 if gap > 0.0 else float("inf")
    peak = math.exp(-0.5 * (gap / o.sigma) ** 2) / (
        2.0 * math.pi * o.sigma**2
    ) ** 1.5
    return vol * peak


def baseline_max_prob(obstacles, p1: TaskPose, p2: TaskPose,
                      region: SampleRegion, cfg: SafetyConfig) -> bool:
    """Density-times-volume bound on collision probability, per obstacle."""
    _require_sigma(obstacles)
    centers = segment_poses(p1, p2, cfg.delta_p)[:, :3]
    rho = region.enclosing_radius
    for o, d in _min_surface_distances(obstacles, centers):
        if max_prob_bound(o, d, rho) > cfg.delta:
            return False
    return True


BASELINES = {
    "bounding_volume": baseline_bounding_volume,
    "chance_constraint": baseline_chance_constraint,
    "max_prob": baseline_max_prob,
}


class SamplePool:
    """Streams i.i.d. uniform region samples in large amortized blocks.

    Rejection sampling cost is dominated by per-call overhead at the batch
    sizes a single segment check needs, so the pool fills a big buffer and
    hands out consecutive, never-reused slices; the stream is statistically
    identical to drawing per check and just as deterministic.
    """

    def __init__(self, region: SampleRegion, rng, block: int = 1 << 18):
        self.region = region
        self.rng = rng
        self.block = block
        self._buf = np.empty((0, 3))
        self._cursor = 0

    def draw(self, n: int) -> np.ndarray:
        out = np.empty((n, 3))
        filled = 0
        while filled < n:
            if self._cursor == len(self._buf):
                self._buf = sample_region_uniform(self.region, self.block, self.rng)
                self._cursor = 0
            take = min(n - filled, len(self._buf) - self._cursor)
            out[filled : filled + take] = self._buf[self._cursor : self._cursor + take]
            self._cursor += take
            filled += take
        return out


class SegmentChecker:
    """Segment/pose validity predicate handed to the planner.

    Wraps either the scenario check against an occupancy field or one of the
    parametric baselines against an obstacle list, and accounts wall time and
    call counts so benchmark reports can separate collision checking from
    tree bookkeeping.
    """

    def __init__(self, kind, field=None, obstacles=None, region=None,
                 cfg=None, rng=None):
        if kind != "scenario" and kind not in BASELINES:
            raise ValueError(f"unknown checker kind {kind!r}")
        self.kind = kind
        self.field = field
        self.obstacles = obstacles
        self.region = region
        self.cfg = cfg
        self.rng = rng
        self.check_time = 0.0
        self.n_checks = 0
        self._fixed_base = None
        self._pool = None
        if kind == "scenario":
            if cfg.shared_scenarios:
                self._fixed_base = sample_region_uniform(region, cfg.n_x, rng)
            else:
                self._pool = SamplePool(region, rng)

    def segment_safe(self, p1: TaskPose, p2: TaskPose) -> bool:
        t0 = time.perf_counter()
        if self.kind == "scenario":
            if self._fixed_base is not None:
                ok = segment_is_delta_safe(
                    self.field, p1, p2, self.region, self.cfg, self.rng,
                    base_samples=self._fixed_base,
                )
            else:
                poses = segment_poses(p1, p2, self.cfg.delta_p)
                base = self._pool.draw(self.cfg.n_x * len(poses)).reshape(
                    len(poses), self.cfg.n_x, 3
                )
                pts = _transform_batches(poses, base)
                ok = _points_safe(self.field, pts, self.cfg.delta)
        else:
            ok = BASELINES[self.kind](self.obstacles, p1, p2, self.region, self.cfg)
        self.check_time += time.perf_counter() - t0
        self.n_checks += 1
        return ok

    def pose_safe(self, p: TaskPose) -> bool:
        return self.segment_safe(p, p)
