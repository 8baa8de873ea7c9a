"""Task-space poses, robot shape primitives, and workspace distance queries.

Everything here is a pure function over immutable inputs; random sampling
takes an explicit numpy Generator so callers own reproducibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Bisection iterations for the ellipsoid projection root solve.  100 halvings
# shrink any practical bracket far below the 1e-9 m distance tolerance.
_PROJECTION_MAX_ITER = 100


class DegenerateRegionError(RuntimeError):
    """Rejection sampling acceptance rate collapsed (region too thin)."""


def wrap_angle(phi):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    return math.pi - np.mod(math.pi - np.asarray(phi), TWO_PI)


def _as_vec3(x, name="vector"):
    v = np.asarray(x, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v


@dataclass(frozen=True, eq=False)
class TaskPose:
    """4D task-space pose: position in the workspace plus yaw about z.

    The yaw is wrapped into (-pi, pi] on construction.
    """

    x: np.ndarray
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "x", _as_vec3(self.x, "position"))
        object.__setattr__(self, "phi", float(wrap_angle(self.phi)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x[0], self.x[1], self.x[2], self.phi])

    @classmethod
    def from_array(cls, arr) -> "TaskPose":
        arr = np.asarray(arr, dtype=float)
        return cls(arr[:3], arr[3])


@dataclass(frozen=True, eq=False)
class RobotShape:
    """Reference region of the robot: an ellipsoid centered at the origin.

    A planar ellipse is the degenerate case with a small vertical semi-axis.
    """

    semi_axes: np.ndarray
    kind: str = "ellipsoid"

    def __post_init__(self):
        object.__setattr__(self, "semi_axes", _as_vec3(self.semi_axes, "semi_axes"))
        if self.kind != "ellipsoid":
            raise ValueError(f"unsupported shape kind {self.kind!r}")
        if np.any(self.semi_axes <= 0):
            raise ValueError("semi-axes must be strictly positive")

    @property
    def enclosing_radius(self) -> float:
        return float(np.max(self.semi_axes))


@dataclass(frozen=True, eq=False)
class SampleRegion:
    """Robot reference shape inflated by a ball: R0 (+) B(inflation)."""

    shape: RobotShape
    inflation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "inflation", float(self.inflation))
        if self.inflation < 0:
            raise ValueError("inflation must be >= 0")

    @property
    def enclosing_radius(self) -> float:
        return self.shape.enclosing_radius + self.inflation

    @property
    def box_half_widths(self) -> np.ndarray:
        return self.shape.semi_axes + self.inflation

    def contains_local(self, points) -> np.ndarray:
        """Exact membership test for points in the shape frame.

        A point belongs to the Minkowski sum iff its distance to the bare
        ellipsoid is at most the inflation radius.  Cheap bounds decide most
        points; only a thin band needs the projection solve.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.shape.semi_axes
        quad_inner = np.sum((pts / a) ** 2, axis=1)
        inside = quad_inner <= 1.0
        if self.inflation == 0.0:
            return inside
        # The sum is contained in the grown ellipsoid (support-function
        # bound), so points outside that are rejected without a solve; the
        # radial chord gives an upper distance bound that accepts cheaply.
        quad_outer = np.sum((pts / (a + self.inflation)) ** 2, axis=1)
        radial_ub = (1.0 - 1.0 / np.sqrt(np.maximum(quad_inner, 1.0))) * np.sqrt(
            np.sum(pts * pts, axis=1)
        )
        result = inside | (radial_ub <= self.inflation)
        undecided = ~result & (quad_outer <= 1.0)
        if np.any(undecided):
            d = distance_point_to_ellipsoid(pts[undecided], a)
            result[undecided] = d <= self.inflation + 1e-12
        return result


@dataclass(frozen=True, eq=False)
class Obstacle:
    """Workspace obstacle primitive with uncertainty parameters.

    ``d_stop`` parameterizes the linear occupancy decay of the synthetic
    field backend; ``sigma`` the Gaussian position uncertainty consumed by
    the parametric baselines.  Each backend requires exactly its own one.
    """

    kind: str
    center: np.ndarray
    radius: float | None = None
    half_extents: np.ndarray | None = None
    yaw: float = 0.0
    d_stop: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec3(self.center, "center"))
        if self.kind == "sphere":
            if self.radius is None or self.radius <= 0:
                raise ValueError("sphere needs a positive radius")
            object.__setattr__(self, "radius", float(self.radius))
        elif self.kind == "cuboid":
            he = _as_vec3(self.half_extents, "half_extents")
            if np.any(he <= 0):
                raise ValueError("cuboid half-extents must be positive")
            object.__setattr__(self, "half_extents", he)
            object.__setattr__(self, "yaw", float(wrap_angle(self.yaw)))
        else:
            raise ValueError(f"unknown obstacle kind {self.kind!r}")
        if self.d_stop is None and self.sigma is None:
            raise ValueError("obstacle needs d_stop and/or sigma")
        for name in ("d_stop", "sigma"):
            val = getattr(self, name)
            if val is not None:
                if val < 0:
                    raise ValueError(f"{name} must be >= 0")
                object.__setattr__(self, name, float(val))


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned workspace box."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", _as_vec3(self.lo, "lo"))
        object.__setattr__(self, "hi", _as_vec3(self.hi, "hi"))
        if np.any(self.hi <= self.lo):
            raise ValueError("box upper corner must exceed lower corner")

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)

    def sample(self, rng, n=1) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(n, 3))


def rotation_z(phi) -> np.ndarray:
    """Rotation matrix (or stack of matrices) about the vertical axis."""
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    zero, one = np.zeros_like(c), np.ones_like(c)
    rows = np.stack(
        [
            np.stack([c, -s, zero], axis=-1),
            np.stack([s, c, zero], axis=-1),
            np.stack([zero, zero, one], axis=-1),
        ],
        axis=-2,
    )
    return rows


def apply_rigid_motion(p: TaskPose, x0) -> np.ndarray:
    """Map reference-frame points into the workspace: rotate by yaw, translate.

    ``x0`` may be a single 3-vector or an (n, 3) array.
    """
    pts = np.asarray(x0, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    c, s = math.cos(p.phi), math.sin(p.phi)
    out = np.empty_like(pts)
    out[:, 0] = c * pts[:, 0] - s * pts[:, 1] + p.x[0]
    out[:, 1] = s * pts[:, 0] + c * pts[:, 1] + p.x[1]
    out[:, 2] = pts[:, 2] + p.x[2]
    return out[0] if single else out


def to_local_frame(p: TaskPose, x) -> np.ndarray:
    """Inverse of :func:`apply_rigid_motion`."""
    pts = np.atleast_2d(np.asarray(x, dtype=float)) - p.x
    c, s = math.cos(p.phi), math.sin(p.phi)
    out = np.empty_like(pts)
    out[:, 0] = c * pts[:, 0] + s * pts[:, 1]
    out[:, 1] = -s * pts[:, 0] + c * pts[:, 1]
    out[:, 2] = pts[:, 2]
    return out


def distance_point_to_ellipsoid(points, semi_axes) -> np.ndarray:
    """Euclidean distance from points to a solid axis-aligned ellipsoid.

    Zero inside.  Outside points are projected onto the surface via a 1-D
    root solve on the Lagrange multiplier of
    ``min |x - q|  s.t.  sum (x_i/a_i)^2 = 1``: Newton steps safeguarded by
    a maintained bracket (falling back to its midpoint), which keeps the
    bisection robustness for all aspect ratios while converging far below
    the 1e-9 m tolerance within the iteration cap.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(semi_axes, dtype=float)
    dist = np.zeros(len(pts))
    quad = np.sum((pts / a) ** 2, axis=1)
    outside = quad > 1.0
    if not np.any(outside):
        return dist

    q = pts[outside]
    a2 = a**2
    # F(t) = sum (a_i q_i / (a_i^2 + t))^2 - 1 is decreasing and convex with
    # a root in [0, max(a)*|q|] for points outside the ellipsoid.
    aq2 = (a * q) ** 2
    norm_q = np.sqrt(np.sum(q * q, axis=1))
    lo = np.zeros(len(q))
    hi = np.max(a) * norm_q + 1e-300
    t = lo.copy()
    for _ in range(_PROJECTION_MAX_ITER):
        denom = a2 + t[:, None]
        terms = aq2 / (denom * denom)
        f = np.sum(terms, axis=1) - 1.0
        pos = f > 0.0
        lo = np.where(pos, t, lo)
        hi = np.where(pos, hi, t)
        span = hi - lo
        if np.max(span) < 1e-14 * (1.0 + np.max(hi)):
            break
        fprime = -2.0 * np.sum(terms / denom, axis=1)
        step = np.where(np.abs(fprime) > 0, f / fprime, 0.0)
        t_new = t - step
        # fall back to the bracket midpoint when Newton leaves the bracket
        bad = (t_new <= lo) | (t_new >= hi) | ~np.isfinite(t_new)
        t = np.where(bad, 0.5 * (lo + hi), t_new)
    denom = a2 + t[:, None]
    closest = a2 * q / denom
    diff = closest - q
    dist[outside] = np.sqrt(np.sum(diff * diff, axis=1))
    return dist


def distance_point_to_region(x, p: TaskPose, shape: RobotShape) -> np.ndarray:
    """Distance from workspace points to the posed solid ellipsoid R(p)."""
    local = to_local_frame(p, x)
    d = distance_point_to_ellipsoid(local, shape.semi_axes)
    if np.asarray(x).ndim == 1:
        return float(d[0])
    return d


def distance_point_to_obstacle(x, o: Obstacle) -> np.ndarray:
    """Signed distance to the obstacle surface (negative inside)."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if o.kind == "sphere":
        d = np.linalg.norm(pts - o.center, axis=1) - o.radius
    else:
        rel = pts - o.center
        c, s = math.cos(o.yaw), math.sin(o.yaw)
        loc = np.empty_like(rel)
        loc[:, 0] = c * rel[:, 0] + s * rel[:, 1]
        loc[:, 1] = -s * rel[:, 0] + c * rel[:, 1]
        loc[:, 2] = rel[:, 2]
        q = np.abs(loc) - o.half_extents
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(np.max(q, axis=1), 0.0)
        d = outside + inside
    if np.asarray(x).ndim == 1:
        return float(d[0])
    return d


def sample_region_uniform(region: SampleRegion, n: int, rng) -> np.ndarray:
    """Draw n i.i.d. points uniformly from the Minkowski-sum region.

    Rejection sampling from the bounding box; every returned point passes
    the exact membership test.  Raises :class:`DegenerateRegionError` if the
    acceptance rate falls below 1e-4.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    half = region.box_half_widths
    out = np.empty((n, 3))
    accepted = 0
    attempts = 0
    while accepted < n:
        batch = max(2 * (n - accepted), 256)
        cand = rng.uniform(-half, half, size=(batch, 3))
        mask = region.contains_local(cand)
        take = min(int(np.sum(mask)), n - accepted)
        if take:
            out[accepted : accepted + take] = cand[mask][:take]
            accepted += take
        attempts += batch
        if attempts >= 1_000_000 and accepted / attempts < 1e-4:
            raise DegenerateRegionError(
                f"acceptance rate {accepted / attempts:.2e} below 1e-4"
            )
    return out


def segment_poses(p1: TaskPose, p2: TaskPose, delta_p: float) -> np.ndarray:
    """Discrete poses along the straight task-space segment [p1, p2].

    Positions are spaced ``delta_p`` apart (last step clamped to the
    endpoint), yaw follows the same interpolation parameter along the
    shortest arc.  Both endpoints are always included; returns (k, 4).
    """
    if delta_p <= 0:
        raise ValueError("delta_p must be positive")
    dist = float(np.linalg.norm(p2.x - p1.x))
    dphi = float(wrap_angle(p2.phi - p1.phi))
    if dist < 1e-12:
        if abs(dphi) < 1e-12:
            ts = np.array([0.0])
        else:
            ts = np.array([0.0, 1.0])
    else:
        k = int(math.ceil(dist / delta_p))
        ts = np.minimum(np.arange(k + 1) * (delta_p / dist), 1.0)
    poses = np.empty((len(ts), 4))
    poses[:, :3] = p1.x + ts[:, None] * (p2.x - p1.x)
    poses[:, 3] = wrap_angle(p1.phi + ts * dphi)
    return poses
