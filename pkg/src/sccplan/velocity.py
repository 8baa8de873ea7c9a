"""Safe velocity scheduling along a planned path.

For each sample s on the path, the distance from the robot region to the
closest not-delta-safe workspace point bounds the admissible tracking error,
hence (through the tracking-error model) the admissible reference speed.
Numerical integration of the resulting profile yields the trajectory timing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import RobotShape, TaskPose, distance_point_to_region
from .planner import TrackingErrorModel, path_lengths, path_pose


class NotDeltaSafeError(RuntimeError):
    """The queried pose violates the delta-safety precondition."""


class StallError(RuntimeError):
    """The velocity profile reaches zero, so the trajectory cannot advance."""

    def __init__(self, s: float):
        super().__init__(f"velocity profile stalls near s = {s:.6f}")
        self.s = s


@dataclass(eq=False)
class VelocityProfile:
    s: np.ndarray
    v: np.ndarray
    d_o: np.ndarray
    warnings: list = field(default_factory=list)


@dataclass(eq=False)
class Trajectory:
    t: np.ndarray
    poses: np.ndarray  # (n, 4) knot poses
    v: np.ndarray  # scheduled speed at each knot

    @property
    def duration(self) -> float:
        return float(self.t[-1])


def unsafe_distance(
    field_,
    path: np.ndarray,
    s: float,
    shape: RobotShape,
    delta: float,
    gamma_max: float,
    grid_pitch: float = 5e-3,
) -> float:
    """Distance from the robot region at path position s to the unsafe set.

    Candidate unsafe points are taken from a grid (pitch ``grid_pitch``) over
    the box around the region inflated by ``gamma_max`` plus one pitch; the
    result is the minimum region distance over candidates whose free
    probability falls below 1 - delta.  Without any unsafe candidate the
    saturating value ``gamma_max`` is returned: larger clearances cannot
    raise the speed any further.

    Raises :class:`NotDeltaSafeError` if an unsafe candidate lies strictly
    inside the region (the pose itself violates delta-safety).
    """
    pose = TaskPose.from_array(path_pose(path, s)[0])
    c, sn = np.cos(pose.phi), np.sin(pose.phi)
    a = shape.semi_axes
    # axis-aligned extents of the yawed ellipsoid
    wx = np.hypot(a[0] * c, a[1] * sn)
    wy = np.hypot(a[0] * sn, a[1] * c)
    half = np.array([wx, wy, a[2]]) + gamma_max + grid_pitch
    axes = [
        pose.x[k] + np.arange(-half[k], half[k] + 0.5 * grid_pitch, grid_pitch)
        for k in range(3)
    ]
    xx, yy, zz = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])
    unsafe = field_.query(pts) < 1.0 - delta
    if not np.any(unsafe):
        return float(gamma_max)
    pts = pts[unsafe]
    local = pts - pose.x
    lx = c * local[:, 0] + sn * local[:, 1]
    ly = -sn * local[:, 0] + c * local[:, 1]
    quad = (lx / a[0]) ** 2 + (ly / a[1]) ** 2 + (local[:, 2] / a[2]) ** 2
    if np.any(quad < 1.0 - 1e-9):
        raise NotDeltaSafeError(f"pose at s = {s:.6f} is not delta-safe")
    d = distance_point_to_region(pts, pose, shape)
    return float(np.min(d))


def max_velocity(d_o: float, gamma_tilde: TrackingErrorModel, v_max: float) -> float:
    """Largest speed <= v_max whose tracking-error bound fits inside d_o."""
    if d_o < 0:
        raise ValueError("d_o must be >= 0")
    if gamma_tilde(v_max) <= d_o:
        return float(v_max)
    return gamma_tilde.inverse(d_o, v_cap=v_max)


def schedule(
    field_,
    path: np.ndarray,
    shape: RobotShape,
    gamma_tilde: TrackingErrorModel,
    delta: float,
    v_min: float,
    v_max: float,
    l: int = 200,
    grid_pitch: float = 5e-3,
) -> VelocityProfile:
    """Velocity profile over l+1 uniformly spaced path positions.

    Planning certified the path with the v_min inflation, so the scheduled
    speed should never fall below v_min; samples where discretization breaks
    that guarantee are reported in the profile warnings.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    s_grid = np.linspace(0.0, 1.0, l + 1)
    gamma_max = float(gamma_tilde(v_max))
    d_o = np.empty(l + 1)
    v = np.empty(l + 1)
    warnings = []
    for i, s in enumerate(s_grid):
        d_o[i] = unsafe_distance(field_, path, s, shape, delta, gamma_max, grid_pitch)
        v[i] = max_velocity(d_o[i], gamma_tilde, v_max)
        if v[i] < v_min:
            warnings.append(
                f"s={s:.4f}: scheduled speed {v[i]:.6f} below v_min={v_min:.6f}"
                f" (d_o={d_o[i]:.6f} < bound({v_min:.6f})={float(gamma_tilde(v_min)):.6f})"
            )
    return VelocityProfile(s=s_grid, v=v, d_o=d_o, warnings=warnings)


def time_parameterize(path: np.ndarray, profile: VelocityProfile) -> Trajectory:
    """Integrate the profile into knot times.

    Each s-interval is traversed at the smaller of its endpoint speeds, which
    keeps the executed speed at or below the scheduled bound between knots.
    """
    s = profile.s
    total = path_lengths(path)[-1]
    v_interval = np.minimum(profile.v[:-1], profile.v[1:])
    if np.any(v_interval <= 0.0):
        bad = int(np.argmax(v_interval <= 0.0))
        raise StallError(float(s[bad]))
    dt = np.diff(s) * total / v_interval
    t = np.concatenate([[0.0], np.cumsum(dt)])
    poses = path_pose(path, s)
    return Trajectory(t=t, poses=poses, v=profile.v.copy())
