"""Scene container: obstacles, workspace bounds, robot shape, start and goal."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import Box, Obstacle, RobotShape, TaskPose
from .occupancy import AnalyticField


@dataclass(frozen=True, eq=False)
class Scene:
    bounds: Box
    obstacles: tuple
    robot: RobotShape
    start: TaskPose
    goal: TaskPose

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    def analytic_field(self) -> AnalyticField:
        return AnalyticField(self.obstacles, self.bounds)

    def with_uncertainty(self, d_stop=None, sigma=None) -> "Scene":
        """Copy of the scene with every obstacle's uncertainty overridden."""
        obs = tuple(
            replace(
                o,
                d_stop=o.d_stop if d_stop is None else d_stop,
                sigma=o.sigma if sigma is None else sigma,
            )
            for o in self.obstacles
        )
        return Scene(self.bounds, obs, self.robot, self.start, self.goal)

    def with_obstacles(self, obstacles) -> "Scene":
        return Scene(self.bounds, tuple(obstacles), self.robot, self.start, self.goal)


def random_sphere_scene(
    base: Scene,
    count: int,
    radius: float,
    d_stop: float,
    sigma: float,
    rng,
    keep_clear: float = 0.6,
    max_attempts: int = 100_000,
) -> Scene:
    """Replace the base scene's obstacles with randomly placed spheres.

    Spheres keep ``keep_clear`` meters of surface distance from the start and
    goal positions so the endpoints stay checkable for every method.
    """
    lo = base.bounds.lo + radius
    hi = base.bounds.hi - radius
    z_mid = 0.5 * (base.bounds.lo[2] + base.bounds.hi[2])
    centers = []
    attempts = 0
    while len(centers) < count:
        attempts += 1
        if attempts > max_attempts:
            raise RuntimeError(
                f"could not place {count} spheres with keep_clear={keep_clear}"
            )
        c = rng.uniform(lo, hi)
        c[2] = z_mid
        if (
            np.linalg.norm(c - base.start.x) < radius + keep_clear
            or np.linalg.norm(c - base.goal.x) < radius + keep_clear
        ):
            continue
        centers.append(c)
    obstacles = tuple(
        Obstacle(kind="sphere", center=c, radius=radius, d_stop=d_stop, sigma=sigma)
        for c in centers
    )
    return base.with_obstacles(obstacles)
