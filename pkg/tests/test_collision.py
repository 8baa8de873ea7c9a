import math

import numpy as np
import pytest

from sccplan.collision import (
    SafetyConfig,
    SegmentChecker,
    baseline_bounding_volume,
    baseline_chance_constraint,
    baseline_max_prob,
    max_prob_bound,
    pose_is_delta_safe,
    segment_is_delta_safe,
    _points_safe,
)
from sccplan.geometry import (
    Box,
    Obstacle,
    RobotShape,
    SampleRegion,
    TaskPose,
    sample_region_uniform,
)
from sccplan.occupancy import AnalyticField
from oracles import grid_pose_oracle, max_prob_threshold_distance

BOUNDS = Box(np.array([-2.0, -2.0, -2.0]), np.array([2.0, 2.0, 2.0]))


def sphere_scene(radius=0.2, d_stop=0.1, sigma=0.1, center=(0.0, 0.0, 0.0)):
    o = Obstacle(
        kind="sphere", center=np.array(center), radius=radius, d_stop=d_stop, sigma=sigma
    )
    return (o,), AnalyticField((o,), BOUNDS)


def point_region():
    return SampleRegion(RobotShape(np.array([1e-6, 1e-6, 1e-6])), 0.0)


def test_empty_scene_pose_safe(rng):
    field = AnalyticField((), BOUNDS)
    cfg = SafetyConfig()
    region = SampleRegion(RobotShape(np.array([0.1, 0.05, 0.01])), 0.0)
    p = TaskPose(np.array([0.5, 0.5, 0.0]), 0.3)
    assert pose_is_delta_safe(field, p, region, cfg, rng)


def test_pose_inside_obstacle_unsafe(rng):
    _, field = sphere_scene()
    cfg = SafetyConfig(n_x=100)
    region = SampleRegion(RobotShape(np.array([0.05, 0.05, 0.05])), 0.0)
    p = TaskPose(np.zeros(3), 0.0)  # region fully interior, p_free = 0 everywhere
    assert not pose_is_delta_safe(field, p, region, cfg, rng)


def test_pose_threshold_surface(rng):
    # spherical region of radius 0.05: the safe/unsafe flip happens where the
    # closest region point crosses the d_tilde = 0.95*d_stop surface
    _, field = sphere_scene(radius=0.2, d_stop=0.1)
    cfg = SafetyConfig(delta=0.05, n_x=200)
    region = SampleRegion(RobotShape(np.array([0.05, 0.05, 0.05])), 0.0)
    safe_pose = TaskPose(np.array([0.25 + 0.095 + 0.05, 0.0, 0.0]), 0.0)
    assert pose_is_delta_safe(field, safe_pose, region, cfg, rng)
    # inside the threshold: the unsafe cap is found with probability -> 1 in
    # the sample count, so a large N_x rejects on every seed
    cfg_big = SafetyConfig(delta=0.05, n_x=5000)
    unsafe_pose = TaskPose(np.array([0.25 + 0.085, 0.0, 0.0]), 0.0)
    votes = [
        pose_is_delta_safe(field, unsafe_pose, region, cfg_big, np.random.default_rng(k))
        for k in range(20)
    ]
    assert sum(votes) == 0


def test_boundary_counts_as_safe():
    # query exactly at the threshold: p_free = 1 - delta counts as safe
    _, field = sphere_scene(radius=0.2, d_stop=0.1)
    pts = np.array([[0.2 + 0.095, 0.0, 0.0]])
    assert _points_safe(field, pts, 0.05)
    assert not _points_safe(field, pts - np.array([[1e-9, 0, 0]]), 0.05)


def test_segment_reduces_to_pose_check(rng):
    _, field = sphere_scene()
    cfg = SafetyConfig()
    region = point_region()
    p = TaskPose(np.array([1.0, 1.0, 0.0]), 0.0)
    assert segment_is_delta_safe(field, p, p, region, cfg, rng)


def test_segment_crossing_obstacle_unsafe(rng):
    _, field = sphere_scene()
    cfg = SafetyConfig(delta_p=0.05)
    region = point_region()
    p1 = TaskPose(np.array([-1.0, 0.0, 0.0]), 0.0)
    p2 = TaskPose(np.array([1.0, 0.0, 0.0]), 0.0)
    assert not segment_is_delta_safe(field, p1, p2, region, cfg, rng)
    # fully free segment
    p3 = TaskPose(np.array([-1.0, 1.5, 0.0]), 0.0)
    p4 = TaskPose(np.array([1.0, 1.5, 0.0]), 0.0)
    assert segment_is_delta_safe(field, p3, p4, region, cfg, rng)


def test_monotone_in_delta(rng):
    _, field = sphere_scene()
    region = SampleRegion(RobotShape(np.array([0.04, 0.04, 0.04])), 0.0)
    base = sample_region_uniform(region, 100, rng)
    for k in range(40):
        local = np.random.default_rng(k)
        p = TaskPose(local.uniform(-0.6, 0.6, 3), 0.0)
        safe_small = pose_is_delta_safe(
            field, p, region, SafetyConfig(delta=0.05), local, base_samples=base
        )
        safe_big = pose_is_delta_safe(
            field, p, region, SafetyConfig(delta=0.2), local, base_samples=base
        )
        if safe_small:
            assert safe_big


def test_monotone_in_inflation(rng):
    # growing the region with a superset sample set never flips unsafe -> safe
    _, field = sphere_scene()
    shape = RobotShape(np.array([0.05, 0.05, 0.05]))
    small = SampleRegion(shape, 0.0)
    cfg = SafetyConfig()
    for k in range(40):
        local = np.random.default_rng(100 + k)
        p = TaskPose(local.uniform(-0.6, 0.6, 3), 0.0)
        base_small = sample_region_uniform(small, cfg.n_x, local)
        extra = sample_region_uniform(SampleRegion(shape, 0.05), cfg.n_x, local)
        superset = np.vstack([base_small, extra])
        unsafe_small = not pose_is_delta_safe(
            field, p, small, cfg, local, base_samples=base_small
        )
        if unsafe_small:
            assert not pose_is_delta_safe(
                field, p, small, cfg, local, base_samples=superset
            )


def test_scenario_matches_grid_oracle_near_threshold():
    # dense sampling agrees with the dense-grid oracle away from the
    # threshold surface; disagreements may only occur within one grid pitch
    obstacles, field = sphere_scene(radius=0.2, d_stop=0.1)
    cfg = SafetyConfig(delta=0.05, n_x=10_000)
    region = SampleRegion(RobotShape(np.array([0.05, 0.03, 0.01])), 0.0)
    rng = np.random.default_rng(11)
    mismatch = 0
    for k in range(60):
        d = rng.uniform(0.28, 0.45)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        p = TaskPose(direction * d, rng.uniform(-math.pi, math.pi))
        got = pose_is_delta_safe(field, p, region, cfg, rng)
        want = grid_pose_oracle(field, p, region, 0.05, pitch=1e-3)
        if got != want:
            mismatch += 1
            # only tolerated within a pitch of the threshold surface
            p_hi = TaskPose(direction * (d + 1e-3), p.phi)
            p_lo = TaskPose(direction * (d - 1e-3), p.phi)
            assert grid_pose_oracle(field, p_hi, region, 0.05) != grid_pose_oracle(
                field, p_lo, region, 0.05
            )
    assert mismatch <= 1


GAUSS_SCENE = sphere_scene(radius=0.2, d_stop=0.1, sigma=0.1)[0]


def seg(x1, x2):
    return TaskPose(np.array([x1, 0.0, 0.0]), 0.0), TaskPose(np.array([x2, 0.0, 0.0]), 0.0)


def test_bounding_volume_threshold():
    # center-distance threshold r + 2 sigma = 0.4 for the point-like region
    cfg = SafetyConfig(delta=0.05)
    region = point_region()
    p1, p2 = seg(0.41, 0.8)
    assert baseline_bounding_volume(GAUSS_SCENE, p1, p2, region, cfg)
    p1, p2 = seg(0.39, 0.8)
    assert not baseline_bounding_volume(GAUSS_SCENE, p1, p2, region, cfg)


def test_bounding_volume_sigma_zero_nominal():
    obstacles, _ = sphere_scene(sigma=0.0)
    cfg = SafetyConfig()
    region = point_region()
    p1, p2 = seg(0.201, 0.8)
    assert baseline_bounding_volume(obstacles, p1, p2, region, cfg)
    p1, p2 = seg(0.19, 0.8)
    assert not baseline_bounding_volume(obstacles, p1, p2, region, cfg)


def test_empty_scene_baselines_safe():
    cfg = SafetyConfig()
    region = point_region()
    p1, p2 = seg(0.0, 1.0)
    for fn in (baseline_bounding_volume, baseline_chance_constraint, baseline_max_prob):
        assert fn((), p1, p2, region, cfg)


def test_chance_constraint_quantile():
    # delta = 0.05 -> required clearance = 0.1 * 1.6449
    cfg = SafetyConfig(delta=0.05)
    region = point_region()
    need = 0.1 * 1.6449
    p1, p2 = seg(0.2 + need + 1e-3, 0.9)
    assert baseline_chance_constraint(GAUSS_SCENE, p1, p2, region, cfg)
    p1, p2 = seg(0.2 + need - 1e-3, 0.9)
    assert not baseline_chance_constraint(GAUSS_SCENE, p1, p2, region, cfg)


def test_chance_constraint_median_reduces_to_nominal():
    cfg = SafetyConfig(delta=0.5)
    region = point_region()
    p1, p2 = seg(0.201, 0.9)
    assert baseline_chance_constraint(GAUSS_SCENE, p1, p2, region, cfg)
    p1, p2 = seg(0.199, 0.9)
    assert not baseline_chance_constraint(GAUSS_SCENE, p1, p2, region, cfg)


def test_chance_constraint_sigma_zero_nominal():
    obstacles, _ = sphere_scene(sigma=0.0)
    cfg = SafetyConfig(delta=0.05)
    region = point_region()
    p1, p2 = seg(0.201, 0.9)
    assert baseline_chance_constraint(obstacles, p1, p2, region, cfg)


def test_max_prob_limits():
    cfg = SafetyConfig(delta=0.05)
    region = point_region()
    # far away: bound tends to zero
    p1, p2 = seg(1.5, 1.9)
    assert baseline_max_prob(GAUSS_SCENE, p1, p2, region, cfg)
    # centered on the obstacle mean: density is maximal, clearly unsafe
    p1 = p2 = TaskPose(np.zeros(3), 0.0)
    assert not baseline_max_prob(GAUSS_SCENE, p1, p2, region, cfg)


def test_max_prob_threshold_matches_root_solve():
    # sphere r=0.1, point region, sigma=0.1, delta=0.05
    o = Obstacle(kind="sphere", center=np.zeros(3), radius=0.1, d_stop=0.1, sigma=0.1)
    cfg = SafetyConfig(delta=0.05)
    region = point_region()
    rho = region.enclosing_radius
    d_star = max_prob_threshold_distance(0.1, 0.1, 0.05, rho=rho)
    assert max_prob_bound(o, d_star, rho) == pytest.approx(0.05, rel=1e-9)
    p1, p2 = seg(0.1 + d_star + 1e-5, 1.5)
    assert baseline_max_prob((o,), p1, p2, region, cfg)
    p1, p2 = seg(0.1 + d_star - 1e-5, 1.5)
    assert not baseline_max_prob((o,), p1, p2, region, cfg)


@pytest.mark.parametrize(
    "fn", [baseline_bounding_volume, baseline_chance_constraint, baseline_max_prob]
)
def test_baseline_scale_invariance(fn, rng):
    cfg = SafetyConfig(delta=0.05, delta_p=0.07)
    cfg_scaled = SafetyConfig(delta=0.05, delta_p=0.7)
    region = SampleRegion(RobotShape(np.array([0.05, 0.02, 0.01])), 0.01)
    region_scaled = SampleRegion(RobotShape(np.array([0.5, 0.2, 0.1])), 0.1)
    for k in range(30):
        local = np.random.default_rng(k)
        center = local.uniform(-0.5, 0.5, 3)
        o = Obstacle(
            kind="sphere",
            center=center,
            radius=local.uniform(0.05, 0.2),
            d_stop=0.1,
            sigma=local.uniform(0.0, 0.15),
        )
        o10 = Obstacle(
            kind="sphere", center=center * 10, radius=o.radius * 10, d_stop=1.0,
            sigma=o.sigma * 10,
        )
        a = TaskPose(local.uniform(-1, 1, 3), 0.4)
        b = TaskPose(local.uniform(-1, 1, 3), -0.2)
        a10 = TaskPose(a.x * 10, 0.4)
        b10 = TaskPose(b.x * 10, -0.2)
        assert fn((o,), a, b, region, cfg) == fn((o10,), a10, b10, region_scaled, cfg_scaled)


def test_cuboid_baselines():
    o = Obstacle(
        kind="cuboid",
        center=np.zeros(3),
        half_extents=np.array([0.3, 0.2, 0.1]),
        yaw=0.3,
        d_stop=0.1,
        sigma=0.05,
    )
    cfg = SafetyConfig(delta=0.05)
    region = point_region()
    far = (TaskPose(np.array([2.0, 2.0, 0.0]), 0.0),) * 2
    near = (TaskPose(np.array([0.31, 0.0, 0.0]), 0.0),) * 2
    for fn in (baseline_bounding_volume, baseline_chance_constraint, baseline_max_prob):
        assert fn((o,), far[0], far[1], region, cfg)
        assert not fn((o,), near[0], near[1], region, cfg)


def test_shared_scenarios_mode(rng):
    _, field = sphere_scene()
    cfg = SafetyConfig(shared_scenarios=True)
    region = SampleRegion(RobotShape(np.array([0.05, 0.05, 0.05])), 0.0)
    chk = SegmentChecker("scenario", field=field, region=region, cfg=cfg,
                         rng=np.random.default_rng(0))
    # the fixed scenario set makes repeated checks of one pose deterministic
    p = TaskPose(np.array([0.2 + 0.095 + 0.05 + 1e-4, 0.0, 0.0]), 0.0)
    votes = {chk.pose_safe(p) for _ in range(5)}
    assert votes == {True}
    assert chk.n_checks == 5
    assert chk.check_time >= 0.0


def test_checker_counts_calls(rng):
    obstacles, field = sphere_scene()
    cfg = SafetyConfig()
    region = point_region()
    chk = SegmentChecker("bounding_volume", obstacles=obstacles, region=region, cfg=cfg)
    a = TaskPose(np.array([1.0, 1.0, 0.0]), 0.0)
    chk.pose_safe(a)
    chk.segment_safe(a, TaskPose(np.array([1.5, 1.0, 0.0]), 0.0))
    assert chk.n_checks == 2
