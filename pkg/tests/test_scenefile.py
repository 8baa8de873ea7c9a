import numpy as np
import pytest

from sccplan.planner import PlannerConfig
from sccplan.scenefile import (
    SceneFileError,
    load_benchmark_spec,
    load_scene,
    packaged_scene_path,
    read_path,
    read_profile,
    read_trajectory,
    resolve_scene_ref,
    write_path,
    write_profile,
    write_trajectory,
)
from sccplan.velocity import Trajectory, VelocityProfile

GOOD_SCENE = """\
schema: 1
workspace:
  lo: [0.0, 0.0, 0.0]
  hi: [2.0, 2.0, 1.0]
robot:
  semi_axes: [0.1, 0.05, 0.01]
start: {x: [0.2, 0.2, 0.5], phi: 0.0}
goal: {x: [1.8, 1.8, 0.5], phi: 0.0}
obstacles:
  - kind: sphere
    center: [1.0, 1.0, 0.5]
    radius: 0.2
    d_stop: 0.1
    sigma: 0.05
  - kind: cuboid
    center: [0.5, 1.5, 0.5]
    half_extents: [0.1, 0.2, 0.3]
    yaw: 0.4
    d_stop: 0.1
planner:
  delta: 0.1
  n_iter: 500
  gamma_tilde:
    speeds: [0.0, 0.2]
    errors: [0.0, 0.02]
"""


def test_load_scene(tmp_path):
    p = tmp_path / "scene.yaml"
    p.write_text(GOOD_SCENE)
    scene, cfg = load_scene(p)
    assert len(scene.obstacles) == 2
    assert scene.obstacles[0].kind == "sphere"
    assert scene.obstacles[1].yaw == pytest.approx(0.4)
    assert cfg.delta == 0.1
    assert cfg.n_iter == 500
    assert cfg.gamma_tilde(0.2) == pytest.approx(0.02)
    # unspecified knobs keep their defaults
    assert cfg.n_x == PlannerConfig().n_x


def test_unknown_keys_rejected(tmp_path):
    p = tmp_path / "scene.yaml"
    p.write_text(GOOD_SCENE.replace("planner:", "plannerr:"))
    with pytest.raises(SceneFileError, match="unknown keys"):
        load_scene(p)
    p.write_text(GOOD_SCENE.replace("radius: 0.2", "radius: 0.2\n    colour: red"))
    with pytest.raises(SceneFileError, match="unknown keys"):
        load_scene(p)


def test_schema_version_checked(tmp_path):
    p = tmp_path / "scene.yaml"
    p.write_text(GOOD_SCENE.replace("schema: 1", "schema: 99"))
    with pytest.raises(SceneFileError, match="schema"):
        load_scene(p)
    p.write_text(GOOD_SCENE.replace("schema: 1\n", ""))
    with pytest.raises(SceneFileError, match="schema"):
        load_scene(p)


def test_malformed_values_name_the_field(tmp_path):
    p = tmp_path / "scene.yaml"
    p.write_text(GOOD_SCENE.replace("radius: 0.2", "radius: -1.0"))
    with pytest.raises(SceneFileError, match=r"obstacles\[0\]"):
        load_scene(p)
    p.write_text(GOOD_SCENE.replace("hi: [2.0, 2.0, 1.0]", "hi: [0.0, 0.0, 0.0]"))
    with pytest.raises(SceneFileError, match="workspace"):
        load_scene(p)


def test_yaml_syntax_error_reported(tmp_path):
    p = tmp_path / "scene.yaml"
    p.write_text("schema: 1\nworkspace: [unclosed\n")
    with pytest.raises(SceneFileError):
        load_scene(p)


def test_packaged_scenes_load():
    for name in ("empty", "simple", "cluttered", "runtime_base"):
        scene, cfg = load_scene(packaged_scene_path(name))
        assert scene.bounds.diagonal > 0
    with pytest.raises(SceneFileError):
        packaged_scene_path("no_such_scene")


def test_resolve_scene_ref(tmp_path):
    p = tmp_path / "local.yaml"
    p.write_text(GOOD_SCENE)
    assert resolve_scene_ref(str(p)) == p
    assert resolve_scene_ref("local.yaml", tmp_path) == tmp_path / "local.yaml"
    assert resolve_scene_ref("cluttered").name == "cluttered.yaml"
    with pytest.raises(SceneFileError):
        resolve_scene_ref("missing.yaml", tmp_path)


def test_benchmark_spec_load(tmp_path):
    spec_text = """\
schema: 1
scene: cluttered
sweep:
  variable: dtilde
  values: [0.1, 0.3]
methods: [scenario, max_prob]
runs: 3
k_resample: 40
overrides:
  n_iter: 100
"""
    p = tmp_path / "spec.yaml"
    p.write_text(spec_text)
    spec = load_benchmark_spec(p)
    assert spec.sweep_values == [0.1, 0.3]
    assert spec.runs == 3
    assert spec.overrides == {"n_iter": 100}
    p.write_text(spec_text.replace("variable: dtilde", "variable: banana"))
    with pytest.raises(SceneFileError):
        load_benchmark_spec(p)
    p.write_text(spec_text.replace("methods: [scenario, max_prob]", "methods: [foo]"))
    with pytest.raises(SceneFileError):
        load_benchmark_spec(p)
    p.write_text(spec_text + "extra_key: 1\n")
    with pytest.raises(SceneFileError, match="unknown keys"):
        load_benchmark_spec(p)


def test_path_file_roundtrip(tmp_path, rng):
    poses = rng.uniform(-1, 1, (7, 4))
    f = tmp_path / "path.txt"
    write_path(poses, f)
    back = read_path(f)
    assert np.array_equal(back, poses)  # full-precision text format


def test_profile_and_trajectory_roundtrip(tmp_path):
    prof = VelocityProfile(
        s=np.linspace(0, 1, 5),
        v=np.array([0.2, 0.1, 0.05, 0.1, 0.2]),
        d_o=np.linspace(0.01, 0.002, 5),
        warnings=["s=0.5000: scheduled speed 0.050000 below v_min=0.060000"],
    )
    fp = tmp_path / "profile.txt"
    write_profile(prof, fp)
    back = read_profile(fp)
    assert np.array_equal(back.s, prof.s)
    assert np.array_equal(back.v, prof.v)
    assert np.array_equal(back.d_o, prof.d_o)

    traj = Trajectory(
        t=np.array([0.0, 1.0, 2.5]),
        poses=np.array([[0, 0, 0, 0.0], [0.1, 0, 0, 0.1], [0.2, 0, 0, 0.2]]),
        v=np.array([0.1, 0.1, 0.08]),
    )
    ft = tmp_path / "traj.txt"
    write_trajectory(traj, ft)
    back = read_trajectory(ft)
    assert np.array_equal(back.t, traj.t)
    assert np.array_equal(back.poses, traj.poses)
    assert np.array_equal(back.v, traj.v)


def test_table_format_errors(tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text("wrong header\n")
    with pytest.raises(SceneFileError):
        read_path(f)
    f.write_text("sccplan-path 1\ncount 2\npose 0 0 0 0\n")
    with pytest.raises(SceneFileError, match="expected 2 rows"):
        read_path(f)
    f.write_text("sccplan-path 1\ncount 1\npose 0 0 nan 0\n")
    with pytest.raises(SceneFileError, match="non-finite"):
        read_path(f)
