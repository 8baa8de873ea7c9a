import numpy as np
import pytest

from sccplan.geometry import Box, Obstacle
from sccplan.occupancy import (
    AnalyticField,
    PredictionStack,
    RasterField,
    RasterFormatError,
    ensemble_fuse,
    extrude_raster_2d,
    load_raster,
    save_raster,
)

BOUNDS = Box(np.array([-1.0, -1.0, -1.0]), np.array([1.0, 1.0, 1.0]))


def sphere_field(radius=0.2, d_stop=0.1):
    o = Obstacle(kind="sphere", center=np.zeros(3), radius=radius, d_stop=d_stop)
    return AnalyticField((o,), BOUNDS)


def test_analytic_linear_decay():
    f = sphere_field()
    # halfway through the decay band: d = 0.05 -> p_occ = 0.5
    assert f.query(np.array([0.25, 0.0, 0.0])) == pytest.approx(0.5)
    # interior
    assert f.query(np.array([0.1, 0.0, 0.0])) == pytest.approx(0.0)
    # beyond the band
    assert f.query(np.array([0.5, 0.0, 0.0])) == pytest.approx(1.0)


def test_analytic_out_of_bounds_flag():
    f = sphere_field()
    vals, oob = f.query_flagged(np.array([[2.0, 0.0, 0.0], [0.5, 0.0, 0.0]]))
    assert oob.tolist() == [True, False]
    assert vals[0] == 1.0


def test_analytic_requires_d_stop():
    o = Obstacle(kind="sphere", center=np.zeros(3), radius=0.2, sigma=0.1)
    with pytest.raises(ValueError):
        AnalyticField((o,), BOUNDS)


def test_analytic_product_combination():
    o1 = Obstacle(kind="sphere", center=np.array([-0.3, 0, 0.0]), radius=0.2, d_stop=0.2)
    o2 = Obstacle(kind="sphere", center=np.array([0.3, 0, 0.0]), radius=0.2, d_stop=0.2)
    f = AnalyticField((o1, o2), BOUNDS)
    # origin: surface distance 0.1 to both -> survival 0.5 each -> product 0.25
    assert f.query(np.zeros(3)) == pytest.approx(0.25)


def test_analytic_monotone_along_ray():
    f = sphere_field()
    ds = np.linspace(0.2, 0.9, 200)
    pts = np.column_stack([ds, np.zeros_like(ds), np.zeros_like(ds)])
    vals = f.query(pts)
    assert np.all(np.diff(vals) >= -1e-12)


def test_threshold_equivalence_with_decay_band():
    # {p_free >= 1-delta} equals {surface distance >= (1-delta)*d_stop}
    delta = 0.05
    f = sphere_field(radius=0.2, d_stop=0.1)
    d_tilde = (1 - delta) * 0.1
    rng = np.random.default_rng(3)
    dirs = rng.normal(size=(500, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    for eps, expect in ((1e-6, True), (-1e-6, False)):
        pts = dirs * (0.2 + d_tilde + eps)
        vals = f.query(pts)
        assert np.all((vals >= 1 - delta) == expect)


def make_raster():
    vals = np.zeros((2, 1, 1))
    vals[1, 0, 0] = 1.0
    return RasterField(origin=np.zeros(3), cell_size=1.0, values=vals)


def test_raster_cell_center_and_midpoint():
    f = make_raster()
    assert f.query(np.array([0.5, 0.5, 0.5]), mode="nearest") == pytest.approx(0.0)
    assert f.query(np.array([1.5, 0.5, 0.5]), mode="nearest") == pytest.approx(1.0)
    assert f.query(np.array([0.5, 0.5, 0.5]), mode="trilinear") == pytest.approx(0.0)
    # midpoint between the two cell centers
    assert f.query(np.array([1.0, 0.5, 0.5]), mode="trilinear") == pytest.approx(0.5)


def test_raster_constant_everywhere(rng):
    f = RasterField(origin=np.zeros(3), cell_size=0.5, values=np.full((4, 3, 2), 0.7))
    pts = rng.uniform([0, 0, 0], [2.0, 1.5, 1.0], size=(100, 3))
    assert np.allclose(f.query(pts, mode="trilinear"), 0.7)
    assert np.allclose(f.query(pts, mode="nearest"), 0.7)


def test_raster_out_of_extent_default():
    f = make_raster()
    v, oob = f.query_flagged(np.array([5.0, 0.5, 0.5]))
    assert oob and v == 0.0
    f2 = RasterField(origin=np.zeros(3), cell_size=1.0, values=f.values, oob_value=1.0)
    assert f2.query(np.array([5.0, 0.5, 0.5])) == 1.0


def test_raster_trilinear_continuity(rng):
    vals = rng.random((6, 5, 4))
    f = RasterField(origin=np.zeros(3), cell_size=0.2, values=vals)
    # Lipschitz constant of trilinear interpolation is bounded by the max
    # neighbor difference over the cell size
    lip = np.max(np.abs(np.diff(vals, axis=0)))
    lip = max(lip, np.max(np.abs(np.diff(vals, axis=1))))
    lip = max(lip, np.max(np.abs(np.diff(vals, axis=2))))
    lip = 3 * lip / 0.2
    pts = rng.uniform([0.2, 0.2, 0.2], [1.0, 0.8, 0.6], size=(200, 3))
    eps = 1e-4
    for axis in range(3):
        shifted = pts.copy()
        shifted[:, axis] += eps
        dv = np.abs(f.query(shifted) - f.query(pts))
        assert np.all(dv <= lip * eps + 1e-12)


def test_ensemble_fuse_examples():
    base = dict(origin=np.zeros(3), cell_size=1.0)
    stack = PredictionStack(members=[np.full((1, 1, 1), 0.2), np.full((1, 1, 1), 0.8)], **base)
    assert ensemble_fuse(stack).values[0, 0, 0] == pytest.approx(0.5)
    stack = PredictionStack(members=[np.full((2, 2, 1), 0.3)], **base)
    assert np.allclose(ensemble_fuse(stack).values, 0.3)
    members = [np.full((1, 1, 1), v) for v in (0.0, 0.25, 0.5, 0.75, 1.0)]
    assert ensemble_fuse(PredictionStack(members=members, **base)).values[0, 0, 0] == pytest.approx(0.5)


def test_ensemble_fuse_bounded_by_members(rng):
    members = [rng.random((3, 3, 2)) for _ in range(4)]
    fused = ensemble_fuse(PredictionStack(members=members, origin=np.zeros(3), cell_size=1.0))
    lo = np.min(np.stack(members), axis=0)
    hi = np.max(np.stack(members), axis=0)
    assert np.all(fused.values >= lo - 1e-12)
    assert np.all(fused.values <= hi + 1e-12)


def test_stack_dim_mismatch():
    with pytest.raises(RasterFormatError):
        PredictionStack(members=[np.zeros((2, 2, 1)), np.zeros((2, 3, 1))])


def test_raster_file_roundtrip(tmp_path, rng):
    vals = rng.random((5, 4, 3))
    f = RasterField(origin=np.array([0.1, -0.2, 0.3]), cell_size=0.05, values=vals)
    for fmt, name in (("binary", "r.occ"), ("text", "r.txt")):
        path = tmp_path / name
        save_raster(f, path, fmt=fmt)
        g = load_raster(path)
        assert g.dims == f.dims
        assert np.allclose(g.origin, f.origin)
        assert g.cell_size == pytest.approx(f.cell_size)
        atol = 1e-6 if fmt == "binary" else 1e-7  # float32 on disk
        assert np.allclose(g.values, f.values, atol=atol)


def test_raster_file_x_fastest_order(tmp_path):
    vals = np.arange(8, dtype=float).reshape(2, 2, 2) / 10.0
    f = RasterField(origin=np.zeros(3), cell_size=1.0, values=vals)
    path = tmp_path / "order.txt"
    save_raster(f, path, fmt="text")
    body = path.read_text().splitlines()[4:]
    flat = [float(v) for line in body for v in line.split()]
    # x varies fastest: first two entries differ in the x index
    assert flat[0] == pytest.approx(vals[0, 0, 0])
    assert flat[1] == pytest.approx(vals[1, 0, 0])
    assert flat[2] == pytest.approx(vals[0, 1, 0])
    assert flat[4] == pytest.approx(vals[0, 0, 1])


def test_raster_file_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("not a raster\n")
    with pytest.raises(RasterFormatError):
        load_raster(p)
    p.write_text("occupancy-raster 1\ndims 2 2 2\norigin 0 0 0\ncell_size 1\n0.5\n")
    with pytest.raises(RasterFormatError):
        load_raster(p)


def test_extrude_with_dilation():
    vals2d = np.ones((7, 7))
    vals2d[3, 3] = 0.0
    f = extrude_raster_2d(vals2d, np.zeros(3), cell_size=0.1, n_z=2, dilation_radius=0.1)
    assert f.dims == (7, 7, 2)
    # the zero spreads one cell in each axis direction
    assert f.values[2, 3, 0] == 0.0
    assert f.values[3, 2, 1] == 0.0
    assert f.values[2, 2, 0] == 1.0  # diagonal is outside the disc footprint


def test_rasterize_analytic_matches_at_centers():
    f = sphere_field()
    raster = f.rasterize(cell_size=0.25)
    center = raster.origin + (np.array([4, 4, 4]) + 0.5) * 0.25
    assert raster.query(center, mode="nearest") == pytest.approx(f.query(center))
