"""Probabilistic occupancy fields: P(x in free workspace) over a 3D box.

Two backends share the query interface:

* :class:`AnalyticField` — synthetic scenes where the occupancy probability of
  each obstacle decays linearly with surface distance, reaching zero at
  ``d_stop``; per-obstacle free probabilities combine independently.
* :class:`RasterField` — a dense voxel grid of free probabilities (e.g. the
  fused output of a segmentation ensemble lifted to 3D), queried by nearest
  cell or trilinear interpolation.

Raster file format (binary, little-endian), version 1::

    bytes 0..7   magic  b"OCCRAST1"
    uint32       nx, ny, nz
    float64      origin x, y, z [m]
    float64      cell_size [m]
    float32      nx*ny*nz cell values (p_free), x index varying fastest

A plain-text variant is accepted as well (``occupancy-raster 1`` header,
then ``dims`` / ``origin`` / ``cell_size`` lines and whitespace-separated
values in the same x-fastest order).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import Box, Obstacle, distance_point_to_obstacle

RASTER_MAGIC = b"OCCRAST1"
TEXT_HEADER = "occupancy-raster 1"


class RasterFormatError(ValueError):
    """Raised for malformed raster files or mismatched stacks."""


def _flatten(points):
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    return np.atleast_2d(pts), single


@dataclass(frozen=True, eq=False)
class AnalyticField:
    """Synthetic linear-decay occupancy field over a list of obstacles.

    Per obstacle, p_occ = 1 inside and max(0, 1 - d/d_stop) outside (d the
    surface distance); the free probability is the product of per-obstacle
    survival terms.  Points outside the workspace box count as free.
    """

    obstacles: tuple
    bounds: Box

    def __post_init__(self):
        obs = tuple(self.obstacles)
        for o in obs:
            if o.d_stop is None:
                raise ValueError("analytic backend requires d_stop on every obstacle")
        object.__setattr__(self, "obstacles", obs)
        # sphere parameters are stacked so queries handle them in one pass
        spheres = [o for o in obs if o.kind == "sphere"]
        object.__setattr__(
            self,
            "_sphere_centers",
            np.array([o.center for o in spheres]).reshape(-1, 3),
        )
        object.__setattr__(
            self, "_sphere_radii", np.array([o.radius for o in spheres])
        )
        object.__setattr__(
            self, "_sphere_dstops", np.array([o.d_stop for o in spheres])
        )
        object.__setattr__(
            self, "_cuboids", tuple(o for o in obs if o.kind == "cuboid")
        )

    def query(self, points) -> np.ndarray:
        values, _ = self.query_flagged(points)
        return values

    def query_flagged(self, points):
        """Free probabilities plus a mask of out-of-workspace queries."""
        pts, single = _flatten(points)
        p_free = np.ones(len(pts))
        if len(self._sphere_radii):
            rel = pts[None, :, :] - self._sphere_centers[:, None, :]
            d = np.sqrt(np.einsum("kij,kij->ki", rel, rel)) - self._sphere_radii[:, None]
            with np.errstate(divide="ignore"):
                occ = np.clip(1.0 - d / self._sphere_dstops[:, None], 0.0, 1.0)
            zero = self._sphere_dstops == 0.0
            if np.any(zero):
                occ[zero] = (d[zero] <= 0).astype(float)
            p_free = np.prod(1.0 - occ, axis=0)
        for o in self._cuboids:
            d = distance_point_to_obstacle(pts, o)
            if o.d_stop > 0:
                occ = np.clip(1.0 - d / o.d_stop, 0.0, 1.0)
            else:
                occ = (d <= 0).astype(float)
            p_free *= 1.0 - occ
        oob = ~self.bounds.contains(pts)
        p_free[oob] = 1.0
        if single:
            return float(p_free[0]), bool(oob[0])
        return p_free, oob

    def rasterize(self, cell_size: float) -> "RasterField":
        """Sample the field at cell centers onto a grid covering the bounds."""
        dims = np.maximum(
            np.ceil((self.bounds.hi - self.bounds.lo) / cell_size).astype(int), 1
        )
        centers = [
            self.bounds.lo[k] + (np.arange(dims[k]) + 0.5) * cell_size
            for k in range(3)
        ]
        xx, yy, zz = np.meshgrid(*centers, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])
        vals = self.query(pts).reshape(dims)
        return RasterField(origin=self.bounds.lo.copy(), cell_size=cell_size, values=vals)


@dataclass(eq=False)
class RasterField:
    """Dense voxel grid of free probabilities, cell-centered.

    Cell (i, j, k) holds the value at origin + (i+.5, j+.5, k+.5)*cell_size.
    Queries outside the raster extent return ``oob_value`` (0 by default:
    occupied where no data exists).
    """

    origin: np.ndarray
    cell_size: float
    values: np.ndarray
    oob_value: float = 0.0

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3 or min(self.values.shape) < 1:
            raise ValueError("raster values must be a non-empty 3D array")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValueError("raster values must lie in [0, 1]")

    @property
    def dims(self):
        return self.values.shape

    @property
    def bounds(self) -> Box:
        return Box(self.origin, self.origin + np.array(self.dims) * self.cell_size)

    def query(self, points, mode: str = "trilinear") -> np.ndarray:
        values, _ = self.query_flagged(points, mode)
        return values

    def query_flagged(self, points, mode: str = "trilinear"):
        pts, single = _flatten(points)
        dims = np.array(self.dims)
        rel = (pts - self.origin) / self.cell_size
        oob = np.any((rel < 0) | (rel > dims), axis=1)
        u = np.clip(rel - 0.5, 0.0, dims - 1.0)  # lattice coords of cell centers
        if mode == "nearest":
            idx = np.rint(u).astype(int)
            out = self.values[idx[:, 0], idx[:, 1], idx[:, 2]]
        elif mode == "trilinear":
            i0 = np.minimum(np.floor(u).astype(int), np.maximum(dims - 2, 0))
            frac = np.clip(u - i0, 0.0, 1.0)
            i1 = np.minimum(i0 + 1, dims - 1)
            out = np.zeros(len(pts))
            for dx in (0, 1):
                wx = frac[:, 0] if dx else 1.0 - frac[:, 0]
                ix = i1[:, 0] if dx else i0[:, 0]
                for dy in (0, 1):
                    wy = frac[:, 1] if dy else 1.0 - frac[:, 1]
                    iy = i1[:, 1] if dy else i0[:, 1]
                    for dz in (0, 1):
                        wz = frac[:, 2] if dz else 1.0 - frac[:, 2]
                        iz = i1[:, 2] if dz else i0[:, 2]
                        out += wx * wy * wz * self.values[ix, iy, iz]
        else:
            raise ValueError(f"unknown query mode {mode!r}")
        out = np.where(oob, self.oob_value, out)
        if single:
            return float(out[0]), bool(oob[0])
        return out, oob


@dataclass(eq=False)
class PredictionStack:
    """Per-cell free probabilities from M ensemble members on one grid."""

    members: list = field(default_factory=list)
    origin: np.ndarray = None
    cell_size: float = None

    def __post_init__(self):
        if not self.members:
            raise RasterFormatError("prediction stack needs at least one member")
        self.members = [np.asarray(m, dtype=float) for m in self.members]
        shape = self.members[0].shape
        for m in self.members[1:]:
            if m.shape != shape:
                raise RasterFormatError(
                    f"member dims {m.shape} do not match {shape}"
                )
        if self.origin is None:
            self.origin = np.zeros(3)
        self.origin = np.asarray(self.origin, dtype=float)
        if self.cell_size is None:
            self.cell_size = 1.0

    @classmethod
    def from_fields(cls, fields) -> "PredictionStack":
        fields = list(fields)
        base = fields[0]
        for f in fields[1:]:
            if f.dims != base.dims:
                raise RasterFormatError(f"member dims {f.dims} do not match {base.dims}")
            if f.cell_size != base.cell_size or np.any(f.origin != base.origin):
                raise RasterFormatError("member rasters must share origin and cell size")
        return cls(
            members=[f.values for f in fields],
            origin=base.origin,
            cell_size=base.cell_size,
        )


def ensemble_fuse(stack: PredictionStack) -> RasterField:
    """Uniformly weighted mixture of the M member predictions (cell mean)."""
    mean = np.mean(np.stack(stack.members), axis=0)
    return RasterField(origin=stack.origin, cell_size=stack.cell_size, values=mean)


def extrude_raster_2d(
    values_2d,
    origin,
    cell_size: float,
    n_z: int,
    dilation_radius: float = 0.0,
) -> RasterField:
    """Lift a 2D free-probability raster to 3D by vertical extrusion.

    ``dilation_radius`` [m] grows obstacles (a minimum filter on p_free with
    a disc footprint), the coarse way to absorb depth errors.
    """
    vals = np.asarray(values_2d, dtype=float)
    if vals.ndim != 2:
        raise ValueError("expected a 2D raster")
    if n_z < 1:
        raise ValueError("n_z must be >= 1")
    if dilation_radius > 0:
        r = int(np.ceil(dilation_radius / cell_size))
        yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
        footprint = (xx**2 + yy**2) * cell_size**2 <= dilation_radius**2
        vals = ndimage.minimum_filter(vals, footprint=footprint, mode="nearest")
    vals3 = np.repeat(vals[:, :, None], n_z, axis=2)
    return RasterField(origin=np.asarray(origin, dtype=float), cell_size=cell_size, values=vals3)


def save_raster(field_: RasterField, path, fmt: str = "binary") -> None:
    """Write a raster in the documented binary or text container format."""
    nx, ny, nz = field_.dims
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(RASTER_MAGIC)
            fh.write(struct.pack("<3I", nx, ny, nz))
            fh.write(struct.pack("<3d", *field_.origin))
            fh.write(struct.pack("<d", field_.cell_size))
            fh.write(
                np.asarray(field_.values, dtype="<f4").ravel(order="F").tobytes()
            )
    elif fmt == "text":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(TEXT_HEADER + "\n")
            fh.write(f"dims {nx} {ny} {nz}\n")
            fh.write("origin {:.17g} {:.17g} {:.17g}\n".format(*field_.origin))
            fh.write(f"cell_size {field_.cell_size:.17g}\n")
            flat = np.asarray(field_.values, dtype=float).ravel(order="F")
            for start in range(0, len(flat), 8):
                fh.write(" ".join(f"{v:.8g}" for v in flat[start : start + 8]) + "\n")
    else:
        raise ValueError(f"unknown raster format {fmt!r}")


def load_raster(path, oob_value: float = 0.0) -> RasterField:
    """Read either container variant, sniffing the magic bytes."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic == RASTER_MAGIC:
            nx, ny, nz = struct.unpack("<3I", fh.read(12))
            origin = np.array(struct.unpack("<3d", fh.read(24)))
            (cell_size,) = struct.unpack("<d", fh.read(8))
            count = nx * ny * nz
            raw = fh.read(4 * count)
            if len(raw) != 4 * count:
                raise RasterFormatError(f"{path}: truncated value block")
            vals = np.frombuffer(raw, dtype="<f4").astype(float)
            values = vals.reshape((nx, ny, nz), order="F")
            return RasterField(origin=origin, cell_size=cell_size, values=values, oob_value=oob_value)
    # fall through to the text variant
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != TEXT_HEADER:
            raise RasterFormatError(f"{path}: unrecognized raster header {header!r}")
        try:
            dims = fh.readline().split()
            assert dims[0] == "dims"
            nx, ny, nz = (int(v) for v in dims[1:4])
            org = fh.readline().split()
            assert org[0] == "origin"
            origin = np.array([float(v) for v in org[1:4]])
            cs = fh.readline().split()
            assert cs[0] == "cell_size"
            cell_size = float(cs[1])
            vals = np.array(fh.read().split(), dtype=float)
        except (AssertionError, IndexError, ValueError) as exc:
            raise RasterFormatError(f"{path}: malformed text raster ({exc})") from exc
        if len(vals) != nx * ny * nz:
            raise RasterFormatError(
                f"{path}: expected {nx * ny * nz} values, found {len(vals)}"
            )
        values = vals.reshape((nx, ny, nz), order="F")
        return RasterField(origin=origin, cell_size=cell_size, values=values, oob_value=oob_value)
