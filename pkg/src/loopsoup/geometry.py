"""Outer boundaries of planar loops and the predicates the estimators need.

A loop's outer boundary is found on a grid: the path is rasterised with a
supercover walk (so the marked cells form a 4-connected chain), the exterior
is flood-filled with 4-connectivity from a padded border, and the boundary
between exterior and filled cells is traced with marching squares on cell
centres. Saddle cells join the filled diagonals, which is the dual of the
4-connected exterior, so the trace is a single simple polygon.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .errors import BoundaryAmbiguityError, DegenerateLoopError, InvalidArgument

PAD_CELLS = 2


@dataclass(frozen=True)
class RasterLoop:
    """Filled-hull raster of a path: 0 interior, 1 path, 2 exterior."""
    grid: np.ndarray
    x0: float
    y0: float
    h: float

    @property
    def filled(self) -> np.ndarray:
        return self.grid != K.EXTERIOR

    def queries(self, points, radius) -> tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(points, dtype=complex).ravel()
        rad = np.broadcast_to(np.asarray(radius, dtype=float), pts.shape).copy()
        return K.raster_queries(self.grid, self.x0, self.y0, self.h,
                                pts.real.copy(), pts.imag.copy(), rad)


def raster_fill(xs: np.ndarray, ys: np.ndarray, h: float) -> RasterLoop:
    """Rasterise a closed polyline and flood-fill its exterior."""
    xmin, xmax, ymin, ymax = K.bbox(xs, ys)
    x0 = xmin - PAD_CELLS * h
    y0 = ymin - PAD_CELLS * h
    nx = int((xmax - x0) / h) + PAD_CELLS + 2
    ny = int((ymax - y0) / h) + PAD_CELLS + 2
    grid = K.rasterize(xs, ys, x0, y0, h, nx, ny)
    K.flood_exterior(grid)
    return RasterLoop(grid, x0, y0, h)


def lattice_raster(xs: np.ndarray, ys: np.ndarray, h: float, pad: int) -> tuple[RasterLoop, int, int]:
    """Like raster_fill, on the global lattice h*Z^2 with ``pad`` exterior cells.

    Returns the raster and the lattice indices (ix, iy) of its cell (0, 0).
    """
    xmin, xmax, ymin, ymax = K.bbox(xs, ys)
    ix = math.floor(xmin / h) - pad
    iy = math.floor(ymin / h) - pad
    nx = math.floor(xmax / h) - ix + pad + 1
    ny = math.floor(ymax / h) - iy + pad + 1
    grid = K.rasterize(xs, ys, ix * h, iy * h, h, nx, ny)
    K.flood_exterior(grid)
    return RasterLoop(grid, ix * h, iy * h, h), ix, iy


@dataclass
class SimpleLoop:
    boundary: np.ndarray  # complex vertex ring, first == last, counter-clockwise
    grid_res: float
    bbox: tuple[float, float, float, float] = field(init=False)
    _diameter: float | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        b = np.asarray(self.boundary, dtype=complex)
        if b.size < 4 or b[0] != b[-1]:
            raise InvalidArgument("boundary must be a closed ring with at least 4 vertices")
        self.boundary = b
        self.bbox = (b.real.min(), b.real.max(), b.imag.min(), b.imag.max())

    @property
    def diameter(self) -> float:
        if self._diameter is None:
            self._diameter = diameter(self)
        return self._diameter

    @property
    def area(self) -> float:
        z = self.boundary
        return 0.5 * float(np.sum(z.real[:-1] * z.imag[1:] - z.real[1:] * z.imag[:-1]))

    @property
    def perimeter(self) -> float:
        return float(np.abs(np.diff(self.boundary)).sum())

    def distance(self, z: complex) -> float:
        b = self.boundary
        return K.point_segment_min_dist(z.real, z.imag, b.real.copy(), b.imag.copy())

    def contains(self, z: complex) -> bool:
        """Even-odd membership of z in the interior; errors near the boundary."""
        z = complex(z)
        if self.distance(z) < self.grid_res:
            raise BoundaryAmbiguityError(f"point {z} within resolution of the boundary")
        b = self.boundary
        return bool(K.even_odd_inside(z.real, z.imag, b.real.copy(), b.imag.copy()))

    def to_csv(self, path) -> Path:
        path = Path(path)
        np.savetxt(path, np.column_stack([self.boundary.real, self.boundary.imag]),
                   delimiter=",", header="x,y", comments="")
        return path


def _as_xy(path) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(path)
    if np.iscomplexobj(p):
        return p.real.astype(float).copy(), p.imag.astype(float).copy()
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise InvalidArgument("path must be complex or an (n, 2) array")
    return p[:, 0].copy(), p[:, 1].copy()


def _snap_to_path(z: np.ndarray, xs: np.ndarray, ys: np.ndarray, r: RasterLoop) -> np.ndarray:
    """Move contour vertices onto the nearest path point lying in a cell next to the exterior.

    The raster contour runs along cell edges, up to a cell away from the path;
    the true outer boundary is made of path points, so snapping removes that
    outward offset while the raster still decides the topology.
    """
    from scipy.ndimage import binary_dilation
    from scipy.spatial import cKDTree

    h = r.h
    dx, dy = np.diff(xs), np.diff(ys)
    k = np.maximum(1, np.ceil(np.hypot(dx, dy) / (0.5 * h)).astype(np.int64))
    seg = np.repeat(np.arange(dx.size), k)
    start = np.repeat(np.cumsum(k) - k, k)
    frac = (np.arange(seg.size) - start) / np.repeat(k, k)
    px = np.append(xs[seg] + frac * dx[seg], xs[-1])
    py = np.append(ys[seg] + frac * dy[seg], ys[-1])
    ext = r.grid == K.EXTERIOR
    edge = binary_dilation(ext, np.ones((3, 3), bool)) & ~ext
    keep = edge[((py - r.y0) / h).astype(np.int64), ((px - r.x0) / h).astype(np.int64)]
    if not keep.any():
        return z
    pts = np.column_stack([px[keep], py[keep]])
    _, idx = cKDTree(pts).query(np.column_stack([z.real, z.imag]))
    w = pts[idx, 0] + 1j * pts[idx, 1]
    # drop repeats created when several contour vertices share a path point
    w = w[np.append(True, w[1:] != w[:-1])]
    if w.size > 1 and w[0] == w[-1]:
        w = w[:-1]
    return w


def outer_boundary(path, resolution: float) -> SimpleLoop:
    """Simple polygon bounding the unbounded complement component of ``path``."""
    from skimage.measure import find_contours

    if not resolution > 0:
        raise InvalidArgument("resolution must be positive")
    xs, ys = _as_xy(path)
    if xs.size < 4:
        raise InvalidArgument("path needs at least 4 vertices")
    if xs[0] != xs[-1] or ys[0] != ys[-1]:
        xs = np.append(xs, xs[0])
        ys = np.append(ys, ys[0])
    ext = max(xs.max() - xs.min(), ys.max() - ys.min())
    if ext < 2 * resolution:
        raise DegenerateLoopError(f"path extent {ext:.3g} below twice the resolution")
    r = raster_fill(xs, ys, resolution)
    contours = find_contours(r.filled.astype(np.float32), 0.5, fully_connected="high")
    ring = max(contours, key=len)
    z = (r.x0 + (ring[:, 1] + 0.5) * resolution) + 1j * (r.y0 + (ring[:, 0] + 0.5) * resolution)
    snapped = _snap_to_path(z, xs, ys, r)
    if snapped.size >= 4:
        z = snapped
    if z[0] != z[-1]:
        z = np.append(z, z[0])
    area2 = np.sum(z.real[:-1] * z.imag[1:] - z.real[1:] * z.imag[:-1])
    if area2 < 0:
        z = z[::-1]
    return SimpleLoop(z, resolution)


def hits_disk(loop: SimpleLoop, z: complex, eps: float) -> bool:
    """Closed-disk test: boundary polygon within distance eps of z."""
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    return loop.distance(complex(z)) <= eps


def separates(loop: SimpleLoop, z1: complex, z2: complex) -> bool:
    return loop.contains(z1) != loop.contains(z2)


def _convex_hull(pts: np.ndarray) -> np.ndarray:
    from scipy.spatial import ConvexHull, QhullError

    xy = np.column_stack([pts.real, pts.imag])
    try:
        hull = ConvexHull(xy)
    except QhullError:
        # collinear input: the two extreme points carry the diameter
        d = pts - pts[0]
        far = pts[np.argmax(np.abs(d))]
        return np.array([far, pts[np.argmax(np.abs(pts - far))]])
    return pts[hull.vertices]  # counter-clockwise in 2-D


def rotating_calipers(hull: np.ndarray) -> float:
    """Largest vertex distance of a convex polygon given counter-clockwise."""
    n = hull.size
    if n == 1:
        return 0.0
    if n == 2:
        return float(abs(hull[1] - hull[0]))

    def cross_area(a, b, c):
        return ((b - a).conjugate() * (c - a)).imag

    best = 0.0
    j = 1
    for i in range(n):
        a, b = hull[i], hull[(i + 1) % n]
        while cross_area(a, b, hull[(j + 1) % n]) > cross_area(a, b, hull[j]):
            j = (j + 1) % n
        best = max(best, abs(hull[j] - a), abs(hull[j] - b))
    return float(best)


def diameter(loop) -> float:
    """Diameter of a SimpleLoop or of a raw vertex array."""
    pts = loop.boundary if isinstance(loop, SimpleLoop) else np.asarray(loop, dtype=complex)
    pts = np.unique(pts)
    if pts.size < 2:
        return 0.0
    return rotating_calipers(_convex_hull(pts))


def diameter_bruteforce(points) -> float:
    p = np.unique(np.asarray(points, dtype=complex))
    best = 0.0
    for k in range(p.size):
        best = max(best, float(np.abs(p[k + 1:] - p[k]).max(initial=0.0)))
    return best


def boundary_cell_count(path, resolution: float) -> int:
    """Number of filled cells that touch the exterior (boundary box count)."""
    xs, ys = _as_xy(path)
    r = raster_fill(xs, ys, resolution)
    ext = r.grid == K.EXTERIOR
    filled = ~ext
    touch = np.zeros_like(filled)
    touch[1:, :] |= ext[:-1, :]
    touch[:-1, :] |= ext[1:, :]
    touch[:, 1:] |= ext[:, :-1]
    touch[:, :-1] |= ext[:, 1:]
    return int(np.count_nonzero(filled & touch))


def read_polygon_csv(path) -> np.ndarray:
    xy = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return xy[:, 0] + 1j * xy[:, 1]


def polygon_area_symdiff(a: SimpleLoop, b: SimpleLoop, resolution: float) -> float:
    """Area of the symmetric difference of two interiors, by point sampling on a grid."""
    xmin = min(a.bbox[0], b.bbox[0]) - resolution
    xmax = max(a.bbox[1], b.bbox[1]) + resolution
    ymin = min(a.bbox[2], b.bbox[2]) - resolution
    ymax = max(a.bbox[3], b.bbox[3]) + resolution
    step = resolution / 2
    gx, gy = np.meshgrid(np.arange(xmin, xmax, step), np.arange(ymin, ymax, step))
    gx, gy = gx.ravel(), gy.ravel()
    av, bv = a.boundary, b.boundary
    ia = K.even_odd_inside_many(gx, gy, av.real.copy(), av.imag.copy())
    ib = K.even_odd_inside_many(gx, gy, bv.real.copy(), bv.imag.copy())
    return float(np.count_nonzero(ia != ib)) * step * step


__all__ = [
    "SimpleLoop", "RasterLoop", "raster_fill", "lattice_raster", "outer_boundary", "hits_disk",
    "separates", "diameter", "diameter_bruteforce", "rotating_calipers",
    "boundary_cell_count", "read_polygon_csv", "polygon_area_symdiff",
]
