import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from loopsoup import geometry as geo
from loopsoup.errors import BoundaryAmbiguityError, DegenerateLoopError, InvalidArgument
from loopsoup.loopmeasure import sample_bridge

RES = 0.01


def polyline(*corners, per_edge=50):
    pts = []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        pts.extend(a + (b - a) * np.arange(per_edge) / per_edge)
    pts.append(corners[0])
    return np.array(pts, dtype=complex)


def circle(r=1.0, n=800, center=0j):
    th = np.linspace(0, 2 * np.pi, n + 1)
    z = center + r * np.exp(1j * th)
    z[-1] = z[0]
    return z


@pytest.fixture(scope="module")
def unit_circle():
    return geo.outer_boundary(circle(), RES)


@pytest.fixture(scope="module")
def unit_square():
    return geo.outer_boundary(polyline(0j, 1 + 0j, 1 + 1j, 1j), RES)


def fill_oracle(path, h):
    """Filled hull on a fine grid: drawn cells plus complement components not touching the border."""
    xs, ys = path.real, path.imag
    x0, y0 = xs.min() - 4 * h, ys.min() - 4 * h
    nx = int((xs.max() - x0) / h) + 8
    ny = int((ys.max() - y0) / h) + 8
    drawn = np.zeros((ny, nx), bool)
    for a, b in zip(path[:-1], path[1:]):
        m = max(2, int(abs(b - a) / (h / 4)) + 1)
        seg = a + (b - a) * np.linspace(0, 1, m)
        drawn[((seg.imag - y0) / h).astype(int), ((seg.real - x0) / h).astype(int)] = True
    lab, _ = ndimage.label(~drawn)
    border = set(np.unique(np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]])))
    inside = drawn | ~np.isin(lab, list(border))
    return lambda z: bool(inside[int((z.imag - y0) / h), int((z.real - x0) / h)])


def test_square_outer_boundary(unit_square):
    assert unit_square.area == pytest.approx(1.0, abs=8 * RES)
    assert unit_square.perimeter == pytest.approx(4.0, abs=40 * RES)
    b = unit_square.boundary
    assert b[0] == b[-1]
    assert unit_square.area > 0  # counter-clockwise


def test_figure_eight_union_of_lobes():
    path = np.concatenate([polyline(0j, 1 + 0j, 1 + 1j, 1j)[:-1], polyline(0j, -1 + 0j, -1 - 1j, -1j)])
    loop = geo.outer_boundary(path, RES)
    oracle = fill_oracle(path, RES / 2)
    rng = np.random.default_rng(0)
    probes = np.concatenate([rng.uniform(0.05, 0.95, 40) + 1j * rng.uniform(0.05, 0.95, 40),
                             -(rng.uniform(0.05, 0.95, 40) + 1j * rng.uniform(0.05, 0.95, 40))])
    for z in probes:
        assert oracle(z)
        assert loop.contains(z)
    assert loop.area == pytest.approx(2.0, abs=16 * RES)
    assert not loop.contains(0.5 - 0.5j)


def test_spiral_appendage_invisible():
    th = np.linspace(0, 6 * np.pi, 600)
    spiral = (0.9 - 0.1 * th / np.pi) * np.exp(1j * th)
    ring = circle(n=800)
    path = np.concatenate([ring[:-1], spiral, spiral[::-1], ring[:1]])
    loop = geo.outer_boundary(path, RES)
    ref = geo.outer_boundary(ring, RES)
    # the connector segments can move one snapped vertex, never more than a cell of area
    assert loop.area == pytest.approx(ref.area, abs=RES ** 2)
    assert loop.diameter == pytest.approx(2.0, abs=2 * RES)
    oracle = fill_oracle(path, RES / 2)
    for z in spiral[::37]:
        assert oracle(z)
        assert loop.distance(z) > 0.05  # appendage points are interior, far from the edge


@pytest.mark.parametrize("z,eps,want", [(0j, 0.5, False), (1.4 + 0j, 0.5, True), (0.2 + 0.1j, 0.7, False)])
def test_hits_disk_circle(unit_circle, z, eps, want):
    assert geo.hits_disk(unit_circle, z, eps) is want


def test_hits_disk_closed_convention():
    # exact polygon: distance from the centre to the square's edges is exactly 0.5
    sq = geo.SimpleLoop(np.array([0, 1, 1 + 1j, 1j, 0], dtype=complex), RES)
    assert geo.hits_disk(sq, 0.5 + 0.5j, 0.5)
    assert not geo.hits_disk(sq, 0.5 + 0.5j, 0.4999)
    with pytest.raises(InvalidArgument):
        geo.hits_disk(sq, 0j, 0.0)


def test_hits_uses_segments_not_vertices():
    sq = geo.SimpleLoop(np.array([0, 10, 10 + 10j, 10j, 0], dtype=complex), RES)
    assert geo.hits_disk(sq, 5 - 0.3j, 0.31)


def test_separates(unit_circle, unit_square):
    assert geo.separates(unit_circle, 0j, 3 + 0j)
    assert not geo.separates(unit_circle, 0.1 + 0j, -0.1 + 0j)
    assert geo.separates(unit_square, 0.5 + 0.5j, 0.5 + 1.5j)
    with pytest.raises(BoundaryAmbiguityError):
        geo.separates(unit_circle, 1.0 + 0j, 0j)


def test_diameter_examples(unit_circle):
    assert unit_circle.diameter == pytest.approx(2.0, abs=2 * RES)
    thin = geo.outer_boundary(np.concatenate([np.linspace(0, 5, 500), np.linspace(5, 0, 500)[1:]])
                              + 1e-3j * np.concatenate([np.zeros(500), np.ones(499)]), RES)
    assert thin.diameter == pytest.approx(5.0, abs=2 * RES)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 300))
def test_calipers_equal_brute_force(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=n) + 1j * rng.normal(size=n)
    assert geo.diameter(pts) == pytest.approx(geo.diameter_bruteforce(pts), abs=1e-12)


def test_calipers_on_brownian_boundary():
    p = sample_bridge(0j, 1.0, 4096, 5).path
    loop = geo.outer_boundary(p, RES)
    assert loop.diameter == pytest.approx(geo.diameter_bruteforce(loop.boundary), abs=1e-12)
    # the outer boundary shares its convex hull with the path up to resolution
    assert loop.diameter == pytest.approx(geo.diameter(p), abs=2 * RES)


def test_collinear_diameter():
    assert geo.diameter(np.array([0, 1, 2, 3.5], dtype=complex)) == pytest.approx(3.5)


def test_idempotent():
    p = sample_bridge(0j, 1.0, 4096, 9).path
    a = geo.outer_boundary(p, RES)
    b = geo.outer_boundary(a.boundary, RES)
    assert geo.polygon_area_symdiff(a, b, RES) <= 2 * RES * a.perimeter


def test_root_invariance():
    p = sample_bridge(0j, 1.0, 2048, 21).path
    q = np.concatenate([p[700:-1], p[:701]])
    a, b = geo.outer_boundary(p, RES), geo.outer_boundary(q, RES)
    assert a.diameter == pytest.approx(b.diameter, abs=1e-12)
    rng = np.random.default_rng(2)
    for z in rng.normal(scale=0.5, size=30) + 1j * rng.normal(scale=0.5, size=30):
        for eps in (0.05, 0.2):
            assert geo.hits_disk(a, z, eps) == geo.hits_disk(b, z, eps)
        try:
            assert a.contains(z) == b.contains(z)
        except BoundaryAmbiguityError:
            pass


def test_translation_invariance():
    p = sample_bridge(0j, 1.0, 2048, 4).path
    # a lattice-aligned shift keeps the raster identical
    shift = 37 * RES - 12 * RES * 1j
    a, b = geo.outer_boundary(p, RES), geo.outer_boundary(p + shift, RES)
    np.testing.assert_allclose(b.boundary, a.boundary + shift, atol=1e-9)
    rng = np.random.default_rng(3)
    for z in rng.normal(scale=0.5, size=30) + 1j * rng.normal(scale=0.5, size=30):
        assert geo.hits_disk(a, z, 0.1) == geo.hits_disk(b, z + shift, 0.1)


def test_degenerate_and_bad_input():
    with pytest.raises(DegenerateLoopError):
        geo.outer_boundary(circle(r=0.005, n=50), RES)
    with pytest.raises(InvalidArgument):
        geo.outer_boundary(np.array([0, 1, 0], dtype=complex), RES)
    with pytest.raises(InvalidArgument):
        geo.outer_boundary(circle(), 0.0)
    with pytest.raises(InvalidArgument):
        geo.SimpleLoop(np.array([0, 1, 1j], dtype=complex), RES)


def test_boundary_cells_scale_with_four_thirds():
    rng = np.random.default_rng(1)
    res = [0.02, 0.01, 0.005, 0.0025]
    counts = np.zeros(len(res))
    for _ in range(20):
        p = sample_bridge(0j, 1.0, 2**17, rng).path
        counts += [geo.boundary_cell_count(p, r) for r in res]
    slope = np.polyfit(np.log(res), np.log(counts), 1)[0]
    assert slope == pytest.approx(-4 / 3, abs=0.1)


def test_csv_round_trip(tmp_path, unit_square):
    path = unit_square.to_csv(tmp_path / "sq.csv")
    back = geo.read_polygon_csv(path)
    np.testing.assert_allclose(back, unit_square.boundary)
    assert path.read_text().splitlines()[0] == "x,y"
