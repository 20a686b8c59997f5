"""Compiled inner loops: counter-based Levy bridges, rasterisation, flood fill,
edge-distance bands and translation counting.

Bridge vertices are generated by midpoint displacement on a dyadic time grid.
The normal pair at every dyadic node is a pure function of (seed, node id),
so a coarse path drawn to size a loop agrees exactly with the fine path on
every node they share.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

EXTERIOR = 2
PATH = 1


@njit(cache=True, inline="always")
def _mix(x):
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


def _ziggurat_tables():
    # Marsaglia-Tsang layout, 128 layers
    m1 = 2147483648.0
    dn = 3.442619855899
    tn = dn
    vn = 9.91256303526217e-3
    kn = np.zeros(128)
    wn = np.zeros(128)
    fn = np.zeros(128)
    q = vn / math.exp(-0.5 * dn * dn)
    kn[0] = (dn / q) * m1
    kn[1] = 0.0
    wn[0] = q / m1
    wn[127] = dn / m1
    fn[0] = 1.0
    fn[127] = math.exp(-0.5 * dn * dn)
    for i in range(126, 0, -1):
        dn = math.sqrt(-2.0 * math.log(vn / dn + math.exp(-0.5 * dn * dn)))
        kn[i + 1] = (dn / tn) * m1
        tn = dn
        fn[i] = math.exp(-0.5 * dn * dn)
        wn[i] = dn / m1
    return kn, wn, fn


_KN, _WN, _FN = _ziggurat_tables()
_ZR = 3.442619855899
_S32 = np.uint64(32)
_M127 = np.uint64(127)


@njit(cache=True, inline="always")
def _uni(k):
    return (np.int64(k >> _S11) + 1) * _INV53


@njit(cache=True)
def _zig_normal(k):
    """Standard normal from a stream of hashed words; returns (value, next key)."""
    while True:
        iz = np.int64(k & _M127)
        hz = np.int64(np.int32(np.uint32(k >> _S32)))
        k = _mix(k + _GOLDEN)
        if abs(hz) < _KN[iz]:
            return hz * _WN[iz], k
        x = hz * _WN[iz]
        if iz == 0:
            while True:
                xx = -math.log(_uni(k)) / _ZR
                k = _mix(k + _GOLDEN)
                yy = -math.log(_uni(k))
                k = _mix(k + _GOLDEN)
                if yy + yy >= xx * xx:
                    break
            return ((_ZR + xx) if hz > 0 else -(_ZR + xx)), k
        if _FN[iz] + _uni(k) * (_FN[iz - 1] - _FN[iz]) < math.exp(-0.5 * x * x):
            return x, _mix(k + _GOLDEN)
        k = _mix(k + _GOLDEN)


@njit(cache=True)
def node_normals(seed, node):
    """Two independent standard normals attached to a dyadic node."""
    k = _mix(seed ^ _mix(np.uint64(node) * _GOLDEN))
    a, k = _zig_normal(k)
    b, k = _zig_normal(k)
    return a, b


@njit(cache=True)
def levy_path(rx, ry, t, seed, depth):
    """Bridge from (rx, ry) back to itself on 2**depth equal time steps."""
    n = 1 << depth
    xs = np.empty(n + 1)
    ys = np.empty(n + 1)
    xs[0] = rx
    ys[0] = ry
    xs[n] = rx
    ys[n] = ry
    span = n
    dt = t
    for d in range(1, depth + 1):
        half = span >> 1
        sd = math.sqrt(dt / 4.0)
        base = 1 << d
        for k in range(1 << (d - 1)):
            i = (2 * k + 1) * half
            gx, gy = node_normals(seed, base + 2 * k + 1)
            xs[i] = 0.5 * (xs[i - half] + xs[i + half]) + sd * gx
            ys[i] = 0.5 * (ys[i - half] + ys[i + half]) + sd * gy
        span = half
        dt *= 0.5
    return xs, ys


@njit(cache=True, inline="always")
def _seg_dist2(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    L = dx * dx + dy * dy
    if L > 0.0:
        u = ((px - ax) * dx + (py - ay) * dy) / L
        if u < 0.0:
            u = 0.0
        elif u > 1.0:
            u = 1.0
    else:
        u = 0.0
    ex = ax + u * dx - px
    ey = ay + u * dy - py
    return ex * ex + ey * ey


@njit(cache=True)
def rasterize(xs, ys, x0, y0, h, nx, ny):
    """Supercover rasterisation: every cell a segment passes through is marked.

    Coordinates must be non-negative relative to (x0, y0) so that truncation
    equals floor.
    """
    grid = np.zeros((ny, nx), np.uint8)
    inv = 1.0 / h
    gx1 = (xs[0] - x0) * inv
    gy1 = (ys[0] - y0) * inv
    ex = int(gx1)
    ey = int(gy1)
    grid[ey, ex] = PATH
    for s in range(xs.size - 1):
        gx0 = gx1
        gy0 = gy1
        cx = ex
        cy = ey
        gx1 = (xs[s + 1] - x0) * inv
        gy1 = (ys[s + 1] - y0) * inv
        ex = int(gx1)
        ey = int(gy1)
        if ex == cx and ey == cy:
            continue
        grid[ey, ex] = PATH
        n = abs(ex - cx) + abs(ey - cy)
        if n == 1:
            continue
        # cells crossed in between (Amanatides-Woo walk)
        dx = gx1 - gx0
        dy = gy1 - gy0
        stx = 1 if dx > 0 else -1
        sty = 1 if dy > 0 else -1
        tdx = abs(1.0 / dx) if dx != 0.0 else 1e300
        tdy = abs(1.0 / dy) if dy != 0.0 else 1e300
        tmx = (((cx + 1 - gx0) if dx > 0 else (gx0 - cx)) * tdx) if dx != 0.0 else 1e300
        tmy = (((cy + 1 - gy0) if dy > 0 else (gy0 - cy)) * tdy) if dy != 0.0 else 1e300
        for _ in range(n - 1):
            if tmx < tmy:
                cx += stx
                tmx += tdx
            else:
                cy += sty
                tmy += tdy
            grid[cy, cx] = PATH
    return grid


@njit(cache=True)
def flood_exterior(grid):
    """Mark the 4-connected empty component of the (padded) border cell (0, 0)."""
    ny, nx = grid.shape
    stack = np.empty(ny * nx, np.int64)
    top = 0
    if grid[0, 0] != 0:
        return grid
    grid[0, 0] = EXTERIOR
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        idx = stack[top]
        r = idx // nx
        c = idx - r * nx
        if r > 0 and grid[r - 1, c] == 0:
            grid[r - 1, c] = EXTERIOR
            stack[top] = idx - nx
            top += 1
        if r < ny - 1 and grid[r + 1, c] == 0:
            grid[r + 1, c] = EXTERIOR
            stack[top] = idx + nx
            top += 1
        if c > 0 and grid[r, c - 1] == 0:
            grid[r, c - 1] = EXTERIOR
            stack[top] = idx - 1
            top += 1
        if c < nx - 1 and grid[r, c + 1] == 0:
            grid[r, c + 1] = EXTERIOR
            stack[top] = idx + 1
            top += 1
    return grid


@njit(cache=True)
def raster_queries(grid, x0, y0, h, qx, qy, radius):
    """Per query point: (inside filled hull, distance to nearest edge cell).

    An edge cell is a non-exterior cell with an exterior 4-neighbour; the
    distance is measured to its centre and reported only up to ``radius``
    (otherwise +inf). Points outside the grid are exterior.
    """
    ny, nx = grid.shape
    nq = qx.size
    inside = np.zeros(nq, np.bool_)
    dist = np.full(nq, np.inf)
    for j in range(nq):
        gx = (qx[j] - x0) / h
        gy = (qy[j] - y0) / h
        c = int(math.floor(gx))
        r = int(math.floor(gy))
        if 0 <= r < ny and 0 <= c < nx:
            inside[j] = grid[r, c] != EXTERIOR
        rad = radius[j] / h + 1.0
        r0 = max(int(math.floor(gy - rad)), 1)
        r1 = min(int(math.floor(gy + rad)), ny - 2)
        c0 = max(int(math.floor(gx - rad)), 1)
        c1 = min(int(math.floor(gx + rad)), nx - 2)
        best = np.inf
        for rr in range(r0, r1 + 1):
            for cc in range(c0, c1 + 1):
                if grid[rr, cc] == EXTERIOR:
                    continue
                if (grid[rr - 1, cc] == EXTERIOR or grid[rr + 1, cc] == EXTERIOR
                        or grid[rr, cc - 1] == EXTERIOR or grid[rr, cc + 1] == EXTERIOR):
                    ex = (cc + 0.5) - gx
                    ey = (rr + 0.5) - gy
                    d2 = ex * ex + ey * ey
                    if d2 < best:
                        best = d2
        if best < np.inf:
            d = math.sqrt(best) * h
            if d <= radius[j]:
                dist[j] = d
    return inside, dist


@njit(cache=True)
def bbox(xs, ys):
    return xs.min(), xs.max(), ys.min(), ys.max()


@njit(cache=True)
def point_segment_min_dist(px, py, vx, vy):
    """Distance from a point to a closed polygon given by its vertex ring."""
    best = np.inf
    n = vx.size
    for i in range(n - 1):
        d = _seg_dist2(px, py, vx[i], vy[i], vx[i + 1], vy[i + 1])
        if d < best:
            best = d
    return math.sqrt(best)


@njit(cache=True)
def even_odd_inside(px, py, vx, vy):
    """Even-odd ray test against a closed vertex ring (first == last)."""
    inside = False
    n = vx.size
    for i in range(n - 1):
        yi, yj = vy[i], vy[i + 1]
        if (yi > py) != (yj > py):
            xint = vx[i] + (py - yi) * (vx[i + 1] - vx[i]) / (yj - yi)
            if px < xint:
                inside = not inside
    return inside


@njit(cache=True)
def even_odd_inside_many(px, py, vx, vy):
    out = np.zeros(px.size, np.bool_)
    for i in range(px.size):
        out[i] = even_odd_inside(px[i], py[i], vx, vy)
    return out


@njit(cache=True)
def edge_dist2(grid, rmax):
    """Squared distance, in cells, from each cell centre to the nearest edge cell centre.

    Edge cells are filled cells with an exterior 4-neighbour. Values beyond
    rmax^2 are reported as rmax^2 + 1. The grid must carry at least rmax + 1
    cells of exterior padding.
    """
    ny, nx = grid.shape
    cap = rmax * rmax + 1
    out = np.full((ny, nx), cap, np.int32)
    span = np.empty(rmax + 1, np.int64)
    for dy in range(rmax + 1):
        span[dy] = int(math.sqrt(rmax * rmax - dy * dy))
    for y in range(1, ny - 1):
        for x in range(1, nx - 1):
            if grid[y, x] == EXTERIOR:
                continue
            if (grid[y - 1, x] != EXTERIOR and grid[y + 1, x] != EXTERIOR
                    and grid[y, x - 1] != EXTERIOR and grid[y, x + 1] != EXTERIOR):
                continue
            for dy in range(-rmax, rmax + 1):
                yy = y + dy
                if yy < 0 or yy >= ny:
                    continue
                w = span[abs(dy)]
                dy2 = dy * dy
                for xx in range(max(x - w, 0), min(x + w, nx - 1) + 1):
                    v = (xx - x) * (xx - x) + dy2
                    if v < out[yy, xx]:
                        out[yy, xx] = v
    return out


@njit(cache=True, inline="always")
def _filled_at(grid, y, x):
    ny, nx = grid.shape
    if y < 0 or y >= ny or x < 0 or x >= nx:
        return False
    return grid[y, x] != EXTERIOR


@njit(cache=True)
def translation_counts(d2, grid, hx, hy, r2, sep, ins, outs, c0, c1, r0, r1):
    """Count lattice translations of the query pattern that realise the event.

    The pattern's first hit point sits on cell (y, x); hit point j sits on
    (y + hy[j], x + hx[j]). A translation counts for rung k when every hit
    point lies within sqrt(r2[k]) cells of an edge cell, every separation
    row (ax, ay, bx, by) has exactly one end filled, every ``ins`` offset is
    filled and every ``outs`` offset is not. Only x in [c0, c1] and y in
    [r0, r1] are scanned. r2 must be decreasing.
    """
    ny, nx = d2.shape
    nr = r2.size
    counts = np.zeros(nr, np.int64)
    cap = r2[0]
    for y in range(max(r0, 0), min(r1, ny - 1) + 1):
        for x in range(max(c0, 0), min(c1, nx - 1) + 1):
            m = d2[y, x]
            if m > cap:
                continue
            ok = True
            for j in range(1, hx.size):
                yy = y + hy[j]
                xx = x + hx[j]
                if yy < 0 or yy >= ny or xx < 0 or xx >= nx:
                    ok = False
                    break
                v = d2[yy, xx]
                if v > cap:
                    ok = False
                    break
                if v > m:
                    m = v
            if not ok:
                continue
            for j in range(sep.shape[0]):
                a = _filled_at(grid, y + sep[j, 1], x + sep[j, 0])
                b = _filled_at(grid, y + sep[j, 3], x + sep[j, 2])
                if a == b:
                    ok = False
                    break
            if not ok:
                continue
            for j in range(ins.shape[0]):
                if not _filled_at(grid, y + ins[j, 1], x + ins[j, 0]):
                    ok = False
                    break
            if not ok:
                continue
            for j in range(outs.shape[0]):
                if _filled_at(grid, y + outs[j, 1], x + outs[j, 0]):
                    ok = False
                    break
            if not ok:
                continue
            for k in range(nr):
                if m <= r2[k]:
                    counts[k] += 1
    return counts


@njit(cache=True)
def stamp_band(field, d2, r2, oy, ox):
    """field[oy + y, ox + x] += 1 wherever d2[y, x] <= r2 (clipped to field)."""
    ny, nx = d2.shape
    fy, fx = field.shape
    for y in range(max(0, -oy), min(ny, fy - oy)):
        for x in range(max(0, -ox), min(nx, fx - ox)):
            if d2[y, x] <= r2:
                field[oy + y, ox + x] += 1


@njit(cache=True)
def stamp_separation(nsep, charge, grid, ax, ay, bx, by, oy, ox, spin):
    """Per field cell c: does the loop separate c + (ax, ay) from c + (bx, by)?

    Field cell (i, j) maps to loop cell (i - oy, j - ox). Separating cells
    add one to ``nsep`` and spin * (+1 if the first point is inside, -1
    otherwise) to ``charge``.
    """
    ny, nx = grid.shape
    fy, fx = nsep.shape
    # only field cells whose shifted points can touch the loop grid
    ylo = max(0, oy - max(ay, by))
    yhi = min(fy, oy + ny - min(ay, by))
    xlo = max(0, ox - max(ax, bx))
    xhi = min(fx, ox + nx - min(ax, bx))
    for i in range(ylo, yhi):
        for j in range(xlo, xhi):
            a = _filled_at(grid, i - oy + ay, j - ox + ax)
            b = _filled_at(grid, i - oy + by, j - ox + bx)
            if a != b:
                nsep[i, j] += 1
                charge[i, j] += spin if a else -spin
