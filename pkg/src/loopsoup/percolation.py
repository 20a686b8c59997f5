"""Three-arm events of critical site percolation on the triangular lattice.

The lattice is stored in sheared coordinates: site (i, j) sits at
x = i + j/2, y = j*sqrt(3)/2 and has the six neighbours (i +- 1, j),
(i, j +- 1), (i + 1, j - 1), (i - 1, j + 1). The annulus A(r, R) holds the
sites with r <= |x| < R. Its inner boundary are the sites of A next to the
hole, its outer boundary the sites of A next to the outside.

A configuration has the three-arm event when it contains a crossing of one
colour and two vertex-disjoint crossings of the other. The single crossing
is a BFS; the disjoint pair is a unit-capacity max flow on the split-vertex
graph, stopped after two augmenting paths. Arm events are monotone in r
(a crossing from r' < r contains one from r), so a ladder of inner radii is
evaluated from the largest r down and stops at the first failure.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from ._kernels import _mix
from .errors import InvalidArgument
from .stats import CorrelationEstimate, fit_loglog_slope

MAX_OUTER = 4096
OPEN, CLOSED = 1, 0
_SQ3 = math.sqrt(3.0) / 2.0
_DI = np.array([1, -1, 0, 0, 1, -1], dtype=np.int64)
_DJ = np.array([0, 0, 1, -1, -1, 1], dtype=np.int64)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


@dataclass(frozen=True)
class ArmExperiment:
    """Annulus radii in lattice units, trial count, occupation probability and seed."""
    r: int
    R: int
    n_trials: int
    p: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.r < 2:
            raise InvalidArgument("inner radius must be at least 2 to host three arms")
        if self.r > self.R:
            raise InvalidArgument("inner radius exceeds outer radius")
        if self.R > MAX_OUTER:
            raise InvalidArgument(f"outer radius above {MAX_OUTER}")
        if self.n_trials < 1:
            raise InvalidArgument("n_trials must be positive")
        if self.p != 0.5:
            raise InvalidArgument("only the critical point p = 1/2 is supported")

    @property
    def degenerate(self) -> bool:
        return self.r == self.R


class Lattice:
    """Sheared box covering the disk of radius R, with squared distances to the origin."""

    def __init__(self, R: int):
        self.R = R
        # two spare rows and columns keep every neighbour of the disk inside
        J = int(R / _SQ3) + 3
        I = R + J // 2 + 3
        self.i0, self.j0 = -I, -J
        i = np.arange(-I, I + 1)
        j = np.arange(-J, J + 1)
        x = i[None, :] + 0.5 * j[:, None]
        y = _SQ3 * j[:, None] + 0.0 * i[None, :]
        self.d2 = x * x + y * y
        self.shape = self.d2.shape

    def states(self, seed: int, trial: int) -> np.ndarray:
        """Site colours (1 open, 0 closed) of one trial, from a counter-based hash."""
        return _fill_states(np.uint64(seed), np.uint64(trial), self.shape[0], self.shape[1])


@njit(cache=True)
def _fill_states(seed, trial, ny, nx):
    out = np.empty((ny, nx), np.uint8)
    key = _mix(_mix(seed) ^ (trial * _GOLDEN + np.uint64(1)))
    for a in range(ny):
        for b in range(nx):
            v = _mix(key ^ (np.uint64(a * nx + b) * _GOLDEN))
            out[a, b] = np.uint8(v >> np.uint64(63))
    return out


@njit(cache=True)
def _classify(d2, r2, R2):
    """0 outside A, 1 interior of A, 2 inner boundary, 3 outer boundary, 4 both."""
    ny, nx = d2.shape
    kind = np.zeros((ny, nx), np.uint8)
    for a in range(ny):
        for b in range(nx):
            if d2[a, b] < r2 or d2[a, b] >= R2:
                continue
            inner = False
            outer = False
            for k in range(6):
                aa = a + _DJ[k]
                bb = b + _DI[k]
                if aa < 0 or aa >= ny or bb < 0 or bb >= nx:
                    outer = True
                elif d2[aa, bb] < r2:
                    inner = True
                elif d2[aa, bb] >= R2:
                    outer = True
            kind[a, b] = 4 if (inner and outer) else (2 if inner else (3 if outer else 1))
    return kind


@njit(cache=True)
def _inner_sites(kind):
    flat = kind.ravel()
    return np.nonzero((flat == 2) | (flat == 4))[0].astype(np.int64)


class _Workspace:
    """Reusable BFS and flow buffers; visit marks are compared to a clock."""

    def __init__(self, n: int):
        self.mark = np.zeros(2 * n, np.int32)
        self.parent = np.empty(2 * n, np.int64)
        self.queue = np.empty(2 * n, np.int64)
        self.used = np.zeros(n, np.bool_)
        self.prv = np.full(n, -1, np.int64)
        self.nxt = np.full(n, -1, np.int64)
        self.touched = np.empty(2 * n, np.int64)
        self.clock = np.zeros(1, np.int64)


@njit(cache=True)
def _tick(mark, clock):
    clock[0] += 1
    if clock[0] >= 2**31 - 1:
        mark[:] = 0
        clock[0] = 1
    return np.int32(clock[0])


@njit(cache=True)
def _crossing(state, kind, nx, color, inner, mark, queue, clock):
    """BFS over ``color`` sites of A from the inner to the outer boundary.

    ``state`` and ``kind`` are flat; sites of A never sit on the box edge.
    """
    nbr = (1, -1, nx, -nx, 1 - nx, nx - 1)
    c = _tick(mark, clock)
    tail = 0
    for v in inner:
        if state[v] == color:
            if kind[v] == 4:
                return True
            mark[v] = c
            queue[tail] = v
            tail += 1
    head = 0
    while head < tail:
        v = queue[head]
        head += 1
        for d in nbr:
            w = v + d
            if mark[w] == c or kind[w] == 0 or state[w] != color:
                continue
            if kind[w] >= 3:
                return True
            mark[w] = c
            queue[tail] = w
            tail += 1
    return False


@njit(cache=True)
def _disjoint_crossings(state, kind, nx, color, want, inner, mark, parent, queue,
                        used, prv, nxt, touched, clock):
    """Number (capped at ``want``) of vertex-disjoint ``color`` crossings of A.

    Max flow on the split graph: node 2v is v_in, 2v+1 is v_out, with unit
    capacity on v_in -> v_out and on each lattice edge. ``prv[v]`` is the
    flow predecessor of v (-2 for the source), ``nxt[v]`` the successor
    (-3 for the sink). Flow arrays are restored before returning.
    """
    nbr = (1, -1, nx, -nx, 1 - nx, nx - 1)
    flow = 0
    ntouch = 0
    while flow < want:
        c = _tick(mark, clock)
        tail = 0
        for v in inner:
            if state[v] == color:
                mark[2 * v] = c
                parent[2 * v] = -2
                queue[tail] = 2 * v
                tail += 1
        head = 0
        end = -1
        while head < tail and end < 0:
            s = queue[head]
            head += 1
            v = s >> 1
            if s & 1 == 0:
                t = -1
                if not used[v]:
                    t = s + 1
                elif prv[v] >= 0:
                    t = 2 * prv[v] + 1
                if t >= 0 and mark[t] != c:
                    mark[t] = c
                    parent[t] = s
                    queue[tail] = t
                    tail += 1
                continue
            if kind[v] >= 3:
                end = s
                break
            if used[v] and mark[s - 1] != c:
                mark[s - 1] = c
                parent[s - 1] = s
                queue[tail] = s - 1
                tail += 1
            for d in nbr:
                w = v + d
                if kind[w] == 0 or state[w] != color or nxt[v] == w:
                    continue
                t = 2 * w
                if mark[t] != c:
                    mark[t] = c
                    parent[t] = s
                    queue[tail] = t
                    tail += 1
        if end < 0:
            break
        # collect the path, then replay it from the source side
        m = 0
        s = end
        while s != -2:
            queue[m] = s
            m += 1
            s = parent[s]
        v0 = queue[m - 1] >> 1
        prv[v0] = -2
        touched[ntouch] = v0
        ntouch += 1
        for q in range(m - 1, 0, -1):
            s = queue[q]
            t = queue[q - 1]
            v = s >> 1
            w = t >> 1
            touched[ntouch] = w
            ntouch += 1
            if v == w:
                used[v] = t > s
            elif s & 1 == 1:
                nxt[v] = w
                prv[w] = v
            else:
                # backward along the flow edge w -> v
                if nxt[w] == v:
                    nxt[w] = -1
                if prv[v] == w:
                    prv[v] = -1
        nxt[end >> 1] = -3
        flow += 1
    for q in range(ntouch):
        v = touched[q]
        used[v] = False
        prv[v] = -1
        nxt[v] = -1
    return flow


class _Annulus:
    """Flat site kinds and inner-boundary list of A(r, R) on a lattice."""

    def __init__(self, lat: "Lattice", r: int):
        self.r = r
        k2 = _classify(lat.d2, float(r * r), float(lat.R * lat.R))
        self.kind = k2.ravel().copy()
        self.inner = _inner_sites(k2)
        self.nx = k2.shape[1]


def _three_arms(state, ann: _Annulus, single: int, ws: _Workspace) -> bool:
    if not _crossing(state, ann.kind, ann.nx, single, ann.inner, ws.mark, ws.queue, ws.clock):
        return False
    return _disjoint_crossings(state, ann.kind, ann.nx, 1 - single, 2, ann.inner, ws.mark,
                               ws.parent, ws.queue, ws.used, ws.prv, ws.nxt, ws.touched,
                               ws.clock) >= 2


def _check_color(color: int) -> int:
    if color not in (OPEN, CLOSED):
        raise InvalidArgument("color must be OPEN (1) or CLOSED (0)")
    return color


def has_three_arms(state: np.ndarray, lat: "Lattice", r: int, single: int = OPEN) -> bool:
    """One ``single``-coloured crossing of A(r, R) and two disjoint ones of the other colour."""
    single = _check_color(single)
    return _three_arms(state.ravel(), _Annulus(lat, r), single, _Workspace(state.size))


def arm_ladder_counts(rs, R: int, n_trials: int, seed: int = 0, single: int = OPEN,
                      trial_offset: int = 0) -> np.ndarray:
    """Per-rung success counts over shared configurations, rungs ``rs`` decreasing."""
    single = _check_color(single)
    rs = [int(r) for r in rs]
    if any(b >= a for a, b in zip(rs, rs[1:])):
        raise InvalidArgument("inner radii must be strictly decreasing")
    for r in rs:
        ArmExperiment(r, R, max(n_trials, 1))
    lat = Lattice(R)
    rings = [_Annulus(lat, r) if r < R else None for r in rs]
    ws = _Workspace(lat.d2.size)
    hits = np.zeros(len(rs), np.int64)
    for trial in range(trial_offset, trial_offset + n_trials):
        st = lat.states(seed, trial).ravel()
        for k, ann in enumerate(rings):
            if ann is not None and not _three_arms(st, ann, single, ws):
                break
            hits[k] += 1
    return hits


def _binomial(k: int, n: int, flags: dict) -> CorrelationEstimate:
    p = k / n
    return CorrelationEstimate(p, math.sqrt(p * (1 - p) / n) if n > 1 else 0.0, n, flags)


def three_arm_probability(exp: ArmExperiment, single: int = OPEN) -> CorrelationEstimate:
    """Fraction of trials with the three-arm event in A(r, R)."""
    if exp.degenerate:
        return CorrelationEstimate(1.0, 0.0, exp.n_trials, {"degenerate": True})
    k = int(arm_ladder_counts([exp.r], exp.R, exp.n_trials, exp.seed, single)[0])
    return _binomial(k, exp.n_trials, {"r": exp.r, "R": exp.R})


def three_arm_ladder(rs, R: int, n_trials: int, seed: int = 0,
                     single: int = OPEN) -> list[CorrelationEstimate]:
    """Estimates for several inner radii from the same configurations."""
    rs = sorted((int(r) for r in rs), reverse=True)
    counts = arm_ladder_counts(rs, R, n_trials, seed, single)
    return [_binomial(int(k), n_trials, {"r": r, "R": R}) for r, k in zip(rs, counts)]


def fit_arm_exponent(ratios, estimates) -> float:
    """Least-squares slope of log theta against log(r / R)."""
    vals = [e.value if isinstance(e, CorrelationEstimate) else float(e) for e in estimates]
    if len(vals) < 3:
        raise InvalidArgument("need at least three ladder points")
    if any(not v > 0 for v in vals):
        raise InvalidArgument("ladder estimates must be positive")
    return fit_loglog_slope(np.asarray(ratios, float), np.asarray(vals, float))[0]


def write_ladder_csv(path, estimates) -> Path:
    """CSV with columns r, R, estimate, stderr, n."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "R", "estimate", "stderr", "n"])
        for e in estimates:
            w.writerow([e.flags.get("r"), e.flags.get("R"), repr(float(e.value)),
                        repr(float(e.stderr)), e.n_samples])
    return path


__all__ = [
    "ArmExperiment", "Lattice", "OPEN", "CLOSED", "has_three_arms", "arm_ladder_counts",
    "three_arm_probability", "three_arm_ladder", "fit_arm_exponent", "write_ladder_csv",
]
