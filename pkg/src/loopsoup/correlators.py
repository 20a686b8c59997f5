"""Correlation functions of edge and layering operators.

Two families live here. The combinatorial formulas (re-exported from
:mod:`loopsoup.combinatorics`) assemble n-point functions from tables of
loop-measure weights. The Monte Carlo estimators produce those weights, and
soup-level estimates of the same correlators, from sampled Brownian loops.

Loop-level estimator
--------------------
The loop measure is dt/(2 pi t^2) times area in the root times the bridge
law of the loop's shape. For a fixed shape the root integral is the area of
the set of translations that realise the event, so each sampled shape is
rasterised once on the lattice h Z^2 and every lattice translation is tested.
Durations come from :class:`~loopsoup.loopmeasure.DurationProposal` and each
shape contributes

    h^2 * (#translations) / (2 pi t g(log t)),

with g the proposal density of log t. The shape's root is uniform in one
cell, which makes the lattice sum an unbiased estimate of the root integral.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .combinatorics import (AlphaTable, MultisetAssignment, PartitionSet, ToyAtom,
                            alpha_table_from_atoms, config_hash, multisets_with_multiplicity,
                            npoint_edge_formula, npoint_higher_order_formula,
                            partitions_min2, toy_poisson_oracle)
from .errors import CalibrationError, InvalidArgument
from .geometry import diameter, lattice_raster
from .loopmeasure import DurationProposal, MeasureWindow, Rect, as_generator, depth_for
from .stats import Accumulator, CorrelationEstimate, ratio_estimate

EPS_LADDER = (0.08, 0.04, 0.02)  # in units of the smallest pairwise distance
COARSE_DEPTH = 8
MARGIN_SD = 5.0
EDGE_EXPONENT = 2.0 / 3.0


@dataclass(frozen=True)
class EngineConfig:
    """Discretisation and proposal settings shared by the estimators.

    resolution_factor: lattice cell = eps_min / resolution_factor.
    kappa: path steps = kappa * t / h^2, i.e. a step of about h / sqrt(kappa).
        Steps of a few cells keep the supercover raster from sealing fjords
        narrower than a cell, which otherwise thins the edge band at small eps.
    grid_max: cap on raster cells per side. Larger loops use a cell that is
        an integer multiple of the base cell.
    knee_factor, gamma: durations above (knee_factor * scale)^2 are proposed
        with log-density decaying like t^-gamma.
    spread_divisor: durations below (spread / spread_divisor)^2 are skipped,
        where spread is the smallest loop diameter compatible with the event.
    """
    resolution_factor: float = 8.0
    kappa: float = 1.0 / 16.0
    grid_max: int = 4096
    knee_factor: float = 1.5
    gamma: float = 0.75
    spread_divisor: float = 6.0

    def __post_init__(self):
        if self.resolution_factor <= 0 or self.kappa <= 0 or self.grid_max < 64:
            raise InvalidArgument("invalid engine configuration")


@dataclass(frozen=True)
class LoopEvent:
    """A root-invariant loop event built from disk hits and interior tests.

    hits: points whose eps-disk the outer boundary must meet.
    separate: pairs (a, b) with exactly one of a, b in the loop interior.
    inside / outside: points required in / out of the interior.
    min_diameter: loops with smaller diameter are excluded.
    """
    hits: tuple
    separate: tuple = ()
    inside: tuple = ()
    outside: tuple = ()
    min_diameter: float = 0.0

    def __post_init__(self):
        if not self.hits:
            raise InvalidArgument("an event needs at least one hit point")
        object.__setattr__(self, "hits", tuple(complex(z) for z in self.hits))
        object.__setattr__(self, "separate", tuple((complex(a), complex(b)) for a, b in self.separate))
        object.__setattr__(self, "inside", tuple(complex(z) for z in self.inside))
        object.__setattr__(self, "outside", tuple(complex(z) for z in self.outside))

    @property
    def order(self) -> int:
        return len(self.hits)

    @property
    def query_points(self) -> tuple:
        pts = list(self.hits)
        for a, b in self.separate:
            pts += [a, b]
        pts += list(self.inside) + list(self.outside)
        return tuple(dict.fromkeys(pts))

    def scale(self) -> float:
        pts = np.asarray(self.query_points)
        if pts.size < 2:
            return 0.0
        return float(np.abs(pts[:, None] - pts[None, :]).max())

    def min_spread(self, eps: float) -> float:
        """A lower bound on the diameter of any loop realising the event."""
        lb = self.min_diameter
        h = self.hits
        for i in range(len(h)):
            for j in range(i + 1, len(h)):
                lb = max(lb, abs(h[i] - h[j]) - 2 * eps)
        # a separating loop surrounds one point of the pair and comes within
        # eps of each hit point
        for z in h:
            for a, b in self.separate:
                lb = max(lb, min(abs(z - a), abs(z - b)) - eps)
            for w in self.inside:
                lb = max(lb, abs(z - w) - eps)
        return max(lb, 0.0)


@dataclass
class LoopShape:
    """A rasterised bridge shape on the lattice (cell h) with its edge band."""
    t: float
    h: float
    root: complex
    ix: int
    iy: int
    grid: np.ndarray
    d2: np.ndarray
    diameter: float


def sample_shape(t: float, seed, h: float, band: float, cfg: EngineConfig, rng,
                 need: float = 0.0, min_diameter: float = 0.0) -> LoopShape | None:
    """Bridge of duration t rasterised on h' Z^2, h' a multiple of h.

    Returns None when the loop cannot reach diameter ``need`` or has exact
    diameter below ``min_diameter``; both are decided before the expensive
    raster where possible. ``band`` is the largest eps the edge band must
    resolve.
    """
    seed = np.uint64(seed)
    cx, cy = K.levy_path(0.0, 0.0, t, seed, COARSE_DEPTH)
    margin = MARGIN_SD * math.sqrt(t / (1 << COARSE_DEPTH))
    ext_hi = max(np.ptp(cx), np.ptp(cy)) + 2 * margin
    if math.sqrt(2) * ext_hi < max(need, min_diameter):
        return None
    m = max(1, math.ceil(ext_hi / (h * cfg.grid_max)))
    hl = m * h
    root = complex(hl * rng.random(), hl * rng.random())
    depth = depth_for(t, hl, cfg.kappa)
    xs, ys = K.levy_path(root.real, root.imag, t, seed, depth)
    ext = max(np.ptp(xs), np.ptp(ys))
    thr = max(need - 2 * hl, min_diameter)
    if ext >= thr:
        diam = ext
    elif math.sqrt(2) * ext < thr:
        return None
    else:
        diam = diameter(xs + 1j * ys)
        if diam < thr:
            return None
    if diam < min_diameter:
        return None
    rcells = math.ceil(band / hl)
    r, ix, iy = lattice_raster(xs, ys, hl, rcells + 2)
    d2 = K.edge_dist2(r.grid, rcells)
    return LoopShape(t, hl, root, ix, iy, r.grid, d2, diam)


class _Pattern:
    """The event's query points as integer cell offsets from the first hit point."""

    def __init__(self, event: LoopEvent, h: float):
        z0 = event.hits[0]

        def off(z):
            d = (z - z0) / h
            return int(round(d.real)), int(round(d.imag))

        pts = event.query_points
        self.snap = max(abs(complex(*off(z)) * h - (z - z0)) for z in pts)
        hs = np.array([off(z) for z in event.hits], dtype=np.int64)
        self.hx, self.hy = hs[:, 0].copy(), hs[:, 1].copy()
        self.sep = np.array([off(a) + off(b) for a, b in event.separate], dtype=np.int64).reshape(-1, 4)
        self.ins = np.array([off(z) for z in event.inside], dtype=np.int64).reshape(-1, 2)
        self.outs = np.array([off(z) for z in event.outside], dtype=np.int64).reshape(-1, 2)


def _scan_range(shape: LoopShape, z0: complex, region: Rect | None) -> tuple[int, int, int, int]:
    """Grid cells that may hold the first hit point, given the root region."""
    ny, nx = shape.grid.shape
    if region is None:
        return 0, nx - 1, 0, ny - 1
    # the first hit point sits on a cell centre c; the loop is translated by
    # z0 - c, so its root lands at root + z0 - c
    h = shape.h
    bx, by = shape.root.real + z0.real, shape.root.imag + z0.imag
    c0 = math.ceil((bx - region.xmax) / h - 0.5) - shape.ix
    c1 = math.floor((bx - region.xmin) / h - 0.5) - shape.ix
    r0 = math.ceil((by - region.ymax) / h - 0.5) - shape.iy
    r1 = math.floor((by - region.ymin) / h - 0.5) - shape.iy
    return c0, c1, r0, r1


def shape_counts(shape: LoopShape, event: LoopEvent, eps_ladder, region: Rect | None = None,
                 pattern: _Pattern | None = None) -> np.ndarray:
    """Number of lattice translations of ``shape`` realising ``event`` per eps rung."""
    pat = pattern if pattern is not None else _Pattern(event, shape.h)
    r2 = np.array([(e / shape.h) ** 2 for e in eps_ladder])
    c0, c1, r0, r1 = _scan_range(shape, event.hits[0], region)
    return K.translation_counts(shape.d2, shape.grid, pat.hx, pat.hy, r2, pat.sep,
                                pat.ins, pat.outs, c0, c1, r0, r1)


def _check_ladder(eps_ladder) -> tuple[float, ...]:
    ladder = tuple(float(e) for e in eps_ladder)
    if not ladder or any(e <= 0 for e in ladder):
        raise InvalidArgument("eps values must be positive")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise InvalidArgument("eps ladder must be strictly decreasing")
    return ladder


def _check_separated(points, eps: float) -> None:
    pts = list(dict.fromkeys(complex(p) for p in points))
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if abs(pts[i] - pts[j]) <= 2 * eps:
                raise InvalidArgument("query points must be further apart than 2 eps")


def estimate_event_mass(event: LoopEvent, eps_ladder, n_samples: int, rng,
                        t_band: tuple[float, float] | None = None, region: Rect | None = None,
                        cfg: EngineConfig = EngineConfig()) -> list[CorrelationEstimate]:
    """Loop-measure mass of ``event`` at each eps of the ladder.

    Loops have duration in ``t_band`` and, when ``region`` is given, root in
    ``region``. Returns raw masses, one estimate per rung, all from the same
    shapes so that nested rungs share their randomness.
    """
    ladder = _check_ladder(eps_ladder)
    eps_max, eps_min = ladder[0], ladder[-1]
    _check_separated(event.query_points, eps_max)
    if n_samples < 1:
        raise InvalidArgument("n_samples must be positive")
    h = eps_min / cfg.resolution_factor
    spread = event.min_spread(eps_max)
    scale = max(event.scale(), spread, 4 * eps_max)
    if t_band is None:
        t_band = (1e-12, (20 * scale) ** 2)
    t_skip = (spread / cfg.spread_divisor) ** 2
    t_lo, t_hi = max(t_band[0], t_skip), t_band[1]
    rng = as_generator(rng)
    acc = Accumulator(len(ladder))
    flags = {"t_band": [t_lo, t_hi], "resolution": h, "rasterised": 0, "coarsened": 0,
             "snap_error": 0.0}
    if not t_hi > t_lo:
        acc.add_zeros(n_samples)
        return [replace(e, flags=dict(flags, eps=eps)) for e, eps in zip(acc.estimates(), ladder)]
    prop = DurationProposal(t_lo, t_hi, min(t_hi, (cfg.knee_factor * scale) ** 2), cfg.gamma)
    ts, seeds = prop.sample(rng, n_samples)
    patterns: dict[float, _Pattern] = {}
    for t, seed in zip(ts, seeds):
        shape = sample_shape(float(t), seed, h, eps_max, cfg, rng, need=spread,
                             min_diameter=event.min_diameter)
        if shape is None:
            acc.add_zeros(1)
            continue
        flags["rasterised"] += 1
        if shape.h > h * 1.5:
            flags["coarsened"] += 1
        pat = patterns.get(shape.h)
        if pat is None:
            pat = patterns[shape.h] = _Pattern(event, shape.h)
            flags["snap_error"] = max(flags["snap_error"], pat.snap)
        cnt = shape_counts(shape, event, ladder, region, pat)
        if cnt.any():
            w = shape.h ** 2 / (2 * math.pi * t * float(prop.log_t_density(t)))
            acc.add(cnt * w)
        else:
            acc.add_zeros(1)
    return [replace(e, flags=dict(flags, eps=eps)) for e, eps in zip(acc.estimates(), ladder)]


def _normalise(est: CorrelationEstimate, eps: float, k: int) -> CorrelationEstimate:
    return est.scaled(eps ** (-EDGE_EXPONENT * k))


def default_window(points, eps_min: float) -> MeasureWindow:
    return MeasureWindow.default_for(points, eps_min)


def estimate_alpha_ladder(points, flags, eps_ladder, n_samples: int, rng,
                          window: MeasureWindow | None = None,
                          cfg: EngineConfig = EngineConfig(),
                          event: LoopEvent | None = None) -> list[CorrelationEstimate]:
    """eps^(-2k/3) mu(hit all eps-disks [and separate the flagged pair]) per rung.

    ``flags`` is None or a pair (a, b) that the loop must separate; ``event``
    overrides both ``points`` and ``flags``. Without a window the default
    one (side 20x the largest distance, t_max = side^2) is used.
    """
    if event is None:
        sep = () if flags is None else (tuple(flags),)
        event = LoopEvent(tuple(points), separate=sep)
    ladder = _check_ladder(eps_ladder)
    if window is None:
        window = default_window(event.query_points, ladder[-1])
    raw = estimate_event_mass(event, ladder, n_samples, rng, (window.t_min, window.t_max),
                              window.region, cfg)
    return [_normalise(est, eps, event.order) for est, eps in zip(raw, ladder)]


def estimate_alpha(points, flags, eps: float, window: MeasureWindow | None, n_samples: int,
                   rng, cfg: EngineConfig = EngineConfig()) -> CorrelationEstimate:
    """eps-normalised weight alpha of loops hitting every eps-disk around ``points``."""
    return estimate_alpha_ladder(points, flags, (eps,), n_samples, rng, window, cfg)[0]


def default_ladder(points, rel=EPS_LADDER) -> tuple[float, ...]:
    pts = np.asarray(points, dtype=complex)
    d = np.abs(pts[:, None] - pts[None, :])
    dmin = float(d[d > 0].min())
    return tuple(r * dmin for r in rel)


def ladder_consistent(ests, nsigma: float = 3.0) -> bool:
    """True when every pair of rungs agrees within nsigma combined stderr."""
    for a, b in itertools.combinations(ests, 2):
        if abs(a.value - b.value) > nsigma * math.hypot(a.stderr, b.stderr):
            return False
    return True


@dataclass(frozen=True)
class Calibration:
    chat: float
    chat_stderr: float
    alpha_pair: CorrelationEstimate


def calibrate(eps: float, n_samples: int, rng, window: MeasureWindow | None = None,
              cfg: EngineConfig = EngineConfig()) -> Calibration:
    """chat with chat^2 * alpha(0, 1) = 1, and its delta-method stderr."""
    a = estimate_alpha((0j, 1 + 0j), None, eps, window, n_samples, rng, cfg)
    if not a.value > 0:
        raise CalibrationError("two-point weight estimate is zero")
    chat = 1.0 / math.sqrt(a.value)
    return Calibration(chat, 0.5 * chat * a.stderr / a.value, a)


def calibrate_chat(window: MeasureWindow | None, eps: float, n_samples: int, rng,
                   cfg: EngineConfig = EngineConfig()) -> float:
    return calibrate(eps, n_samples, rng, window, cfg).chat


def alpha_hat(est: CorrelationEstimate, chat: float, k: int,
              chat_stderr: float = 0.0) -> CorrelationEstimate:
    """chat^k alpha, with the calibration error folded in when given."""
    v = est.value * chat ** k
    rel_a = est.stderr / abs(est.value) if est.value else 0.0
    rel = math.hypot(rel_a, k * chat_stderr / chat)
    return CorrelationEstimate(v, abs(v) * rel if est.value else chat ** k * est.stderr,
                               est.n_samples, dict(est.flags))


def build_alpha_table(points, eps: float, n_samples: int, rng, chat: float = 1.0,
                      max_order: int | None = None, window: MeasureWindow | None = None,
                      cfg: EngineConfig = EngineConfig(), separations=()) -> AlphaTable:
    """Monte Carlo table of subset weights (size >= 2) for the given points.

    ``separations`` lists extra (subset, (j, k)) entries with a separation
    flag; indices are 1-based like the table keys.
    """
    pts = tuple(complex(p) for p in points)
    n = len(pts)
    top = n if max_order is None else min(n, max_order)
    rng = as_generator(rng)
    win = window if window is not None else default_window(pts, eps)
    doc = {"points": [[p.real, p.imag] for p in pts], "eps": eps, "n": n_samples,
           "window": [win.t_min, win.t_max, win.region.xmin, win.region.xmax,
                      win.region.ymin, win.region.ymax]}
    tab = AlphaTable(eps_ladder=(eps,), chat=chat, points=pts, eps=eps, config_hash=config_hash(doc))
    for r in range(2, top + 1):
        for s in itertools.combinations(range(1, n + 1), r):
            tab.set(s, estimate_alpha([pts[i - 1] for i in s], None, eps, win, n_samples, rng, cfg))
    for s, (j, k) in separations:
        est = estimate_alpha([pts[i - 1] for i in s], (pts[j - 1], pts[k - 1]), eps, win,
                             n_samples, rng, cfg)
        tab.set(s, est, (j, k))
    return tab


# ------------------------------------------------------------------ soup level

@dataclass(frozen=True)
class Decoration:
    """Operator content of a soup-level correlator.

    twist: optional (z1, z2, beta) for the twisted expectation <.>*_{z1,z2;beta}.
    twist_mode: "reweight" (cos beta per separating loop) or "spins"
    (Re exp(i beta Q) with Q the spin-weighted signed separation count).
    """
    twist: tuple | None = None
    twist_mode: str = "reweight"

    def __post_init__(self):
        if self.twist_mode not in ("reweight", "spins"):
            raise InvalidArgument("twist_mode must be 'reweight' or 'spins'")
        if self.twist is not None:
            z1, z2, beta = self.twist
            object.__setattr__(self, "twist", (complex(z1), complex(z2), float(beta)))


@dataclass(frozen=True)
class SoupConfig:
    """Soup simulation settings.

    Loops have duration in [t_min, t_max] and diameter at least delta. The
    query pattern is translated over a square of side ``field_side`` and the
    per-realization statistic is the average over those translations.
    """
    lam: float = 1.0
    delta: float = 0.5
    t_min: float | None = None
    t_max: float = 4.0
    reach_sd: float = 4.0
    field_side: float = 4.0
    n_realizations: int = 100
    mean_budget_factor: int = 50
    engine: EngineConfig = field(default_factory=EngineConfig)

    def __post_init__(self):
        if not (self.lam > 0 and self.delta > 0 and self.t_max > 0 and self.field_side > 0):
            raise InvalidArgument("lam, delta, t_max and field_side must be positive")
        if self.n_realizations < 2:
            raise InvalidArgument("need at least two realizations")

    @property
    def t_lo(self) -> float:
        # loops shorter than (delta/6)^2 reach diameter delta with probability below 1e-15
        return self.t_min if self.t_min is not None else (self.delta / 6.0) ** 2


class LocalSoupSampler:
    """Poisson soup restricted to loops able to reach a rectangle.

    A loop of duration t is kept when its root lies in the rectangle grown by
    pad + reach_sd * sqrt(t); loops rooted further out leave their root's
    neighbourhood by that much with probability below exp(-2 reach_sd^2).
    Root-box areas are quadratic in sqrt(t), so t is drawn exactly from a
    mixture of three power laws.
    """

    def __init__(self, box: Rect, pad: float, lam: float, t_min: float, t_max: float,
                 reach_sd: float = 4.0):
        if not t_max > t_min > 0:
            raise InvalidArgument("need 0 < t_min < t_max")
        self.box, self.pad, self.c = box, pad, reach_sd
        self.t_min, self.t_max = t_min, t_max
        w = box.xmax - box.xmin + 2 * pad
        hgt = box.ymax - box.ymin + 2 * pad
        c = reach_sd
        # area(t) = a0 + a1 sqrt(t) + a2 t
        self.a = (w * hgt, 2 * c * (w + hgt), 4 * c * c)
        t0, t1 = t_min, t_max
        self.comp = np.array([self.a[0] * (1 / t0 - 1 / t1),
                              self.a[1] * 2 * (t0 ** -0.5 - t1 ** -0.5),
                              self.a[2] * math.log(t1 / t0)])
        self.mean_count = lam / (2 * math.pi) * self.comp.sum()

    def sample_t(self, rng, n: int) -> np.ndarray:
        t0, t1 = self.t_min, self.t_max
        which = rng.choice(3, size=n, p=self.comp / self.comp.sum())
        u = rng.random(n)
        t = np.empty(n)
        m = which == 0
        t[m] = 1 / (1 / t0 - u[m] * (1 / t0 - 1 / t1))
        m = which == 1
        s0, s1 = t0 ** -0.5, t1 ** -0.5
        t[m] = (s0 - u[m] * (s0 - s1)) ** -2
        m = which == 2
        t[m] = t0 * (t1 / t0) ** u[m]
        return t

    def sample(self, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Roots, durations and path seeds of one realization."""
        k = int(rng.poisson(self.mean_count))
        t = self.sample_t(rng, k)
        r = self.pad + self.c * np.sqrt(t)
        x = rng.uniform(self.box.xmin - r, self.box.xmax + r)
        y = rng.uniform(self.box.ymin - r, self.box.ymax + r)
        seeds = rng.integers(0, 2**63, size=k, dtype=np.int64).astype(np.uint64)
        return x + 1j * y, t, seeds


@dataclass
class SoupFields:
    """Per-realization lattice fields over the translation square.

    band[r] counts loops whose boundary passes within eps of each lattice
    cell; nsep / charge count loops separating the twist pair placed at each
    cell (plain and spin-signed).
    """
    h: float
    offsets: np.ndarray  # (n_points, 2) cell offsets of the edge points
    twist_offsets: np.ndarray | None
    n_cells: int
    origin: tuple[int, int]  # lattice index of field cell (0, 0)
    band: list
    nsep: list
    charge: list
    n_loops: np.ndarray
    n_rasterised: int

    def counts(self, r: int) -> np.ndarray:
        """(n_points, n_cells, n_cells) hit counts with the pattern at each cell."""
        gx, gy = self.origin
        n = self.n_cells
        out = []
        for sx, sy in self.offsets:
            y0, x0 = sy - gy, sx - gx
            out.append(self.band[r][y0:y0 + n, x0:x0 + n])
        return np.array(out)

    def window(self, arr: np.ndarray) -> np.ndarray:
        gx, gy = self.origin
        n = self.n_cells
        return arr[-gy:-gy + n, -gx:-gx + n]


def simulate_soup_fields(points, eps: float, cfg: SoupConfig, rng,
                         twist: tuple | None = None) -> SoupFields:
    """Simulate focused soups and record hit and separation fields."""
    rng = as_generator(rng)
    ecfg = cfg.engine
    h = eps / ecfg.resolution_factor
    pts = [complex(z) for z in points]
    z0 = pts[0]

    def off(z):
        d = (z - z0) / h
        return int(round(d.real)), int(round(d.imag))

    offs = np.array([off(z) for z in pts], dtype=np.int64)
    tw = None
    if twist is not None:
        tw = np.array([off(twist[0]), off(twist[1])], dtype=np.int64)
    allo = offs if tw is None else np.vstack([offs, tw])
    n = max(2, math.ceil(cfg.field_side / h))
    gx = min(0, int(allo[:, 0].min()))
    gy = min(0, int(allo[:, 1].min()))
    nx = n + max(0, int(allo[:, 0].max())) - gx
    ny = n + max(0, int(allo[:, 1].max())) - gy
    # field cell (i, j) is lattice cell (gy + i, gx + j); cell centres sit at (k + 1/2) h
    box = Rect(gx * h, (gx + nx) * h, gy * h, (gy + ny) * h)
    sampler = LocalSoupSampler(box, eps + 2 * h, cfg.lam, cfg.t_lo, cfg.t_max, cfg.reach_sd)
    rcells = math.ceil(eps / h)
    r2 = (eps / h) ** 2
    bands, nseps, charges = [], [], []
    n_loops = np.zeros(cfg.n_realizations, np.int64)
    n_ras = 0
    for r in range(cfg.n_realizations):
        band = np.zeros((ny, nx), np.int32)
        nsep = np.zeros((ny, nx), np.int32) if tw is not None else None
        charge = np.zeros((ny, nx), np.int32) if tw is not None else None
        roots, ts, seeds = sampler.sample(rng)
        n_loops[r] = roots.size
        for root, t, seed in zip(roots, ts, seeds):
            shape = _soup_shape(complex(root), float(t), seed, h, rcells, cfg.delta, ecfg)
            if shape is None:
                continue
            n_ras += 1
            grid, d2, ix, iy = shape
            K.stamp_band(band, d2, r2, iy - gy, ix - gx)
            if tw is not None:
                spin = 1 if rng.random() < 0.5 else -1
                K.stamp_separation(nsep, charge, grid, tw[0, 0], tw[0, 1], tw[1, 0], tw[1, 1],
                                   iy - gy, ix - gx, spin)
        bands.append(band)
        nseps.append(nsep)
        charges.append(charge)
    return SoupFields(h, offs, tw, n, (gx, gy), bands, nseps, charges, n_loops, n_ras)


def _soup_shape(root: complex, t: float, seed, h: float, rcells: int, delta: float,
                cfg: EngineConfig):
    seed = np.uint64(seed)
    cx, cy = K.levy_path(0.0, 0.0, t, seed, COARSE_DEPTH)
    margin = MARGIN_SD * math.sqrt(t / (1 << COARSE_DEPTH))
    if math.sqrt(2) * (max(np.ptp(cx), np.ptp(cy)) + 2 * margin) < delta:
        return None
    xs, ys = K.levy_path(root.real, root.imag, t, seed, depth_for(t, h, cfg.kappa))
    ext = max(np.ptp(xs), np.ptp(ys))
    if ext < delta:
        if math.sqrt(2) * ext < delta or diameter(xs + 1j * ys) < delta:
            return None
    r, ix, iy = lattice_raster(xs, ys, h, rcells + 2)
    return r.grid, K.edge_dist2(r.grid, rcells), ix, iy


def mean_hit_count(eps: float, cfg: SoupConfig, n_samples: int, rng) -> CorrelationEstimate:
    """lam * mu(boundary meets B_eps(z), diameter >= delta, t in the soup band)."""
    ev = LoopEvent((0j,), min_diameter=cfg.delta)
    est = estimate_event_mass(ev, (eps,), n_samples, rng, (cfg.t_lo, cfg.t_max), None, cfg.engine)[0]
    return est.scaled(cfg.lam)


def soup_estimate_npoint(points, eps: float, decorations: Decoration | None, config: SoupConfig,
                         rng, mean: float | None = None, chat: float = 1.0,
                         normalized: bool = False) -> CorrelationEstimate:
    """Direct soup estimate of a product of centred hit counts.

    Counts are centred by lam * mu(hit, diameter >= delta) estimated once
    with ``mean_budget_factor`` times the realization budget (or supplied as
    ``mean``). Each realization contributes the average of the product over
    all lattice translations of the pattern. Twisted expectations are ratios
    E[W X] / E[W] with W the twist weight. With ``normalized`` the result is
    scaled by chat / sqrt(lam) * eps^(-2/3) per leg.
    """
    pts = tuple(complex(z) for z in points)
    deco = decorations if decorations is not None else Decoration()
    _check_separated(pts, eps)
    rng = as_generator(rng)
    mean_est = None
    if mean is None:
        mean_est = mean_hit_count(eps, config, config.mean_budget_factor * config.n_realizations, rng)
        mean = mean_est.value
    fields = simulate_soup_fields(pts, eps, config, rng, twist=deco.twist)
    num = np.empty(config.n_realizations)
    den = np.empty(config.n_realizations)
    for r in range(config.n_realizations):
        x = np.prod(fields.counts(r) - mean, axis=0).astype(float)
        if deco.twist is None:
            w = np.ones_like(x)
        elif deco.twist_mode == "reweight":
            w = math.cos(deco.twist[2]) ** fields.window(fields.nsep[r]).astype(float)
        else:
            w = np.cos(deco.twist[2] * fields.window(fields.charge[r]))
        num[r] = float((w * x).mean())
        den[r] = float(w.mean())
    if deco.twist is None:
        n = num.size
        est = CorrelationEstimate(float(num.mean()), float(num.std(ddof=1) / math.sqrt(n)), n)
    else:
        est = ratio_estimate(num, den)
    flags = {"mean": float(mean), "mean_loops": float(fields.n_loops.mean()),
             "rasterised": fields.n_rasterised, "eps": eps}
    if mean_est is not None:
        flags["mean_stderr"] = mean_est.stderr
    est = replace(est, flags=flags)
    if normalized:
        est = est.scaled((chat / math.sqrt(config.lam) * eps ** (-EDGE_EXPONENT)) ** len(pts))
    return est


def twisted_one_point_prediction(z1, z2, z3, eps: float, beta: float, cfg: SoupConfig,
                                 n_samples: int, rng) -> CorrelationEstimate:
    """-lam (1 - cos beta) mu(hit B_eps(z3), separates z1 z2, diameter >= delta)."""
    ev = LoopEvent((complex(z3),), separate=((complex(z1), complex(z2)),), min_diameter=cfg.delta)
    est = estimate_event_mass(ev, (eps,), n_samples, rng, (cfg.t_lo, cfg.t_max), None, cfg.engine)[0]
    return est.scaled(-cfg.lam * (1 - math.cos(beta)))


# ------------------------------------------------------------------ layering and charged

def three_point_OOE_mc(z1, z2, z3, lam: float, beta: float, calib: Calibration,
                       eps_ladder, n_samples: int, rng, window: MeasureWindow | None = None,
                       cfg: EngineConfig = EngineConfig()):
    """<O_b O_-b E(z3)> / <O_b O_-b> = -sqrt(lam)(1 - cos b) chat alpha^{z3}_{z1|z2}.

    Returns the ratio estimates and the raw alpha estimates, one per rung.
    """
    alphas = estimate_alpha_ladder((z3,), (z1, z2), eps_ladder, n_samples, rng, window, cfg)
    pref = -math.sqrt(lam) * (1 - math.cos(beta))
    ratios = [alpha_hat(a, calib.chat, 1, calib.chat_stderr).scaled(pref) for a in alphas]
    return ratios, alphas


@dataclass
class ChargedTwoPoint:
    alpha_pair: CorrelationEstimate
    alpha_pair_sep: CorrelationEstimate
    alpha_pair_charged: CorrelationEstimate
    one_sided: tuple
    bracket: CorrelationEstimate
    half_weight_ratio: CorrelationEstimate
    one_sided_ratio: CorrelationEstimate


def _ratio(a: CorrelationEstimate, b: CorrelationEstimate) -> CorrelationEstimate:
    if not b.value:
        return CorrelationEstimate(float("nan"), float("nan"), a.n_samples)
    r = a.value / b.value
    rel = math.hypot(a.stderr / a.value if a.value else 0.0, b.stderr / b.value)
    return CorrelationEstimate(r, abs(r) * rel, a.n_samples)


def charged_two_point_terms(z1, z2, eps: float, lam: float, beta: float, chat: float,
                            n_samples: int, rng, window: MeasureWindow | None = None,
                            cfg: EngineConfig = EngineConfig()) -> ChargedTwoPoint:
    """Three-term bracket of <E_b E_-b> / <O_b O_-b>, each term estimated separately.

        alpha_hat^{12} - (1 - cos b) alpha_hat^{12}_{1|2}
          + lam (1 - cos b)^2 a_1 a_2,

    with a_j = chat eps^(-2/3) mu(boundary meets B_eps(z_j), z_k inside,
    z_j outside). The interior test at a hit point uses the lattice cell of
    the point itself. Also reported: the conjectured half-weight ratios
    alpha^{12}_{1|2} / alpha^{12} and a_j / (chat eps^(-2/3) mu(hit z_j,
    z_k inside)), both expected to be 1/2.
    """
    z1, z2 = complex(z1), complex(z2)
    rng = as_generator(rng)
    win = window if window is not None else default_window((z1, z2), eps)
    a12 = estimate_alpha((z1, z2), None, eps, win, n_samples, rng, cfg)
    a12s = estimate_alpha((z1, z2), (z1, z2), eps, win, n_samples, rng, cfg)
    one, enclosing = [], []
    for zj, zk in ((z1, z2), (z2, z1)):
        ev = LoopEvent((zj,), inside=(zk,), outside=(zj,))
        one.append(estimate_alpha_ladder(None, None, (eps,), n_samples, rng, win, cfg, ev)[0])
        ev_all = LoopEvent((zj,), inside=(zk,))
        enclosing.append(estimate_alpha_ladder(None, None, (eps,), n_samples, rng, win, cfg, ev_all)[0])
    omc = 1 - math.cos(beta)
    c2 = chat * chat
    h1, h2 = (o.value * chat for o in one)
    val = c2 * a12.value - omc * c2 * a12s.value + lam * omc ** 2 * h1 * h2
    var = ((c2 * a12.stderr) ** 2 + (omc * c2 * a12s.stderr) ** 2
           + (lam * omc ** 2 * c2) ** 2 * ((one[0].stderr * one[1].value) ** 2
                                           + (one[1].stderr * one[0].value) ** 2))
    bracket = CorrelationEstimate(val, math.sqrt(var), n_samples)
    charged = CorrelationEstimate(c2 * a12.value - omc * c2 * a12s.value,
                                  math.hypot(c2 * a12.stderr, omc * c2 * a12s.stderr), n_samples)
    r_half = replace(_ratio(a12s, a12), flags={"hypothesis": 0.5})
    r_one = replace(_ratio(CorrelationEstimate(one[0].value + one[1].value,
                                               math.hypot(one[0].stderr, one[1].stderr), n_samples),
                           CorrelationEstimate(enclosing[0].value + enclosing[1].value,
                                               math.hypot(enclosing[0].stderr, enclosing[1].stderr),
                                               n_samples)),
                    flags={"hypothesis": 0.5})
    return ChargedTwoPoint(a12, a12s, charged, tuple(one), bracket, r_half, r_one)


__all__ = [
    "AlphaTable", "PartitionSet", "MultisetAssignment", "ToyAtom", "partitions_min2",
    "multisets_with_multiplicity", "npoint_edge_formula", "npoint_higher_order_formula",
    "toy_poisson_oracle", "alpha_table_from_atoms", "EngineConfig", "LoopEvent", "LoopShape",
    "sample_shape", "shape_counts", "estimate_event_mass", "estimate_alpha",
    "estimate_alpha_ladder", "default_window", "default_ladder", "ladder_consistent",
    "Calibration", "calibrate", "calibrate_chat", "alpha_hat", "build_alpha_table",
    "Decoration", "SoupConfig", "LocalSoupSampler", "SoupFields", "simulate_soup_fields",
    "mean_hit_count", "soup_estimate_npoint", "twisted_one_point_prediction",
    "three_point_OOE_mc", "ChargedTwoPoint", "charged_two_point_terms",
]
