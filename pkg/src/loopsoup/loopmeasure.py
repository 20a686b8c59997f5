"""Sampling from the Brownian loop measure and Poissonian loop soups.

The loop measure has density 1/(2 pi t^2) dt dA(root) times the law of a
planar Brownian bridge of duration t, with each coordinate a standard
Brownian motion (coordinate variance t at time t).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels as K
from .errors import DegenerateLoopError, InvalidArgument
from .geometry import SimpleLoop, outer_boundary

KAPPA = 1.0
MIN_STEPS = 64
MAX_DEPTH = 22


class DomainKind(str, Enum):
    PLANE = "full-plane"
    UPPER_HALF_PLANE = "upper-half-plane"
    DISK = "disk"


@dataclass(frozen=True)
class Rect:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise InvalidArgument("rectangle must have positive area")

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    @property
    def corners(self) -> tuple[complex, ...]:
        return (complex(self.xmin, self.ymin), complex(self.xmax, self.ymin),
                complex(self.xmax, self.ymax), complex(self.xmin, self.ymax))

    def contains(self, z) -> np.ndarray | bool:
        z = np.asarray(z)
        return (z.real >= self.xmin) & (z.real <= self.xmax) & (z.imag >= self.ymin) & (z.imag <= self.ymax)

    @classmethod
    def centered(cls, center: complex, side: float) -> "Rect":
        c = complex(center)
        return cls(c.real - side / 2, c.real + side / 2, c.imag - side / 2, c.imag + side / 2)


@dataclass(frozen=True)
class DomainSpec:
    kind: DomainKind
    window: Rect
    center: complex = 0j  # disk only
    radius: float = 1.0   # disk only

    def __post_init__(self):
        object.__setattr__(self, "kind", DomainKind(self.kind))
        if self.kind is DomainKind.UPPER_HALF_PLANE and self.window.ymin < 0:
            raise InvalidArgument("window must lie in the closed upper half-plane")
        if self.kind is DomainKind.DISK:
            if not self.radius > 0:
                raise InvalidArgument("disk radius must be positive")
            if any(abs(c - self.center) > self.radius * (1 + 1e-12) for c in self.window.corners):
                raise InvalidArgument("window must lie in the closed disk")

    def contains(self, z) -> np.ndarray | bool:
        z = np.asarray(z)
        if self.kind is DomainKind.PLANE:
            return np.ones(z.shape, bool) if z.shape else True
        if self.kind is DomainKind.UPPER_HALF_PLANE:
            return z.imag > 0
        return np.abs(z - self.center) < self.radius

    def contains_loop(self, loop: SimpleLoop) -> bool:
        return bool(np.all(self.contains(loop.boundary)))


@dataclass(frozen=True)
class MeasureWindow:
    t_min: float
    t_max: float
    region: Rect

    def __post_init__(self):
        if not self.t_min > 0:
            raise InvalidArgument("t_min must be positive")
        if not self.t_max > self.t_min:
            raise InvalidArgument("t_max must exceed t_min")

    @property
    def mass(self) -> float:
        return self.region.area / (2 * math.pi) * (1 / self.t_min - 1 / self.t_max)

    def band_mass_fraction(self, t_lo: float, t_hi: float) -> float:
        lo, hi = max(t_lo, self.t_min), min(t_hi, self.t_max)
        if hi <= lo:
            return 0.0
        return (1 / lo - 1 / hi) / (1 / self.t_min - 1 / self.t_max)

    @classmethod
    def default_for(cls, points, eps_min: float, side_factor: float = 20.0,
                    t_min: float | None = None) -> "MeasureWindow":
        """Region of side 20x the largest pairwise distance, t_max = side^2."""
        pts = np.asarray(points, dtype=complex)
        dmax = max(float(np.abs(pts[:, None] - pts[None, :]).max()), 4 * eps_min)
        side = side_factor * dmax
        center = complex(pts.mean())
        return cls(t_min if t_min is not None else (eps_min / 4) ** 2, side * side,
                   Rect.centered(center, side))


@dataclass
class LoopSample:
    root: complex
    duration: float
    path: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.path, dtype=complex)
        if p.size < 4:
            raise InvalidArgument("a loop needs at least 4 vertices")
        if p[0] != p[-1]:
            raise InvalidArgument("path must be closed")
        self.path = p


@dataclass
class SoupRealization:
    loops: list
    spins: np.ndarray
    lam: float
    delta: float
    seed: int
    n_proposed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.spins = np.asarray(self.spins, dtype=np.int8)
        if self.spins.size != len(self.loops):
            raise InvalidArgument("one spin per loop")

    def __len__(self) -> int:
        return len(self.loops)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def spawn_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent generators for n workers, derived from one master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def n_steps_for(t: float, h: float, kappa: float = KAPPA) -> int:
    """Step count so that the per-step spatial scale is about h."""
    return max(MIN_STEPS, math.ceil(kappa * t / (h * h)))


def depth_for(t: float, h: float, kappa: float = KAPPA) -> int:
    return min(MAX_DEPTH, max(6, math.ceil(math.log2(n_steps_for(t, h, kappa)))))


def sample_bridge(root: complex, t: float, n_steps: int, rng) -> LoopSample:
    """Planar Brownian bridge from root back to root on n_steps equal steps."""
    if not t > 0:
        raise InvalidArgument("duration must be positive")
    if n_steps < 4:
        raise InvalidArgument("n_steps must be at least 4")
    rng = as_generator(rng)
    inc = rng.standard_normal((2, n_steps)) * math.sqrt(t / n_steps)
    w = np.zeros((2, n_steps + 1))
    np.cumsum(inc, axis=1, out=w[:, 1:])
    frac = np.arange(n_steps + 1) / n_steps
    b = w - frac * w[:, -1:]
    path = complex(root) + b[0] + 1j * b[1]
    path[-1] = path[0]
    return LoopSample(complex(root), float(t), path, 1.0)


def sample_durations(t_min: float, t_max: float, u: np.ndarray) -> np.ndarray:
    """Inverse CDF of the density proportional to t^-2 on [t_min, t_max]."""
    return 1.0 / (1.0 / t_min - u * (1.0 / t_min - 1.0 / t_max))


def sample_loop_from_measure(window: MeasureWindow, rng, h: float | None = None,
                             n_steps: int | None = None, n_proposals: int = 1,
                             kappa: float = KAPPA) -> LoopSample:
    """One proposal from the loop measure restricted to ``window``.

    The weight is window.mass / n_proposals, so summing f * weight over
    n_proposals draws (or averaging with n_proposals = 1) estimates the
    integral of f against the restricted measure.
    """
    if window.mass <= 0:
        raise InvalidArgument("window has zero mass")
    rng = as_generator(rng)
    r = window.region
    root = complex(rng.uniform(r.xmin, r.xmax), rng.uniform(r.ymin, r.ymax))
    t = float(sample_durations(window.t_min, window.t_max, rng.random()))
    if n_steps is None:
        n_steps = n_steps_for(t, h, kappa) if h is not None else MIN_STEPS
    loop = sample_bridge(root, t, n_steps, rng)
    loop.weight = window.mass / n_proposals
    return loop


def sample_soup(domain: DomainSpec, window: MeasureWindow, lam: float, delta: float,
                rng, resolution: float | None = None, kappa: float = KAPPA,
                max_loops: int = 200_000) -> SoupRealization:
    """Poisson soup of outer boundaries with diameter at least delta.

    ``rng`` may be an integer seed or a Generator; in the latter case a seed
    is drawn from it first so the realization can be regenerated from
    ``SoupRealization.seed`` alone.
    """
    if not lam > 0 or not delta > 0:
        raise InvalidArgument("lam and delta must be positive")
    if isinstance(rng, np.random.Generator):
        seed = int(rng.integers(2**63))
    else:
        seed = int(rng)
    gen = np.random.default_rng(seed)
    res = resolution if resolution is not None else delta / 16
    mean = lam * window.mass
    count = int(gen.poisson(mean))
    if count > max_loops:
        raise InvalidArgument(f"expected {mean:.3g} loops exceeds max_loops={max_loops}")
    loops, kept_roots = [], []
    for _ in range(count):
        s = sample_loop_from_measure(window, gen, h=res, kappa=kappa)
        p = s.path
        # outer-boundary diameter equals the path diameter (same convex hull)
        ext = max(np.ptp(p.real), np.ptp(p.imag))
        if ext < delta / math.sqrt(2) or ext < 2 * res:
            continue
        try:
            loop = outer_boundary(p, res)
        except DegenerateLoopError:
            continue
        if loop.diameter < delta:
            continue
        if domain.kind is not DomainKind.PLANE and not domain.contains_loop(loop):
            continue
        loops.append(loop)
        kept_roots.append(s.root)
    spins = gen.choice(np.array([-1, 1], dtype=np.int8), size=len(loops))
    return SoupRealization(loops, spins, lam, delta, seed, count,
                           {"roots": kept_roots, "resolution": res})


@dataclass(frozen=True)
class DurationProposal:
    """Proposal for loop durations, expressed through u = log t.

    The density of u is flat on [log t_min, log t_knee] and decays like
    (t / t_knee)^-gamma above, up to t_max. Long loops are expensive to
    rasterise, so they are proposed less often and carry larger weights.
    """
    t_min: float
    t_max: float
    t_knee: float | None = None
    gamma: float = 0.5

    def __post_init__(self):
        if not 0 < self.t_min < self.t_max:
            raise InvalidArgument("need 0 < t_min < t_max")
        if self.gamma < 0:
            raise InvalidArgument("gamma must be non-negative")
        knee = self.t_max if self.t_knee is None else min(max(self.t_knee, self.t_min), self.t_max)
        object.__setattr__(self, "t_knee", knee)

    @property
    def _u(self):
        return math.log(self.t_min), math.log(self.t_knee), math.log(self.t_max)

    @property
    def _norm(self) -> float:
        u0, uk, u1 = self._u
        if u1 <= uk:
            tail = 0.0
        elif self.gamma == 0:
            tail = u1 - uk
        else:
            tail = (1 - math.exp(-self.gamma * (u1 - uk))) / self.gamma
        return (uk - u0) + tail

    def log_t_density(self, t) -> np.ndarray:
        """Density of log t at t."""
        u0, uk, u1 = self._u
        u = np.log(np.asarray(t, dtype=float))
        g = np.where(u <= uk, 1.0, np.exp(-self.gamma * (u - uk)))
        return g / self._norm

    def sample_t(self, v) -> np.ndarray:
        """Inverse CDF applied to uniforms v."""
        u0, uk, u1 = self._u
        x = np.asarray(v, dtype=float) * self._norm
        flat = uk - u0
        tail_x = np.clip(x - flat, 0.0, None)
        if self.gamma == 0:
            u_tail = uk + tail_x
        else:
            u_tail = uk - np.log1p(-np.minimum(self.gamma * tail_x, 1 - 1e-16)) / self.gamma
        return np.exp(np.where(x <= flat, u0 + x, np.minimum(u_tail, u1)))

    def sample(self, rng, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Durations and 64-bit path seeds for n proposals."""
        rng = as_generator(rng)
        t = self.sample_t(rng.random(n))
        seeds = rng.integers(0, 2**63, size=n, dtype=np.int64).astype(np.uint64)
        return t, seeds


def levy_loop(root: complex, t: float, seed, depth: int) -> LoopSample:
    """The dyadic counter-based bridge used by the estimators, as a LoopSample."""
    xs, ys = K.levy_path(float(root.real), float(root.imag), float(t), np.uint64(seed), int(depth))
    return LoopSample(complex(root), float(t), xs + 1j * ys, 1.0)


__all__ = [
    "DomainKind", "Rect", "DomainSpec", "MeasureWindow", "LoopSample", "SoupRealization",
    "sample_bridge", "sample_loop_from_measure", "sample_soup", "sample_durations",
    "n_steps_for", "depth_for", "spawn_streams", "as_generator", "DurationProposal", "levy_loop",
]
