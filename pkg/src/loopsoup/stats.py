"""Monte Carlo estimates with standard errors, and streaming accumulators."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float | complex
    stderr: float
    n_samples: int
    flags: dict = field(default_factory=dict, compare=False)

    def merge(self, other: "CorrelationEstimate") -> "CorrelationEstimate":
        """Count-weighted combination of two independent estimates."""
        n = self.n_samples + other.n_samples
        if n == 0:
            return CorrelationEstimate(0.0, 0.0, 0)
        w1, w2 = self.n_samples / n, other.n_samples / n
        value = w1 * self.value + w2 * other.value
        stderr = float(np.hypot(w1 * self.stderr, w2 * other.stderr))
        return CorrelationEstimate(value, stderr, n, {**self.flags, **other.flags})

    def scaled(self, factor: float) -> "CorrelationEstimate":
        return CorrelationEstimate(self.value * factor, self.stderr * abs(factor),
                                   self.n_samples, dict(self.flags))

    def z_score(self, target: float, extra_stderr: float = 0.0) -> float:
        se = float(np.hypot(self.stderr, extra_stderr))
        if se == 0.0:
            return 0.0 if self.value == target else float("inf")
        return float(abs(self.value - target) / se)

    def to_dict(self) -> dict:
        v = self.value
        out = {"value": [v.real, v.imag] if isinstance(v, complex) else float(v),
               "stderr": float(self.stderr), "n": int(self.n_samples)}
        if self.flags:
            out["flags"] = self.flags
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "CorrelationEstimate":
        v = d["value"]
        if isinstance(v, list):
            v = complex(v[0], v[1])
        return cls(v, float(d["stderr"]), int(d["n"]), dict(d.get("flags", {})))


def agree(a: CorrelationEstimate, b: CorrelationEstimate, nsigma: float = 3.0) -> bool:
    """True when two independent estimates differ by at most nsigma combined stderr."""
    se = float(np.hypot(a.stderr, b.stderr))
    return abs(a.value - b.value) <= nsigma * se


class Accumulator:
    """Streaming mean and variance for a vector of per-sample contributions.

    Each call to ``add`` receives one row per proposal; rows of zeros can be
    added in bulk with ``add_zeros`` without materialising them.
    """

    def __init__(self, width: int):
        self.n = 0
        self.s1 = np.zeros(width)
        self.s2 = np.zeros(width)

    def add(self, row) -> None:
        row = np.asarray(row, dtype=float)
        self.n += 1
        self.s1 += row
        self.s2 += row * row

    def add_zeros(self, count: int) -> None:
        self.n += int(count)

    def merge(self, other: "Accumulator") -> None:
        self.n += other.n
        self.s1 += other.s1
        self.s2 += other.s2

    def estimates(self) -> list[CorrelationEstimate]:
        if self.n == 0:
            return [CorrelationEstimate(0.0, 0.0, 0) for _ in self.s1]
        mean = self.s1 / self.n
        var = np.maximum(self.s2 / self.n - mean ** 2, 0.0)
        se = np.sqrt(var / max(self.n - 1, 1))
        return [CorrelationEstimate(float(m), float(s), self.n) for m, s in zip(mean, se)]


def ratio_estimate(num: np.ndarray, den: np.ndarray) -> CorrelationEstimate:
    """Delta-method estimate of E[num]/E[den] from paired samples."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = num.size
    mn, md = num.mean(), den.mean()
    if md == 0.0:
        raise ZeroDivisionError("denominator mean is zero")
    r = mn / md
    resid = (num - r * den) / md
    se = float(np.sqrt(resid.var(ddof=1) / n)) if n > 1 else 0.0
    return CorrelationEstimate(float(r), se, n)


def fit_loglog_slope(x, y, yerr=None) -> tuple[float, float]:
    """Least-squares slope of log y against log x, with its standard error.

    When ``yerr`` is given the fit is weighted by the propagated log-errors.
    """
    x = np.log(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("log-log fit needs positive values")
    ly = np.log(y)
    if yerr is None:
        w = np.ones_like(ly)
    else:
        rel = np.asarray(yerr, dtype=float) / y
        # zero-error points (e.g. a probability estimated as 1) get a large finite weight
        w = 1.0 / np.maximum(rel, 1e-12) ** 2
    W = w.sum()
    xm = (w * x).sum() / W
    ym = (w * ly).sum() / W
    sxx = (w * (x - xm) ** 2).sum()
    slope = (w * (x - xm) * (ly - ym)).sum() / sxx
    if yerr is None:
        resid = ly - ym - slope * (x - xm)
        dof = max(len(x) - 2, 1)
        se = float(np.sqrt((resid ** 2).sum() / dof / sxx))
    else:
        se = float(np.sqrt(1.0 / sxx))
    return float(slope), se
