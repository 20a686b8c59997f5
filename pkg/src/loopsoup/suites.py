"""Verification suites: deterministic checks and Monte Carlo property tests.

Each check appends named comparisons (value, target, tolerance) to a
:class:`~loopsoup.records.RunRecord`. Monte Carlo budgets are split into a
fixed number of seeded chunks, so results do not depend on how many
workers run them.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from . import combinatorics as comb
from . import correlators as corr
from . import exactcft, percolation, virblocks
from .loopmeasure import MeasureWindow, Rect
from .records import RunRecord
from .stats import CorrelationEstimate

N_CHUNKS = 4

# Monte Carlo budgets at budget scale 1
FULL_BUDGETS = {
    "pair": 4000, "disk": 3000, "three_point": 6000, "calibration": 6000,
    "soup_realizations": 600, "soup_table": 8000, "perc_trials": 3000,
}
PAIR_RADII = (0.25, 0.5, 1.0)
PAIR_EPS_REL = 0.08
DISK_LADDER = (0.08, 0.04, 0.02)
TRIANGLE = (0j, 1 + 0j, 0.3 + 0.8j)
THREE_POINT_SIDE = 200.0
SCALING_PAIR = (0.3 + 0.2j, 1.1 + 0.7j)
PERC_R = 1024
PERC_RUNGS = (64, 32, 16, 8)


# ------------------------------------------------------------------ chunked execution

def chunk_seeds(seed: int, n: int = N_CHUNKS) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def split_budget(total: int, n: int = N_CHUNKS) -> list[int]:
    base, extra = divmod(total, n)
    return [base + (1 if i < extra else 0) for i in range(n)]


def run_chunks(fn, args: list[tuple], threads: int = 1) -> list:
    if threads <= 1 or len(args) == 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, *zip(*args)))


def merge_rungs(parts: list[list[CorrelationEstimate]]) -> list[CorrelationEstimate]:
    out = []
    for rung in zip(*parts):
        acc = rung[0]
        for e in rung[1:]:
            acc = acc.merge(e)
        out.append(CorrelationEstimate(acc.value, acc.stderr, acc.n_samples, dict(rung[0].flags)))
    return out


def _ladder_chunk(points, flags, ladder, n, seed, window, event):
    return corr.estimate_alpha_ladder(points, flags, ladder, n, seed, window, event=event)


def alpha_ladder(points, flags, ladder, n_samples: int, seed: int, window=None, event=None,
                 threads: int = 1) -> list[CorrelationEstimate]:
    """estimate_alpha_ladder over seeded chunks, merged."""
    args = [(points, flags, tuple(ladder), n, s, window, event)
            for n, s in zip(split_budget(n_samples), chunk_seeds(seed)) if n > 0]
    return merge_rungs(run_chunks(_ladder_chunk, args, threads))


def _perc_chunk(rs, R, n, seed, offset, single):
    return percolation.arm_ladder_counts(rs, R, n, seed, single, trial_offset=offset)


def arm_ladder(rs, R: int, n_trials: int, seed: int, single: int = percolation.OPEN,
               threads: int = 1) -> list[CorrelationEstimate]:
    """Three-arm ladder over trial chunks; the trial index keys the configuration."""
    rs = sorted(rs, reverse=True)
    sizes = split_budget(n_trials)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    args = [(rs, R, n, seed, int(o), single) for n, o in zip(sizes, offsets) if n > 0]
    counts = np.sum(run_chunks(_perc_chunk, args, threads), axis=0)
    return [percolation._binomial(int(k), n_trials, {"r": r, "R": R}) for r, k in zip(rs, counts)]


# ------------------------------------------------------------------ deterministic suite

def _mp_constants():
    import mpmath as mp

    mp.mp.dps = 40
    g = mp.gamma
    pref = mp.mpf(2) ** (mp.mpf(7) / 6) * mp.pi / (mp.mpf(3) ** 0.25 * mp.sqrt(5)
                                                    * g(mp.mpf(1) / 6) * g(mp.mpf(4) / 3))
    c_eoo = -2 * pref
    c_eee = (4 * mp.mpf(2) ** (mp.mpf(1) / 6) * mp.mpf(3) ** 0.25 * mp.sqrt(5) * mp.pi ** 1.5
             * g(mp.mpf(2) / 3) / (g(mp.mpf(1) / 6) ** 3 * g(mp.mpf(7) / 6)))
    return float(c_eoo), float(c_eee)


def check_constants(rec: RunRecord) -> None:
    k = exactcft.ope_constants(exactcft.CftParams(1.0, math.pi))
    ref_oo, ref_ee = _mp_constants()
    rec.add_scalar("C_E_OO", k["C_E_OO"], "exact")
    rec.add_scalar("C_E_EE", k["C_E_EE"], "exact")
    rec.compare("C_E_OO vs high-precision gamma", k["C_E_OO"], ref_oo, 1e-5, "abs")
    rec.compare("C_E_EE vs high-precision gamma", k["C_E_EE"], ref_ee, 1e-5, "abs")
    rec.compare("C_E2_EE = sqrt 2", k["C_E2_EE"], math.sqrt(2.0), 1e-12, "abs")


def check_twist_limit(rec: RunRecord) -> None:
    z1, z2, z3 = 0.13 + 0.41j, 1.7 - 0.6j, -0.8 + 1.1j
    d = 1e-3 * complex(math.cos(0.7), math.sin(0.7))
    cfg = exactcft.PointConfig4(z1, z2, z3, z3 + d)
    val = abs(d) ** (4 / 3) * exactcft.z_twist(cfg)
    rec.add_scalar("z_twist_normalised", val, "exact")
    rec.compare("|z34|^(4/3) Z_twist at |z34| = 1e-3", val, 1.0, 1e-2, "abs")


def check_blocks(rec: RunRecord) -> None:
    params = exactcft.CftParams(1.0, math.pi)
    entries = virblocks.decompose_fourpoint(params, kmax=6, max_p=3)
    tab = virblocks.spectrum_table(entries)
    k = exactcft.ope_constants(params)
    rec.add_table("spectrum", ["p", "p_bar", "product"],
                  [[e.p, e.pp, e.coeff_product] for e in entries], "blocks")
    rec.compare("block product (0,0) = 1", tab[(0, 0)], 1.0, 1e-10, "abs")
    rec.compare("block product (1,1) = C_E_EE C_E_OO", tab[(1, 1)], k["product_11"], 1e-6, "abs")
    rec.compare("block product (2,2) = C_E_OO^2", tab[(2, 2)], k["product_22"], 1e-6, "abs")
    forbidden = max(abs(v) for (p, q), v in tab.items() if not virblocks.allowed_site(p, q))
    rec.compare("checkerboard-forbidden sites vanish", forbidden, 0.0, 1e-8, "max")


def check_central_charge(rec: RunRecord) -> None:
    for lam in (0.5, 1.0, 2.0):
        c = virblocks.central_charge_check(lam, math.pi)
        rec.add_scalar(f"central_charge_lam{lam:g}", c, "blocks")
        rec.compare(f"c = 2 lam at lam = {lam:g}", c, 2 * lam, 1e-8, "abs")
    raw = virblocks.stress_tensor_coefficient(exactcft.CftParams(1.0, math.pi))
    rec.compare("stress-tensor coefficient = 1/15", raw, 1 / 15, 1e-8, "abs")


def toy_measures(max_atoms: int = 4, max_points: int = 4, seed: int = 7):
    """Deterministic family of rational toy measures for the combinatorial checks."""
    rng = np.random.default_rng(seed)
    for n in range(2, max_points + 1):
        for n_atoms in range(1, max_atoms + 1):
            for _ in range(3):
                atoms = []
                for a in range(n_atoms):
                    size = int(rng.integers(1, n + 1))
                    hits = frozenset(int(v) + 1 for v in rng.choice(n, size, replace=False))
                    atoms.append(comb.ToyAtom(a, Fraction(int(rng.integers(1, 9)),
                                                          int(rng.integers(1, 9))), hits))
                yield n, atoms


def combinatorial_discrepancy(lam=Fraction(3, 2), max_total: int = 6) -> float:
    worst = 0.0
    for n, atoms in toy_measures():
        tab = comb.alpha_table_from_atoms(atoms, n)
        for k in itertools.product(range(0, 4), repeat=n):
            if sum(k) == 0 or sum(k) > max_total:
                continue
            # E^(k) is the centred factorial moment scaled by lam^(-k/2) / sqrt(k!)
            exact = comb.toy_poisson_oracle(atoms, lam, k)
            oracle = float(exact) * math.prod(float(lam) ** (-kj / 2) / math.sqrt(math.factorial(kj))
                                              for kj in k)
            got = comb.npoint_higher_order_formula(tab, float(lam), k)
            worst = max(worst, abs(got - oracle) / max(1.0, abs(oracle)))
            if all(kj == 1 for kj in k):
                got = comb.npoint_edge_formula(tab, float(lam), n)
                worst = max(worst, abs(got - oracle) / max(1.0, abs(oracle)))
    return worst


def check_combinatorics(rec: RunRecord) -> None:
    worst = combinatorial_discrepancy()
    rec.add_scalar("combinatorial_max_discrepancy", worst, "exact")
    rec.compare("partition and multiset formulas vs Poisson oracle", worst, 0.0, 1e-12, "max")


GRAM_CASES = ((2.0, (0.2, 0.2, 1 / 3, 1 / 3), 1 / 3), (2.0, (0.2, 0.2, 1 / 3, 1 / 3), 0.0),
              (1.0, (0.1, 0.1, 1 / 3, 1 / 3), 2 / 3), (1.3, (0.1, 0.25, 0.3, 0.7), 0.45),
              (4.0, (0.4, 0.4, 1 / 3, 1 / 3), 1.0))


def check_gram(rec: RunRecord) -> None:
    worst = 0.0
    for c, dims, hp in GRAM_CASES:
        a = virblocks.block_coeffs(c, dims, hp, 4).coeffs
        b = virblocks.block_coeffs_exact(c, dims, hp, 4)
        worst = max(worst, max(abs(x - y) for x, y in zip(a, b)))
    rec.add_scalar("gram_vs_exact_max_difference", worst, "blocks")
    rec.compare("Gram blocks vs exact rational reference, levels <= 4", worst, 0.0, 1e-10, "max")


QUICK_CHECKS = (check_constants, check_twist_limit, check_blocks, check_central_charge,
                check_combinatorics, check_gram)


def run_quick(rec: RunRecord) -> RunRecord:
    for check in QUICK_CHECKS:
        check(rec)
    return rec


# ------------------------------------------------------------------ Monte Carlo suite

def _budget(name: str, scale: float) -> int:
    return max(8, int(round(FULL_BUDGETS[name] * scale)))


def check_pair_exponent(rec: RunRecord, seed: int, scale: float = 1.0, threads: int = 1) -> None:
    pts = []
    for i, r in enumerate(PAIR_RADII):
        e = alpha_ladder((0j, complex(r)), None, (PAIR_EPS_REL * r,), _budget("pair", scale),
                         seed + i, threads=threads)[0]
        pts.append({"x": r, "value": e.value, "stderr": e.stderr, "n": e.n_samples,
                    "series": "alpha(0, r)"})
    rec.add_series("two_point_ladder", pts, "mc", "r")
    slope, se = corr_slope(pts)
    rec.compare("two-point slope = -4/3", slope, -4 / 3, 0.08, "abs", stderr=se)


def corr_slope(pts) -> tuple[float, float]:
    from .stats import fit_loglog_slope

    return fit_loglog_slope([p["x"] for p in pts], [p["value"] for p in pts],
                            [p["stderr"] for p in pts])


def check_disk_exponent(rec: RunRecord, seed: int, scale: float = 1.0, threads: int = 1) -> None:
    ev = corr.LoopEvent((0j,), min_diameter=1.0)
    win = MeasureWindow(1e-6, 400.0, Rect.centered(0j, 20.0))
    ests = alpha_ladder(None, None, DISK_LADDER, _budget("disk", scale), seed, win, ev, threads)
    rec.add_series("disk_ladder", [{"x": e, "value": a.value, "stderr": a.stderr,
                                    "n": a.n_samples, "series": "eps^(-2/3) mu(hit)"}
                                   for e, a in zip(DISK_LADDER, ests)], "mc", "eps")
    worst = 0.0
    for a, b in itertools.combinations(ests, 2):
        worst = max(worst, abs(a.value - b.value) / math.hypot(a.stderr, b.stderr))
    rec.compare("normalised disk ladder stable (max pairwise z)", worst, 0.0, 3.0, "max")
    raw = [a.value * e ** (2 / 3) for e, a in zip(DISK_LADDER, ests)]
    slope = float(np.polyfit(np.log(DISK_LADDER), np.log(raw), 1)[0])
    rec.compare("raw hit exponent = 2/3", slope, 2 / 3, 0.05, "abs")


def check_scaling(rec: RunRecord, seed: int, scale: float = 1.0, threads: int = 1) -> None:
    z = SCALING_PAIR
    eps = PAIR_EPS_REL * abs(z[1] - z[0])
    a1 = alpha_ladder(z, None, (eps,), _budget("pair", scale), seed, threads=threads)[0]
    a2 = alpha_ladder(tuple(2 * w for w in z), None, (2 * eps,), _budget("pair", scale),
                      seed + 1, threads=threads)[0]
    rec.add_estimate("alpha_pair_z", a1)
    rec.add_estimate("alpha_pair_2z", a2)
    ratio = a2.value / a1.value
    se = ratio * math.hypot(a1.stderr / a1.value, a2.stderr / a2.value)
    rec.compare("alpha(2z) / alpha(z) = 2^(-4/3)", ratio, 2 ** (-4 / 3), 3.0, "sigma", stderr=se)


def check_three_point(rec: RunRecord, seed: int, scale: float = 1.0, threads: int = 1) -> None:
    z1, z2, z3 = TRIANGLE
    eps = PAIR_EPS_REL
    win = MeasureWindow(1e-6, THREE_POINT_SIDE ** 2,
                        Rect.centered((z1 + z2 + z3) / 3, THREE_POINT_SIDE))
    a2 = alpha_ladder((0j, 1 + 0j), None, (eps,), _budget("calibration", scale), seed, win,
                      threads=threads)[0]
    chat = 1 / math.sqrt(a2.value)
    chat_se = 0.5 * chat * a2.stderr / a2.value
    a3 = alpha_ladder((z3,), (z1, z2), (eps,), _budget("three_point", scale), seed + 1, win,
                      threads=threads)[0]
    est = corr.alpha_hat(a3, chat, 1, chat_se).scaled(-(1 - math.cos(math.pi)))
    exact = -(1 - math.cos(math.pi)) * exactcft.alpha_hat_3pt(z1, z2, z3)
    rec.add_estimate("three_point_OOE", est)
    rec.add_scalar("three_point_OOE_exact", exact, "exact")
    rec.compare("calibrated <O O E> vs closed form", est.value, exact, 3.0, "sigma",
                stderr=est.stderr)
    rec.compare("<O O E> relative stderr", est.stderr / abs(est.value), 0.0, 0.05, "max")


def check_soup_vs_table(rec: RunRecord, seed: int, scale: float = 1.0, threads: int = 1) -> None:
    eps = PAIR_EPS_REL
    cfg = corr.SoupConfig(n_realizations=_budget("soup_realizations", scale))
    soup = corr.soup_estimate_npoint((0j, 1 + 0j), eps, None, cfg, seed)
    ev = corr.LoopEvent((0j, 1 + 0j))
    parts = run_chunks(_table_chunk, [(ev, eps, n, s, cfg.t_lo, cfg.t_max)
                                      for n, s in zip(split_budget(_budget("soup_table", scale)),
                                                      chunk_seeds(seed + 1))], threads)
    table = merge_rungs(parts)[0].scaled(cfg.lam)
    rec.add_estimate("soup_pair_covariance", soup)
    rec.add_estimate("table_pair_weight", table)
    rec.compare("soup vs alpha-table <E E>", soup.value, table.value, 3.0, "sigma",
                stderr=math.hypot(soup.stderr, table.stderr))


def _table_chunk(ev, eps, n, seed, t_lo, t_hi):
    return corr.estimate_event_mass(ev, (eps,), n, seed, (t_lo, t_hi))


def check_percolation(rec: RunRecord, seed: int, scale: float = 1.0, threads: int = 1) -> None:
    n = _budget("perc_trials", scale)
    ests = arm_ladder(PERC_RUNGS, PERC_R, n, seed, threads=threads)
    rec.add_series("three_arm_ladder", [{"x": e.flags["r"] / PERC_R, "value": e.value,
                                         "stderr": e.stderr, "n": e.n_samples,
                                         "series": f"R={PERC_R}"} for e in ests], "mc", "r/R")
    ratio = ests[0].value / ests[1].value if ests[1].value > 0 else float("nan")
    rec.compare("three-arm ratio theta(eps)/theta(eps/2) = 2^(2/3)", ratio, 2 ** (2 / 3), 0.10, "rel")
    if all(e.value > 0 for e in ests):
        slope = percolation.fit_arm_exponent([e.flags["r"] / PERC_R for e in ests], ests)
    else:
        slope = float("nan")
    rec.compare("three-arm exponent = 2/3", slope, 2 / 3, 0.07, "abs")


FULL_CHECKS = (check_pair_exponent, check_disk_exponent, check_scaling, check_three_point,
               check_soup_vs_table, check_percolation)


def run_full(rec: RunRecord, seed: int, scale: float = 1.0, threads: int = 1) -> RunRecord:
    run_quick(rec)
    for i, check in enumerate(FULL_CHECKS):
        check(rec, seed + 1000 * i, scale, threads)
    return rec


__all__ = [
    "FULL_BUDGETS", "run_quick", "run_full", "alpha_ladder", "arm_ladder", "chunk_seeds",
    "split_budget", "combinatorial_discrepancy", "toy_measures",
] + [f.__name__ for f in QUICK_CHECKS + FULL_CHECKS]
