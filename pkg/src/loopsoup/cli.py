"""Command-line runner: loopsoup {simulate,estimate,exact,blocks,perc,verify}.

Every command writes a JSON run record (and CSV plot data where it makes
sense) into the output directory: --out, else the config's ``out``, else
$LOOPSOUP_OUT, else ./loopsoup-runs. Exit codes: 0 success or all checks
passed, 1 a verification failed, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from pathlib import Path

from . import __version__
from . import correlators as corr
from . import exactcft, suites, virblocks
from .errors import LoopSoupError
from .loopmeasure import DomainSpec, MeasureWindow, Rect, sample_soup
from .percolation import CLOSED, OPEN, fit_arm_exponent
from .stats import fit_loglog_slope
from .records import (OUT_ENV, ConfigError, ExperimentConfig, RunRecord, atomic_write,
                      emit_plot_data)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_OUT = "loopsoup-runs"
STANDARD_FOUR = [[0.0, 0.0], [1.0, 0.0], [0.3, 0.8], [1.4, 1.1]]


class UsageError(Exception):
    pass


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    return Path(args.out or cfg.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _window(cfg: ExperimentConfig, pts, eps_min: float) -> MeasureWindow | None:
    if cfg.window is None:
        return None
    base = MeasureWindow.default_for(pts, eps_min)
    side = cfg.window.get("side", base.region.xmax - base.region.xmin)
    center = complex(sum(pts) / len(pts))
    return MeasureWindow(cfg.window.get("t_min", base.t_min), cfg.window.get("t_max", side * side),
                         Rect.centered(center, side))


def _need_points(cfg: ExperimentConfig, n: int | None = None, at_least: int = 1) -> list[complex]:
    pts = cfg.complex_points
    if n is not None and len(pts) != n:
        raise ConfigError(f"{cfg.command} needs exactly {n} points, got {len(pts)}")
    if len(pts) < at_least:
        raise ConfigError(f"{cfg.command} needs at least {at_least} points")
    return pts


# ------------------------------------------------------------------ commands

def cmd_exact(cfg: ExperimentConfig, rec: RunRecord, args, out: Path) -> None:
    if not cfg.points:
        cfg.points = [list(p) for p in STANDARD_FOUR]
    pts = _need_points(cfg, 4)
    params = exactcft.CftParams(cfg.lam, cfg.beta)
    audit = exactcft.four_point_audit(exactcft.PointConfig4(*pts), params)
    rec.add_scalar("four_point_OOEE", audit["value"], "exact",
                   terms={k: v for k, v in audit.items() if k != "value"})
    for k, v in exactcft.ope_constants(params).items():
        rec.add_scalar(k, v, "exact")
    rec.add_scalar("alpha_hat_3pt", exactcft.alpha_hat_3pt(*pts[:3]), "exact")


def cmd_blocks(cfg: ExperimentConfig, rec: RunRecord, args, out: Path) -> None:
    kmax = int(cfg.options.get("kmax", 6))
    max_p = int(cfg.options.get("max_p", 3))
    params = exactcft.CftParams(cfg.lam, cfg.beta)
    entries = virblocks.decompose_fourpoint(params, kmax=kmax, max_p=max_p)
    rec.add_table("spectrum", ["p", "p_bar", "dim", "product", "residual"],
                  [[e.p, e.pp, e.dim, e.coeff_product, e.residual] for e in entries], "blocks")
    rec.add_scalar("central_charge", virblocks.central_charge_check(cfg.lam, cfg.beta), "blocks")
    virblocks.write_spectrum_csv(entries, out / "spectrum.csv")


def cmd_estimate(cfg: ExperimentConfig, rec: RunRecord, args, out: Path) -> None:
    quantity = cfg.options.get("quantity", "alpha")
    scale = args.budget_scale
    if quantity == "alpha":
        pts = _need_points(cfg, at_least=1)
        sep = cfg.options.get("separate")
        flags = None if sep is None else (pts[sep[0]], pts[sep[1]])
        if flags is None and len(pts) < 2:
            raise ConfigError("a single hit point needs a separated pair in options.separate")
        win = _window(cfg, pts + list(flags or ()), min(cfg.eps_ladder))
        n = cfg.budget("samples", 2000, scale)
        ests = suites.alpha_ladder(pts, flags, cfg.eps_ladder, n, cfg.seed, win, threads=args.threads)
        rec.add_series("alpha_ladder", [{"x": e, "value": a.value, "stderr": a.stderr,
                                         "n": a.n_samples, "series": "alpha"}
                                        for e, a in zip(cfg.eps_ladder, ests)], "mc", "eps")
    elif quantity == "two_point":
        radii = cfg.options.get("radii", [0.25, 0.5, 1.0])
        rel = cfg.options.get("eps_rel", 0.08)
        n = cfg.budget("samples", 4000, scale)
        pts = []
        for i, r in enumerate(radii):
            a = suites.alpha_ladder((0j, complex(r)), None, (rel * r,), n, cfg.seed + i,
                                    threads=args.threads)[0]
            pts.append({"x": r, "value": a.value, "stderr": a.stderr, "n": a.n_samples,
                        "series": "alpha(0, r)"})
        rec.add_series("two_point_ladder", pts, "mc", "r")
        slope, se = suites.corr_slope(pts)
        rec.add_scalar("two_point_slope", slope, "mc", se, n)
    elif quantity == "three_point":
        pts = _need_points(cfg, 3)
        eps = cfg.eps_ladder[0]
        win = _window(cfg, pts, eps) or MeasureWindow.default_for(pts, eps)
        n = cfg.budget("samples", 4000, scale)
        a2 = suites.alpha_ladder((0j, 1 + 0j), None, (eps,), n, cfg.seed, win,
                                 threads=args.threads)[0]
        cal = corr.Calibration(1 / math.sqrt(a2.value), 0.5 * a2.stderr / a2.value ** 1.5, a2)
        a3 = suites.alpha_ladder((pts[2],), (pts[0], pts[1]), (eps,), n, cfg.seed + 1, win,
                                 threads=args.threads)[0]
        est = corr.alpha_hat(a3, cal.chat, 1, cal.chat_stderr).scaled(
            -math.sqrt(cfg.lam) * (1 - math.cos(cfg.beta)))
        rec.add_estimate("three_point_OOE", est)
        exact = -math.sqrt(cfg.lam) * (1 - math.cos(cfg.beta)) * exactcft.alpha_hat_3pt(*pts)
        rec.add_scalar("three_point_OOE_exact", exact, "exact")
    elif quantity == "soup_pair":
        pts = _need_points(cfg, 2)
        scfg = corr.SoupConfig(lam=cfg.lam, delta=cfg.delta,
                               t_max=float(cfg.options.get("t_max", 4.0)),
                               n_realizations=cfg.budget("realizations", 200, scale))
        est = corr.soup_estimate_npoint(pts, cfg.eps_ladder[0], None, scfg, cfg.seed)
        rec.add_estimate("soup_pair_covariance", est)
    else:
        raise ConfigError(f"unknown estimate quantity {quantity!r}")


def cmd_simulate(cfg: ExperimentConfig, rec: RunRecord, args, out: Path) -> None:
    side = (cfg.window or {}).get("side", 4.0)
    t_max = (cfg.window or {}).get("t_max", side * side)
    t_min = (cfg.window or {}).get("t_min", (cfg.delta / 6) ** 2)
    region = Rect.centered(0j, side)
    kind = cfg.domain
    if kind == "upper-half-plane":
        region = Rect(-side / 2, side / 2, 0.0, side)
    domain = DomainSpec(kind, region, 0j, float(cfg.options.get("radius", side / 2 * math.sqrt(2))))
    win = MeasureWindow(t_min, t_max, region)
    soup = sample_soup(domain, win, cfg.lam, cfg.delta, cfg.seed)
    rec.add_scalar("n_loops", float(len(soup)), "mc", math.sqrt(max(len(soup), 1)), 1,
                   proposed=soup.n_proposed, expected_proposals=cfg.lam * win.mass)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["loop", "spin", "x", "y"])
    for i, (loop, spin) in enumerate(zip(soup.loops, soup.spins)):
        for z in loop.boundary:
            w.writerow([i, int(spin), repr(float(z.real)), repr(float(z.imag))])
    atomic_write(out / "boundaries.csv", buf.getvalue())
    rec.add_series("diameters", [{"x": i, "value": loop.diameter, "stderr": 0.0, "n": 1,
                                  "series": "diameter"} for i, loop in enumerate(soup.loops)],
                   "mc", "loop")


def cmd_perc(cfg: ExperimentConfig, rec: RunRecord, args, out: Path) -> None:
    R = int(cfg.options.get("R", 1024))
    rs = sorted((int(r) for r in cfg.options.get("rs", [64, 32, 16, 8])), reverse=True)
    single = CLOSED if cfg.options.get("single", "open") == "closed" else OPEN
    n = cfg.budget("trials", 500, args.budget_scale)
    ests = suites.arm_ladder(rs, R, n, cfg.seed, single, threads=args.threads)
    rec.add_series("three_arm_ladder", [{"x": e.flags["r"] / R, "value": e.value,
                                         "stderr": e.stderr, "n": e.n_samples,
                                         "series": f"R={R}"} for e in ests], "mc", "r/R")
    if len(ests) >= 3 and all(e.value > 0 for e in ests):
        slope, se = fit_loglog_slope([e.flags["r"] / R for e in ests], [e.value for e in ests],
                                     [e.stderr for e in ests])
        rec.add_scalar("arm_exponent", slope, "mc", se, n,
                       unweighted=fit_arm_exponent([e.flags["r"] / R for e in ests], ests))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "R", "estimate", "stderr", "n"])
    for e in ests:
        w.writerow([e.flags["r"], R, repr(e.value), repr(e.stderr), e.n_samples])
    atomic_write(out / "three_arm_ladder.csv", buf.getvalue())


def cmd_verify(cfg: ExperimentConfig, rec: RunRecord, args, out: Path) -> None:
    if args.suite == "quick":
        suites.run_quick(rec)
    else:
        suites.run_full(rec, cfg.seed, args.budget_scale, args.threads)


COMMANDS = {"exact": cmd_exact, "blocks": cmd_blocks, "estimate": cmd_estimate,
            "simulate": cmd_simulate, "perc": cmd_perc, "verify": cmd_verify}


# ------------------------------------------------------------------ entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="overrides the configured seed")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--threads", type=int, default=1, help="worker processes")
    common.add_argument("--budget-scale", type=float, default=1.0,
                        help="multiplies every Monte Carlo budget")
    p = argparse.ArgumentParser(prog="loopsoup", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"loopsoup {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "estimate", "exact", "blocks", "perc"):
        sub.add_parser(name, parents=[common])
    v = sub.add_parser("verify", parents=[common])
    v.add_argument("suite", choices=("quick", "full"), nargs="?", default="quick")
    v.add_argument("--record", help="re-judge a stored run record instead of running a suite")
    pd = sub.add_parser("plot-data", help="CSV for one quantity of a stored record")
    pd.add_argument("record")
    pd.add_argument("quantity")
    pd.add_argument("--csv", dest="csv_out", help="output file (default: stdout)")
    return p


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        if cfg.command != args.command:
            raise ConfigError(f"config is for {cfg.command!r}, not {args.command!r}")
    else:
        cfg = ExperimentConfig(args.command)
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("--seed must be non-negative")
        cfg.seed = args.seed
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    if not (args.budget_scale > 0 and math.isfinite(args.budget_scale)):
        raise UsageError("--budget-scale must be positive")
    return cfg


def _rejudge(path: str) -> int:
    rec = RunRecord.load(path)
    ok = True
    for name, stored, now in rec.rejudge():
        print(f"{'PASS' if now else 'FAIL'}  {name}" + ("" if stored == now else "  (verdict changed)"))
        ok &= now and stored == now
    return EXIT_OK if ok else EXIT_FAIL


def _plot_data(args) -> int:
    rec = RunRecord.load(args.record)
    from .records import plot_data_csv

    text = plot_data_csv(rec, args.quantity)
    if args.csv_out:
        atomic_write(args.csv_out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "plot-data":
            return _plot_data(args)
        if args.command == "verify" and args.record:
            return _rejudge(args.record)
        cfg = _load_config(args)
        out = _out_dir(args, cfg)
        out.mkdir(parents=True, exist_ok=True)
        rec = RunRecord(cfg.hash, args.command, __version__)
        COMMANDS[args.command](cfg, rec, args, out)
        atomic_write(out / "config.json", cfg.to_json())
        path = rec.write(out / f"{args.command}-{cfg.hash}.json")
        for name, res in rec.results.items():
            if res["kind"] == "series" or name == "spectrum":
                emit_plot_data(rec, name, out / f"plot-{name}.csv")
        for c in rec.comparisons:
            print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']!r} "
                  f"(target {c['target']!r}, {c['tol_kind']} tol {c['tol']!r})")
        print(f"record: {path}")
    except (ConfigError, UsageError) as exc:
        print(f"loopsoup: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LoopSoupError as exc:
        print(f"loopsoup: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"loopsoup: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "verify":
        return EXIT_OK if rec.passed else EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
