"""Experiment configurations, run records and plot-data files.

A configuration is one JSON document carrying ``schema_version``. Its
canonical form (sorted keys, compact separators) is what gets hashed, so the
hash does not depend on formatting or key order. A run record stores every
result with its provenance and every comparison with the tolerance it was
judged against, so verdicts can be re-derived from the file alone.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .combinatorics import config_hash
from .errors import InvalidArgument

SCHEMA_VERSION = 1
COMMANDS = ("simulate", "estimate", "exact", "blocks", "perc", "verify")
DOMAINS = ("full-plane", "upper-half-plane", "disk")
PROVENANCE = ("mc", "exact", "blocks")
OUT_ENV = "LOOPSOUP_OUT"


class ConfigError(InvalidArgument):
    """Configuration parse or validation failure, with the offending line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _positive(name: str, v, text: str, integer: bool = False):
    ok = isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v > 0
    if integer:
        ok = ok and float(v).is_integer()
    if not ok:
        kind = "a positive integer" if integer else "a positive number"
        raise ConfigError(f"{name} must be {kind}, got {v!r}", _line_of(text, name.split(".")[-1]))
    return int(v) if integer else float(v)


@dataclass
class ExperimentConfig:
    command: str
    domain: str = "full-plane"
    lam: float = 1.0
    beta: float = math.pi
    delta: float = 0.5
    eps_ladder: list = field(default_factory=lambda: [0.08, 0.04, 0.02])
    points: list = field(default_factory=list)
    window: dict | None = None
    budgets: dict = field(default_factory=dict)
    seed: int = 0
    out: str | None = None
    options: dict = field(default_factory=dict)

    def canonical(self) -> dict:
        """The hashed content: everything except the output location."""
        return {
            "schema_version": SCHEMA_VERSION, "command": self.command, "domain": self.domain,
            "lam": float(self.lam), "beta": float(self.beta), "delta": float(self.delta),
            "eps_ladder": [float(e) for e in self.eps_ladder],
            "points": [[float(x), float(y)] for x, y in self.points],
            "window": None if self.window is None else {k: float(v) for k, v in self.window.items()},
            "budgets": {k: int(v) for k, v in self.budgets.items()},
            "seed": int(self.seed), "options": self.options,
        }

    def to_json(self) -> str:
        doc = self.canonical()
        if self.out is not None:
            doc["out"] = self.out
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"

    @property
    def hash(self) -> str:
        return config_hash(self.canonical())

    @property
    def complex_points(self) -> list[complex]:
        return [complex(x, y) for x, y in self.points]

    def budget(self, name: str, default: int, scale: float = 1.0) -> int:
        return max(1, int(round(self.budgets.get(name, default) * scale)))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a JSON object", 1)
        return cls.from_dict(doc, text)

    @classmethod
    def from_dict(cls, doc: dict, text: str = "") -> "ExperimentConfig":
        known = {"schema_version", "command", "domain", "lam", "beta", "delta", "eps_ladder",
                 "points", "window", "budgets", "seed", "out", "options"}
        for k in doc:
            if k not in known:
                raise ConfigError(f"unknown field {k!r}", _line_of(text, k))
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be {SCHEMA_VERSION}",
                              _line_of(text, "schema_version") or 1)
        cmd = doc.get("command")
        if cmd not in COMMANDS:
            raise ConfigError(f"command must be one of {', '.join(COMMANDS)}",
                              _line_of(text, "command") or 1)
        dom = doc.get("domain", "full-plane")
        if dom not in DOMAINS:
            raise ConfigError(f"domain must be one of {', '.join(DOMAINS)}", _line_of(text, "domain"))
        lam = _positive("lam", doc.get("lam", 1.0), text)
        delta = _positive("delta", doc.get("delta", 0.5), text)
        beta = doc.get("beta", math.pi)
        if not isinstance(beta, (int, float)) or isinstance(beta, bool) or not math.isfinite(beta):
            raise ConfigError("beta must be a finite number", _line_of(text, "beta"))
        ladder = doc.get("eps_ladder", [0.08, 0.04, 0.02])
        if not isinstance(ladder, list) or not ladder:
            raise ConfigError("eps_ladder must be a non-empty list", _line_of(text, "eps_ladder"))
        ladder = [_positive("eps_ladder", e, text) for e in ladder]
        if any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError("eps_ladder must be strictly decreasing", _line_of(text, "eps_ladder"))
        pts = doc.get("points", [])
        if not isinstance(pts, list) or any(
                not isinstance(p, list) or len(p) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p)
                for p in pts):
            raise ConfigError("points must be a list of [x, y] pairs", _line_of(text, "points"))
        win = doc.get("window")
        if win is not None:
            if not isinstance(win, dict) or set(win) - {"t_min", "t_max", "side"}:
                raise ConfigError("window takes t_min, t_max and side", _line_of(text, "window"))
            win = {k: _positive(f"window.{k}", v, text) for k, v in win.items()}
            if "t_min" in win and "t_max" in win and win["t_max"] <= win["t_min"]:
                raise ConfigError("window.t_max must exceed window.t_min", _line_of(text, "t_max"))
        budgets = doc.get("budgets", {})
        if not isinstance(budgets, dict):
            raise ConfigError("budgets must be an object", _line_of(text, "budgets"))
        budgets = {k: _positive(f"budgets.{k}", v, text, integer=True) for k, v in budgets.items()}
        seed = doc.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("seed must be a non-negative integer", _line_of(text, "seed"))
        out = doc.get("out")
        if out is not None and not isinstance(out, str):
            raise ConfigError("out must be a path string", _line_of(text, "out"))
        opts = doc.get("options", {})
        if not isinstance(opts, dict):
            raise ConfigError("options must be an object", _line_of(text, "options"))
        return cls(cmd, dom, lam, float(beta), delta, ladder, [list(map(float, p)) for p in pts],
                   win, budgets, seed, out, opts)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
        return cls.from_json(text)


def atomic_write(path, text: str) -> Path:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def judge(cmp: dict) -> bool:
    """Re-derive a comparison verdict from its stored numbers."""
    v, target, tol = cmp["value"], cmp["target"], cmp["tol"]
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return False
    kind = cmp["tol_kind"]
    if kind == "abs":
        return abs(v - target) <= tol
    if kind == "rel":
        return abs(v - target) <= tol * abs(target)
    if kind == "sigma":
        se = cmp.get("stderr") or 0.0
        return abs(v - target) <= tol * se
    if kind == "max":
        return v <= target + tol
    raise InvalidArgument(f"unknown tolerance kind {kind!r}")


@dataclass
class RunRecord:
    config_hash: str
    command: str
    version: str
    started: str = field(default_factory=_now)
    finished: str | None = None
    results: dict = field(default_factory=dict)
    comparisons: list = field(default_factory=list)

    def add_scalar(self, name: str, value: float, provenance: str, stderr: float | None = None,
                   n: int | None = None, **extra) -> None:
        if provenance not in PROVENANCE:
            raise InvalidArgument(f"provenance must be one of {PROVENANCE}")
        if provenance == "mc" and (stderr is None or n is None):
            raise InvalidArgument("Monte Carlo values need a stderr and a sample count")
        self.results[name] = {"kind": "scalar", "value": value, "stderr": stderr, "n": n,
                              "provenance": provenance, **extra}

    def add_estimate(self, name: str, est, **extra) -> None:
        self.add_scalar(name, float(est.value), "mc", float(est.stderr), int(est.n_samples), **extra)

    def add_series(self, name: str, points: list[dict], provenance: str, x_label: str = "x") -> None:
        for p in points:
            if provenance == "mc" and (p.get("stderr") is None or p.get("n") is None):
                raise InvalidArgument("Monte Carlo series points need stderr and n")
        self.results[name] = {"kind": "series", "x_label": x_label, "provenance": provenance,
                              "points": points}

    def add_table(self, name: str, columns: list[str], rows: list[list], provenance: str) -> None:
        self.results[name] = {"kind": "table", "columns": columns, "rows": rows,
                              "provenance": provenance}

    def compare(self, name: str, value: float, target: float, tol: float, tol_kind: str,
                stderr: float | None = None, note: str = "") -> bool:
        cmp = {"name": name, "value": value, "stderr": stderr, "target": target, "tol": tol,
               "tol_kind": tol_kind, "note": note}
        cmp["passed"] = judge(cmp)
        self.comparisons.append(cmp)
        return cmp["passed"]

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.comparisons)

    def rejudge(self) -> list[tuple[str, bool, bool]]:
        """(name, stored verdict, recomputed verdict) for every comparison."""
        return [(c["name"], c["passed"], judge(c)) for c in self.comparisons]

    def to_dict(self) -> dict:
        return {"config_hash": self.config_hash, "command": self.command, "version": self.version,
                "started": self.started, "finished": self.finished, "results": self.results,
                "comparisons": self.comparisons}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, default=_jsonable) + "\n"

    def write(self, path) -> Path:
        if self.finished is None:
            self.finished = _now()
        return atomic_write(path, self.to_json())

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        d = json.loads(text)
        return cls(d["config_hash"], d["command"], d["version"], d["started"], d["finished"],
                   d["results"], d["comparisons"])

    @classmethod
    def load(cls, path) -> "RunRecord":
        return cls.from_json(Path(path).read_text())


def _jsonable(v):
    if hasattr(v, "item"):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    raise TypeError(f"cannot serialise {type(v).__name__}")


PLOT_HEADER = ["x", "value", "stderr", "series", "log_x", "log_value"]


def _log(v) -> str:
    return repr(math.log(v)) if isinstance(v, (int, float)) and v > 0 else ""


def plot_data_csv(record: RunRecord, quantity: str) -> str:
    """Long-format CSV text for one stored quantity.

    Series and scalars give x, value, stderr, series label and log columns;
    tables are written with their own columns.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if not record.results:
        w.writerow(PLOT_HEADER)
        return buf.getvalue()
    res = record.results.get(quantity)
    if res is None:
        raise InvalidArgument(f"unknown quantity {quantity!r}; have {sorted(record.results)}")
    if res["kind"] == "table":
        w.writerow(res["columns"])
        w.writerows(res["rows"])
        return buf.getvalue()
    w.writerow(PLOT_HEADER)
    pts = res["points"] if res["kind"] == "series" else [
        {"x": "", "value": res["value"], "stderr": res["stderr"], "series": quantity}]
    for p in pts:
        se = p.get("stderr")
        w.writerow([p["x"], repr(float(p["value"])), "" if se is None else repr(float(se)),
                    p.get("series", quantity), _log(p["x"]), _log(p["value"])])
    return buf.getvalue()


def emit_plot_data(record: RunRecord, quantity: str, path) -> Path:
    return atomic_write(path, plot_data_csv(record, quantity))


__all__ = [
    "SCHEMA_VERSION", "COMMANDS", "OUT_ENV", "ConfigError", "ExperimentConfig", "RunRecord",
    "atomic_write", "judge", "plot_data_csv", "emit_plot_data",
]
