"""Set partitions, multiset assignments, alpha tables and the exact toy oracle.

Point indices are 1-based throughout, matching the way correlators are
written: a block {1, 2} means the loop touches the first two insertions.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from .errors import IncompleteTableError, InvalidArgument, SizeLimitError
from .stats import CorrelationEstimate

MAX_PARTITION_N = 16
MAX_MULTIPLICITY_SUM = 32
MAX_TOY_ATOMS = 8
TABLE_SCHEMA = "loopsoup.alpha_table"
TABLE_VERSION = 1

Block = tuple[int, ...]


@dataclass(frozen=True)
class PartitionSet:
    n: int
    partitions: tuple[tuple[Block, ...], ...]

    def __len__(self) -> int:
        return len(self.partitions)

    def __iter__(self):
        return iter(self.partitions)


def partitions_min2(n: int) -> PartitionSet:
    """All set partitions of {1..n} whose blocks have at least two elements."""
    if n < 2:
        raise InvalidArgument("n must be at least 2")
    if n > MAX_PARTITION_N:
        raise SizeLimitError(f"n={n} exceeds the enumeration guard {MAX_PARTITION_N}")
    out: list[tuple[Block, ...]] = []

    def rec(rest: tuple[int, ...], acc: list[Block]):
        if not rest:
            out.append(tuple(acc))
            return
        head, tail = rest[0], rest[1:]
        for size in range(1, len(tail) + 1):
            for mates in itertools.combinations(tail, size):
                remaining = tuple(t for t in tail if t not in mates)
                if len(remaining) == 1:
                    continue
                rec(remaining, acc + [(head,) + mates])

    rec(tuple(range(1, n + 1)), [])
    return PartitionSet(n, tuple(out))


@dataclass(frozen=True)
class MultisetAssignment:
    elements: tuple[tuple[Block, int], ...]  # (subset, multiplicity)

    def multiplicity_vector(self, n: int) -> tuple[int, ...]:
        k = [0] * n
        for s, m in self.elements:
            for j in s:
                k[j - 1] += m
        return tuple(k)


def _subsets_min2(indices: Iterable[int]) -> list[Block]:
    idx = tuple(indices)
    return [s for r in range(2, len(idx) + 1) for s in itertools.combinations(idx, r)]


def multisets_with_multiplicity(n: int, k) -> list[MultisetAssignment]:
    """Multisets of subsets (size >= 2) covering point j exactly k_j times."""
    k = tuple(int(v) for v in k)
    if n < 2 or len(k) != n:
        raise InvalidArgument("need n >= 2 and one multiplicity per point")
    if any(v < 0 for v in k):
        raise InvalidArgument("multiplicities must be non-negative")
    if sum(k) > MAX_MULTIPLICITY_SUM:
        raise SizeLimitError(f"sum(k)={sum(k)} exceeds the guard {MAX_MULTIPLICITY_SUM}")
    active = [j for j in range(1, n + 1) if k[j - 1] > 0]
    subsets = _subsets_min2(active)
    # last position at which each point can still be covered
    last_use = {j: max((i for i, s in enumerate(subsets) if j in s), default=-1) for j in active}
    out: list[MultisetAssignment] = []

    def rec(i: int, remaining: list[int], acc: list[tuple[Block, int]]):
        if all(r == 0 for r in remaining):
            out.append(MultisetAssignment(tuple(acc)))
            return
        if i == len(subsets):
            return
        for j in active:
            if remaining[j - 1] > 0 and last_use[j] < i:
                return
        s = subsets[i]
        cap = min(remaining[j - 1] for j in s)
        for m in range(cap, -1, -1):
            if m:
                for j in s:
                    remaining[j - 1] -= m
                rec(i + 1, remaining, acc + [(s, m)])
                for j in s:
                    remaining[j - 1] += m
            else:
                rec(i + 1, remaining, acc)

    if active:
        rec(0, list(k), [])
    return out


# ------------------------------------------------------------------ alpha table

Key = tuple[Block, tuple[int, int] | None]


def _key(subset, separation=None) -> Key:
    s = tuple(sorted(int(v) for v in subset))
    sep = None if separation is None else tuple(sorted(int(v) for v in separation))
    return (s, sep)


@dataclass
class AlphaTable:
    """eps-normalised loop-measure weights indexed by (subset, separation pair).

    ``entries`` hold the raw normalised weights alpha; ``chat`` converts them to
    canonically normalised ones, alpha_hat = chat^|S| alpha.
    """
    entries: dict = field(default_factory=dict)
    eps_ladder: tuple[float, ...] = ()
    normalization: str = "eps^(2/3)"
    chat: float = 1.0
    points: tuple[complex, ...] = ()
    config_hash: str = ""
    eps: float | None = None

    def __post_init__(self):
        ladder = tuple(float(e) for e in self.eps_ladder)
        if any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise InvalidArgument("eps ladder must be strictly decreasing")
        self.eps_ladder = ladder

    def set(self, subset, est: CorrelationEstimate | float, separation=None) -> None:
        key = _key(subset, separation)
        if len(key[0]) < 1:
            raise InvalidArgument("subset must be non-empty")
        if not isinstance(est, CorrelationEstimate):
            est = CorrelationEstimate(float(est), 0.0, 0)
        self.entries[key] = est

    def get(self, subset, separation=None) -> CorrelationEstimate:
        key = _key(subset, separation)
        try:
            return self.entries[key]
        except KeyError:
            raise IncompleteTableError(f"no entry for subset {key[0]} separation {key[1]}") from None

    def hat(self, subset, separation=None) -> float:
        est = self.get(subset, separation)
        return self.chat ** len(_key(subset)[0]) * est.value

    def hat_estimate(self, subset, separation=None) -> CorrelationEstimate:
        return self.get(subset, separation).scaled(self.chat ** len(_key(subset)[0]))

    def merge(self, other: "AlphaTable") -> "AlphaTable":
        out = AlphaTable(dict(self.entries), self.eps_ladder, self.normalization,
                         self.chat, self.points, self.config_hash, self.eps)
        for k, v in other.entries.items():
            out.entries[k] = out.entries[k].merge(v) if k in out.entries else v
        return out

    def to_json(self) -> str:
        doc = {
            "schema": TABLE_SCHEMA, "version": TABLE_VERSION,
            "normalization": self.normalization, "chat": self.chat,
            "eps": self.eps, "eps_ladder": list(self.eps_ladder),
            "points": [[complex(p).real, complex(p).imag] for p in self.points],
            "config_hash": self.config_hash,
            "entries": [
                {"subset": list(s), "separation": None if sep is None else list(sep),
                 **est.to_dict()}
                for (s, sep), est in sorted(self.entries.items(), key=lambda kv: (len(kv[0][0]), kv[0][0], kv[0][1] or ()))
            ],
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AlphaTable":
        doc = json.loads(text)
        if doc.get("schema") != TABLE_SCHEMA:
            raise InvalidArgument("not an alpha-table document")
        if doc.get("version") != TABLE_VERSION:
            raise InvalidArgument(f"unsupported alpha-table version {doc.get('version')}")
        tab = cls(eps_ladder=tuple(doc["eps_ladder"]), normalization=doc["normalization"],
                  chat=float(doc["chat"]), points=tuple(complex(x, y) for x, y in doc["points"]),
                  config_hash=doc["config_hash"], eps=doc.get("eps"))
        for e in doc["entries"]:
            tab.set(e["subset"], CorrelationEstimate.from_dict(e), e["separation"])
        return tab

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path

    @classmethod
    def load(cls, path) -> "AlphaTable":
        return cls.from_json(Path(path).read_text())


def npoint_edge_formula(alpha_table: AlphaTable, lam: float, n: int) -> float:
    """<E(z_1)...E(z_n)> assembled from the alpha-hat weights.

    Each partition with r blocks contributes lam^(r - n/2) times the product
    of its blocks' weights.
    """
    total = 0.0
    for part in partitions_min2(n):
        term = lam ** (len(part) - n / 2)
        for block in part:
            term *= alpha_table.hat(block)
        total += term
    return total


def npoint_higher_order_formula(alpha_table: AlphaTable, lam: float, k) -> float:
    """<E^(k_1)(z_1)...E^(k_n)(z_n)> for canonically normalised E^(k).

    prod_j sqrt(k_j!) lam^(-k_j/2) * sum_M prod_S (lam alpha_hat^S)^m / m!
    """
    k = tuple(int(v) for v in k)
    assignments = multisets_with_multiplicity(len(k), k)
    if not assignments:
        return 0.0
    total = 0.0
    for M in assignments:
        term = 1.0
        for s, m in M.elements:
            term *= (lam * alpha_table.hat(s)) ** m / math.factorial(m)
        total += term
    pref = 1.0
    for kj in k:
        pref *= math.sqrt(math.factorial(kj)) * lam ** (-kj / 2)
    return pref * total


# ------------------------------------------------------------------ toy oracle

@dataclass(frozen=True)
class ToyAtom:
    loop_id: int
    mass: Fraction | float
    hits: frozenset
    separates: bool = False


def alpha_table_from_atoms(atoms: list[ToyAtom], n: int) -> AlphaTable:
    """Exact weights for a discrete measure: mass of atoms hitting every point of S."""
    tab = AlphaTable()
    for r in range(2, n + 1):
        for s in itertools.combinations(range(1, n + 1), r):
            tab.set(s, float(sum(a.mass for a in atoms if set(s) <= a.hits)))
    return tab


def _poly_add(p: dict, mono, v) -> None:
    nv = p.get(mono, 0) + v
    if nv == 0:
        p.pop(mono, None)
    else:
        p[mono] = nv


def toy_poisson_oracle(atoms: list[ToyAtom], lam, k, centered: bool = True,
                       twist_cos=None):
    """Exact expectation under a finite-atom Poisson loop process.

    With counts N_j = sum of the Poisson numbers of atoms touching point j,
    the joint generating function is h(x) = exp(lam sum_i m_i (X_i - 1)),
    X_i = prod_{j in hits_i} x_j. The expectation of prod_j E^(k_j)(z_j) is
    prod_j (d/dx_j - lam mu_j)^{k_j} h at x = 1, where mu_j is the mass
    touching j. ``centered=False`` gives plain factorial moments. With
    ``twist_cos`` the atoms flagged as separating carry weight cos(beta) in
    h while the centring keeps the untwisted masses.

    Exact rational arithmetic is used when masses and lam are Fractions.
    """
    if len(atoms) > MAX_TOY_ATOMS:
        raise InvalidArgument(f"toy oracle limited to {MAX_TOY_ATOMS} atoms")
    k = tuple(int(v) for v in k)
    n = len(k)
    one = Fraction(1) if isinstance(lam, Fraction) else 1.0
    weights = []
    for a in atoms:
        w = a.mass
        if twist_cos is not None and a.separates:
            w = w * twist_cos
        weights.append(lam * w)
    mu = [sum((a.mass for a in atoms if j in a.hits), 0 * one) for j in range(1, n + 1)]
    atom_mono = [tuple(1 if (j + 1) in a.hits else 0 for j in range(n)) for a in atoms]
    poly = {tuple([0] * n): one}
    for j in range(n):
        for _ in range(k[j]):
            nxt: dict = {}
            for mono, coef in poly.items():
                e = mono[j]
                if e:
                    m2 = list(mono)
                    m2[j] -= 1
                    _poly_add(nxt, tuple(m2), coef * e)
                for w, am in zip(weights, atom_mono):
                    if am[j]:
                        m2 = tuple(mono[t] + am[t] - (1 if t == j else 0) for t in range(n))
                        _poly_add(nxt, m2, coef * w)
                if centered:
                    _poly_add(nxt, mono, -coef * lam * mu[j])
            poly = nxt
    # every derivative is (polynomial) * h, so dividing by h(1) leaves the
    # polynomial at x = 1; for twisted weights that division is the <V V> norm
    return sum(poly.values(), 0 * one)


def config_hash(doc: dict) -> str:
    """Stable short hash of a JSON-serialisable configuration."""
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]
