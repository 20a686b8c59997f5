"""Virasoro conformal blocks and the block decomposition of <O O E E>.

Blocks are built level by level: the Gram matrix of the Verma module comes
from reducing <h| L_{mu}^dagger L_{-nu} |h> with the Virasoro commutator,
and each level's coefficient is the contraction of the two vertex vectors
with its inverse. For the vacuum the null descendant L_{-1}|0> is quotiented
out by dropping partitions that contain a part equal to one.

The decomposition expands the reduced four-point function in u = x^{1/3},
|x|^{4/3} G = sum a_{mn} u^m ubar^n, and peels off C_{pp'} F^(p) F^(p')
site by site.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.linalg

from . import exactcft
from .errors import DegenerateModuleError, IllConditionedError, InvalidArgument
from .specfun import hyp2f1_coeffs

PIVOT_TOL = 1e-10
MAX_LEVEL = 8
E_DIM = 1.0 / 3.0


@lru_cache(maxsize=None)
def partitions(k: int) -> tuple[tuple[int, ...], ...]:
    """Partitions of k as non-increasing tuples, in a fixed order."""
    if k == 0:
        return ((),)
    out = []

    def rec(rem, cap, prefix):
        if rem == 0:
            out.append(tuple(prefix))
            return
        for part in range(min(rem, cap), 0, -1):
            rec(rem - part, part, prefix + [part])

    rec(k, k, [])
    return tuple(out)


def module_basis(dim_p: float, level: int) -> tuple[tuple[int, ...], ...]:
    """Descendant basis at a level; the vacuum drops everything built on L_{-1}."""
    if dim_p == 0.0:
        return tuple(mu for mu in partitions(level) if 1 not in mu)
    return partitions(level)


class VermaModule:
    """Highest-weight module of weight h at central charge c."""

    def __init__(self, c: float, h: float):
        self.c = float(c)
        self.h = float(h)
        self._cache: dict = {}

    def lower(self, n: int, mono: tuple[int, ...]) -> dict:
        """L_n (n > 0) applied to L_{-k1} ... L_{-km}|h>, as {monomial: coeff}."""
        key = (n, mono)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        out: dict = {}
        if mono:
            k1, rest = mono[0], mono[1:]
            for m, v in self.lower(n, rest).items():
                _add(out, (k1,) + m, v)
            if n > k1:
                for m, v in self.lower(n - k1, rest).items():
                    _add(out, m, (n + k1) * v)
            elif n == k1:
                coeff = 2 * n * (self.h + sum(rest)) + self.c / 12 * n * (n * n - 1)
                _add(out, rest, coeff)
            else:
                _add(out, (k1 - n,) + rest, n + k1)
        self._cache[key] = out
        return out

    def inner(self, mu: tuple[int, ...], nu: tuple[int, ...]) -> float:
        """<h| (L_{-mu})^dagger L_{-nu} |h>."""
        if sum(mu) != sum(nu):
            return 0.0
        state = {nu: 1.0}
        for k in mu:
            nxt: dict = {}
            for m, v in state.items():
                for m2, v2 in self.lower(k, m).items():
                    _add(nxt, m2, v * v2)
            state = nxt
        return float(state.get((), 0.0))


def _add(d: dict, k, v) -> None:
    d[k] = d.get(k, 0.0) + v


def gram_matrix(c: float, dim_p: float, level: int,
                basis: tuple[tuple[int, ...], ...] | None = None) -> np.ndarray:
    """Gram matrix of the level-``level`` descendants over partitions of the level."""
    if level > MAX_LEVEL:
        raise InvalidArgument(f"level {level} above the supported maximum {MAX_LEVEL}")
    if basis is None:
        basis = partitions(level)
    mod = VermaModule(c, dim_p)
    n = len(basis)
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            g[i, j] = g[j, i] = mod.inner(basis[i], basis[j])
    return g


def vertex(mu: tuple[int, ...], dim_p: float, h_near: float, h_far: float) -> float:
    """<h_far| phi_{h_near}(1) L_{-mu}|h_p> divided by the primary coefficient."""
    out = 1.0
    tail = sum(mu)
    for k in mu:
        tail -= k
        out *= dim_p + k * h_near - h_far + tail
    return out


@dataclass
class BlockSeries:
    c: float
    dims: tuple[float, float, float, float]
    dim_p: float
    coeffs: list[float]
    kmax: int

    def __call__(self, x: complex) -> complex:
        """Evaluate x^{dim_p - d3 - d4} sum_K F_K x^K on the principal branch."""
        x = complex(x)
        power = self.dim_p - self.dims[2] - self.dims[3]
        s = sum(f * x ** k for k, f in enumerate(self.coeffs))
        return x ** power * s


def block_coeffs(c: float, dims, dim_p: float, kmax: int) -> BlockSeries:
    """Coefficients F_0..F_kmax of the x-expansion of a Virasoro block.

    ``dims`` = (d1, d2, d3, d4) for fields at (inf, 1, x, 0).
    """
    d1, d2, d3, d4 = map(float, dims)
    coeffs = [1.0]
    for level in range(1, kmax + 1):
        basis = module_basis(dim_p, level)
        if not basis:
            coeffs.append(0.0)
            continue
        g = gram_matrix(c, dim_p, level, basis)
        with warnings.catch_warnings():
            # singular pivots are reported below as a degenerate module
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(g)
        diag = np.abs(np.diag(lu))
        if diag.min() <= PIVOT_TOL * max(1.0, diag.max()):
            raise DegenerateModuleError(level)
        left = np.array([vertex(mu, dim_p, d2, d1) for mu in basis])
        right = np.array([vertex(nu, dim_p, d3, d4) for nu in basis])
        coeffs.append(float(left @ scipy.linalg.lu_solve((lu, piv), right)))
    return BlockSeries(float(c), (d1, d2, d3, d4), float(dim_p), coeffs, kmax)


class _ExactModule:
    """Verma module in rational arithmetic, evaluating <h| word |h> by normal ordering.

    A word (a_1, ..., a_m) stands for L_{a_1} ... L_{a_m}. The rightmost
    positive mode is commuted one place to the right until it annihilates
    |h>; zero modes act as h.
    """

    def __init__(self, c: Fraction, h: Fraction):
        self.c, self.h = c, h
        self.expect = lru_cache(maxsize=None)(self._expect)

    def _expect(self, word: tuple[int, ...]) -> Fraction:
        if not word:
            return Fraction(1)
        if word[-1] > 0 or word[0] < 0:
            return Fraction(0)
        if word[-1] == 0:
            return self.h * self.expect(word[:-1])
        if word[0] == 0:
            return self.h * self.expect(word[1:])
        i = max(k for k, a in enumerate(word) if a > 0)
        a, b = word[i], word[i + 1]
        head, tail = word[:i], word[i + 2:]
        out = self.expect(head + (b, a) + tail)
        out += (a - b) * self.expect(head + (a + b,) + tail)
        if a + b == 0:
            out += self.c / 12 * a * (a * a - 1) * self.expect(head + tail)
        return out


def _exact_vertex(mu: tuple[int, ...], dim_p: Fraction, h_near: Fraction, h_far: Fraction) -> Fraction:
    # <h_far| phi(1) L_{-n} X> = -<h_far| [L_{-n}, phi(1)] X>, and z d/dz on
    # <h_far| phi(z) X> gives h_far - h_near - h_X
    if not mu:
        return Fraction(1)
    n, rest = mu[0], mu[1:]
    h_x = dim_p + sum(rest)
    return -(h_far - h_near - h_x + (1 - n) * h_near) * _exact_vertex(rest, dim_p, h_near, h_far)


def _solve_exact(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(b)
    m = [row[:] + [b[i]] for i, row in enumerate(a)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            raise DegenerateModuleError(col)
        m[col], m[piv] = m[piv], m[col]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col] / m[col][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [m[i][n] / m[i][i] for i in range(n)]


def block_coeffs_exact(c, dims, dim_p, kmax: int) -> list[float]:
    """Reference block coefficients in exact rationals (inputs converted exactly).

    Same quantity as :func:`block_coeffs`, through an independent path: Gram
    entries by normal ordering words of modes, vertices by commuting
    descendants through the field, and a rational linear solve.
    """
    if kmax > MAX_LEVEL:
        raise InvalidArgument(f"level {kmax} above the supported maximum {MAX_LEVEL}")
    c, dim_p = Fraction(c), Fraction(dim_p)
    d1, d2, d3, d4 = (Fraction(d) for d in dims)
    mod = _ExactModule(c, dim_p)
    out = [1.0]
    for level in range(1, kmax + 1):
        basis = [mu for mu in partitions(level) if not (dim_p == 0 and 1 in mu)]
        if not basis:
            out.append(0.0)
            continue
        gram = [[mod.expect(tuple(reversed(mu)) + tuple(-k for k in nu)) for nu in basis]
                for mu in basis]
        left = [_exact_vertex(mu, dim_p, d2, d1) for mu in basis]
        right = [_exact_vertex(nu, dim_p, d3, d4) for nu in basis]
        y = _solve_exact(gram, right)
        out.append(float(sum(l * v for l, v in zip(left, y))))
    return out


# ---------------------------------------------------------------- decomposition

def _binom_series(power: float, n: int) -> np.ndarray:
    """Coefficients of (1 - x)^{-power}."""
    return np.array(hyp2f1_coeffs(power, 1.0, 1.0, n))


def fourpoint_series(params: exactcft.CftParams, order: int) -> np.ndarray:
    """Array a[m, n], m, n <= order, with |x|^{4/3} G(x) = sum a_mn u^m ubar^n."""
    nx = order // 3 + 1
    b = _binom_series(1 / 3, nx)
    h1 = np.convolve(b, hyp2f1_coeffs(*exactcft.F1_ARGS, nx))[:nx]
    h2 = np.convolve(b, hyp2f1_coeffs(*exactcft.F2_ARGS, nx))[:nx]
    omc, opc = params.one_minus_cos, params.one_plus_cos
    a = np.zeros((order + 1, order + 1))
    a[0, 0] += opc / 2

    def place(offset, vec, weight):
        idx = offset + 3 * np.arange(nx)
        keep = idx <= order
        idx, v = idx[keep], vec[keep]
        a[np.ix_(idx, idx)] += weight * np.outer(v, v)

    place(0, h1, omc / 2)
    place(1, h2, -omc / 2 * exactcft.TWIST_K)
    place(2, b, params.lam * exactcft.G_CONST * omc ** 2)
    return a


def evaluate_series(a: np.ndarray, x: complex) -> float:
    """Sum of |x|^{-4/3} a_mn u^m ubar^n at a point, for checking the expansion."""
    u = complex(x) ** (1 / 3)
    um = u ** np.arange(a.shape[0])
    val = um @ a @ np.conj(um)
    return float((val / abs(x) ** (4 / 3)).real)


@dataclass
class SpectrumEntry:
    p: int
    pp: int
    coeff_product: float
    residual: float = 0.0
    dim: float = field(init=False)
    dim_bar: float = field(init=False)

    def __post_init__(self):
        self.dim = self.p / 3
        self.dim_bar = self.pp / 3


def _site_blocks(params, kmax, max_p):
    c = 2 * params.lam
    d = exactcft.delta(params)
    dims = (d, d, E_DIM, E_DIM)
    blocks = {}
    for p in range(max_p + 1):
        need = min(kmax, (max_p - p) // 3)
        try:
            blocks[p] = block_coeffs(c, dims, p / 3, need).coeffs
        except DegenerateModuleError as exc:
            raise IllConditionedError((p, p), f"block for dim {p}/3 degenerate at level {exc.level}") from exc
    return blocks


def decompose_fourpoint(params: exactcft.CftParams, kmax: int = 6,
                        max_p: int = 3) -> list[SpectrumEntry]:
    """Extract C_EE^(p,p') C_OO^(p,p') for all p, p' <= max_p."""
    if params.one_minus_cos == 0.0:
        raise InvalidArgument("beta = 0 leaves only the edge tower; nothing to decompose")
    a = fourpoint_series(params, max_p)
    blocks = _site_blocks(params, kmax, max_p)
    prod = np.zeros((max_p + 1, max_p + 1))
    sites = sorted(((m, n) for m in range(max_p + 1) for n in range(max_p + 1)),
                   key=lambda s: (s[0] + s[1], s[0]))
    for m, n in sites:
        acc = a[m, n]
        for p in range(m % 3, m + 1, 3):
            fp = blocks[p]
            lp = (m - p) // 3
            if lp >= len(fp):
                continue
            for q in range(n % 3, n + 1, 3):
                if (p, q) == (m, n):
                    continue
                fq = blocks[q]
                lq = (n - q) // 3
                if lq >= len(fq):
                    continue
                acc -= prod[p, q] * fp[lp] * fq[lq]
        prod[m, n] = acc
    # reconstruction residual of the truncated expansion
    recon = np.zeros_like(a)
    for p in range(max_p + 1):
        for q in range(max_p + 1):
            fp, fq = blocks[p], blocks[q]
            for i, fi in enumerate(fp):
                for j, fj in enumerate(fq):
                    m, n = p + 3 * i, q + 3 * j
                    if m <= max_p and n <= max_p:
                        recon[m, n] += prod[p, q] * fi * fj
    resid = np.abs(recon - a)
    return [SpectrumEntry(m, n, float(prod[m, n]), float(resid[m, n]))
            for m in range(max_p + 1) for n in range(max_p + 1)]


def spectrum_table(entries: list[SpectrumEntry]) -> dict[tuple[int, int], float]:
    return {(e.p, e.pp): e.coeff_product for e in entries}


def allowed_site(p: int, pp: int) -> bool:
    """Sites reachable by the expansion at all: holomorphic and antiholomorphic
    powers of u must agree mod 3."""
    return (p - pp) % 3 == 0


def write_spectrum_csv(entries: list[SpectrumEntry], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "p_bar", "dim", "dim_bar", "product", "residual"])
        for e in entries:
            w.writerow([e.p, e.pp, f"{e.dim:.12g}", f"{e.dim_bar:.12g}",
                        f"{e.coeff_product:.17g}", f"{e.residual:.3g}"])
    return path


def stress_tensor_coefficient(params: exactcft.CftParams) -> float:
    """Coefficient of x^2 xbar^0 relative to the identity term.

    This is the level-2 vacuum descendant (the stress tensor) exchanged
    between the O O and E E pairs, after removing the level-1 descendant of
    the (1, 0) site (zero whenever that product vanishes).
    """
    if params.one_minus_cos == 0.0:
        raise InvalidArgument("beta = 0 carries no stress-tensor signal")
    a = fourpoint_series(params, 6)
    entries = decompose_fourpoint(params, kmax=2, max_p=3)
    prod = spectrum_table(entries)
    d = exactcft.delta(params)
    f3 = block_coeffs(2 * params.lam, (d, d, E_DIM, E_DIM), 1.0, 1).coeffs
    raw = a[6, 0] - prod[(3, 0)] * f3[1]
    return float(raw / prod[(0, 0)])


def central_charge_check(lam: float, beta: float) -> float:
    """Recover c from the stress-tensor exchange in <O_b O_-b E E>.

    The vacuum block's level-2 coefficient is 2 d1 d3 / c; it is computed by
    the Gram machinery at c = 1 and rescaled, so c = F_2(c=1) / coefficient.
    """
    params = exactcft.CftParams(lam, beta)
    coef = stress_tensor_coefficient(params)
    d = exactcft.delta(params)
    f2_unit = block_coeffs(1.0, (d, d, E_DIM, E_DIM), 0.0, 2).coeffs[2]
    return f2_unit / coef
