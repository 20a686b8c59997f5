"""Closed-form correlators and structure constants of the loop-soup CFT.

Everything here is a pure function of the intensity ``lam`` (central charge
c = 2 lam), the charge ``beta`` and the insertion points. Gamma and 2F1 come
from the in-house engine in :mod:`loopsoup.specfun`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BranchCutError, ConsistencyError, InvalidArgument
from .specfun import gamma_fn, hyp2f1

__all__ = [
    "CftParams", "PointConfig4", "gamma_fn", "hyp2f1", "delta", "c_E_OO",
    "alpha_hat_3pt", "z_twist", "four_point_OOEE", "g_2134", "ope_constants",
    "ALPHA3_PREFACTOR", "TWIST_K", "four_point_audit",
]

IMAG_TOL = 1e-10

# prefactor shared by the separated one-point weight and c~/c^
ALPHA3_PREFACTOR = (2 ** (7 / 6) * math.pi
                    / (3 ** 0.25 * math.sqrt(5) * gamma_fn(1 / 6) * gamma_fn(4 / 3)))

# relative weight of the second hypergeometric modulus in Z_twist
TWIST_K = 4 * gamma_fn(2 / 3) ** 6 / (gamma_fn(4 / 3) ** 2 * gamma_fn(1 / 3) ** 4)

# lam * (1 - cos b)^2 / |1-x|^{2/3} coefficient of the reduced four-point function
G_CONST = 4 * 2 ** (1 / 3) * math.pi ** 2 / (5 * math.sqrt(3) * gamma_fn(1 / 6) ** 2
                                               * gamma_fn(4 / 3) ** 2)

C_EEE_UNIT = (4 * 2 ** (1 / 6) * 3 ** 0.25 * math.sqrt(5) * math.pi ** 1.5 * gamma_fn(2 / 3)
              / (gamma_fn(1 / 6) ** 3 * gamma_fn(7 / 6)))

F1_ARGS = (-2 / 3, 1 / 3, 2 / 3)
F2_ARGS = (-1 / 3, 2 / 3, 4 / 3)


@dataclass(frozen=True)
class CftParams:
    lam: float = 1.0
    beta: float = math.pi

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidArgument("lam must be positive")

    @property
    def one_minus_cos(self) -> float:
        return 1.0 - math.cos(self.beta)

    @property
    def one_plus_cos(self) -> float:
        return 1.0 + math.cos(self.beta)


@dataclass(frozen=True)
class PointConfig4:
    z1: complex
    z2: complex
    z3: complex
    z4: complex

    def __post_init__(self):
        pts = self.points
        for i in range(4):
            for j in range(i + 1, 4):
                if pts[i] == pts[j]:
                    raise InvalidArgument(f"points z{i + 1} and z{j + 1} coincide")

    @property
    def points(self) -> tuple[complex, ...]:
        return (complex(self.z1), complex(self.z2), complex(self.z3), complex(self.z4))

    def zd(self, i: int, j: int) -> complex:
        p = self.points
        return p[i - 1] - p[j - 1]

    @property
    def cross_ratio(self) -> complex:
        return self.zd(1, 2) * self.zd(3, 4) / (self.zd(1, 3) * self.zd(2, 4))

    @property
    def on_branch_cut(self) -> bool:
        x = self.cross_ratio
        return abs(x.imag) <= 1e-15 * max(1.0, abs(x)) and x.real >= 1.0


def _real(v: complex, what: str) -> float:
    if abs(v.imag) > IMAG_TOL * max(1.0, abs(v.real)):
        raise ConsistencyError(f"{what} has imaginary residue {v.imag:.3e}")
    return float(v.real)


def delta(params: CftParams) -> float:
    """Scaling dimension (lam/10)(1 - cos beta) of the layering operator."""
    return params.lam / 10.0 * params.one_minus_cos


def c_E_OO(params: CftParams) -> float:
    """Coefficient of the edge operator in the O_beta x O_-beta fusion."""
    return -math.sqrt(params.lam) * params.one_minus_cos * ALPHA3_PREFACTOR


def alpha_hat_3pt(z1: complex, z2: complex, z3: complex) -> float:
    """Normalised weight of loops that touch z3 and separate z1 from z2."""
    z1, z2, z3 = complex(z1), complex(z2), complex(z3)
    if z1 == z2 or z1 == z3 or z2 == z3:
        raise InvalidArgument("coincident points")
    return ALPHA3_PREFACTOR * abs((z1 - z2) / ((z1 - z3) * (z2 - z3))) ** (2 / 3)


def _twist_bracket(x: complex) -> tuple[float, complex, complex]:
    """|F1|^2 - K |x|^{2/3} |F2|^2 together with the two 2F1 values."""
    if abs(x.imag) <= 1e-15 * max(1.0, abs(x)) and x.real >= 1.0 and x.real != 1.0:
        raise BranchCutError(f"cross-ratio {x} on the cut")
    f1 = hyp2f1(*F1_ARGS, x)
    f2 = hyp2f1(*F2_ARGS, x)
    bracket = abs(f1) ** 2 - TWIST_K * abs(x) ** (2 / 3) * abs(f2) ** 2
    return bracket, f1, f2


def z_twist(cfg: PointConfig4) -> float:
    x = cfg.cross_ratio
    pref = abs(cfg.zd(1, 3) * cfg.zd(2, 4)
               / (cfg.zd(3, 4) ** 2 * cfg.zd(2, 3) * cfg.zd(1, 4))) ** (2 / 3)
    bracket, _, _ = _twist_bracket(x)
    return pref * bracket


def four_point_audit(cfg: PointConfig4, params: CftParams) -> dict:
    """Term-by-term evaluation of <O_b O_-b E E>, with every intermediate."""
    x = cfg.cross_ratio
    d = delta(params)
    z12, z34 = abs(cfg.zd(1, 2)), abs(cfg.zd(3, 4))
    pref_twist = abs(cfg.zd(1, 3) * cfg.zd(2, 4)
                     / (cfg.zd(3, 4) ** 2 * cfg.zd(2, 3) * cfg.zd(1, 4))) ** (2 / 3)
    bracket, f1, f2 = _twist_bracket(x)
    zt = pref_twist * bracket
    a3 = alpha_hat_3pt(cfg.z1, cfg.z2, cfg.z3)
    a4 = alpha_hat_3pt(cfg.z1, cfg.z2, cfg.z4)
    leg = z12 ** (-4 * d)
    t_neutral = params.one_plus_cos / 2 * z34 ** (-4 / 3)
    t_twist = params.one_minus_cos / 2 * zt
    t_pair = params.lam * params.one_minus_cos ** 2 * a3 * a4
    value = leg * (t_neutral + t_twist + t_pair)
    return {
        "lam": params.lam, "beta": params.beta, "delta": d,
        "cross_ratio": [x.real, x.imag],
        "hyp2f1_a": [f1.real, f1.imag], "hyp2f1_b": [f2.real, f2.imag],
        "twist_prefactor": pref_twist, "twist_bracket": bracket, "z_twist": zt,
        "alpha_hat_z3": a3, "alpha_hat_z4": a4, "leg_factor": leg,
        "term_neutral": leg * t_neutral, "term_twist": leg * t_twist,
        "term_pair": leg * t_pair, "value": value,
    }


def four_point_OOEE(cfg: PointConfig4, params: CftParams) -> float:
    return four_point_audit(cfg, params)["value"]


def g_2134(x: complex, params: CftParams) -> float:
    """Four-point function reduced to (inf, 1, x, 0)."""
    x = complex(x)
    if x == 0 or x == 1:
        raise InvalidArgument("x must avoid 0 and 1")
    bracket, _, _ = _twist_bracket(x)
    ax, a1x = abs(x), abs(1 - x)
    omc = params.one_minus_cos
    value = (params.lam * G_CONST * omc ** 2 / a1x ** (2 / 3)
             + params.one_plus_cos / (2 * ax ** (4 / 3))
             + omc / (2 * ax ** (4 / 3) * a1x ** (2 / 3)) * bracket)
    return float(value)


def ope_constants(params: CftParams) -> dict:
    """All closed-form structure constants at (lam, beta)."""
    ceoo = c_E_OO(params)
    ceee = C_EEE_UNIT / math.sqrt(params.lam)
    return {
        "delta": delta(params),
        "C_E_OO": ceoo,
        "C_E_EE": ceee,
        "C_E2_EE": math.sqrt(2.0),
        "C_E2_OO_squared": 0.5 * ceoo ** 4,
        "C_Ebeta_OE_squared": params.one_plus_cos / 2,
        "ctilde_over_chat": ALPHA3_PREFACTOR,
        "twist_K": TWIST_K,
        "product_11": ceee * ceoo,
        "product_22": ceoo ** 2,
    }
