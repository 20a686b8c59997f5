"""
Closed-form correlators
=======================

Structure constants, the three-point function of two layering operators
with one edge operator, and the mixed four-point function.
"""
import math

import numpy as np

from loopsoup import exactcft as ex

params = ex.CftParams(lam=1.0, beta=math.pi)
print("dimension of O_pi:", ex.delta(params))
for name, value in ex.ope_constants(params).items():
    print(f"{name:>22s} = {value:.12g}")

# <O O E> decays like |z3|^(-4/3) once z3 leaves the pair
for r in (1, 10, 100, 1000):
    print(r, ex.alpha_hat_3pt(0, 1, r * 1j))

# Z_twist near the E-E fusion: |z34|^(4/3) Z_twist -> 1
z1, z2, z3 = 0.13 + 0.41j, 1.7 - 0.6j, -0.8 + 1.1j
for d in (1e-1, 1e-2, 1e-3, 1e-4):
    cfg = ex.PointConfig4(z1, z2, z3, z3 + d)
    print(f"|z34| = {d:g}:", d ** (4 / 3) * ex.z_twist(cfg))

# the four-point function split into its three terms
cfg = ex.PointConfig4(0, 1, 0.3 + 0.8j, 1.4 + 1.1j)
audit = ex.four_point_audit(cfg, params)
for k in ("term_neutral", "term_twist", "term_pair", "value"):
    print(f"{k:>14s} {audit[k]:.10g}")
print("cross-ratio", complex(*audit["cross_ratio"]))

# dependence on beta at fixed points
betas = np.linspace(0, 2 * math.pi, 9)
print([round(ex.four_point_OOEE(cfg, ex.CftParams(1.0, b)), 6) for b in betas])
