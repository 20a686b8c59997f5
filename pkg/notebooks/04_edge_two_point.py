"""
Edge two-point function
=======================

alpha(0, r) = eps^(-4/3) mu(outer boundary meets both eps-disks), with eps
proportional to r. Scale invariance of the loop measure makes the log-log
slope -4/3.
"""
import numpy as np

from loopsoup import correlators as C
from loopsoup.stats import fit_loglog_slope

radii = np.array([0.25, 0.5, 1.0, 2.0])
ests = [C.estimate_alpha((0j, complex(r)), None, 0.08 * r, None, 1500, 10 + i)
        for i, r in enumerate(radii)]
for r, e in zip(radii, ests):
    print(f"r = {r:5.2f}  alpha = {e.value:.4f} +- {e.stderr:.4f}")
slope, se = fit_loglog_slope(radii, [e.value for e in ests], [e.stderr for e in ests])
print(f"slope {slope:.3f} +- {se:.3f}   (expected {-4 / 3:.3f})")

# the eps ladder at fixed r: the normalised weight should not drift
ladder = C.estimate_alpha_ladder((0j, 1 + 0j), None, (0.08, 0.04, 0.02), 1500, 99)
for eps, e in zip((0.08, 0.04, 0.02), ladder):
    print(f"eps = {eps:.2f}  alpha = {e.value:.4f} +- {e.stderr:.4f}")
print("consistent:", C.ladder_consistent(ladder))
