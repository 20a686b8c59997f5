"""
Path step and the absolute weight
=================================

The lattice estimator discretises each bridge into steps of about
h / sqrt(kappa). Refining the step lets the path explore more of the eps-disks
and the pair weight creeps up towards its continuum value, while ratios at
matched discretisation (scaling, calibrated three-point) are unaffected.
"""
from loopsoup import correlators as C
from loopsoup.loopmeasure import Rect

box = Rect.centered(0.5 + 0j, 1.6)
event = C.LoopEvent((0j, 1 + 0j))
eps = 0.2
for kappa in (1 / 4, 1, 4):
    cfg = C.EngineConfig(resolution_factor=8, kappa=kappa)
    step = eps / 8 / kappa ** 0.5
    e = C.estimate_event_mass(event, (eps,), 3000, 1, (0.25, 1.5), box, cfg)[0]
    print(f"step = eps/{eps / step:.0f}:  mu = {e.value:.4f} +- {e.stderr:.4f}")

# at a fixed step the raster cell hardly matters
for rf in (4, 8, 16):
    cfg = C.EngineConfig(resolution_factor=rf, kappa=(4 / rf) ** 2)
    e = C.estimate_event_mass(event, (eps,), 3000, 1, (0.25, 1.5), box, cfg)[0]
    print(f"cell = eps/{rf}, step = eps/4:  mu = {e.value:.4f} +- {e.stderr:.4f}")
