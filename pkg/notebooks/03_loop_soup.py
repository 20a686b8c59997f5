"""
A loop soup in a box
====================

Samples a Poisson soup of Brownian loops, keeps outer boundaries of diameter
at least delta, and draws them coloured by spin.
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from loopsoup.loopmeasure import DomainKind, DomainSpec, MeasureWindow, Rect, sample_soup

box = Rect.centered(0j, 4.0)
domain = DomainSpec(DomainKind.PLANE, box)
window = MeasureWindow(1e-3, 4.0, box)
soup = sample_soup(domain, window, lam=1.0, delta=0.5, rng=2024)
print(len(soup), "loops of", soup.n_proposed, "proposals")

fig, ax = plt.subplots(figsize=(6, 6))
for loop, s in zip(soup.loops, soup.spins):
    b = loop.boundary
    ax.fill(b.real, b.imag, alpha=0.15, color="C0" if s > 0 else "C3")
    ax.plot(b.real, b.imag, lw=0.5, color="C0" if s > 0 else "C3")
ax.set_aspect("equal")
ax.set_xlim(-3, 3)
ax.set_ylim(-3, 3)
fig.savefig("soup.png", dpi=150)

# diameters follow roughly a power law dictated by scale invariance
d = np.array([loop.diameter for loop in soup.loops])
print("diameter quantiles:", np.quantile(d, [0.1, 0.5, 0.9]))
