"""
Three-arm events in critical percolation
========================================

Probability that the annulus A(r, R) on the triangular lattice is crossed by
one open and two disjoint closed paths. It scales like (r / R)^(2/3).
"""
from loopsoup import percolation as P

R = 256
ladder = P.three_arm_ladder([32, 16, 8, 4], R, 400, seed=1)
for e in ladder:
    print(f"r/R = {e.flags['r'] / R:.4f}  theta = {e.value:.4f} +- {e.stderr:.4f}")
for a, b in zip(ladder, ladder[1:]):
    print("ratio", round(a.value / b.value, 3), "(expected", round(2 ** (2 / 3), 3), ")")
print("fitted exponent", P.fit_arm_exponent([e.flags["r"] / R for e in ladder], ladder))

# swapping colours leaves the probability unchanged
e_closed = P.three_arm_probability(P.ArmExperiment(16, R, 400, seed=1), single=P.CLOSED)
print("single closed arm:", e_closed.value, "+-", e_closed.stderr)
