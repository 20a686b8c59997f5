import math

import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, maximum_flow

from loopsoup import percolation as P
from loopsoup.errors import InvalidArgument

NB = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)]  # (di, dj)


def annulus_sites(lat, r):
    ny, nx = lat.shape
    inA = (lat.d2 >= r * r) & (lat.d2 < lat.R ** 2)
    inner = np.zeros_like(inA)
    outer = np.zeros_like(inA)
    for a, b in zip(*np.nonzero(inA)):
        for di, dj in NB:
            aa, bb = a + dj, b + di
            if not (0 <= aa < ny and 0 <= bb < nx) or lat.d2[aa, bb] >= lat.R ** 2:
                outer[a, b] = True
            elif lat.d2[aa, bb] < r * r:
                inner[a, b] = True
    return inA, inner, outer


def edges_of(mask):
    ny, nx = mask.shape
    idx = np.arange(ny * nx).reshape(ny, nx)
    src, dst = [], []
    for a, b in zip(*np.nonzero(mask)):
        for di, dj in NB:
            aa, bb = a + dj, b + di
            if 0 <= aa < ny and 0 <= bb < nx and mask[aa, bb]:
                src.append(idx[a, b])
                dst.append(idx[aa, bb])
    return np.array(src, int), np.array(dst, int)


def oracle_crossing(mask, inner, outer):
    n = mask.size
    s, d = edges_of(mask)
    g = csr_matrix((np.ones(len(s)), (s, d)), shape=(n, n))
    _, lab = connected_components(g, directed=False)
    lab = lab.reshape(mask.shape)
    return bool(set(lab[mask & inner]) & set(lab[mask & outer]))


def oracle_disjoint(mask, inner, outer):
    """Vertex-disjoint inner-to-outer crossings inside mask, by max flow on split vertices."""
    n = mask.size
    S, T = 2 * n, 2 * n + 1
    s, d = edges_of(mask)
    flat = np.arange(n)
    m = mask.ravel()
    rows = list(2 * flat[m]) + list(2 * s + 1)
    cols = list(2 * flat[m] + 1) + list(2 * d)
    inn = flat[(mask & inner).ravel()]
    out = flat[(mask & outer).ravel()]
    rows += [S] * len(inn) + list(2 * out + 1)
    cols += list(2 * inn) + [T] * len(out)
    cap = np.ones(len(rows), np.int32)
    g = csr_matrix((cap, (rows, cols)), shape=(2 * n + 2, 2 * n + 2))
    g.sum_duplicates()
    g.data[:] = 1
    return maximum_flow(g, S, T).flow_value


def oracle_three_arms(state, lat, r, single):
    inA, inner, outer = annulus_sites(lat, r)
    one = inA & (state == single)
    two = inA & (state == 1 - single)
    return oracle_crossing(one, inner, outer) and oracle_disjoint(two, inner, outer) >= 2


@pytest.mark.parametrize("r", [2, 3, 6])
def test_three_arms_against_max_flow_oracle(r):
    lat = P.Lattice(20)
    seen = set()
    for trial in range(60):
        st = lat.states(3, trial)
        for single in (P.OPEN, P.CLOSED):
            got = P.has_three_arms(st, lat, r, single)
            assert got == oracle_three_arms(st, lat, r, single), (trial, single)
            seen.add(got)
    assert seen == {True, False}


def test_colour_symmetry():
    est_open = P.three_arm_probability(P.ArmExperiment(4, 32, 400, seed=1), P.OPEN)
    est_closed = P.three_arm_probability(P.ArmExperiment(4, 32, 400, seed=1), P.CLOSED)
    assert abs(est_open.value - est_closed.value) < 3 * math.hypot(est_open.stderr, est_closed.stderr)


def test_states_deterministic_and_fair():
    lat = P.Lattice(40)
    a, b = lat.states(7, 3), lat.states(7, 3)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, lat.states(7, 4))
    m = a.mean()
    assert abs(m - 0.5) < 4 * 0.5 / math.sqrt(a.size)


def test_ladder_monotone_and_consistent():
    ladder = P.three_arm_ladder([16, 8, 4], 32, 300, seed=2)
    vals = [e.value for e in ladder]
    # thinner annuli make the event easier
    assert vals[0] >= vals[1] >= vals[2]
    single = P.three_arm_probability(P.ArmExperiment(8, 32, 300, seed=2))
    assert single.value == ladder[1].value


def test_trial_chunks_add_up():
    whole = P.arm_ladder_counts([8, 4], 24, 100, seed=5)
    parts = P.arm_ladder_counts([8, 4], 24, 40, seed=5) + P.arm_ladder_counts([8, 4], 24, 60, seed=5,
                                                                               trial_offset=40)
    np.testing.assert_array_equal(whole, parts)


def test_degenerate_and_errors():
    e = P.three_arm_probability(P.ArmExperiment(16, 16, 10))
    assert e.value == 1.0 and e.flags["degenerate"]
    with pytest.raises(InvalidArgument):
        P.ArmExperiment(1, 16, 10)
    with pytest.raises(InvalidArgument):
        P.ArmExperiment(20, 16, 10)
    with pytest.raises(InvalidArgument):
        P.ArmExperiment(4, 16, 10, p=0.6)
    with pytest.raises(InvalidArgument):
        P.ArmExperiment(4, P.MAX_OUTER + 1, 10)
    with pytest.raises(InvalidArgument):
        P.arm_ladder_counts([4, 8], 16, 10)
    with pytest.raises(InvalidArgument):
        P.has_three_arms(np.zeros((3, 3), np.uint8), P.Lattice(4), 2, single=2)


def test_fit_arm_exponent():
    rs = np.array([1 / 4, 1 / 8, 1 / 16])
    assert P.fit_arm_exponent(rs, 0.3 * rs ** (2 / 3)) == pytest.approx(2 / 3, abs=1e-12)
    with pytest.raises(InvalidArgument):
        P.fit_arm_exponent(rs[:2], rs[:2])
    with pytest.raises(InvalidArgument):
        P.fit_arm_exponent(rs, [0.1, 0.0, 0.2])


def test_ladder_csv(tmp_path):
    ladder = P.three_arm_ladder([8, 4], 16, 20, seed=0)
    path = P.write_ladder_csv(tmp_path / "l.csv", ladder)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,R,estimate,stderr,n"
    assert lines[1].startswith("8,16,")
