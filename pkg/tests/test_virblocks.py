import math
from fractions import Fraction

import numpy as np
import pytest

from loopsoup import exactcft as ex
from loopsoup import virblocks as vb
from loopsoup.errors import DegenerateModuleError, InvalidArgument


def test_partitions_counts():
    assert [len(vb.partitions(k)) for k in range(1, 9)] == [1, 2, 3, 5, 7, 11, 15, 22]


@pytest.mark.parametrize("c,h", [(2.0, 1 / 3), (1.0, 0.2), (0.7, 1.4)])
def test_gram_low_levels(c, h):
    g1 = vb.gram_matrix(c, h, 1)
    assert g1.shape == (1, 1) and g1[0, 0] == pytest.approx(2 * h)
    g2 = vb.gram_matrix(c, h, 2, basis=((1, 1), (2,)))
    want = np.array([[4 * h * (2 * h + 1), 6 * h], [6 * h, 4 * h + c / 2]])
    np.testing.assert_allclose(g2, want, rtol=1e-14)


def test_gram_symmetric_and_matches_exact_module():
    for c, h in ((2.0, 1 / 3), (0.5, 0.75)):
        for level in (3, 4, 5):
            g = vb.gram_matrix(c, h, level)
            np.testing.assert_allclose(g, g.T, rtol=0, atol=0)
            mod = vb._ExactModule(Fraction(c), Fraction(h))
            basis = vb.partitions(level)
            for i, mu in enumerate(basis):
                for j, nu in enumerate(basis):
                    exact = mod.expect(tuple(reversed(mu)) + tuple(-k for k in nu))
                    assert g[i, j] == pytest.approx(float(exact), rel=1e-12, abs=1e-12)


def test_level_one_closed_form():
    d = ex.delta(ex.CftParams(1.0, math.pi))
    s = vb.block_coeffs(2.0, (d, d, 1 / 3, 1 / 3), 1 / 3, 1)
    assert s.coeffs[0] == 1.0
    assert s.coeffs[1] == pytest.approx(1 / 6, abs=1e-14)
    for c, dims, hp in ((1.3, (0.1, 0.25, 0.3, 0.7), 0.45), (3.0, (0.4, 0.0, 0.2, 0.9), 1.2)):
        d1, d2, d3, d4 = dims
        f1 = vb.block_coeffs(c, dims, hp, 1).coeffs[1]
        assert f1 == pytest.approx((hp + d2 - d1) * (hp + d3 - d4) / (2 * hp), rel=1e-13)


def test_vacuum_block():
    s = vb.block_coeffs(2.0, (0.2, 0.2, 1 / 3, 1 / 3), 0.0, 3)
    assert s.coeffs[1] == 0.0
    # level 2: 2 d1 d3 / c
    assert s.coeffs[2] == pytest.approx(2 * 0.2 * (1 / 3) / 2.0, rel=1e-13)


def test_block_leading_behaviour():
    s = vb.block_coeffs(2.0, (0.2, 0.2, 1 / 3, 1 / 3), 1 / 3, 4)
    x = 1e-6
    assert abs(s(x)) / x ** (1 / 3 - 2 / 3) == pytest.approx(1.0, rel=1e-5)


@pytest.mark.parametrize("case", [
    (2.0, (0.2, 0.2, 1 / 3, 1 / 3), 1 / 3), (1.0, (0.1, 0.1, 1 / 3, 1 / 3), 2 / 3),
    (1.3, (0.1, 0.25, 0.3, 0.7), 0.45), (4.0, (0.4, 0.4, 1 / 3, 1 / 3), 1.0),
    (2.0, (0.2, 0.2, 1 / 3, 1 / 3), 0.0)])
def test_gram_blocks_against_exact_reference(case):
    c, dims, hp = case
    a = vb.block_coeffs(c, dims, hp, 4).coeffs
    b = vb.block_coeffs_exact(c, dims, hp, 4)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-10)


def test_degenerate_module_detected():
    # h_{1,2} = 1/16 at c = 1/2 has a null vector at level 2
    with pytest.raises(DegenerateModuleError) as exc:
        vb.block_coeffs(0.5, (0.1, 0.1, 0.2, 0.2), 1 / 16, 3)
    assert exc.value.level == 2
    with pytest.raises(DegenerateModuleError):
        vb.block_coeffs_exact(0.5, (0.1, 0.1, 0.2, 0.2), Fraction(1, 16), 3)


def test_level_guard():
    with pytest.raises(InvalidArgument):
        vb.gram_matrix(1.0, 0.5, vb.MAX_LEVEL + 1)
    with pytest.raises(InvalidArgument):
        vb.block_coeffs_exact(1.0, (0.1, 0.1, 0.1, 0.1), 0.5, vb.MAX_LEVEL + 1)


def test_gram_blocks_against_exact_reference_to_level_8():
    a = vb.block_coeffs(2.0, (0.2, 0.2, 1 / 3, 1 / 3), 1 / 3, 8).coeffs
    b = vb.block_coeffs_exact(2.0, (0.2, 0.2, 1 / 3, 1 / 3), 1 / 3, 8)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_block_series_tail_below_1e6_at_x_03():
    """Ratio-test estimate of the truncation tail after K = 8 at |x| = 0.3."""
    d = ex.delta(ex.CftParams(1.0, math.pi))
    worst = 0.0
    for hp in (0.0, 1 / 3, 2 / 3, 1.0):
        s = vb.block_coeffs(2.0, (d, d, 1 / 3, 1 / 3), hp, 8)
        terms = [abs(f) * 0.3 ** k for k, f in enumerate(s.coeffs)]
        r = terms[-1] / terms[-2]
        assert r < 1
        worst = max(worst, terms[-1] * r / (1 - r))
    assert worst < 1e-6


@pytest.fixture(scope="module")
def spectrum():
    return vb.spectrum_table(vb.decompose_fourpoint(ex.CftParams(1.0, math.pi), kmax=6, max_p=3))


def test_spectrum_sites(spectrum):
    k = ex.ope_constants(ex.CftParams(1.0, math.pi))
    assert spectrum[(0, 0)] == pytest.approx(1.0, abs=1e-10)
    assert spectrum[(1, 1)] == pytest.approx(k["C_E_EE"] * k["C_E_OO"], abs=1e-6)
    assert spectrum[(2, 2)] == pytest.approx(k["C_E_OO"] ** 2, abs=1e-6)
    for (p, q), v in spectrum.items():
        if not vb.allowed_site(p, q):
            assert abs(v) < 1e-8


def test_product_11_lambda_independent():
    vals = []
    for lam in (0.5, 1.0, 2.0):
        tab = vb.spectrum_table(vb.decompose_fourpoint(ex.CftParams(lam, math.pi), kmax=4, max_p=3))
        vals.append(tab[(1, 1)])
    np.testing.assert_allclose(vals, vals[1], rtol=1e-9)


def test_decompose_rejects_neutral():
    with pytest.raises(InvalidArgument):
        vb.decompose_fourpoint(ex.CftParams(1.0, 0.0))


def test_central_charge():
    for lam in (0.5, 1.0, 2.0):
        assert vb.central_charge_check(lam, math.pi) == pytest.approx(2 * lam, abs=1e-8)
    assert vb.central_charge_check(1.0, 2.0) == pytest.approx(2.0, abs=1e-8)
    assert vb.stress_tensor_coefficient(ex.CftParams(1.0, math.pi)) == pytest.approx(1 / 15, abs=1e-8)


def test_spectrum_csv(tmp_path):
    entries = vb.decompose_fourpoint(ex.CftParams(1.0, math.pi), kmax=4, max_p=2)
    path = vb.write_spectrum_csv(entries, tmp_path / "s.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "p,p_bar,dim,dim_bar,product,residual"
    assert len(lines) == 1 + 9
