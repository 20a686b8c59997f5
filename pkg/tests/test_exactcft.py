import math

import mpmath as mp
import numpy as np
import pytest

from loopsoup import exactcft as ex
from loopsoup.errors import BranchCutError, InvalidArgument

mp.mp.dps = 40
G = mp.gamma


def mp_prefactor():
    return (mp.mpf(2) ** (mp.mpf(7) / 6) * mp.pi
            / (mp.mpf(3) ** 0.25 * mp.sqrt(5) * G(mp.mpf(1) / 6) * G(mp.mpf(4) / 3)))


def mp_c_eee():
    return (4 * mp.mpf(2) ** (mp.mpf(1) / 6) * mp.mpf(3) ** 0.25 * mp.sqrt(5) * mp.pi ** 1.5
            * G(mp.mpf(2) / 3) / (G(mp.mpf(1) / 6) ** 3 * G(mp.mpf(7) / 6)))


@pytest.mark.parametrize("lam,beta,want", [(1, 0, 0.0), (1, math.pi, 0.2), (5, math.pi / 2, 0.5)])
def test_delta(lam, beta, want):
    assert ex.delta(ex.CftParams(lam, beta)) == pytest.approx(want, abs=1e-15)


def test_delta_periodic():
    for b in (0.3, 1.9, 4.4):
        assert ex.delta(ex.CftParams(2, b)) == pytest.approx(ex.delta(ex.CftParams(2, b + 2 * math.pi)))


def test_c_e_oo_against_mpmath():
    v = ex.c_E_OO(ex.CftParams(1.0, math.pi))
    assert v == pytest.approx(float(-2 * mp_prefactor()), abs=1e-13)
    assert ex.c_E_OO(ex.CftParams(1.0, 0.0)) == 0.0
    for lam in (0.3, 2.0, 7.5):
        assert ex.c_E_OO(ex.CftParams(lam, math.pi)) == pytest.approx(math.sqrt(lam) * v, rel=1e-14)


def test_ope_constants():
    k = ex.ope_constants(ex.CftParams(1.0, math.pi))
    assert k["C_E_EE"] == pytest.approx(float(mp_c_eee()), abs=1e-13)
    assert k["C_E2_EE"] == pytest.approx(1.414214, abs=1e-6)
    assert k["C_Ebeta_OE_squared"] == pytest.approx(0.0, abs=1e-15)
    assert k["C_E2_OO_squared"] == pytest.approx(0.5 * k["C_E_OO"] ** 4)
    for lam in (0.5, 2.0):
        kl = ex.ope_constants(ex.CftParams(lam, math.pi))
        assert kl["C_E_EE"] * math.sqrt(lam) == pytest.approx(k["C_E_EE"], rel=1e-14)
        assert kl["product_11"] == pytest.approx(k["product_11"], rel=1e-14)


def test_alpha_hat_3pt():
    pref = float(mp_prefactor())
    assert ex.alpha_hat_3pt(0, 1, 0.5) == pytest.approx(pref * 4 ** (2 / 3), rel=1e-14)
    z3 = 0.3 + 0.8j
    assert ex.alpha_hat_3pt(0, 1, z3) == pytest.approx(ex.alpha_hat_3pt(1, 0, z3), rel=1e-15)
    # decay like |z3|^(-4/3)
    r = ex.alpha_hat_3pt(0, 1, 1e4j) / ex.alpha_hat_3pt(0, 1, 2e4j)
    assert r == pytest.approx(2 ** (4 / 3), rel=1e-3)
    with pytest.raises(InvalidArgument):
        ex.alpha_hat_3pt(0, 1, 1)


def test_alpha_hat_scaling():
    z = (0.1 + 0.2j, -0.7 + 0.4j, 0.9 - 0.3j)
    s, b = 2.5 * np.exp(0.4j), 1 - 2j
    v = ex.alpha_hat_3pt(*z)
    w = ex.alpha_hat_3pt(*(s * zz + b for zz in z))
    assert w == pytest.approx(abs(s) ** (-2 / 3) * v, rel=1e-13)


def test_z_twist_short_distance_limit():
    z1, z2, z3 = 0.13 + 0.41j, 1.7 - 0.6j, -0.8 + 1.1j
    for d in (1e-3, 1e-3j, -7e-4 + 7e-4j):
        cfg = ex.PointConfig4(z1, z2, z3, z3 + d)
        assert abs(d) ** (4 / 3) * ex.z_twist(cfg) == pytest.approx(1.0, abs=1e-2)


def test_z_twist_at_zero_cross_ratio():
    # z1 = z2 is forbidden, so approach x = 0 and compare with the bare prefactor
    cfg = ex.PointConfig4(0.0, 1e-9, 2.0 + 1j, -1.0 + 0.5j)
    pref = abs(cfg.zd(1, 3) * cfg.zd(2, 4) / (cfg.zd(3, 4) ** 2 * cfg.zd(2, 3) * cfg.zd(1, 4))) ** (2 / 3)
    assert ex.z_twist(cfg) == pytest.approx(pref, rel=1e-5)


def test_point_config_rejects_coincident():
    with pytest.raises(InvalidArgument):
        ex.PointConfig4(0, 1, 1, 2)


def test_branch_cut_rejected():
    # real collinear points with cross-ratio > 1
    cfg = ex.PointConfig4(0.0, 2.0, 1.0, 3.0)
    assert cfg.on_branch_cut
    with pytest.raises(BranchCutError):
        ex.z_twist(cfg)


def _cfgs():
    rng = np.random.default_rng(11)
    for _ in range(6):
        z = rng.normal(size=4) + 1j * rng.normal(size=4)
        yield ex.PointConfig4(*z)


def test_four_point_crossing_symmetry():
    params = ex.CftParams(1.3, 2.1)
    for cfg in _cfgs():
        swapped = ex.PointConfig4(cfg.z1, cfg.z2, cfg.z4, cfg.z3)
        a, b = ex.four_point_OOEE(cfg, params), ex.four_point_OOEE(swapped, params)
        assert a == pytest.approx(b, rel=1e-12)


def test_four_point_neutral_charge():
    for cfg in _cfgs():
        v = ex.four_point_OOEE(cfg, ex.CftParams(1.0, 0.0))
        assert v == pytest.approx(abs(cfg.zd(3, 4)) ** (-4 / 3), rel=1e-13)


def test_four_point_beta_pi():
    lam = 1.0
    params = ex.CftParams(lam, math.pi)
    for cfg in _cfgs():
        z12 = abs(cfg.zd(1, 2))
        want = z12 ** (-4 * lam / 5) * (ex.z_twist(cfg) + 4 * lam * ex.alpha_hat_3pt(cfg.z1, cfg.z2, cfg.z3)
                                        * ex.alpha_hat_3pt(cfg.z1, cfg.z2, cfg.z4))
        assert ex.four_point_OOEE(cfg, params) == pytest.approx(want, rel=1e-12)


def test_four_point_global_covariance():
    params = ex.CftParams(0.8, 1.7)
    d = ex.delta(params)
    s, b = 0.6 * np.exp(1.1j), 0.3 - 0.9j
    for cfg in _cfgs():
        moved = ex.PointConfig4(*(s * z + b for z in cfg.points))
        ratio = ex.four_point_OOEE(moved, params) / ex.four_point_OOEE(cfg, params)
        assert ratio == pytest.approx(abs(s) ** (-(4 * d + 4 / 3)), rel=1e-10)


def test_four_point_e_e_fusion_limit():
    params = ex.CftParams(1.0, 2.0)
    d = ex.delta(params)
    z1, z2, z3 = 0.4 - 0.2j, -1.1 + 0.9j, 0.7 + 1.3j
    eps = 1e-4
    v = ex.four_point_OOEE(ex.PointConfig4(z1, z2, z3, z3 + eps), params)
    assert eps ** (4 / 3) * v == pytest.approx(abs(z1 - z2) ** (-4 * d), rel=1e-3)


def test_g2134_matches_four_point_limit():
    params = ex.CftParams(1.2, 2.4)
    d = ex.delta(params)
    for x in (0.3 + 0.2j, -0.5 + 0.7j, 0.6 - 0.1j):
        big = 1e7
        cfg = ex.PointConfig4(big, 1.0, x, 0.0)
        lim = big ** (4 * d) * ex.four_point_OOEE(cfg, params)
        assert ex.g_2134(x, params) == pytest.approx(lim, rel=1e-6)


def test_g2134_neutral_and_crossing_channel():
    for x in (0.2 + 0.1j, 0.7j):
        assert ex.g_2134(x, ex.CftParams(1.0, 0.0)) == pytest.approx(abs(x) ** (-4 / 3), rel=1e-13)
    params = ex.CftParams(1.0, math.pi)
    for x in (0.1, 0.5, 0.9):
        assert math.isfinite(ex.g_2134(1 - x, params))


def test_ope_limit_of_o_o_pair():
    """|z12|^{4 Delta} G - |z34|^{-4/3} is carried by the edge channel as z12 -> 0."""
    lam, beta = 1.0, math.pi
    params = ex.CftParams(lam, beta)
    d = ex.delta(params)
    z3, z4 = 1.0 + 0.5j, -0.8 + 1.2j
    resid = []
    for r in (1e-2, 5e-3, 2.5e-3):
        cfg = ex.PointConfig4(0.0, r, z3, z4)
        v = abs(r) ** (4 * d) * ex.four_point_OOEE(cfg, params) - abs(z3 - z4) ** (-4 / 3)
        chan = (ex.c_E_OO(params) * ex.ope_constants(params)["C_E_EE"] * r ** (2 / 3)
                * abs(z3 - z4) ** (-2 / 3) * abs(z3) ** (-2 / 3) * abs(z4) ** (-2 / 3))
        resid.append(abs(v - chan) / r ** (2 / 3))
    assert resid[2] < resid[1] < resid[0]


def test_audit_record_sums():
    cfg = ex.PointConfig4(0.0, 1.0, 0.3 + 0.8j, -0.5 + 0.4j)
    a = ex.four_point_audit(cfg, ex.CftParams(1.0, 2.0))
    assert a["term_neutral"] + a["term_twist"] + a["term_pair"] == pytest.approx(a["value"], rel=1e-14)
