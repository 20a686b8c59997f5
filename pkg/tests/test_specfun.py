import cmath
import math

import mpmath as mp
import numpy as np
import pytest

from loopsoup.errors import BranchCutError, InvalidArgument
from loopsoup.specfun import gamma_fn, hyp2f1, hyp2f1_coeffs, rgamma

mp.mp.dps = 30


@pytest.mark.parametrize("x", [1 / 6, 1 / 3, 2 / 3, 4 / 3, 7 / 6, 0.01, 2.5, 10.3, 40.0, -0.5, -2.7])
def test_gamma_matches_mpmath(x):
    ref = float(mp.gamma(mp.mpf(x)))
    assert gamma_fn(x) == pytest.approx(ref, rel=1e-13)


def test_gamma_known_value():
    assert gamma_fn(1 / 6) == pytest.approx(5.566316, abs=1e-6)


def test_rgamma_vanishes_at_poles():
    for n in range(0, 5):
        assert rgamma(-n) == 0.0
    assert rgamma(0.5) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-14)


def test_series_coefficients():
    c = hyp2f1_coeffs(0.5, 1.0, 1.0, 6)
    ref = [float(mp.rf(0.5, k) / mp.factorial(k)) for k in range(6)]
    np.testing.assert_allclose(c, ref, rtol=1e-14)


def test_hyp2f1_at_zero():
    assert hyp2f1(-2 / 3, 1 / 3, 2 / 3, 0) == 1.0
    assert hyp2f1(3.1, -0.4, 5.5, 0j) == 1.0


def test_gauss_summation_at_one():
    v = hyp2f1(-2 / 3, 1 / 3, 2 / 3, 1.0)
    ref = mp.gamma(mp.mpf(2) / 3) / (mp.gamma(mp.mpf(4) / 3) * mp.gamma(mp.mpf(1) / 3))
    assert v.real == pytest.approx(float(ref), abs=1e-13)


def _points():
    rng = np.random.default_rng(3)
    pts = [0.3, -0.4 + 0.2j, 0.55j, 0.8 + 0.5j, 0.95 + 0.05j, 1.0 + 0.3j, 1.5 - 0.8j,
           -3.0 + 0.1j, 2.0 + 2.0j, -10.0, 0.999 - 0.001j, 5.0 - 0.01j]
    pts += list(rng.uniform(-3, 3, 8) + 1j * rng.uniform(-3, 3, 8))
    return pts


@pytest.mark.parametrize("abc", [(-2 / 3, 1 / 3, 2 / 3), (-1 / 3, 2 / 3, 4 / 3), (0.25, 0.6, 1.7),
                                 (1.2, -0.7, 0.4)])
def test_hyp2f1_matches_mpmath(abc):
    a, b, c = abc
    for x in _points():
        got = hyp2f1(a, b, c, x)
        ref = complex(mp.hyp2f1(a, b, c, x))
        assert abs(got - ref) <= 1e-12 * max(1.0, abs(ref)), (x, got, ref)


def test_hyp2f1_conjugate_symmetry():
    for x in _points():
        a = hyp2f1(-1 / 3, 2 / 3, 4 / 3, x)
        b = hyp2f1(-1 / 3, 2 / 3, 4 / 3, complex(x).conjugate())
        assert cmath.isclose(a, b.conjugate(), abs_tol=1e-13)


def test_branch_cut_and_bad_c():
    with pytest.raises(BranchCutError):
        hyp2f1(0.2, 0.3, 0.7, 1.5)
    with pytest.raises(BranchCutError):
        hyp2f1(0.5, 0.5, 0.7, 1.0)  # c - a - b < 0: divergent at x = 1
    with pytest.raises(InvalidArgument):
        hyp2f1(0.2, 0.3, -2, 0.1)


def test_polynomial_case():
    # a = -3 terminates the series
    x = 2.7 + 1.1j
    ref = sum(float(mp.rf(-3, k) * mp.rf(0.5, k) / (mp.rf(1.5, k) * mp.factorial(k))) * x ** k
              for k in range(4))
    assert abs(hyp2f1(-3, 0.5, 1.5, x) - ref) < 1e-12
