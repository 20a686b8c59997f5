"""Acceptance criteria, one test per criterion.

Every comparison is printed as a PASS/FAIL line with its tolerance. The Monte
Carlo criteria run the same checks, budgets and seeds as ``loopsoup verify
full`` (seed 0), so the two report identical numbers.
"""
import math
import time

import pytest

from loopsoup import exactcft, suites
from loopsoup.records import RunRecord

SEED = 0


@pytest.fixture
def report(capsys):
    def emit(label, rec):
        with capsys.disabled():
            for c in rec.comparisons:
                se = f" +- {c['stderr']:.3g}" if c.get("stderr") else ""
                print(f"\n{'PASS' if c['passed'] else 'FAIL'}  [{label}] {c['name']}: "
                      f"{c['value']!r}{se} (target {c['target']!r}, {c['tol_kind']} tol {c['tol']!r})",
                      end="")
        return rec.passed
    return emit


def fresh():
    return RunRecord("acceptance", "verify", "test")


def full_check(index):
    """Run the index-th Monte Carlo check with the seed ``verify full`` gives it."""
    rec = fresh()
    check = suites.FULL_CHECKS[index]
    check(rec, SEED + 1000 * index)
    return rec


def test_c01_structure_constants(report):
    rec = fresh()
    suites.check_constants(rec)
    k = exactcft.ope_constants(exactcft.CftParams(1.0, math.pi))
    # the stated decimal targets, checked literally as well
    rec.compare("C_E_OO literal target -0.964278", k["C_E_OO"], -0.964278, 1e-5, "abs")
    rec.compare("C_E_EE literal target 0.622640", k["C_E_EE"], 0.622640, 1e-5, "abs")
    assert report("1", rec)


def test_c02_twist_normalisation(report):
    rec = fresh()
    suites.check_twist_limit(rec)
    assert report("2", rec)


def test_c03_block_decomposition(report):
    rec = fresh()
    t0 = time.perf_counter()
    suites.check_blocks(rec)
    rec.compare("block decomposition runtime (s)", time.perf_counter() - t0, 0.0, 120.0, "max")
    assert report("3", rec)


def test_c04_central_charge(report):
    rec = fresh()
    suites.check_central_charge(rec)
    assert report("4", rec)


def test_c05_combinatorial_oracles(report):
    rec = fresh()
    suites.check_combinatorics(rec)
    assert report("5", rec)


def test_c06_gram_vs_brute_force(report):
    rec = fresh()
    suites.check_gram(rec)
    assert report("6", rec)


def test_c07_two_point_exponent(report):
    assert report("7", full_check(0))


def test_c08_hit_exponent(report):
    assert report("8", full_check(1))


def test_c09_scaling_covariance(report):
    assert report("9", full_check(2))


def test_c10_three_point_exact_vs_mc(report):
    assert report("10", full_check(3))


def test_c11_soup_vs_table(report):
    assert report("11", full_check(4))


def test_c12_percolation_three_arm(report):
    assert report("12", full_check(5))
