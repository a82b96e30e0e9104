from __future__ import annotations

import csv
import math
from math import comb, factorial

import mpmath
import pytest

from tridecomp.counting import (
    brute_force_count_sts,
    design_divisibility,
    entropy_integral,
    entropy_integral_quad,
    estimate_log_sts,
    exact_cover_count_sts,
    wilson_design_log_formula,
)
from tridecomp.graphcore import Graph, is_tridivisible


def test_small_counts():
    assert brute_force_count_sts(6) == 0
    assert brute_force_count_sts(7) == 30
    assert brute_force_count_sts(9) == 840
    assert brute_force_count_sts(3) == 1


@pytest.mark.parametrize("n", [3, 7, 9])
def test_two_oracles_agree(n):
    plain = brute_force_count_sts(n, symmetry_reduced=False)
    assert plain == exact_cover_count_sts(n)
    if n >= 7:
        assert plain == brute_force_count_sts(n, symmetry_reduced=True)


def test_thirteen_needs_opt_in():
    with pytest.raises(ValueError):
        brute_force_count_sts(13)


def test_thirteen_points_symmetry_reduced():
    # two isomorphism classes, with automorphism groups of orders 39 and 6
    expected = factorial(13) // 39 + factorial(13) // 6
    assert brute_force_count_sts(13, allow_13=True) == expected == 1_197_504_000


def test_estimator_small_case(tmp_path):
    est = estimate_log_sts(31, stop_exponent=1.6, trials=3, seed=2)
    assert len(est.records) == 3
    for r in est.records:
        assert mpmath.isfinite(r.L1) and mpmath.isfinite(r.L2)
        assert r.L1 > r.L2
    assert est.log_sts_lower == est.L1 - est.L2
    assert float(est.wilson_prediction) == pytest.approx(31**2 / 6 * (math.log(31) - 2))
    path = tmp_path / "est.csv"
    est.write_csv(str(path))
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["n", "trial", "L1", "L2", "lower_bound", "wilson_prediction"]
    assert len(rows) == 4


def test_estimator_is_reproducible():
    a = estimate_log_sts(25, trials=2, seed=9)
    b = estimate_log_sts(25, trials=2, seed=9)
    assert [r.L1 for r in a.records] == [r.L1 for r in b.records]


def test_estimator_rejects_bad_parameters():
    with pytest.raises(ValueError):
        estimate_log_sts(12)
    with pytest.raises(ValueError):
        estimate_log_sts(31, stop_exponent=2.5)


def test_triple_system_divisibility():
    for n in range(3, 1001):
        div = design_divisibility(n, 3, 2, 1)
        assert div == (n % 6 in (1, 3))
        assert div == is_tridivisible(Graph.complete(n))


def test_other_divisibility_examples():
    assert not design_divisibility(5, 2, 1, 3)
    for n in range(2, 30):
        for d in range(1, 6):
            assert design_divisibility(n, 2, 1, d) == (d * n % 2 == 0)
    with pytest.raises(ValueError):
        design_divisibility(10, 2, 2, 1)
    with pytest.raises(ValueError):
        design_divisibility(10, 3, 2, 0)


@pytest.mark.parametrize("n", [7, 9, 13, 99, 1003])
def test_formula_for_triple_systems(n):
    value = wilson_design_log_formula(n, 3, 2, 1).value
    expected = mpmath.mpf(n * (n - 1)) / 6 * (mpmath.log(n - 2) - 2)
    assert mpmath.almosteq(value, expected, rel_eps=mpmath.mpf(10) ** -25)


@pytest.mark.parametrize("n,d", [(10, 3), (50, 4), (200, 7)])
def test_formula_for_regular_graphs(n, d):
    value = wilson_design_log_formula(n, 2, 1, d).value
    approx = -n * mpmath.log(mpmath.factorial(d)) + mpmath.mpf(d * n) / 2 * mpmath.log(mpmath.mpf(d * n) / mpmath.e)
    # the formula uses N = n - 1 where the graph count uses n
    assert abs(value - approx) < d


def test_formula_degenerate_and_errors():
    f = wilson_design_log_formula(10, 2, 2, 1)
    assert f.degenerate and f.value == 0
    with pytest.raises(ValueError):
        wilson_design_log_formula(8, 3, 2, 1)


@pytest.mark.parametrize("n,q,r,lam", [(13, 3, 2, 1), (9, 3, 2, 2), (16, 4, 2, 1), (10, 2, 1, 3), (26, 5, 3, 3)])
def test_formula_is_the_entropy_integral_substitution(n, q, r, lam):
    if not design_divisibility(n, q, r, lam):
        pytest.skip("parameters not admissible")
    Q, N, blocks = comb(q, r), comb(n - r, q - r), comb(n, r)
    via_integral = lam * blocks * entropy_integral(Q, Q * (Q - 1), mpmath.mpf(lam) ** (Q - 1) * N)
    via_integral -= blocks * mpmath.log(mpmath.factorial(lam))
    assert mpmath.almosteq(wilson_design_log_formula(n, q, r, lam).value, via_integral, rel_eps=1e-20)


def test_entropy_integral_examples():
    assert entropy_integral(1, 0, 1) == 0
    assert entropy_integral(2, 4, mpmath.e) == pytest.approx(-0.5, abs=1e-25)
    with pytest.raises(ValueError):
        entropy_integral(0, 1, 1)
    with pytest.raises(ValueError):
        entropy_integral(1, 1, 0)


@pytest.mark.parametrize("A", [0.3, 1, 3, 10])
@pytest.mark.parametrize("B", [0, 2, 20])
@pytest.mark.parametrize("C", [0.1, 1, 50, 1e4])
def test_entropy_integral_matches_quadrature(A, B, C):
    closed = entropy_integral(A, B, C)
    numeric = entropy_integral_quad(A, B, C)
    if closed == 0:
        assert abs(numeric) < 1e-20
    else:
        assert abs(closed - numeric) <= 1e-9 * abs(closed)
