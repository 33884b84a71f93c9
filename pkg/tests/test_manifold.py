import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spduff.errors import AssumptionA1Violated, BranchDomainError, ChartMarginTooLarge
from spduff.functions import FunctionSpec, evaluate
from spduff.manifold import (
    branch,
    branch_roots,
    build_charts,
    build_manifold,
    check_A1_A3,
    find_folds,
    single_branch_manifold,
)

FOLD_Y = 1 / math.sqrt(3)
FOLD_T = 2 / (3 * math.sqrt(3))


def cubic_roots(t):
    """Real roots of y**3 - y + t = 0, sorted descending (u1, u2, u3)."""
    r = np.roots([1.0, 0.0, -1.0, t])
    return sorted((z.real for z in r if abs(z.imag) < 1e-9), reverse=True)


def test_d1_folds_closed_form(d1):
    fmin, fmax = find_folds(d1)
    assert fmin.kind == "minimum" and fmax.kind == "maximum"
    assert abs(fmin.y_at_fold + FOLD_Y) < 1e-10 and abs(fmin.t_at_fold + FOLD_T) < 1e-10
    assert abs(fmax.y_at_fold - FOLD_Y) < 1e-10 and abs(fmax.t_at_fold - FOLD_T) < 1e-10


def test_branch_ordering_and_values(mani1):
    assert mani1.branch(2, 0.0) == 0.0
    assert abs(mani1.branch(1, 0.0) - 1.0) < 1e-14
    assert abs(mani1.branch(3, 0.0) + 1.0) < 1e-14
    # root of y**3 - y + 0.5 = 0
    assert abs(mani1.branch(3, 0.5) - (-1.1914878839531187)) < 1e-13


@settings(max_examples=50)
@given(st.floats(-FOLD_T + 1e-3, FOLD_T - 1e-3))
def test_branches_match_cubic_roots(t):
    mani = _cached_d1()
    u1, u2, u3 = cubic_roots(t)
    assert mani.branch(1, t) == pytest.approx(u1, abs=1e-12)
    assert mani.branch(2, t) == pytest.approx(u2, abs=1e-12)
    assert mani.branch(3, t) == pytest.approx(u3, abs=1e-12)
    assert u3 < u2 < u1


_D1 = {}


def _cached_d1():
    if "m" not in _D1:
        from spduff.problem import builtin

        _D1["m"] = build_manifold(builtin("D1"))
    return _D1["m"]


def test_array_branch_matches_scalar(mani1):
    t = np.linspace(-1.0, FOLD_T, 33)
    arr = mani1.branch(1, t)
    np.testing.assert_allclose(arr, [mani1.branch(1, float(s)) for s in t], rtol=0, atol=1e-14)
    np.testing.assert_allclose(evaluate(mani1.problem.f, arr), -t, atol=1e-12)


def test_branch_derivative_vs_finite_difference(mani1, d1):
    for i, t in ((1, -0.7), (2, 0.1), (3, 0.6)):
        u, du = branch(mani1, d1, i, t)
        h = 1e-6
        fd = (mani1.branch(i, t + h) - mani1.branch(i, t - h)) / (2 * h)
        assert du == pytest.approx(fd, rel=1e-7)


def test_branch_derivative_unavailable_at_fold(mani1):
    assert mani1.branch_derivative(2, mani1.t_max) is None


def test_branch_domain_errors(mani1):
    with pytest.raises(BranchDomainError):
        mani1.branch(2, 0.9)
    with pytest.raises(BranchDomainError):
        mani1.branch(4, 0.0)


def test_branch_roots_at_fixed_time(d1):
    roots = branch_roots(d1, 0.0)
    np.testing.assert_allclose(sorted(roots), [-1.0, 0.0, 1.0], atol=1e-12)
    assert len(branch_roots(d1, 0.9)) == 1


def test_d0_has_no_folds(d0):
    with pytest.raises(AssumptionA1Violated):
        build_manifold(d0)
    mani = single_branch_manifold(d0)
    assert mani.single_branch
    assert mani.branch(1, 0.3) == 0.0


def test_quartic_well_violates_a1():
    # f' = 4y**3 - ... with three critical points: not S-shaped with two folds
    f = FunctionSpec.polynomial([0.0, 0.0, -1.0, 0.0, 1.0])
    p = _problem_with_f(f)
    with pytest.raises(AssumptionA1Violated):
        build_manifold(p)


def _problem_with_f(f):
    from spduff.problem import builtin

    return builtin("D1").with_(f=f)


def test_a1_a3_report(d1, mani1):
    rep = check_A1_A3(d1, mani1)
    assert rep.passed
    assert rep.extra["A2"] == "passed" and rep.extra["A3"] == "passed"
    roots = rep.extra["characteristic_roots"]
    # hyperbolic (real) on the middle branch, oscillatory on the outer ones
    assert roots["u2"]["lambda_re"] > 0 and roots["u2"]["lambda_im"] == 0
    assert roots["u1"]["lambda_re"] == 0 and roots["u1"]["lambda_im"] > 0


def test_nonmonotone_m_is_reported(d1, mani1):
    p = d1.with_(m=FunctionSpec.polynomial([0.0, 0.0, 0.5]))
    rep = check_A1_A3(p, mani1)
    assert any(v.check == "m monotone" for v in rep.violations)


def test_chart_partition(mani1):
    charts = build_charts(mani1, 0.05)
    assert charts.margin == pytest.approx(0.1)
    assert charts.K1 == (-1.0, pytest.approx(-FOLD_T - 0.1))
    assert charts.K2[0] == pytest.approx(-FOLD_T + 0.1)
    assert charts.K2[1] == pytest.approx(FOLD_T - 0.1)
    assert charts.K3 == (pytest.approx(FOLD_T + 0.1), 1.0)
    assert [c[0] for c in charts.charts()] == ["K1", "K2", "K3"]


def test_chart_margin_too_large(mani1):
    with pytest.raises(ChartMarginTooLarge):
        build_charts(mani1, 0.24)
    with pytest.raises(ValueError):
        build_charts(mani1, 0.3)


def test_single_branch_chart(mani0):
    charts = build_charts(mani0)
    assert charts.charts() == [("K1", 1, (0.0, 1.0))]
