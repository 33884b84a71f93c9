import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spduff.energy import make_context
from spduff.errors import EpsilonTooLarge, PolarSingularity
from spduff.polar import (
    PolarState,
    compute_constants,
    fbar,
    from_polar,
    gamma_rate,
    largest_admissible_epsilon,
    to_polar,
    trajectory_polar,
)
from spduff.simulate import integrate, standard_initial_condition

# regression values from the first computation on the default grid
D1_C = {
    0.02: (0.8618937307660386, 0.014854822790898703),
    0.01: (0.8809468653830194, 0.05555926242714259),
    0.005: (0.8904734326915097, 0.07591148224526453),
}


def test_to_polar_examples(d1, mani1):
    u = mani1.branch(2, 0.1)
    s = to_polar(mani1, d1, 2, 0.01, 0.1, u + 0.3, 0.0)
    assert s == PolarState(pytest.approx(0.3), 0.0)
    # v = eps a^2 y' = -0.3  ->  gamma = pi/2
    s = to_polar(mani1, d1, 2, 0.01, 0.1, u, -30.0)
    assert s.r == pytest.approx(0.3) and s.gamma == pytest.approx(math.pi / 2)
    with pytest.raises(PolarSingularity):
        to_polar(mani1, d1, 2, 0.01, 0.1, u, 0.0)


@given(
    st.floats(-0.9, 0.3),
    st.floats(-2.0, 2.0),
    st.floats(-50.0, 50.0),
    st.sampled_from([0.02, 0.01, 0.005]),
)
def test_polar_round_trip(t, y, yp, eps):
    from spduff.problem import builtin

    p = builtin("D2")
    mani = _m2()
    if abs(y - mani.branch(1, t)) < 1e-6 and abs(yp) < 1e-6:
        return
    s = to_polar(mani, p, 1, eps, t, y, yp)
    y2, v2 = from_polar(mani, p, 1, t, s)
    v = eps * (1 + t / 4) ** 2 * yp
    assert y2 == pytest.approx(y, abs=1e-12)
    assert v2 == pytest.approx(v, abs=1e-12)
    assert s.r >= 0


_M = {}


def _m2():
    if not _M:
        from spduff.manifold import build_manifold
        from spduff.problem import builtin

        _M["m"] = build_manifold(builtin("D2"))
    return _M["m"]


def test_fbar_values(d1, mani1):
    assert fbar(d1, mani1, 2, 0.0, 0.5) == pytest.approx(-0.75)
    assert fbar(d1, mani1, 2, 0.0, 1e-10) == pytest.approx(-1.0)
    assert fbar(d1, mani1, 1, 0.0, 1.0 + 1e-10) == pytest.approx(2.0)


def test_d0_gamma_rate_is_one_over_eps(d0, mani0):
    rng = np.random.default_rng(0)
    n = 20000
    t = rng.uniform(0, 1, n)
    r = rng.uniform(1e-6, 5, n)
    g = rng.uniform(-10, 10, n)
    rate = gamma_rate(d0, mani0, 1, 0.01, t, (r, g))
    np.testing.assert_allclose(rate, 100.0, rtol=1e-13)


def test_gamma_rate_at_quarter_turn(d2, mani2):
    eps, t, r = 0.02, 0.1, 0.4
    u, du = mani2.branch(2, t), mani2.branch_derivative(2, t)
    a = 1 + t / 4
    expected = (1 / a ** 2 + eps * du / r) / eps
    assert gamma_rate(d2, mani2, 2, eps, t, PolarState(r, math.pi / 2)) == pytest.approx(expected, rel=1e-13)


def test_gamma_rate_matches_trajectory_slope(d1, mani1, charts1, ctx1):
    eps = 0.01
    lo, hi = charts1.K2
    y0, w0 = standard_initial_condition(ctx1, mani1, lo)
    traj = integrate(d1, eps, y0, w0, (lo, hi))
    h = 1e-7
    t = np.linspace(lo + 1e-3, hi - 1e-3, 97)
    _, gp = trajectory_polar(traj, mani1, 2, t + h)
    _, gm = trajectory_polar(traj, mani1, 2, t - h)
    # the unwrapped branch cut may separate the two stencil points
    slope = (np.mod(gp - gm + math.pi, 2 * math.pi) - math.pi) / (2 * h)
    r, g = trajectory_polar(traj, mani1, 2, t)
    rate = gamma_rate(d1, mani1, 2, eps, t, (r, g))
    np.testing.assert_allclose(slope, rate, rtol=1e-4)


def test_d0_constants(ctx0, mani0):
    from spduff.manifold import build_charts

    (c,) = compute_constants(ctx0, mani0, build_charts(mani0), 0.01)
    assert c.r_min == pytest.approx(math.sqrt(0.1), abs=1e-7)
    assert c.c == pytest.approx(0.9, abs=1e-12)


@pytest.mark.parametrize("eps", sorted(D1_C))
def test_d1_constants_regression(ctx1, mani1, charts1, eps):
    k1, k2, k3 = compute_constants(ctx1, mani1, charts1, eps)
    assert (k1.chart_id, k2.chart_id, k3.chart_id) == ("K1", "K2", "K3")
    assert k1.c == pytest.approx(D1_C[eps][0], rel=1e-9)
    assert k2.c == pytest.approx(D1_C[eps][1], rel=1e-9)
    assert k3.c == pytest.approx(k1.c, rel=1e-12)  # odd symmetry of the instance
    assert k2.eta == 0.5
    assert k2.delta1 > 0 and k2.delta2 > 0 and k2.r_min > 0
    assert k2.c > 0


def test_constants_grow_as_eps_shrinks(ctx1, mani1, charts1):
    cs = [compute_constants(ctx1, mani1, charts1, e)[1].c for e in (0.02, 0.01, 0.005)]
    assert cs[0] < cs[1] < cs[2]


def test_epsilon_too_large_has_witness(ctx1, mani1, charts1):
    with pytest.raises(EpsilonTooLarge) as info:
        compute_constants(ctx1, mani1, charts1, 0.2)
    w = info.value.witness
    assert w["chart"] == "K2"
    assert w["c_raw"] <= 0
    assert charts1.K2[0] <= w["t"] <= charts1.K2[1]


def test_grid_refinement_does_not_inflate(ctx1, mani1, charts1):
    coarse = compute_constants(ctx1, mani1, charts1, 0.01)
    fine = compute_constants(ctx1, mani1, charts1, 0.01, grid=(128, 512, 128))
    for a, b in zip(coarse, fine):
        assert b.c <= a.c / 0.9


def test_constants_to_dict(ctx1, mani1, charts1):
    d = compute_constants(ctx1, mani1, charts1, 0.01)[1].to_dict()
    assert d["chart_id"] == "K2" and "argmin" in d and d["grid_resolution"] == [64, 256, 64]


def test_largest_admissible_epsilon(ctx1, mani1, charts1, ctx0, mani0):
    from spduff.manifold import build_charts

    eps0 = largest_admissible_epsilon(ctx1, mani1, charts1)
    assert eps0 == 0.02  # 0.05 already fails on K2
    compute_constants(ctx1, mani1, charts1, eps0)
    assert largest_admissible_epsilon(ctx0, mani0, build_charts(mani0)) == 0.25
