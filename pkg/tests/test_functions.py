import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spduff.errors import EvaluationOverflow
from spduff.functions import FunctionSpec, evaluate

coef = st.floats(-5, 5, allow_nan=False)
xs = st.floats(-3, 3, allow_nan=False)
trig_term = st.tuples(st.floats(-2, 2), st.floats(-4, 4), st.floats(-3, 3))


def test_polynomial_value_and_derivatives():
    f = FunctionSpec.polynomial([0.0, -1.0, 0.0, 1.0])
    assert evaluate(f, 2.0) == 6.0
    assert evaluate(f, 2.0, 1) == 11.0
    assert evaluate(f, 2.0, 2) == 12.0
    assert evaluate(f, 2.0, 3) == 6.0


def test_scalar_and_array_paths_agree():
    f = FunctionSpec("sum-of-both", (1.0, 2.0), ((0.5, 3.0, 0.1),))
    x = np.linspace(-2, 2, 9)
    for order in range(4):
        arr = evaluate(f, x, order)
        assert arr.shape == x.shape
        np.testing.assert_allclose(arr, [evaluate(f, float(v), order) for v in x], rtol=1e-15, atol=1e-15)


@given(st.lists(coef, min_size=1, max_size=6), xs)
def test_polynomial_matches_numpy(c, x):
    f = FunctionSpec.polynomial(c)
    assert math.isclose(evaluate(f, x), np.polyval(c[::-1], x), rel_tol=1e-12, abs_tol=1e-9)
    dc = np.polynomial.polynomial.polyder(c)
    assert math.isclose(evaluate(f, x, 1), np.polynomial.polynomial.polyval(x, dc), rel_tol=1e-12, abs_tol=1e-9)


@settings(max_examples=60)
@given(st.lists(coef, min_size=1, max_size=4), st.lists(trig_term, min_size=1, max_size=3), xs)
def test_antiderivative_differentiates_back(c, trig, x):
    f = FunctionSpec("sum-of-both", tuple(c), tuple(trig))
    F = f.antiderivative()
    assert math.isclose(evaluate(F, x, 1), evaluate(f, x), rel_tol=1e-10, abs_tol=1e-10)


@given(st.lists(coef, min_size=1, max_size=5), st.lists(trig_term, min_size=1, max_size=3), xs)
def test_reflection(c, trig, x):
    f = FunctionSpec("sum-of-both", tuple(c), tuple(trig))
    assert math.isclose(evaluate(f.reflected(), x), evaluate(f, -x), rel_tol=1e-12, abs_tol=1e-12)


@given(st.lists(trig_term, min_size=1, max_size=3))
def test_trig_sum_round_trip(trig):
    f = FunctionSpec.trig_sum(trig)
    assert FunctionSpec.from_dict(f.to_dict()) == f


def test_sum_of_both_round_trip():
    f = FunctionSpec("sum-of-both", (1.0, 2.0), ((0.5, 3.0, 0.1),))
    d = f.to_dict()
    assert d["coefficients"] == {"polynomial": [1.0, 2.0], "trig": [0.5, 3.0, 0.1]}
    assert FunctionSpec.from_dict(d) == f


def test_trig_derivative_closed_form():
    f = FunctionSpec.trig_sum([(2.0, 3.0, 0.5)])
    x = 0.7
    assert math.isclose(evaluate(f, x, 1), 6.0 * math.cos(3 * x + 0.5), rel_tol=1e-14)
    assert math.isclose(evaluate(f, x, 2), -18.0 * math.sin(3 * x + 0.5), rel_tol=1e-14)


@pytest.mark.parametrize(
    "data",
    [
        {"kind": "polynomial", "coefficients": []},
        {"kind": "trig-sum", "coefficients": [1.0, 2.0]},
        {"kind": "spline", "coefficients": [1.0]},
        {"kind": "polynomial"},
        {"kind": "polynomial", "coefficients": [float("nan")]},
    ],
)
def test_invalid_specs(data):
    with pytest.raises(ValueError):
        FunctionSpec.from_dict(data)


def test_overflow_raises():
    f = FunctionSpec.polynomial([0.0] * 10 + [1.0])
    with pytest.raises(EvaluationOverflow):
        evaluate(f, 1e300)
    with pytest.raises(EvaluationOverflow):
        evaluate(f, np.array([1.0, 1e300]))
