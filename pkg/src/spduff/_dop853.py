"""Adaptive Dormand-Prince 8(5,3) stepper with order-7 dense output.

Specialised to two-dimensional systems and written with Python floats: the
oscillator right-hand side is cheap, so per-step numpy overhead would
dominate. Step-size control follows the usual DOP853 scheme (combined
order-5/order-3 error estimate, safety 0.9, factors clipped to [0.2, 10]).
"""
from __future__ import annotations

import math

import numpy as np

from . import _dop853_coefficients as co

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1.0 / 8.0
MIN_STEP = 1e-14

_S = co.N_STAGES
_A = co.A
_C = co.C
_B = co.B
_E3 = co.E3
_E5 = co.E5
_D = co.D


class StepFailure(Exception):
    """Raised with a reason of ``"underflow"`` or ``"overflow"``."""

    def __init__(self, reason: str, tau: float, state):
        super().__init__(reason)
        self.reason = reason
        self.tau = tau
        self.state = state


def _stage(rhs, tau, h, y0, y1, K, s):
    d0 = d1 = 0.0
    for j, a in _A[s]:
        k0, k1 = K[j]
        d0 += a * k0
        d1 += a * k1
    return rhs(tau + _C[s] * h, y0 + h * d0, y1 + h * d1)


def integrate_dop853(rhs, tau0, tau1, state0, rtol, atol, max_step, dense=True, bound=1e8):
    """Integrate ``d(y, w)/dtau = rhs(tau, y, w)`` from ``tau0`` to ``tau1``.

    Returns
    -------
    taus : ndarray, shape (n + 1,)
        Step nodes.
    states : ndarray, shape (n + 1, 2)
    dense : ndarray, shape (n, 7, 2) or None
        Interpolation coefficients ``F0..F6`` per step.
    """
    y0, y1 = (float(v) for v in state0)
    tau = float(tau0)
    f0 = rhs(tau, y0, y1)
    taus, states, coeffs = [tau], [(y0, y1)], []
    h = min(max_step, 0.01, tau1 - tau0)
    rejected = False
    while tau < tau1:
        if h < MIN_STEP:
            raise StepFailure("underflow", tau, (y0, y1))
        h = min(h, tau1 - tau)
        K = [f0] + [None] * (_S + 3)
        for s in range(1, _S):
            K[s] = _stage(rhs, tau, h, y0, y1, K, s)
        b0 = b1 = 0.0
        for j in range(_S):
            k0, k1 = K[j]
            b0 += _B[j] * k0
            b1 += _B[j] * k1
        n0, n1 = y0 + h * b0, y1 + h * b1
        if not (math.isfinite(n0) and math.isfinite(n1)) or abs(n0) > bound or abs(n1) > bound:
            if h > 1e-6 * max_step:
                h *= MIN_FACTOR
                rejected = True
                continue
            raise StepFailure("overflow", tau, (n0, n1))
        tnew = tau1 if tau + h >= tau1 else tau + h
        try:
            fnew = rhs(tnew, n0, n1)
        except OverflowError:
            fnew = (math.inf, math.inf)
        K[_S] = fnew
        sc0 = atol + rtol * max(abs(y0), abs(n0))
        sc1 = atol + rtol * max(abs(y1), abs(n1))
        e50 = e51 = e30 = e31 = 0.0
        for j in range(_S + 1):
            k0, k1 = K[j]
            e50 += _E5[j] * k0
            e51 += _E5[j] * k1
            e30 += _E3[j] * k0
            e31 += _E3[j] * k1
        e5 = (e50 / sc0) ** 2 + (e51 / sc1) ** 2
        e3 = (e30 / sc0) ** 2 + (e31 / sc1) ** 2
        if e5 == 0.0 and e3 == 0.0:
            err = 0.0
        else:
            err = h * e5 / math.sqrt((e5 + 0.01 * e3) * 2.0)
        if not math.isfinite(err):
            h *= MIN_FACTOR
            rejected = True
            continue
        if err < 1.0:
            factor = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, SAFETY * err ** ERROR_EXPONENT)
            if rejected:
                factor = min(1.0, factor)
            if dense:
                coeffs.append(_dense(rhs, tau, h, y0, y1, n0, n1, K, f0, fnew))
            tau, y0, y1, f0 = tnew, n0, n1, fnew
            taus.append(tau)
            states.append((y0, y1))
            h = min(max_step, h * factor)
            rejected = False
        else:
            h *= max(MIN_FACTOR, SAFETY * err ** ERROR_EXPONENT)
            rejected = True
    return (
        np.asarray(taus),
        np.asarray(states),
        np.asarray(coeffs).reshape(-1, 7, 2) if dense else None,
    )


def _dense(rhs, tau, h, y0, y1, n0, n1, K, f_old, f_new):
    for s in range(_S + 1, _S + 4):
        K[s] = _stage(rhs, tau, h, y0, y1, K, s)
    dy0, dy1 = n0 - y0, n1 - y1
    F = [
        (dy0, dy1),
        (h * f_old[0] - dy0, h * f_old[1] - dy1),
        (2 * dy0 - h * (f_new[0] + f_old[0]), 2 * dy1 - h * (f_new[1] + f_old[1])),
    ]
    for row in _D:
        c0 = c1 = 0.0
        for j, d in row:
            k0, k1 = K[j]
            c0 += d * k0
            c1 += d * k1
        F.append((h * c0, h * c1))
    return F


def dense_eval(x, F, y_old, with_derivative=False):
    """Evaluate the step interpolant at fractions ``x`` in [0, 1].

    ``F`` has shape (n, 7, 2) and ``y_old`` (n, 2), aligned with ``x`` (n,).
    The derivative returned is with respect to ``x``.
    """
    x = x[:, None]
    one = 1.0 - x
    p = np.zeros_like(y_old)
    dp = np.zeros_like(y_old)
    for i in range(6, -1, -1):
        p = p + F[:, i]
        if i % 2 == 0:  # factor x
            dp = dp * x + p
            p = p * x
        else:  # factor (1 - x)
            dp = dp * one - p
            p = p * one
    if with_derivative:
        return y_old + p, dp
    return y_old + p
