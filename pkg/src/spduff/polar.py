"""Polar coordinates around a branch and the rate constants of the charts.

With ``v = eps a**2 y' = a w`` the substitution

    y = u_i(t) + r cos(gamma),  v = -r sin(gamma)

turns the oscillator into an equation for the phase

    gamma' = (1/eps) [1/a**2 + cos(gamma)**2 (fbar_i - 1/a**2) + eps u_i' sin(gamma) / r]

with ``fbar_i = (f(y) - m(t)) / (y - u_i(t))``. A positive lower bound
``gamma' >= c / eps`` on a chart forces zeros of ``y - u_i`` at most
``eps pi / c`` apart. :func:`compute_constants` estimates ``c`` on grids.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import PotentialContext, base_level, potential, turning_points
from .errors import BranchDerivativeUnavailable, EpsilonTooLarge, PolarSingularity
from .functions import evaluate
from .manifold import ChartPartition, CriticalManifold
from .problem import OscillatorProblem

__all__ = [
    "PolarState",
    "ChartConstants",
    "to_polar",
    "from_polar",
    "fbar",
    "gamma_rate",
    "trajectory_polar",
    "compute_constants",
    "largest_admissible_epsilon",
    "DEFAULT_GRID",
    "EPS_CANDIDATES",
]

R_FLOOR = 1e-12
FBAR_PUNCTURE = 1e-8
DEFLATION = 0.9
DEFAULT_GRID = (64, 256, 64)
EPS_CANDIDATES = (0.25, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.0025)


@dataclass(frozen=True)
class PolarState:
    r: float
    gamma: float


def to_polar(mani: CriticalManifold, p: OscillatorProblem, i: int, eps: float, t, y, y_prime):
    """``(r, gamma)`` of the state ``(y, y')``; ``gamma`` in ``(-pi, pi]``.

    Scalars give a :class:`PolarState`, arrays a tuple of arrays.
    """
    u = mani.branch(i, t)
    v = eps * evaluate(p.a, t) ** 2 * np.asarray(y_prime, dtype=float)
    dy = np.asarray(y, dtype=float) - u
    r = np.hypot(dy, v)
    if np.any(r == 0.0):
        raise PolarSingularity("state sits on the branch with zero velocity")
    gamma = np.arctan2(-v, dy)
    if np.ndim(r) == 0:
        return PolarState(float(r), float(gamma))
    return r, gamma


def from_polar(mani: CriticalManifold, p: OscillatorProblem, i: int, t, state):
    """``(y, v)`` from a :class:`PolarState` or an ``(r, gamma)`` pair."""
    r, gamma = (state.r, state.gamma) if isinstance(state, PolarState) else state
    u = mani.branch(i, t)
    y = u + r * np.cos(gamma)
    v = -r * np.sin(gamma)
    if np.ndim(y) == 0:
        return float(y), float(v)
    return y, v


def fbar(p: OscillatorProblem, mani: CriticalManifold, i: int, t, y, u=None):
    """Divided difference ``(f(y) - m(t)) / (y - u_i(t))``, ``f'(u_i)`` at the branch."""
    if u is None:
        u = mani.branch(i, t)
    y = np.asarray(y, dtype=float)
    d = y - u
    near = np.abs(d) < FBAR_PUNCTURE
    g = evaluate(p.f, y) - evaluate(p.m, t)
    out = np.where(near, evaluate(p.f, np.where(near, u, y), 1), g / np.where(near, 1.0, d))
    return float(out) if out.ndim == 0 else out


def gamma_rate(p: OscillatorProblem, mani: CriticalManifold, i: int, eps: float, t, state):
    """``gamma'`` in slow time; broadcasts over arrays of ``t``, ``r``, ``gamma``."""
    r, gamma = (state.r, state.gamma) if isinstance(state, PolarState) else state
    r = np.asarray(r, dtype=float)
    if np.any(r < R_FLOOR):
        raise PolarSingularity(f"radius below {R_FLOOR}")
    t_arr = np.asarray(t, dtype=float)
    u = mani.branch(i, t if np.ndim(t) == 0 else t_arr)
    du = mani.branch_derivative(i, t if np.ndim(t) == 0 else t_arr, u)
    if du is None or np.any(np.isnan(du)):
        raise BranchDerivativeUnavailable("branch derivative unavailable next to a fold")
    c = np.cos(gamma)
    inv_a2 = 1.0 / evaluate(p.a, t_arr) ** 2
    fb = fbar(p, mani, i, t_arr, u + r * c, u)
    out = (inv_a2 + c * c * (fb - inv_a2) + eps * du * np.sin(gamma) / r) / eps
    return float(out) if np.ndim(out) == 0 else out


def trajectory_polar(traj, mani: CriticalManifold, i: int, t):
    """``(r, unwrapped gamma)`` of a trajectory sampled at increasing times ``t``."""
    p = traj.problem
    t = np.asarray(t, dtype=float)
    y, w = traj(t)
    v = evaluate(p.a, t) * w
    dy = y - mani.branch(i, t)
    return np.hypot(dy, v), np.unwrap(np.arctan2(-v, dy))


@dataclass(frozen=True)
class ChartConstants:
    """Grid estimate of the rate constant ``c`` of one chart (deflated by 10%)."""

    chart_id: str
    r_min: float
    eta: float | None
    delta1: float | None
    delta2: float | None
    c: float
    grid_resolution: tuple[int, int, int]
    epsilon: float
    parts: dict = field(default_factory=dict)
    argmin: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "chart_id": self.chart_id,
            "epsilon": self.epsilon,
            "r_min": self.r_min,
            "eta": self.eta,
            "delta1": self.delta1,
            "delta2": self.delta2,
            "c": self.c,
            "grid_resolution": list(self.grid_resolution),
            "parts": self.parts,
            "argmin": self.argmin,
        }


def _chart_levels(ctx: PotentialContext, mani: CriticalManifold, i: int, ts: np.ndarray):
    """Per-time branch value, level ``H0 + delta`` and turning points."""
    u = mani.branch(i, ts)
    level = base_level(ctx, mani, ts) + ctx.delta
    tp = [turning_points(ctx, float(t), float(h)) for t, h in zip(ts, level)]
    yl = np.array([q.y_left for q in tp])
    yr = np.array([q.y_right for q in tp])
    return u, level, yl, yr


def _r_min(ctx, ts, u, level, yl, yr):
    a = evaluate(ctx.problem.a, ts)
    gap = np.maximum(level - potential(ctx, ts, u), 0.0)
    cand = np.minimum(np.minimum(u - yl, yr - u), math.sqrt(2.0) * a * np.sqrt(gap))
    k = int(np.argmin(cand))
    return float(cand[k]), float(ts[k])


def _outer_constant(ctx, mani, chart_id, i, ts, eps, grid):
    """``min sin^2/a^2 + fbar cos^2 - eps |u'| / r_min`` over ``[y_L, y_R]`` and gamma."""
    p = ctx.problem
    n_t, n_y, n_g = grid
    u, level, yl, yr = _chart_levels(ctx, mani, i, ts)
    r_min, t_r = _r_min(ctx, ts, u, level, yl, yr)
    du = mani.branch_derivative(i, ts, u)
    if np.any(np.isnan(du)):
        raise BranchDerivativeUnavailable(f"branch derivative unavailable on {chart_id}")
    gam = np.linspace(0.0, math.pi, n_g, endpoint=False)
    s2, c2 = np.sin(gam) ** 2, np.cos(gam) ** 2
    best = (math.inf, None)
    for k, t in enumerate(ts):
        y = np.linspace(yl[k], yr[k], n_y)
        fb = fbar(p, mani, i, float(t), y, u[k])
        inv_a2 = 1.0 / evaluate(p.a, float(t)) ** 2
        vals = inv_a2 * s2[None, :] + fb[:, None] * c2[None, :] - eps * abs(du[k]) / r_min
        j = np.unravel_index(int(np.argmin(vals)), vals.shape)
        if vals[j] < best[0]:
            best = (float(vals[j]), {"t": float(t), "y": float(y[j[0]]), "gamma": float(gam[j[1]])})
    c_raw, arg = best
    return ChartConstants(
        chart_id,
        r_min,
        None,
        None,
        None,
        DEFLATION * c_raw,
        tuple(grid),
        eps,
        {"c_raw": c_raw, "r_min_t": t_r},
        arg,
    )


def _middle_constant(ctx, mani, ts, eps, grid):
    p = ctx.problem
    n_t, n_y, n_g = grid
    u2, level, yl, yr = _chart_levels(ctx, mani, 2, ts)
    u1 = mani.branch(1, ts)
    u3 = mani.branch(3, ts)
    r_min, t_r = _r_min(ctx, ts, u2, level, yl, yr)
    du = mani.branch_derivative(2, ts, u2)
    if np.any(np.isnan(du)):
        raise BranchDerivativeUnavailable("branch derivative unavailable on K2")
    a = evaluate(p.a, ts)
    inv_a2 = 1.0 / a ** 2
    eta = 0.5 * float(np.min(inv_a2))
    drift = eps * np.abs(du) / r_min

    # delta1: the level set fixes cos^2 gamma = (y-u2)^2 / ((y-u2)^2 + 2 a^2 (H - V))
    delta1 = math.inf
    grids = []
    for k, t in enumerate(ts):
        t = float(t)
        y = np.linspace(yl[k], yr[k], n_y)
        d = y - u2[k]
        fb = fbar(p, mani, 2, t, y, u2[k])
        vv = 2.0 * a[k] ** 2 * np.maximum(level[k] - potential(ctx, t, y), 0.0)
        denom = d * d + vv
        cos2 = np.where(denom > 0, d * d / np.where(denom > 0, denom, 1.0), 1.0)
        bad = np.abs(cos2 * (fb - inv_a2[k])) > inv_a2[k] - eta
        cap = min(u1[k] - u2[k], u2[k] - u3[k])
        delta1 = min(delta1, float(np.min(np.abs(d[bad]))) if bad.any() else cap)
        grids.append((t, y, d, fb))

    integral = lambda k, y: potential(ctx, float(ts[k]), y) - potential(ctx, float(ts[k]), u2[k])

    def bracket(k, y, d, fb):
        return (inv_a2[k] - fb) / (inv_a2[k] - (integral(k, y) - ctx.delta) / (0.5 * d * d))

    # delta2: largest margin keeping the shells inside [y_L, y_R] with bracket < 1 on interval1
    d2_geom = float(np.min(np.minimum(u3 - yl, yr - u1)))
    delta2 = d2_geom
    for k, (t, y, d, fb) in enumerate(grids):
        inner = np.abs(d) >= delta1
        outside_lo, outside_hi = y < u3[k], y > u1[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            br = bracket(k, y, d, fb)
        bad = inner & ~(br < 1.0)
        bad_lo = bad & outside_lo
        bad_hi = bad & outside_hi
        if (bad & ~outside_lo & ~outside_hi).any():
            delta2 = 0.0  # bracket fails between the outer branches; no margin helps
        if bad_lo.any():
            delta2 = min(delta2, float(np.min(u3[k] - y[bad_lo])))
        if bad_hi.any():
            delta2 = min(delta2, float(np.min(y[bad_hi] - u1[k])))

    k1 = int(np.argmin(eta - drift))
    c1 = float(eta - drift[k1])
    arg1 = {"t": float(ts[k1])}

    c2, arg2 = math.inf, {}
    c3, arg3 = math.inf, {}
    gam = np.linspace(0.0, math.pi, n_g, endpoint=False)
    s2, g2 = np.sin(gam) ** 2, np.cos(gam) ** 2
    for k, (t, y, d, fb) in enumerate(grids):
        in1 = (np.abs(d) > delta1) & (y > u3[k] - delta2) & (y < u1[k] + delta2)
        if in1.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = inv_a2[k] - inv_a2[k] * bracket(k, y[in1], d[in1], fb[in1]) - drift[k]
            j = int(np.argmin(vals))
            if vals[j] < c2:
                c2, arg2 = float(vals[j]), {"t": t, "y": float(y[in1][j])}
        shell = (y <= u3[k] - delta2) | (y >= u1[k] + delta2)
        if shell.any():
            vals = inv_a2[k] * s2[None, :] + fb[shell][:, None] * g2[None, :] - drift[k]
            j = np.unravel_index(int(np.argmin(vals)), vals.shape)
            if vals[j] < c3:
                c3 = float(vals[j])
                arg3 = {"t": t, "y": float(y[shell][j[0]]), "gamma": float(gam[j[1]])}

    parts = {"c1": c1, "c2": c2, "c3": c3, "r_min_t": t_r}
    c_raw = min(c1, c2, c3)
    which = ("c1", "c2", "c3")[int(np.argmin([c1, c2, c3]))]
    arg = {"part": which, **{"c1": arg1, "c2": arg2, "c3": arg3}[which]}
    parts["c_raw"] = c_raw
    return ChartConstants("K2", r_min, eta, delta1, delta2, DEFLATION * c_raw, tuple(grid), eps, parts, arg)


def compute_constants(
    ctx: PotentialContext,
    mani: CriticalManifold,
    charts: ChartPartition,
    eps: float,
    grid: tuple[int, int, int] = DEFAULT_GRID,
) -> list[ChartConstants]:
    """Rate constants for every chart, each deflated by 10%.

    ``H`` in the turning points and in ``r_min`` is the reference level
    ``H0 + delta`` of ``ctx``.

    Raises
    ------
    EpsilonTooLarge
        If any grid minimum is not positive; ``witness`` holds the arg-min.
    """
    n_t = grid[0]
    out = []
    for chart_id, i, (lo, hi) in charts.charts():
        ts = np.linspace(lo, hi, n_t)
        if chart_id == "K2":
            cc = _middle_constant(ctx, mani, ts, eps, grid)
        else:
            cc = _outer_constant(ctx, mani, chart_id, i, ts, eps, grid)
        if not cc.c > 0.0 or (cc.delta1 is not None and not (cc.delta1 > 0 and cc.delta2 > 0)):
            witness = {"chart": chart_id, "c_raw": cc.parts.get("c_raw"), **cc.argmin}
            if cc.delta1 is not None:
                witness.update(delta1=cc.delta1, delta2=cc.delta2)
            raise EpsilonTooLarge(
                f"rate constant on {chart_id} is not positive at eps={eps:g} (grid minimum {cc.parts.get('c_raw'):.6g})",
                witness,
            )
        out.append(cc)
    return out


def largest_admissible_epsilon(
    ctx: PotentialContext,
    mani: CriticalManifold,
    charts: ChartPartition,
    candidates=EPS_CANDIDATES,
    grid: tuple[int, int, int] = DEFAULT_GRID,
) -> float | None:
    """Largest candidate epsilon whose constants are all positive (None if none is)."""
    for eps in sorted(candidates, reverse=True):
        try:
            compute_constants(ctx, mani, charts, eps, grid)
        except EpsilonTooLarge:
            continue
        return float(eps)
    return None
