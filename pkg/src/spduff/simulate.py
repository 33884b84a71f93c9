"""Fast-time integration, energy series and crossing events.

With ``w = eps a y'`` and fast time ``tau = (t - t0) / eps`` the oscillator is

    dy/dtau = w / a(t)
    dw/dtau = (m(t) - f(y)) / a(t) - eps (a'(t) / a(t)) w

and ``t = t0 + eps tau`` is advanced exactly. Oscillations are O(1) in
``tau``, so an explicit high-order pair with dense output is used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._dop853 import StepFailure, dense_eval, integrate_dop853
from .energy import PotentialContext, base_level, potential, turning_points
from .errors import Divergence, EvaluationOverflow, StiffnessFailure
from .functions import evaluate
from .manifold import CriticalManifold
from .problem import OscillatorProblem

__all__ = [
    "SolverOptions",
    "Trajectory",
    "CrossingEvent",
    "EnergySeries",
    "integrate",
    "energy_along",
    "detect_crossings",
    "standard_initial_condition",
]

EPS_MAX = 0.25
EVENT_TOL = 1e-10


@dataclass(frozen=True)
class SolverOptions:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step_fast: float = 0.1
    dense_output: bool = True

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not 0.0 < v <= 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2]")
        if not self.max_step_fast > 0.0:
            raise ValueError("max_step_fast must be positive")


@dataclass(frozen=True)
class Trajectory:
    """Step nodes and per-step dense interpolants of one integration.

    A backward run (``reversed_``) is stored as the forward run of the
    time-reflected problem in ``s = -t`` with ``w -> -w``; the public
    accessors map it back, so callers always see increasing ``t``.
    """

    problem: OscillatorProblem
    epsilon: float
    t0: float
    tau: np.ndarray
    states: np.ndarray
    dense: np.ndarray | None = field(default=None, repr=False)
    reversed_: bool = False

    @property
    def t(self) -> np.ndarray:
        s = self.t0 + self.epsilon * self.tau
        return -s[::-1] if self.reversed_ else s

    @property
    def y(self) -> np.ndarray:
        return self.states[::-1, 0] if self.reversed_ else self.states[:, 0]

    @property
    def w(self) -> np.ndarray:
        return -self.states[::-1, 1] if self.reversed_ else self.states[:, 1]

    @property
    def span(self) -> tuple[float, float]:
        t = self.t
        return float(t[0]), float(t[-1])

    @property
    def t_start(self) -> float:
        """Time of the initial condition."""
        return -self.t0 if self.reversed_ else self.t0

    @property
    def n_steps(self) -> int:
        return len(self.tau) - 1

    def _locate(self, t):
        if self.dense is None:
            raise ValueError("trajectory was integrated without dense output")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.reversed_:
            t = -t
        s = (t - self.t0) / self.epsilon
        lo, hi = self.tau[0], self.tau[-1]
        slack = 1e-12 * max(1.0, abs(hi))
        if np.any(s < lo - slack) or np.any(s > hi + slack):
            raise ValueError("evaluation time outside the integrated span")
        s = np.clip(s, lo, hi)
        k = np.clip(np.searchsorted(self.tau, s, side="right") - 1, 0, self.n_steps - 1)
        h = self.tau[k + 1] - self.tau[k]
        return (s - self.tau[k]) / h, k, h

    def __call__(self, t):
        """Interpolated ``(y, w)``; arrays of shape ``t.shape``."""
        scalar = np.ndim(t) == 0
        x, k, _ = self._locate(t)
        out = dense_eval(x, self.dense[k], self.states[k])
        sign = -1.0 if self.reversed_ else 1.0
        if scalar:
            return float(out[0, 0]), sign * float(out[0, 1])
        return out[:, 0], sign * out[:, 1]

    def derivative(self, t):
        """``(dy/dt, dw/dt)`` from the interpolant itself (not the vector field)."""
        x, k, h = self._locate(t)
        _, dx = dense_eval(x, self.dense[k], self.states[k], with_derivative=True)
        scale = 1.0 / (h * self.epsilon)
        if self.reversed_:
            return -dx[:, 0] * scale, dx[:, 1] * scale
        return dx[:, 0] * scale, dx[:, 1] * scale


def _rhs(p: OscillatorProblem, eps: float, t0: float):
    a_, m_, f_ = p.a, p.m, p.f

    def rhs(tau, y, w):
        t = t0 + eps * tau
        try:
            a = evaluate(a_, t)
            ap = evaluate(a_, t, 1)
            return w / a, (evaluate(m_, t) - evaluate(f_, y)) / a - eps * ap / a * w
        except (EvaluationOverflow, OverflowError):
            return math.inf, math.inf

    return rhs


def integrate(
    p: OscillatorProblem,
    eps: float,
    y0: float,
    w0: float,
    span: tuple[float, float] | None = None,
    opts: SolverOptions | None = None,
) -> Trajectory:
    """Integrate from ``span[0]`` to ``span[1]`` (default: the whole interval).

    ``span[1] < span[0]`` integrates backward in time from ``span[0]``.

    Raises
    ------
    StiffnessFailure
        The step size fell below 1e-14 in fast time.
    Divergence
        The state became non-finite or exceeded 1e8.
    """
    opts = opts or SolverOptions()
    if not 0.0 < eps <= EPS_MAX:
        raise ValueError(f"epsilon must lie in (0, {EPS_MAX}]")
    t0, t1 = span if span is not None else (p.t_begin, p.t_end)
    tol = 1e-12 * max(1.0, abs(p.t_begin), abs(p.t_end))
    if not (t0 != t1 and all(p.t_begin - tol <= v <= p.t_end + tol for v in (t0, t1))):
        raise ValueError(f"span [{t0}, {t1}] must be non-empty and inside [{p.t_begin}, {p.t_end}]")
    backward = t1 < t0
    q = p
    if backward:
        # reflect time: the reflected problem run forward is this run backward
        q = p.with_(a=p.a.reflected(), m=p.m.reflected(), t_begin=-p.t_end, t_end=-p.t_begin)
        t0, t1, w0 = -t0, -t1, -w0
    try:
        taus, states, dense = integrate_dop853(
            _rhs(q, eps, t0),
            0.0,
            (t1 - t0) / eps,
            (y0, w0),
            opts.rel_tol,
            opts.abs_tol,
            opts.max_step_fast,
            dense=opts.dense_output,
        )
    except StepFailure as exc:
        t_fail = (t0 + eps * exc.tau) * (-1.0 if backward else 1.0)
        if exc.reason == "underflow":
            raise StiffnessFailure(f"step size underflow at t={t_fail:.10g}") from None
        raise Divergence(f"state diverged at t={t_fail:.10g}") from None
    return Trajectory(p, float(eps), float(t0), taus, states, dense, backward)


@dataclass(frozen=True)
class EnergySeries:
    t: np.ndarray
    H: np.ndarray
    residual: np.ndarray


def energy_along(traj: Trajectory, p: OscillatorProblem | None = None, n: int = 2001, t=None) -> EnergySeries:
    """``H = w**2/2 + V`` and the residual of ``dH/dt = -(a'/a) w**2 - m' y``.

    ``dH/dt`` is differentiated from the dense interpolant, so the residual
    measures how well the discrete solution honours the energy balance.
    """
    p = p or traj.problem
    if t is None:
        t = np.linspace(*traj.span, n)
    t = np.asarray(t, dtype=float)
    y, w = traj(t)
    dy, dw = traj.derivative(t)
    f = evaluate(p.f, y)
    m = evaluate(p.m, t)
    mp = evaluate(p.m, t, 1)
    a = evaluate(p.a, t)
    ap = evaluate(p.a, t, 1)
    F = p.f.antiderivative()
    H = 0.5 * w ** 2 + evaluate(F, y) - evaluate(F, 0.0) - m * y
    dH = w * dw + (f - m) * dy - mp * y
    residual = dH + ap / a * w ** 2 + mp * y
    return EnergySeries(t, H, residual)


@dataclass(frozen=True)
class CrossingEvent:
    t_star: float
    branch_index: int
    direction: str  # "up" | "down"
    residual: float

    def to_dict(self) -> dict:
        return {
            "branch": self.branch_index,
            "t_star": self.t_star,
            "direction": self.direction,
            "residual": self.residual,
        }


@dataclass(frozen=True)
class CrossingResult:
    events: tuple[CrossingEvent, ...]
    tangential: int

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, k):
        return self.events[k]


def _sample_times(traj: Trajectory, lo: float, hi: float) -> np.ndarray:
    t = traj.t
    inner = t[(t > lo) & (t < hi)]
    h = np.diff(t)
    k = np.flatnonzero((t[:-1] < hi) & (t[1:] > lo))
    mids = (t[k][:, None] + h[k][:, None] * np.array([0.25, 0.5, 0.75])[None, :]).ravel()
    mids = mids[(mids > lo) & (mids < hi)]
    return np.unique(np.concatenate([[lo, hi], inner, mids]))


def detect_crossings(traj: Trajectory, mani: CriticalManifold, i: int, chart: tuple[float, float]) -> CrossingResult:
    """Transversal zeros of ``y(t) - u_i(t)`` on ``chart``.

    Sign changes between samples (step nodes and three interior points per
    step) are refined with Brent's method on the dense output. Grazing
    minima of ``|y - u_i|`` below 1e-10 without a sign change are counted
    in ``tangential`` and not reported as events.
    """
    lo, hi = max(chart[0], traj.span[0]), min(chart[1], traj.span[1])
    if not lo < hi:
        return CrossingResult((), 0)
    ts = _sample_times(traj, lo, hi)
    y, _ = traj(ts)
    g = y - mani.branch(i, ts)

    def gfun(s):
        return traj(s)[0] - mani.branch(i, s)

    events = []
    for k in np.flatnonzero(g[:-1] * g[1:] <= 0):
        if g[k] == 0.0 and k > 0:
            continue  # counted at the previous cell
        a_, b_ = ts[k], ts[k + 1]
        if g[k] == 0.0:
            ts_, gs = a_, 0.0
        elif g[k + 1] == 0.0:
            ts_, gs = b_, 0.0
        else:
            ts_ = brentq(gfun, a_, b_, xtol=1e-15, rtol=1e-15, maxiter=200)
            gs = gfun(ts_)
        before = g[k] if g[k] != 0.0 else (g[k - 1] if k > 0 else -g[k + 1])
        events.append(CrossingEvent(float(ts_), i, "up" if before < 0 else "down", abs(float(gs))))
    # a zero sample shared by two cells must only appear once
    events = [e for n_, e in enumerate(events) if n_ == 0 or e.t_star != events[n_ - 1].t_star]

    tangential = 0
    ag = np.abs(g)
    cand = np.flatnonzero((ag[1:-1] < ag[:-2]) & (ag[1:-1] < ag[2:]) & (g[:-2] * g[2:] > 0)) + 1
    for k in cand:
        if ag[k] > 1e-4:
            continue
        a_, b_ = ts[k - 1], ts[k + 1]
        for _ in range(100):
            m1, m2 = a_ + (b_ - a_) / 3, b_ - (b_ - a_) / 3
            if abs(gfun(m1)) < abs(gfun(m2)):
                b_ = m2
            else:
                a_ = m1
        gm = gfun(0.5 * (a_ + b_))
        if abs(gm) < EVENT_TOL and gm * g[k] > 0:
            tangential += 1
    return CrossingResult(tuple(events), tangential)


def standard_initial_condition(
    ctx: PotentialContext, mani: CriticalManifold, t0: float, side: str = "right"
) -> tuple[float, float]:
    """``(y_R, 0)`` (or ``(y_L, 0)``) on the level ``H0(t0) + delta``."""
    level = base_level(ctx, mani, t0) + ctx.delta
    tp = turning_points(ctx, t0, level)
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")
    return (tp.y_right if side == "right" else tp.y_left), 0.0
