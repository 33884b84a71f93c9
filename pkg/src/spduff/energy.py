"""Potential, reference energy, turning points, chi and frozen-time orbits.

With ``w = eps a y'`` the oscillator has energy ``H = w**2/2 + V(t, y)`` where

    V(t, y) = int_0^y f(s) ds - m(t) y.

``H0(t)`` is the potential on the branch the motion is organised around: u1
before the minimum fold, u2 (the barrier top) between the folds and u3 after
the maximum fold. Oscillations are studied on the level ``H0 + delta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq

from .errors import InvalidDelta, NoTurningPoints, SeparatrixLevel
from .functions import FunctionSpec, evaluate
from .manifold import ChartPartition, CriticalManifold, state_range
from .problem import OscillatorProblem, ValidationReport, Violation

__all__ = [
    "PotentialContext",
    "TurningPoints",
    "make_context",
    "potential",
    "base_level",
    "turning_points",
    "chi",
    "check_A4",
    "action_frequency",
    "orbit_intervals",
]

DEFAULT_DELTA = 0.05
CHI_PUNCTURE = 1e-6
SEPARATRIX_TOL = 1e-10
_GL_NODES, _GL_WEIGHTS = leggauss(64)


@dataclass(frozen=True)
class PotentialContext:
    """Problem plus the exact antiderivative of ``f`` and the offset ``delta``."""

    problem: OscillatorProblem
    delta: float = DEFAULT_DELTA
    F: FunctionSpec = field(init=False, repr=False, compare=False)
    F0: float = field(init=False, repr=False, compare=False)
    y_range: tuple[float, float] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise InvalidDelta(f"delta must be a positive real (got {self.delta!r})")
        F = self.problem.f.antiderivative()
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "F0", evaluate(F, 0.0))
        object.__setattr__(self, "y_range", state_range(self.problem))


def make_context(p: OscillatorProblem, delta: float = DEFAULT_DELTA) -> PotentialContext:
    return PotentialContext(p, float(delta))


def potential(ctx: PotentialContext, t, y):
    """``V(t, y)``; broadcasts over arrays."""
    return evaluate(ctx.F, y) - ctx.F0 - evaluate(ctx.problem.m, t) * y


def base_level(ctx: PotentialContext, mani: CriticalManifold, t):
    """``H0(t)``, the potential on the organising branch at time ``t``."""
    if np.ndim(t) == 0:
        return potential(ctx, t, mani.branch(_organising_branch(mani, t), t))
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    for i in (1, 2, 3):
        sel = np.array([_organising_branch(mani, s) == i for s in t.ravel()]).reshape(t.shape)
        if sel.any():
            out[sel] = potential(ctx, t[sel], mani.branch(i, t[sel]))
    return out


def _organising_branch(mani: CriticalManifold, t: float) -> int:
    if mani.single_branch or t < mani.t_min:
        return 1
    if t <= mani.t_max:
        return 2
    return 3


@dataclass(frozen=True)
class TurningPoints:
    y_left: float
    y_right: float
    level: float
    t: float

    def to_dict(self) -> dict:
        return {"t": self.t, "level": self.level, "y_left": self.y_left, "y_right": self.y_right}


def _level_roots(ctx: PotentialContext, t: float, level: float, n: int = 2049) -> list[float]:
    """Sign changes of ``V(t, .) - level`` after widening the window until V > level at both ends."""
    lo, hi = ctx.y_range
    width = hi - lo
    for _ in range(60):
        if potential(ctx, t, lo) > level and potential(ctx, t, hi) > level:
            break
        lo, hi, width = lo - width, hi + width, 2 * width
    else:
        raise NoTurningPoints("potential does not confine the level")
    y = np.linspace(lo, hi, n)
    # add the critical points of V so that thin wells near their bottom are not missed
    p = ctx.problem
    mt = evaluate(p.m, t)
    dv = evaluate(p.f, y) - mt
    crit = [
        brentq(lambda s: evaluate(p.f, s) - mt, y[k], y[k + 1], xtol=1e-15)
        for k in np.flatnonzero(dv[:-1] * dv[1:] < 0)
    ]
    y = np.union1d(y, crit)
    g = potential(ctx, t, y) - level
    roots = []
    for k in np.flatnonzero(g[:-1] * g[1:] <= 0):
        if g[k] == 0.0:
            roots.append(float(y[k]))
        elif g[k + 1] != 0.0:
            roots.append(brentq(lambda s: potential(ctx, t, s) - level, y[k], y[k + 1], xtol=1e-14, rtol=1e-15))
    return sorted(set(roots))


def orbit_intervals(ctx: PotentialContext, t: float, level: float) -> list[tuple[float, float]]:
    """Maximal state intervals on which ``V(t, .) < level``."""
    roots = _level_roots(ctx, float(t), float(level))
    out = []
    for a, b in zip(roots[:-1], roots[1:]):
        if potential(ctx, t, 0.5 * (a + b)) < level:
            out.append((a, b))
    return out


def turning_points(ctx: PotentialContext, t: float, level: float) -> TurningPoints:
    """Outermost roots of ``V(t, y) = level`` around the union of wells."""
    roots = _level_roots(ctx, float(t), float(level))
    if len(roots) < 2:
        raise NoTurningPoints(f"no closed orbit at level {level!r} for t={t!r}")
    return TurningPoints(roots[0], roots[-1], float(level), float(t))


def chi(ctx: PotentialContext, mani: CriticalManifold, t, y):
    """``chi(t, y) = 2 fbar2 - 4 I / (y - u2)**2``; 0 within 1e-6 of ``u2``.

    ``I = int_{u2}^y (f - m) ds = V(t, y) - V(t, u2)`` and
    ``fbar2 = (f(y) - m(t)) / (y - u2)``.
    """
    u2 = mani.branch(2, t)
    d = np.asarray(y, dtype=float) - u2
    g = evaluate(ctx.problem.f, y) - evaluate(ctx.problem.m, t)
    integral = potential(ctx, t, y) - potential(ctx, t, u2)
    near = np.abs(d) < CHI_PUNCTURE
    safe = np.where(near, 1.0, d)
    out = np.where(near, 0.0, 2.0 * g / safe - 4.0 * integral / safe ** 2)
    return float(out) if np.ndim(out) == 0 else out


def check_A4(ctx: PotentialContext, mani: CriticalManifold, charts: ChartPartition, grid=(64, 256)) -> ValidationReport:
    """``chi > -4 delta / (y - u2)**2`` on ``t in K2``, ``y`` between ``u3`` and ``u1``.

    The state grid spans the outer branches with a puncture at ``u2``.
    Failing grid points are returned as witnesses (worst first, at most 10).
    """
    if charts.K2 is None:
        return ValidationReport((), {"A4": "not applicable (no middle branch)"})
    n_t, n_y = grid
    worst = []
    min_margin = math.inf
    for t in np.linspace(*charts.K2, n_t):
        t = float(t)
        u2 = mani.branch(2, t)
        y = np.linspace(mani.branch(3, t), mani.branch(1, t), n_y)
        y = y[np.abs(y - u2) >= CHI_PUNCTURE]
        c = chi(ctx, mani, t, y)
        bound = -4.0 * ctx.delta / (y - u2) ** 2
        margin = c - bound
        k = int(np.argmin(margin))
        min_margin = min(min_margin, float(margin[k]))
        for j in np.flatnonzero(margin <= 0):
            worst.append((float(margin[j]), t, float(y[j]), float(c[j]), float(bound[j])))
    worst.sort()
    witnesses = [{"t": t, "y": y, "chi": c, "bound": b} for _, t, y, c, b in worst[:10]]
    violations = tuple(
        Violation("A4", w["t"], f"chi={w['chi']:.6g} <= {w['bound']:.6g} at y={w['y']:.6g}") for w in witnesses[:1]
    )
    extra = {
        "A4": "failed" if violations else "passed",
        "A4_min_margin": min_margin,
        "A4_witnesses": witnesses,
        "delta": ctx.delta,
    }
    return ValidationReport(violations, extra)


def _barrier_levels(ctx: PotentialContext, t: float, lo: float, hi: float) -> list[float]:
    """Values of ``V`` at interior local maxima (``f = m``, ``f' < 0``) inside ``(lo, hi)``."""
    p = ctx.problem
    mt = evaluate(p.m, t)
    y = np.linspace(lo, hi, 1025)
    g = evaluate(p.f, y) - mt
    out = []
    for k in np.flatnonzero((g[:-1] > 0) & (g[1:] <= 0)):
        if g[k + 1] == 0.0:
            yb = y[k + 1]
        else:
            yb = brentq(lambda s: evaluate(p.f, s) - mt, y[k], y[k + 1], xtol=1e-15)
        out.append(potential(ctx, t, yb))
    return out


def _half_orbit_integrals(ctx: PotentialContext, t: float, level: float, y0: float, y1: float, panels: int):
    """(int dy / w, int w dy) over ``[y0, y1]`` with ``w = sqrt(2 (level - V))``.

    Each half is mapped by ``y = y_turn -+ s**2`` so the inverse square root
    at the turning points becomes a bounded integrand.
    """
    ym = 0.5 * (y0 + y1)
    period = action = 0.0
    for start, sign in ((y0, 1.0), (y1, -1.0)):
        smax = math.sqrt(abs(ym - start))
        edges = np.linspace(0.0, smax, panels + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        s = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
        wts = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
        y = start + sign * s ** 2
        w = np.sqrt(np.maximum(2.0 * (level - potential(ctx, t, y)), 0.0))
        jac = 2.0 * s
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(w > 0, jac / w, 0.0)
        period += float(np.sum(wts * inv))
        action += float(np.sum(wts * w * jac))
    return period, action


def action_frequency(ctx: PotentialContext, t: float, level: float, well: str = "outer") -> tuple[float, float]:
    """Action ``I`` and angular frequency ``omega`` of the frozen-time orbit.

    ``I = (1/2 pi) loop w dy`` and the period in fast time is
    ``T = a(t) loop dy / w`` with ``w = sqrt(2 (level - V(t, y)))``.

    ``well`` selects the orbit: ``"outer"`` is the single curve around all
    wells (level above every barrier), ``"left"``/``"right"`` the extreme
    wells below a barrier. Single-well potentials accept any choice.
    """
    t, level = float(t), float(level)
    if well not in ("left", "right", "outer"):
        raise ValueError("well must be 'left', 'right' or 'outer'")
    lo, hi = ctx.y_range
    for vb in _barrier_levels(ctx, t, lo, hi):
        if abs(level - vb) <= SEPARATRIX_TOL:
            raise SeparatrixLevel(f"level {level!r} is at a barrier top for t={t!r}")
    intervals = orbit_intervals(ctx, t, level)
    if not intervals:
        raise NoTurningPoints(f"no closed orbit at level {level!r} for t={t!r}")
    if well == "outer":
        if len(intervals) != 1:
            raise NoTurningPoints("level lies below a barrier; there is no outer orbit")
        y0, y1 = intervals[0]
    elif len(intervals) >= 2:
        y0, y1 = intervals[0] if well == "left" else intervals[-1]
    else:
        y0, y1 = intervals[0]
        if _barrier_levels(ctx, t, y0, y1):
            raise NoTurningPoints(f"level is above the barrier; no separate {well} well")

    panels, prev = 4, None
    while True:
        half_T, half_A = _half_orbit_integrals(ctx, t, level, y0, y1, panels)
        if prev is not None and abs(half_T - prev) <= 1e-12 * abs(half_T) or panels >= 1024:
            break
        prev, panels = half_T, panels * 2
    a = evaluate(ctx.problem.a, t)
    period = 2.0 * a * half_T
    action = half_A / math.pi
    return action, 2.0 * math.pi / period
