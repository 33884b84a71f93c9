"""Critical manifold ``f(y) = m(t), w = 0``: folds, branches and charts.

The manifold is handled through the graph ``t = phi(y)``, i.e. ``m(phi(y)) =
f(y)``. Its critical points are the zeros of ``f'``; with an S-shaped
manifold there is a minimum fold at ``y_min`` and a maximum fold at
``y_max``, which split the curve into three branches::

    u1(t) >= y_max   on [t_B, t_max]
    y_min <= u2(t) <= y_max   on [t_min, t_max]
    u3(t) <= y_min   on [t_min, t_E]

``f - m(t)`` is monotone in ``y`` on each branch's state range, so a branch is
evaluated by a bracketed Newton iteration that falls back to bisection.
Problems whose restoring force is strictly increasing (no folds at all) are
handled by :func:`single_branch_manifold`, giving one branch over the whole
interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import AssumptionA1Violated, BranchDomainError, ChartMarginTooLarge
from .functions import evaluate
from .problem import OscillatorProblem, ValidationReport, Violation

__all__ = [
    "Fold",
    "CriticalManifold",
    "ChartPartition",
    "Roots",
    "branch_roots",
    "find_folds",
    "build_manifold",
    "single_branch_manifold",
    "analysis_manifold",
    "branch",
    "check_A1_A3",
    "build_charts",
    "state_range",
    "characteristic_roots",
]

NONDEGENERACY_TOL = 1e-8
DERIVATIVE_GUARD = 1e-6
ROOT_SCAN_POINTS = 2049


class Roots(list):
    """Ascending list of simple roots; near-double roots are kept on ``tangent``."""

    def __init__(self, values=(), tangent=()):
        super().__init__(values)
        self.tangent = list(tangent)


def _term_scale(p: OscillatorProblem, y: float, t: float) -> float:
    ay = max(1.0, abs(y))
    poly = sum(abs(c) * ay ** k for k, c in enumerate(p.f.coefficients))
    return 1.0 + abs(evaluate(p.m, t)) + poly + p.f.trig_amplitude


def _root_bound(p: OscillatorProblem) -> float:
    """Radius containing every real root of ``f(y) - c`` for ``|c| <= max|m|``."""
    t = np.linspace(p.t_begin, p.t_end, 257)
    m_max = float(np.max(np.abs(evaluate(p.m, t))))
    deg = p.f.degree
    if deg < 1:
        return 10.0
    c = p.f.coefficients
    lead = abs(c[deg])
    low = [abs(v) for v in c[:deg]]
    low[0] += m_max + p.f.trig_amplitude
    return 1.0 + max(low) / lead


def _scan_roots(fun, lo: float, hi: float, n: int = ROOT_SCAN_POINTS, dfun=None, scale: float = 1.0):
    """All roots of ``fun`` on ``[lo, hi]`` from grid sign changes.

    Returns (simple roots, tangent roots). Tangent roots are grid-local minima
    of ``|fun|`` that never change sign but drop below ``1e-8 * scale`` after
    refinement.
    """
    y = np.linspace(lo, hi, n)
    g = fun(y)
    roots, tangent = [], []
    for k in np.flatnonzero(g == 0.0):
        roots.append(float(y[k]))
    sign_change = np.flatnonzero(g[:-1] * g[1:] < 0)
    for k in sign_change:
        roots.append(brentq(lambda s: float(fun(float(s))), y[k], y[k + 1], xtol=1e-15, rtol=1e-15))
    # tangential touches
    ag = np.abs(g)
    local_min = np.flatnonzero((ag[1:-1] < ag[:-2]) & (ag[1:-1] < ag[2:]) & (g[1:-1] != 0.0)) + 1
    for k in local_min:
        if g[k - 1] * g[k + 1] < 0 or g[k - 1] * g[k] < 0 or g[k] * g[k + 1] < 0:
            continue
        if ag[k] > 1e-2 * scale:
            continue  # far from touching zero
        # refine the minimum of |g| on the cell pair
        a_, b_ = y[k - 1], y[k + 1]
        for _ in range(80):
            m1, m2 = a_ + (b_ - a_) / 3, b_ - (b_ - a_) / 3
            if abs(float(fun(float(m1)))) < abs(float(fun(float(m2)))):
                b_ = m2
            else:
                a_ = m1
        ym = 0.5 * (a_ + b_)
        if abs(float(fun(float(ym)))) <= 1e-8 * scale:
            tangent.append(float(ym))
    if dfun is not None:
        polished = []
        for r in roots:
            d = float(dfun(float(r)))
            if d != 0.0:
                step = float(fun(float(r))) / d
                if abs(step) < 1e-6 * max(1.0, abs(r)):
                    r = r - step
            polished.append(r)
        roots = polished
    return sorted(roots), sorted(tangent)


def state_range(p: OscillatorProblem) -> tuple[float, float]:
    """State window for root searches.

    Hull of the roots of ``f(y) = m(t)`` at both interval ends and of the
    critical points of ``f``, extended by 50% of its width (at least 0.5) on
    each side.
    """
    bound = _root_bound(p)
    pts = []
    for t in (p.t_begin, p.t_end):
        mt = float(evaluate(p.m, t))
        r, tg = _scan_roots(lambda y: evaluate(p.f, y) - mt, -bound, bound)
        pts += r + tg
    r, tg = _scan_roots(lambda y: evaluate(p.f, y, 1), -bound, bound)
    pts += r + tg
    if not pts:
        return -bound, bound
    lo, hi = min(pts), max(pts)
    pad = 0.5 * max(hi - lo, 1.0)
    return lo - pad, hi + pad


def branch_roots(p: OscillatorProblem, t: float, y_range: tuple[float, float] | None = None) -> Roots:
    """All real roots of ``f(y) = m(t)``, ascending, Newton-polished."""
    if not p.t_begin - 1e-12 <= t <= p.t_end + 1e-12:
        raise BranchDomainError(f"t={t!r} outside [{p.t_begin}, {p.t_end}]")
    lo, hi = y_range if y_range is not None else state_range(p)
    mt = float(evaluate(p.m, t))
    roots, tangent = _scan_roots(
        lambda y: evaluate(p.f, y) - mt,
        lo,
        hi,
        dfun=lambda y: evaluate(p.f, y, 1),
        scale=_term_scale(p, 0.5 * (lo + hi), t),
    )
    return Roots(roots, tangent)


@dataclass(frozen=True)
class Fold:
    y_at_fold: float
    t_at_fold: float
    kind: str  # "minimum" | "maximum"
    second_derivative: float

    def to_dict(self) -> dict:
        return {
            "y": self.y_at_fold,
            "t": self.t_at_fold,
            "kind": self.kind,
            "second_derivative": self.second_derivative,
        }


def _solve_m(p: OscillatorProblem, value: float) -> list[float]:
    """Times in the interval where ``m(t) = value``."""
    roots, tangent = _scan_roots(
        lambda t: evaluate(p.m, t) - value, p.t_begin, p.t_end, n=1025, dfun=lambda t: evaluate(p.m, t, 1)
    )
    return roots + tangent


def find_folds(p: OscillatorProblem) -> tuple[Fold, Fold]:
    """The minimum and maximum folds of ``phi``.

    Raises
    ------
    AssumptionA1Violated
        Unless exactly two non-degenerate critical points of ``phi`` lie in
        the interval, a minimum below a maximum in state.
    """
    lo, hi = state_range(p)
    roots, tangent = _scan_roots(
        lambda y: evaluate(p.f, y, 1), lo, hi, dfun=lambda y: evaluate(p.f, y, 2)
    )
    folds, problems = [], []
    for y in roots + tangent:
        times = _solve_m(p, float(evaluate(p.f, y)))
        if not times:
            continue  # no fold in range
        if len(times) > 1:
            problems.append(f"m takes the fold value {len(times)} times (phi not single valued)")
            continue
        t = times[0]
        mp = float(evaluate(p.m, t, 1))
        if mp == 0.0:
            problems.append(f"m'(t)=0 at fold time t={t:.6g}")
            continue
        d2 = float(evaluate(p.f, y, 2)) / mp
        if abs(d2) <= NONDEGENERACY_TOL:
            problems.append(f"degenerate critical point at y={y:.6g} (phi''={d2:.3g})")
            continue
        folds.append(Fold(y, t, "minimum" if d2 > 0 else "maximum", d2))
    if problems:
        raise AssumptionA1Violated("; ".join(problems))
    if len(folds) != 2:
        raise AssumptionA1Violated(
            f"expected exactly two non-degenerate folds in the interval, found {len(folds)}"
        )
    fmin = [f for f in folds if f.kind == "minimum"]
    fmax = [f for f in folds if f.kind == "maximum"]
    if len(fmin) != 1 or len(fmax) != 1:
        raise AssumptionA1Violated("folds must be one minimum and one maximum of phi")
    if not fmin[0].y_at_fold < fmax[0].y_at_fold:
        raise AssumptionA1Violated("y_min must lie below y_max")
    return fmin[0], fmax[0]


@dataclass(frozen=True)
class CriticalManifold:
    """S-shaped (three branch) or single-branch critical manifold."""

    problem: OscillatorProblem
    fold_min: Fold | None
    fold_max: Fold | None
    y_lo: float
    y_hi: float
    _brackets: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def single_branch(self) -> bool:
        return self.fold_min is None

    @property
    def t_min(self) -> float:
        return self.fold_min.t_at_fold

    @property
    def t_max(self) -> float:
        return self.fold_max.t_at_fold

    @property
    def y_min(self) -> float:
        return self.fold_min.y_at_fold

    @property
    def y_max(self) -> float:
        return self.fold_max.y_at_fold

    @property
    def branch_domains(self) -> dict[int, tuple[float, float]]:
        p = self.problem
        if self.single_branch:
            return {1: (p.t_begin, p.t_end)}
        return {1: (p.t_begin, self.t_max), 2: (self.t_min, self.t_max), 3: (self.t_min, p.t_end)}

    def _bracket(self, i: int) -> tuple[float, float, float]:
        """(lo, hi, orientation) so that orientation*(f - m) rises from <=0 to >=0."""
        if i in self._brackets:
            return self._brackets[i]
        if self.single_branch:
            out = (self.y_lo, self.y_hi, 1.0)
        elif i == 1:
            out = (self.y_max, self.y_hi, 1.0)
        elif i == 2:
            out = (self.y_min, self.y_max, -1.0)
        elif i == 3:
            out = (self.y_lo, self.y_min, 1.0)
        else:
            raise BranchDomainError(f"branch index must be 1, 2 or 3 (got {i!r})")
        self._brackets[i] = out
        return out

    def _check_domain(self, i: int, t) -> None:
        if i not in self.branch_domains:
            raise BranchDomainError(f"branch u{i} does not exist for this manifold")
        lo, hi = self.branch_domains[i]
        tol = 1e-12 * (1.0 + max(abs(lo), abs(hi)))
        tmin, tmax = (float(np.min(t)), float(np.max(t))) if np.ndim(t) else (t, t)
        if tmin < lo - tol or tmax > hi + tol:
            raise BranchDomainError(f"t outside the domain [{lo:.10g}, {hi:.10g}] of branch u{i}")

    def branch(self, i: int, t):
        """``u_i(t)`` for a float or an array of times."""
        self._check_domain(i, t)
        lo, hi, sgn = self._bracket(i)
        p = self.problem
        if np.ndim(t) == 0:
            return _solve_scalar(p, float(t), lo, hi, sgn)
        return _solve_array(p, np.asarray(t, dtype=float), lo, hi, sgn)

    def branch_derivative(self, i: int, t, u=None):
        """``u_i'(t) = m'(t) / f'(u_i)``; None (NaN for arrays) next to a fold."""
        if u is None:
            u = self.branch(i, t)
        p = self.problem
        fp = evaluate(p.f, u, 1)
        mp = evaluate(p.m, t, 1)
        if np.ndim(u) == 0:
            return None if abs(fp) < DERIVATIVE_GUARD else mp / fp
        with np.errstate(divide="ignore", invalid="ignore"):
            out = mp / fp
        return np.where(np.abs(fp) < DERIVATIVE_GUARD, np.nan, out)

    def to_dict(self) -> dict:
        if self.single_branch:
            return {"single_branch": True, "branch_domains": {"u1": list(self.branch_domains[1])}}
        return {
            "single_branch": False,
            "fold_min": self.fold_min.to_dict(),
            "fold_max": self.fold_max.to_dict(),
            "t_min": self.t_min,
            "t_max": self.t_max,
            "branch_domains": {f"u{i}": list(d) for i, d in self.branch_domains.items()},
        }


def _widen(p, t_values, lo, hi, sgn, upper: bool):
    """Move an outer bracket end until it brackets the branch for all given times."""
    mt = evaluate(p.m, np.asarray(t_values, dtype=float))
    step = max(1.0, hi - lo)
    for _ in range(60):
        end = hi if upper else lo
        g = sgn * (evaluate(p.f, np.array(end)) - mt)
        if (np.all(g >= 0) if upper else np.all(g <= 0)):
            return lo, hi
        if upper:
            hi += step
        else:
            lo -= step
        step *= 2
    raise AssumptionA1Violated("could not bracket a branch of the critical manifold")


def _solve_scalar(p: OscillatorProblem, t: float, lo: float, hi: float, sgn: float) -> float:
    f, m = p.f, p.m
    mt = evaluate(m, t)
    g_lo = sgn * (evaluate(f, lo) - mt)
    g_hi = sgn * (evaluate(f, hi) - mt)
    if g_lo > 0:
        return lo  # fold end: root sits on the bracket edge up to rounding
    if g_hi < 0:
        return hi
    x = 0.5 * (lo + hi)
    for _ in range(200):
        g = sgn * (evaluate(f, x) - mt)
        if g == 0.0:
            return x
        if g < 0:
            lo = x
        else:
            hi = x
        d = sgn * evaluate(f, x, 1)
        xn = x - g / d if d > 0 else 0.5 * (lo + hi)
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 2e-16 * max(1.0, abs(x)) or hi - lo <= 4e-16 * max(1.0, abs(x)):
            return xn
        x = xn
    return x


def _solve_array(p: OscillatorProblem, t: np.ndarray, lo: float, hi: float, sgn: float) -> np.ndarray:
    f, m = p.f, p.m
    mt = evaluate(m, t)
    lo_a = np.full(t.shape, lo)
    hi_a = np.full(t.shape, hi)
    x = 0.5 * (lo_a + hi_a)
    done = np.zeros(t.shape, dtype=bool)
    g_lo = sgn * (evaluate(f, np.array(lo)) - mt)
    g_hi = sgn * (evaluate(f, np.array(hi)) - mt)
    x = np.where(g_lo > 0, lo, np.where(g_hi < 0, hi, x))
    done |= (g_lo > 0) | (g_hi < 0)
    for _ in range(200):
        if done.all():
            break
        g = sgn * (evaluate(f, x) - mt)
        zero = g == 0.0
        lo_a = np.where(g < 0, x, lo_a)
        hi_a = np.where(g > 0, x, hi_a)
        d = sgn * evaluate(f, x, 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = np.where(d > 0, x - g / d, 0.5 * (lo_a + hi_a))
        outside = ~((xn > lo_a) & (xn < hi_a))
        xn = np.where(outside, 0.5 * (lo_a + hi_a), xn)
        tol = 2e-16 * np.maximum(1.0, np.abs(x))
        conv = zero | (np.abs(xn - x) <= tol) | (hi_a - lo_a <= 2 * tol)
        x = np.where(done | zero, x, xn)
        done |= conv
    return x


def build_manifold(p: OscillatorProblem) -> CriticalManifold:
    """S-shaped manifold; raises AssumptionA1Violated otherwise."""
    fmin, fmax = find_folds(p)
    y_lo, y_hi = state_range(p)
    y_lo, y_hi = min(y_lo, fmin.y_at_fold - 1.0), max(y_hi, fmax.y_at_fold + 1.0)
    mani = CriticalManifold(p, fmin, fmax, y_lo, y_hi)
    d = mani.branch_domains
    _, y_hi = _widen(p, np.linspace(*d[1], 65), fmax.y_at_fold, y_hi, 1.0, upper=True)
    y_lo, _ = _widen(p, np.linspace(*d[3], 65), y_lo, fmin.y_at_fold, 1.0, upper=False)
    return CriticalManifold(p, fmin, fmax, y_lo, y_hi)


def single_branch_manifold(p: OscillatorProblem) -> CriticalManifold:
    """Manifold of a problem with strictly increasing ``f``: one branch on the whole interval."""
    lo, hi = state_range(p)
    y = np.linspace(lo, hi, ROOT_SCAN_POINTS)
    if np.any(evaluate(p.f, y, 1) <= 0):
        raise AssumptionA1Violated("f is not strictly increasing; the manifold is not a single branch")
    t = np.linspace(p.t_begin, p.t_end, 65)
    lo, hi = _widen(p, t, lo, hi, 1.0, upper=True)
    lo, hi = _widen(p, t, lo, hi, 1.0, upper=False)
    return CriticalManifold(p, None, None, lo, hi)


def analysis_manifold(p: OscillatorProblem) -> CriticalManifold:
    """S-shaped manifold when (A1) holds, else the single-branch fallback.

    The fallback applies only when ``f`` has no critical points at all; any
    other (A1) failure propagates.
    """
    try:
        return build_manifold(p)
    except AssumptionA1Violated:
        lo, hi = state_range(p)
        roots, tangent = _scan_roots(lambda y: evaluate(p.f, y, 1), lo, hi)
        if roots or tangent:
            raise
        return single_branch_manifold(p)


def branch(mani: CriticalManifold, p: OscillatorProblem, i: int, t):
    """``(u_i(t), u_i'(t))``; the derivative is None next to a fold."""
    if p is not mani.problem and p != mani.problem:
        raise ValueError("manifold was built for a different problem")
    u = mani.branch(i, t)
    return u, mani.branch_derivative(i, t, u)


def characteristic_roots(p: OscillatorProblem, t: float, y: float) -> tuple[complex, complex]:
    """``+-sqrt(-f'(y)) / a(t)`` of the frozen-time linearization (diagnostic only)."""
    lam = np.sqrt(complex(-evaluate(p.f, y, 1))) / evaluate(p.a, t)
    return lam, -lam


def check_A1_A3(p: OscillatorProblem, mani: CriticalManifold, grid_n: int = 512) -> ValidationReport:
    """Sign conditions on the manifold checked on a state grid.

    A2: ``f'`` (hence ``phi'``) does not vanish away from the folds.
    A3: ``f' < 0`` on the middle piece, ``f' > 0`` on the outer pieces.
    Also checks that ``m`` is strictly monotone so ``phi`` is single valued.
    """
    violations = []
    tg = np.linspace(p.t_begin, p.t_end, grid_n)
    mp = evaluate(p.m, tg, 1)
    if not (np.all(mp > 0) or np.all(mp < 0)):
        k = int(np.argmin(np.abs(mp)))
        violations.append(Violation("m monotone", float(tg[k]), "m' changes sign or vanishes"))

    u_top = mani.branch(1, p.t_begin)
    u_bot = mani.branch(3, p.t_end)
    ends = [u_top, u_bot, mani.branch(1, mani.t_max), mani.branch(3, mani.t_min)]
    y = np.linspace(min(ends), max(ends), grid_n)
    fp = evaluate(p.f, y, 1)
    span = y[-1] - y[0]
    away = (np.abs(y - mani.y_min) > 1e-3 * span) & (np.abs(y - mani.y_max) > 1e-3 * span)
    flat = away & (np.abs(fp) <= 1e-10)
    if flat.any():
        k = np.flatnonzero(flat)[0]
        violations.append(Violation("A2", float(y[k]), "phi'(y)=0 away from the folds"))
    middle = (y > mani.y_min) & (y < mani.y_max) & away
    outer = ((y < mani.y_min) | (y > mani.y_max)) & away
    bad_mid = middle & (fp >= 0)
    bad_out = outer & (fp <= 0)
    if bad_mid.any():
        k = np.flatnonzero(bad_mid)[0]
        violations.append(Violation("A3", float(y[k]), f"df/dy={fp[k]:.3g} >= 0 on the middle piece"))
    if bad_out.any():
        k = np.flatnonzero(bad_out)[0]
        violations.append(Violation("A3", float(y[k]), f"df/dy={fp[k]:.3g} <= 0 on an outer piece"))

    diag = {}
    for i, (lo, hi) in mani.branch_domains.items():
        tm = 0.5 * (lo + hi)
        lam, _ = characteristic_roots(p, tm, mani.branch(i, tm))
        diag[f"u{i}"] = {"t": tm, "lambda_re": lam.real, "lambda_im": lam.imag}
    extra = {
        "A1": "passed",
        "A2": "failed" if any(v.check == "A2" for v in violations) else "passed",
        "A3": "failed" if any(v.check == "A3" for v in violations) else "passed",
        "manifold": mani.to_dict(),
        "characteristic_roots": diag,
    }
    return ValidationReport(tuple(violations), extra)


@dataclass(frozen=True)
class ChartPartition:
    """Compact time charts strictly between the folds.

    Single-branch manifolds get one chart ``K1`` covering the whole interval.
    """

    K1: tuple[float, float]
    K2: tuple[float, float] | None
    K3: tuple[float, float] | None
    margin: float

    def charts(self) -> list[tuple[str, int, tuple[float, float]]]:
        """``(chart_id, branch index, interval)`` for each chart present."""
        out = [("K1", 1, self.K1)]
        if self.K2 is not None:
            out.append(("K2", 2, self.K2))
        if self.K3 is not None:
            out.append(("K3", 3, self.K3))
        return out

    def get(self, chart_id: str) -> tuple[int, tuple[float, float]]:
        for cid, i, k in self.charts():
            if cid == chart_id:
                return i, k
        raise KeyError(chart_id)

    def to_dict(self) -> dict:
        return {"margin": self.margin, **{cid: list(k) for cid, _, k in self.charts()}}


def build_charts(mani: CriticalManifold, margin_fraction: float = 0.05) -> ChartPartition:
    if not 0.0 < margin_fraction < 0.25:
        raise ValueError("margin_fraction must lie in (0, 0.25)")
    p = mani.problem
    margin = margin_fraction * (p.t_end - p.t_begin)
    if mani.single_branch:
        return ChartPartition((p.t_begin, p.t_end), None, None, margin)
    k1 = (p.t_begin, mani.t_min - margin)
    k2 = (mani.t_min + margin, mani.t_max - margin)
    k3 = (mani.t_max + margin, p.t_end)
    for name, (lo, hi) in (("K1", k1), ("K2", k2), ("K3", k3)):
        if not lo < hi:
            raise ChartMarginTooLarge(
                f"chart {name}=[{lo:.6g}, {hi:.6g}] is empty for margin {margin:.6g}"
            )
    return ChartPartition(k1, k2, k3, margin)
