"""Per-chart oscillation reports and epsilon sweeps.

For every chart one trajectory is started on the level ``H0 + delta`` with
``w = 0`` and integrated across the chart. K1 and K2 start at their left end
from the right turning point; K3 starts at its right end (the end away from
the fold, mirroring K1) from the left turning point and runs backward. The crossings of the chart's branch give the
zero count ``z`` and the largest spacing ``s_max``, which is compared with
the bound ``eps pi / c``. Window extrema are compared with the turning points
of the measured energy, and those with the turning points of ``H0 + delta``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .energy import PotentialContext, base_level, make_context, potential, turning_points
from .errors import NeedsSweep, SpduffError
from .manifold import ChartPartition, CriticalManifold, analysis_manifold, build_charts
from .polar import ChartConstants, compute_constants, gamma_rate, trajectory_polar
from .problem import OscillatorProblem
from .simulate import (
    SolverOptions,
    Trajectory,
    detect_crossings,
    energy_along,
    integrate,
    standard_initial_condition,
)

__all__ = [
    "ChartOscillationReport",
    "SweepResult",
    "oscillation_report",
    "run_sweep",
    "envelope_convergence",
    "DEFAULT_EPS",
    "worker_count",
]

DEFAULT_EPS = (0.02, 0.01, 0.005)
ENVELOPE_SAMPLES = 201
CSV_FIELDS = (
    "epsilon",
    "chart",
    "z",
    "s_max",
    "bound",
    "envelope_sup_error",
    "converged_envelope_error",
)


@dataclass(frozen=True)
class ChartOscillationReport:
    """Oscillation statistics of one chart trajectory.

    ``s_max`` is the largest spacing between successive zeros of
    ``y - u_i``; with fewer than two zeros it is the chart length.
    """

    chart_id: str
    epsilon: float
    zero_count: int
    max_spacing: float
    bound: float
    envelope_sup_error: float
    converged_envelope_error: float
    c: float
    crossings: tuple = field(default=(), repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)
    trajectory: Trajectory | None = field(default=None, repr=False, compare=False)

    @property
    def passed(self) -> bool:
        return self.max_spacing <= self.bound

    def row(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "chart": self.chart_id,
            "z": self.zero_count,
            "s_max": self.max_spacing,
            "bound": self.bound,
            "envelope_sup_error": self.envelope_sup_error,
            "converged_envelope_error": self.converged_envelope_error,
        }

    def to_dict(self) -> dict:
        return {**self.row(), "c": self.c, "passed": self.passed, "diagnostics": self.diagnostics}


def _window_extrema(traj: Trajectory, times: np.ndarray, lo: float, hi: float):
    """Turning times (``w = 0``) of the largest and smallest ``y`` on ``[lo, hi]``.

    An extremum clamped to a window edge without ``w`` vanishing there (a
    window cut by the chart end) is not a turning point and is skipped.
    """
    inside = times[(times > lo) & (times < hi)]
    ts = np.concatenate([[lo], inside, [hi]])
    y, _ = traj(ts)
    out = []
    for k, pick in ((int(np.argmax(y)), "max"), (int(np.argmin(y)), "min")):
        for a_, b_ in ((ts[max(k - 1, 0)], ts[k]), (ts[k], ts[min(k + 1, len(ts) - 1)])):
            if not a_ < b_:
                continue
            wa, wb = traj(a_)[1], traj(b_)[1]
            if wa == 0.0:
                out.append((pick, float(a_)))
            elif wb == 0.0:
                out.append((pick, float(b_)))
            elif wa * wb < 0:
                out.append((pick, float(brentq(lambda s: traj(s)[1], a_, b_, xtol=1e-15, rtol=1e-15))))
            else:
                continue
            break
    return out


def _chart_run(
    ctx: PotentialContext,
    mani: CriticalManifold,
    chart_id: str,
    i: int,
    chart: tuple[float, float],
    eps: float,
    const: ChartConstants,
    opts: SolverOptions,
) -> ChartOscillationReport:
    p = ctx.problem
    lo, hi = chart
    if chart_id == "K3":
        # mirror of K1: start at the fold-free end from the outer turning point
        t_ic, span, side = hi, (hi, lo), "left"
    else:
        t_ic, span, side = lo, (lo, hi), "right"
    y0, w0 = standard_initial_condition(ctx, mani, t_ic, side)
    traj = integrate(p, eps, y0, w0, span, opts)
    crossings = detect_crossings(traj, mani, i, chart)
    t_star = np.array([e.t_star for e in crossings])
    z = len(t_star)
    s_max = float(np.max(np.diff(t_star))) if z >= 2 else hi - lo
    bound = eps * math.pi / const.c

    # envelope: each window between successive crossings holds one extremum
    node_t = traj.t
    half = 0.5 * np.diff(node_t)
    fine = np.sort(np.concatenate([node_t, node_t[:-1] + half]))
    env_err = 0.0
    edges = np.concatenate([[lo], t_star, [hi]])
    for a_, b_ in zip(edges[:-1], edges[1:]):
        if not b_ > a_:
            continue
        ym, _ = traj(0.5 * (a_ + b_))
        above = ym >= mani.branch(i, 0.5 * (a_ + b_))
        for pick, te in _window_extrema(traj, fine, a_, b_):
            if (pick == "max") != above:
                continue
            ye, we = traj(te)
            H = 0.5 * we * we + potential(ctx, te, ye)
            tp = turning_points(ctx, te, H)
            ref = tp.y_right if above else tp.y_left
            env_err = max(env_err, abs(ye - ref))

    # converged envelope: turning points of the measured energy vs those of H0 + delta
    ts = np.linspace(lo, hi, ENVELOPE_SAMPLES)
    es = energy_along(traj, p, t=ts)
    level0 = base_level(ctx, mani, ts) + ctx.delta
    conv_err = 0.0
    sign_ok = True
    for t, H, h0 in zip(ts, es.H, level0):
        tp_e = turning_points(ctx, t, H)
        tp_0 = turning_points(ctx, t, h0)
        dr, dl = tp_e.y_right - tp_0.y_right, tp_e.y_left - tp_0.y_left
        conv_err = max(conv_err, abs(dr), abs(dl))
        if abs(H - h0) > 1e-9 and (np.sign(dr) != np.sign(H - h0) or np.sign(dl) != -np.sign(H - h0)):
            sign_ok = False

    # phase and radius along the run
    r, gam = trajectory_polar(traj, mani, i, fine)
    y, w = traj(fine)
    rate = gamma_rate(p, mani, i, eps, fine, (r, gam))
    directions = [e.direction for e in crossings]
    diagnostics = {
        "initial_condition": [t_ic, y0, w0],
        "tangential_zeros": crossings.tangential,
        "alternating": all(x != y_ for x, y_ in zip(directions, directions[1:])),
        "gamma_increasing": bool(np.all(np.diff(gam) > 0)),
        "min_gamma_rate_over_bound": float(np.min(rate) * eps / const.c),
        "gamma_rate_above_bound": bool(np.min(rate) * eps >= const.c),
        "r_min_observed": float(np.min(r)),
        "r_min_constant": const.r_min,
        "r_above_r_min": bool(np.min(r) >= const.r_min * (1.0 - 1e-9)),
        "energy_deviation": [float(np.min(es.H - level0)), float(np.max(es.H - level0))],
        "envelope_sign_consistent": sign_ok,
        "max_energy_residual": float(np.max(np.abs(es.residual))),
        "steps": traj.n_steps,
    }
    return ChartOscillationReport(
        chart_id,
        float(eps),
        z,
        s_max,
        bound,
        env_err,
        conv_err,
        const.c,
        tuple(crossings),
        diagnostics,
        traj,
    )


def oscillation_report(
    p: OscillatorProblem,
    mani: CriticalManifold,
    charts: ChartPartition,
    eps: float,
    delta: float,
    opts: SolverOptions | None = None,
    constants: list[ChartConstants] | None = None,
) -> list[ChartOscillationReport]:
    """One report per chart; computes the chart constants unless given."""
    opts = opts or SolverOptions()
    ctx = make_context(p, delta)
    if constants is None:
        constants = compute_constants(ctx, mani, charts, eps)
    by_id = {c.chart_id: c for c in constants}
    return [
        _chart_run(ctx, mani, cid, i, k, eps, by_id[cid], opts)
        for cid, i, k in charts.charts()
    ]


@dataclass(frozen=True)
class SweepResult:
    problem: str
    delta: float
    epsilons: tuple[float, ...]
    reports: tuple[ChartOscillationReport, ...]
    errors: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict, repr=False)

    @property
    def ratios(self) -> list[dict]:
        """``z(eps/2) / z(eps)`` per chart for adjacent halvings."""
        out = []
        for big, small in zip(self.epsilons, self.epsilons[1:]):
            if not math.isclose(small, 0.5 * big, rel_tol=1e-12):
                continue
            for rb in self.for_epsilon(big):
                rs = [r for r in self.for_epsilon(small) if r.chart_id == rb.chart_id]
                if rs:
                    ratio = rs[0].zero_count / rb.zero_count if rb.zero_count else math.inf
                    out.append({"chart": rb.chart_id, "epsilon": big, "epsilon_half": small, "ratio": ratio})
        return out

    def for_epsilon(self, eps: float) -> list[ChartOscillationReport]:
        return [r for r in self.reports if r.epsilon == eps]

    def chart_ids(self) -> list[str]:
        seen = []
        for r in self.reports:
            if r.chart_id not in seen:
                seen.append(r.chart_id)
        return seen

    @property
    def passed(self) -> bool:
        return not self.errors and all(r.passed for r in self.reports)


def worker_count(n_tasks: int) -> int:
    """Workers for independent runs; ``SPDUFF_THREADS`` caps the default."""
    cap = os.environ.get("SPDUFF_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, min(n, n_tasks))


def _sweep_one(args):
    p, mani, charts, eps, delta, opts = args
    try:
        ctx = make_context(p, delta)
        consts = compute_constants(ctx, mani, charts, eps)
        reports = oscillation_report(p, mani, charts, eps, delta, opts, consts)
        return eps, reports, consts, None
    except SpduffError as exc:
        return eps, [], [], f"{type(exc).__name__}: {exc}"


def run_sweep(
    p: OscillatorProblem,
    eps_list=DEFAULT_EPS,
    delta: float = 0.05,
    opts: SolverOptions | None = None,
    margin_fraction: float = 0.05,
    workers: int | None = None,
) -> SweepResult:
    """Reports for each epsilon, sharing one chart partition.

    A failing epsilon is recorded under ``errors`` and does not stop the
    sweep. Results are ordered by the given (strictly decreasing) epsilons.
    """
    eps_list = tuple(float(e) for e in eps_list)
    if not eps_list or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("epsilon list must be non-empty and strictly decreasing")
    opts = opts or SolverOptions()
    make_context(p, delta)  # validates delta before any work
    mani = analysis_manifold(p)
    charts = build_charts(mani, margin_fraction)
    tasks = [(p, mani, charts, e, delta, opts) for e in eps_list]
    n = workers if workers is not None else worker_count(len(tasks))
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    reports, errors, consts = [], {}, {}
    for eps, reps, cs, err in results:
        reports.extend(reps)
        consts[eps] = cs
        if err is not None:
            errors[eps] = err
    return SweepResult(p.name, float(delta), eps_list, tuple(reports), errors, consts)


def envelope_convergence(sweep: SweepResult, chart: str) -> list[tuple[float, float]]:
    """``(eps, converged_envelope_error)`` for ``chart`` in sweep order."""
    out = [(r.epsilon, r.converged_envelope_error) for r in sweep.reports if r.chart_id == chart]
    if len(out) < 2:
        raise NeedsSweep(f"need at least two epsilon values for chart {chart}")
    return out
