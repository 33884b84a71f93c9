"""``spduff`` command-line entry point.

Exit codes: 0 success, 1 certificate or domain failure, 2 usage error.
"""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from .analysis import CSV_FIELDS, run_sweep
from .config import RunConfig, parse_config
from .energy import action_frequency, base_level, check_A4, make_context, orbit_intervals, turning_points
from .errors import AssumptionA1Violated, EpsilonTooLarge, SpduffError, UsageError
from .functions import evaluate
from .manifold import analysis_manifold, build_charts, build_manifold, check_A1_A3
from .output import SCHEMA_VERSION, ensure_dir, to_json, write_csv, write_text
from .plotting import phase_times, plot_manifold, plot_oscillations, plot_phase
from .polar import EPS_CANDIDATES, compute_constants, largest_admissible_epsilon
from .problem import OscillatorProblem, ValidationReport, Violation, builtin, load_problem, validate
from .simulate import SolverOptions, detect_crossings, energy_along, integrate, standard_initial_condition

__all__ = ["main", "run"]

MANIFOLD_SAMPLES = 201
BRANCH_SAMPLES = 64


def _problem(cfg: RunConfig) -> OscillatorProblem:
    if cfg.builtin is not None:
        return builtin(cfg.builtin)
    try:
        return load_problem(cfg.problem)
    except OSError as exc:
        raise UsageError(f"cannot read problem {cfg.problem}: {exc.strerror}") from None
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"invalid problem file {cfg.problem}: {exc}") from None


def _opts(cfg: RunConfig) -> SolverOptions:
    return SolverOptions(cfg.rel_tol, cfg.abs_tol, cfg.max_step_fast)


def _document(cfg: RunConfig, p: OscillatorProblem, **body) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": cfg.command, "problem": p.name, **body}


class _Result:
    """What a command hands back to :func:`run`: a JSON document and an exit code."""

    def __init__(self, doc: dict, code: int = 0):
        self.doc, self.code = doc, code


def manifold_rows(mani, p: OscillatorProblem, n: int = MANIFOLD_SAMPLES) -> list[list]:
    """``t, u1, u2, u3`` on a uniform grid; ``None`` outside a branch domain."""
    rows = []
    domains = mani.branch_domains
    for t in np.linspace(p.t_begin, p.t_end, n):
        t = float(t)
        row = [t]
        for i in (1, 2, 3):
            d = domains.get(i)
            row.append(mani.branch(i, t) if d is not None and d[0] <= t <= d[1] else None)
        rows.append(row)
    return rows


def cmd_check(cfg: RunConfig, p: OscillatorProblem) -> _Result:
    report = validate(p)
    mani = None
    if report.passed:
        try:
            mani = build_manifold(p)
        except AssumptionA1Violated as exc:
            report = report.merged(ValidationReport((Violation("A1", None, str(exc)),), {"A1": "failed"}))
    if mani is not None:
        report = report.merged(check_A1_A3(p, mani))
        charts = build_charts(mani, cfg.margin_fraction)
        ctx = make_context(p, cfg.delta)
        report = report.merged(check_A4(ctx, mani, charts))
        report = report.merged(ValidationReport((), {"charts": charts.to_dict()}))
        # sampled branch residuals, jittered by the seed
        rng = np.random.default_rng(cfg.seed)
        worst = 0.0
        for i, (lo, hi) in mani.branch_domains.items():
            ts = rng.uniform(lo, hi, BRANCH_SAMPLES)
            u = mani.branch(i, ts)
            worst = max(worst, float(np.max(np.abs(evaluate(p.f, u) - evaluate(p.m, ts)))))
        extra = {"branch_residual_max": worst, "seed": cfg.seed}
        bad = () if worst <= 1e-8 else (Violation("branch residual", None, f"|f(u) - m| = {worst:.3g}"),)
        report = report.merged(ValidationReport(bad, extra))
    if cfg.out is not None:
        out = ensure_dir(cfg.out)
        try:
            shown = mani if mani is not None else analysis_manifold(p)
        except SpduffError:
            shown = None
        if shown is not None:
            write_csv(out / "manifold.csv", ("t", "u1", "u2", "u3"), manifold_rows(shown, p))
    doc = _document(cfg, p, report=report.to_dict())
    if cfg.out is not None:
        write_text(Path(cfg.out) / "check.json", to_json(doc))
    return _Result(doc, 0 if report.passed else 1)


def cmd_simulate(cfg: RunConfig, p: OscillatorProblem) -> _Result:
    eps = cfg.epsilons[0]
    mani = analysis_manifold(p)
    t0 = p.t_begin if cfg.t0 is None else cfg.t0
    t1 = p.t_end if cfg.t1 is None else cfg.t1
    if cfg.y0 is None:
        ctx = make_context(p, cfg.delta)
        y0, w0 = standard_initial_condition(ctx, mani, t0, "right")
        if cfg.w0 is not None:
            w0 = cfg.w0
    else:
        y0, w0 = cfg.y0, (0.0 if cfg.w0 is None else cfg.w0)
    try:
        traj = integrate(p, eps, y0, w0, (t0, t1), _opts(cfg))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    lo, hi = traj.span
    events = []
    tangential = 0
    for i, (dlo, dhi) in mani.branch_domains.items():
        a_, b_ = max(lo, dlo), min(hi, dhi)
        if a_ < b_:
            res = detect_crossings(traj, mani, i, (a_, b_))
            events.extend(res.events)
            tangential += res.tangential
    events.sort(key=lambda e: (e.t_star, e.branch_index))
    order = np.argsort(traj.t, kind="stable")
    t_nodes = traj.t[order]
    es = energy_along(traj, p, t=t_nodes)
    y, w = traj.y[order], traj.w[order]
    out = ensure_dir(cfg.out or ".")
    write_csv(out / "trajectory.csv", ("t", "y", "w", "H"), zip(t_nodes, y, w, es.H))
    write_csv(
        out / "events.csv",
        ("branch", "t_star", "direction", "residual"),
        ((e.branch_index, e.t_star, e.direction, e.residual) for e in events),
    )
    doc = _document(
        cfg,
        p,
        epsilon=eps,
        span=[t0, t1],
        initial_condition={"y0": y0, "w0": w0},
        steps=traj.n_steps,
        events=len(events),
        tangential_zeros=tangential,
        max_energy_residual=float(np.max(np.abs(es.residual))),
    )
    write_text(out / "simulate.json", to_json(doc))
    return _Result(doc)


def cmd_energy(cfg: RunConfig, p: OscillatorProblem) -> _Result:
    t = 0.0 if cfg.t is None else cfg.t
    if not p.t_begin <= t <= p.t_end:
        raise UsageError(f"t={t!r} lies outside [{p.t_begin}, {p.t_end}]")
    ctx = make_context(p, cfg.delta)
    mani = analysis_manifold(p)
    level = float(base_level(ctx, mani, t)) + cfg.delta if cfg.level is None else cfg.level
    tp = turning_points(ctx, t, level)
    body = {
        "t": t,
        "level": level,
        "turning_points": tp.to_dict(),
        "orbit_intervals": [list(iv) for iv in orbit_intervals(ctx, t, level)],
    }
    code = 0
    try:
        action, omega = action_frequency(ctx, t, level, cfg.well)
        body["action_frequency"] = {"well": cfg.well, "I": action, "omega": omega}
    except SpduffError as exc:
        body["action_frequency"] = {"well": cfg.well, "error": type(exc).__name__, "message": str(exc)}
        code = 1
    if not mani.single_branch:
        a4 = check_A4(ctx, mani, build_charts(mani, cfg.margin_fraction))
        body["A4"] = a4.to_dict()
    doc = _document(cfg, p, **body)
    if cfg.out is not None:
        write_text(ensure_dir(cfg.out) / "energy.json", to_json(doc))
    return _Result(doc, code)


def cmd_constants(cfg: RunConfig, p: OscillatorProblem) -> _Result:
    eps = cfg.epsilons[0]
    ctx = make_context(p, cfg.delta)
    mani = analysis_manifold(p)
    charts = build_charts(mani, cfg.margin_fraction)
    eps0 = {"candidates": list(EPS_CANDIDATES), "largest_admissible": largest_admissible_epsilon(ctx, mani, charts)}
    try:
        consts = compute_constants(ctx, mani, charts, eps)
        body = {"constants": [c.to_dict() for c in consts]}
        code = 0
    except EpsilonTooLarge as exc:
        body = {"error": "EpsilonTooLarge", "message": str(exc), "witness": exc.witness}
        code = 1
    doc = _document(cfg, p, epsilon=eps, delta=cfg.delta, epsilon0=eps0, **body)
    if cfg.out is not None:
        write_text(ensure_dir(cfg.out) / "constants.json", to_json(doc))
    return _Result(doc, code)


def _phase_name(label: str) -> str:
    return f"phase_t{label}.svg"


def cmd_sweep(cfg: RunConfig, p: OscillatorProblem) -> _Result:
    out = ensure_dir(cfg.out or ".")
    sweep = run_sweep(p, cfg.epsilons, cfg.delta, _opts(cfg), cfg.margin_fraction)
    write_csv(out / "sweep.csv", CSV_FIELDS, (r.row() for r in sweep.reports))
    write_csv(
        out / "ratios.csv",
        ("chart", "epsilon", "epsilon_half", "ratio"),
        sweep.ratios,
    )
    doc = _document(
        cfg,
        p,
        delta=sweep.delta,
        epsilons=list(sweep.epsilons),
        passed=sweep.passed,
        reports=[r.to_dict() for r in sweep.reports],
        ratios=sweep.ratios,
        constants={format(e, ".17g"): [c.to_dict() for c in cs] for e, cs in sweep.constants.items()},
        errors={format(e, ".17g"): msg for e, msg in sweep.errors.items()},
    )
    write_text(out / "sweep.json", to_json(doc))
    write_text(out / "config.json", to_json(cfg.to_dict()))

    mani = analysis_manifold(p)
    charts = build_charts(mani, cfg.margin_fraction)
    ctx = make_context(p, cfg.delta)
    plot_manifold(mani, charts, out / "manifold.svg")
    for label, t in phase_times(mani):
        plot_phase(ctx, mani, t, out / _phase_name(label))
    smallest = [r for r in sweep.reports if r.epsilon == min(sweep.epsilons)]
    if smallest:
        plot_oscillations(ctx, mani, smallest, out / "oscillations.svg")
    return _Result(doc, 0 if sweep.passed else 1)


def cmd_phase_portrait(cfg: RunConfig, p: OscillatorProblem) -> _Result:
    t = 0.0 if cfg.t is None else cfg.t
    if not p.t_begin <= t <= p.t_end:
        raise UsageError(f"t={t!r} lies outside [{p.t_begin}, {p.t_end}]")
    out = ensure_dir(cfg.out or ".")
    mani = analysis_manifold(p)
    ctx = make_context(p, cfg.delta)
    path = out / _phase_name(format(t, "g"))
    plot_phase(ctx, mani, t, path)
    return _Result(_document(cfg, p, t=t, figure=str(path)))


COMMANDS = {
    "check": cmd_check,
    "simulate": cmd_simulate,
    "energy": cmd_energy,
    "constants": cmd_constants,
    "sweep": cmd_sweep,
    "phase-portrait": cmd_phase_portrait,
}


def run(cfg: RunConfig) -> tuple[dict, int]:
    """Execute a resolved configuration; returns the JSON document and exit code."""
    p = _problem(cfg)
    result = COMMANDS[cfg.command](cfg, p)
    return result.doc, result.code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        doc, code = run(cfg)
    except UsageError as exc:
        print(f"spduff: usage error: {exc}", file=sys.stderr)
        return 2
    except SpduffError as exc:
        err = {"schema_version": SCHEMA_VERSION, "error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, EpsilonTooLarge):
            err["witness"] = exc.witness
        sys.stdout.write(to_json(err))
        print(f"spduff: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(to_json(doc))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
