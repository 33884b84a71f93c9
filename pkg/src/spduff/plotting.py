"""SVG figures: manifold, frozen-time phase portraits and chart oscillations.

Figures are drawn on bare :class:`matplotlib.figure.Figure` objects (no
pyplot state) and saved without a date stamp and with a fixed hash salt, so
repeated runs produce identical files.
"""
from __future__ import annotations

import math

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .energy import PotentialContext, base_level, potential, turning_points
from .functions import evaluate
from .manifold import ChartPartition, CriticalManifold

__all__ = ["plot_manifold", "plot_phase", "plot_oscillations", "phase_times", "save_svg"]

matplotlib.rcParams["svg.hashsalt"] = "spduff"
_BRANCH_STYLE = {1: ("tab:blue", "u1"), 2: ("tab:red", "u2"), 3: ("tab:green", "u3")}


def save_svg(fig: Figure, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})


def phase_times(mani: CriticalManifold) -> list[tuple[str, float]]:
    """``(label, t)`` pairs for the portrait times inside the interval."""
    p = mani.problem
    cand = [("-0.5", -0.5)]
    if not mani.single_branch:
        cand.append(("min", mani.t_min))
    cand.append(("0", 0.0))
    if not mani.single_branch:
        cand.append(("max", mani.t_max))
    cand.append(("0.5", 0.5))
    return [(lab, t) for lab, t in cand if p.t_begin <= t <= p.t_end]


def plot_manifold(mani: CriticalManifold, charts: ChartPartition, path) -> None:
    """Branches of ``f(y) = m(t)`` over the interval, folds marked, charts shaded."""
    fig = Figure(figsize=(6.0, 4.0))
    ax = fig.add_subplot(1, 1, 1)
    for cid, _, (lo, hi) in charts.charts():
        ax.axvspan(lo, hi, color="0.92", zorder=0)
        ax.text(0.5 * (lo + hi), 1.0, cid, transform=ax.get_xaxis_transform(), ha="center", va="bottom")
    for i, (lo, hi) in mani.branch_domains.items():
        t = np.linspace(lo, hi, 400)
        color, label = _BRANCH_STYLE[i]
        ax.plot(t, mani.branch(i, t), color=color, label=label)
    if not mani.single_branch:
        for fold in (mani.fold_min, mani.fold_max):
            ax.plot([fold.t_at_fold], [fold.y_at_fold], "ko", ms=4)
    ax.set_xlabel("t")
    ax.set_ylabel("y")
    ax.legend(loc="best")
    save_svg(fig, path)


def plot_phase(ctx: PotentialContext, mani: CriticalManifold, t_star: float, path) -> None:
    """Three panels at frozen ``t``: ``f - m``, ``V`` with the level, and the level curve."""
    p = ctx.problem
    level = float(base_level(ctx, mani, t_star)) + ctx.delta
    tp = turning_points(ctx, t_star, level)
    pad = 0.25 * (tp.y_right - tp.y_left)
    y = np.linspace(tp.y_left - pad, tp.y_right + pad, 801)
    g = evaluate(p.f, y) - evaluate(p.m, t_star)
    V = potential(ctx, t_star, y)
    fig = Figure(figsize=(12.0, 3.6))
    ax1, ax2, ax3 = (fig.add_subplot(1, 3, k) for k in (1, 2, 3))
    ax1.plot(y, g, color="k")
    ax1.axhline(0.0, color="0.6", lw=0.8)
    ax1.set_xlabel("y")
    ax1.set_ylabel("f(y) - m(t)")
    ax2.plot(y, V, color="k")
    ax2.axhline(level, color="tab:orange", ls="--", label="H0 + delta")
    ax2.set_xlabel("y")
    ax2.set_ylabel("V(t, y)")
    ax2.legend(loc="best")
    gap = 2.0 * (level - V)
    w = np.where(gap >= 0, np.sqrt(np.maximum(gap, 0.0)), np.nan)
    ax3.plot(y, w, color="tab:orange")
    ax3.plot(y, -w, color="tab:orange")
    ax3.axhline(0.0, color="0.6", lw=0.8)
    ax3.set_xlabel("y")
    ax3.set_ylabel("w")
    fig.suptitle(f"t = {t_star:.6g}")
    fig.tight_layout()
    save_svg(fig, path)


def plot_oscillations(ctx: PotentialContext, mani: CriticalManifold, reports, path) -> None:
    """Chart trajectories with their branch and the ``H0 + delta`` turning-point envelopes."""
    fig = Figure(figsize=(8.0, 4.5))
    ax = fig.add_subplot(1, 1, 1)
    for rep in reports:
        traj = rep.trajectory
        if traj is None:
            continue
        lo, hi = traj.span
        n = max(2000, 40 * traj.n_steps)
        t = np.linspace(lo, hi, n)
        y, _ = traj(t)
        ax.plot(t, y, color="0.3", lw=0.5)
        i = {"K1": 1, "K2": 2, "K3": 3}[rep.chart_id]
        color, label = _BRANCH_STYLE[i]
        ts = np.linspace(lo, hi, 200)
        ax.plot(ts, mani.branch(i, ts), color=color, label=f"{label} ({rep.chart_id})")
        level = base_level(ctx, mani, ts) + ctx.delta
        tps = [turning_points(ctx, float(s), float(h)) for s, h in zip(ts, level)]
        ax.plot(ts, [q.y_right for q in tps], color=color, ls="--", lw=0.8)
        ax.plot(ts, [q.y_left for q in tps], color=color, ls="--", lw=0.8)
    eps = reports[0].epsilon if reports else math.nan
    ax.set_title(f"eps = {eps:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("y")
    ax.legend(loc="best", fontsize="small")
    save_svg(fig, path)
