"""Run configuration: command-line flags layered over an optional JSON file."""
from __future__ import annotations

import argparse
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .analysis import DEFAULT_EPS
from .energy import DEFAULT_DELTA
from .errors import UsageError
from .problem import BUILTINS
from .simulate import EPS_MAX

__all__ = ["RunConfig", "COMMANDS", "build_parser", "parse_config", "load_config_file"]

COMMANDS = ("check", "simulate", "energy", "constants", "sweep", "phase-portrait")
SINGLE_EPS = ("simulate", "constants")
WELLS = ("outer", "left", "right")
DEFAULT_SINGLE_EPS = 0.01


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings of one CLI invocation.

    Exactly one of ``problem`` (a path) and ``builtin`` (an instance name)
    is set. Fields that only some commands read default to ``None``.
    """

    command: str
    problem: str | None = None
    builtin: str | None = None
    epsilons: tuple[float, ...] = DEFAULT_EPS
    delta: float = DEFAULT_DELTA
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step_fast: float = 0.1
    margin_fraction: float = 0.05
    out: str | None = None
    seed: int = 0
    t: float | None = None
    level: float | None = None
    well: str = "outer"
    t0: float | None = None
    t1: float | None = None
    y0: float | None = None
    w0: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epsilons"] = list(self.epsilons)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        _check_keys(data)
        if "command" not in data:
            raise UsageError("config is missing 'command'")
        cfg = cls(**{k: _coerce(k, v) for k, v in data.items()})
        return validate_config(cfg)


_FIELDS = {f.name for f in fields(RunConfig)}
_FLOAT_FIELDS = {"delta", "rel_tol", "abs_tol", "max_step_fast", "margin_fraction", "t", "level", "t0", "t1", "y0", "w0"}


def _check_keys(data: dict) -> None:
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    for key in data:
        if key not in _FIELDS:
            raise UsageError(f"unknown config key {key!r}")


def _coerce(key: str, value):
    if value is None:
        return None
    try:
        if key == "epsilons":
            if isinstance(value, (int, float)):
                value = [value]
            return tuple(float(v) for v in value)
        if key in _FLOAT_FIELDS:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if key == "seed":
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        return str(value)
    except (TypeError, ValueError):
        raise UsageError(f"invalid value for {key!r}: {value!r}") from None


def validate_config(cfg: RunConfig) -> RunConfig:
    """Range checks; returns ``cfg`` with command-dependent normalisation."""
    if cfg.command not in COMMANDS:
        raise UsageError(f"unknown command {cfg.command!r}")
    if (cfg.problem is None) == (cfg.builtin is None):
        raise UsageError("give exactly one of a problem file or --builtin")
    if cfg.builtin is not None and cfg.builtin not in BUILTINS:
        raise UsageError(f"unknown builtin {cfg.builtin!r} (choose from {', '.join(BUILTINS)})")
    eps = cfg.epsilons
    if not eps:
        raise UsageError("at least one epsilon is required")
    if len(set(eps)) != len(eps):
        raise UsageError(f"conflicting epsilon values: {list(eps)} contains duplicates")
    for e in eps:
        if not (math.isfinite(e) and 0.0 < e <= EPS_MAX):
            raise UsageError(f"epsilon {e!r} must lie in (0, {EPS_MAX}]")
    if cfg.command in SINGLE_EPS and len(eps) != 1:
        raise UsageError(f"conflicting epsilon values for {cfg.command}: expected one, got {list(eps)}")
    eps = tuple(sorted(eps, reverse=True))
    if not (math.isfinite(cfg.delta) and cfg.delta > 0.0):
        raise UsageError(f"delta must be > 0 (got {cfg.delta!r})")
    for name in ("rel_tol", "abs_tol"):
        v = getattr(cfg, name)
        if not 0.0 < v <= 1e-2:
            raise UsageError(f"{name} must lie in (0, 1e-2] (got {v!r})")
    if not cfg.max_step_fast > 0.0:
        raise UsageError("max_step_fast must be positive")
    if not 0.0 < cfg.margin_fraction < 0.25:
        raise UsageError("margin_fraction must lie in (0, 0.25)")
    if cfg.seed < 0:
        raise UsageError("seed must be non-negative")
    if cfg.well not in WELLS:
        raise UsageError(f"well must be one of {', '.join(WELLS)}")
    for name in _FLOAT_FIELDS:
        v = getattr(cfg, name)
        if v is not None and not math.isfinite(v):
            raise UsageError(f"{name} must be finite")
    return replace(cfg, epsilons=eps)


def load_config_file(path) -> dict:
    try:
        with Path(path).open() as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    _check_keys(data)
    return data


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _eps_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad epsilon list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spduff", description="Fast oscillations of eps^2 (a^2 y')' + f(y) = m(t).")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    helps = {
        "check": "validate a problem and check the manifold assumptions",
        "simulate": "integrate one trajectory and record branch crossings",
        "energy": "turning points and action/frequency at a frozen time",
        "constants": "per-chart rate constants for one epsilon",
        "sweep": "oscillation certificates over an epsilon grid, with figures",
        "phase-portrait": "frozen-time phase portrait figure",
    }
    S = argparse.SUPPRESS
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name], description=helps[name], argument_default=S)
        sp.add_argument("problem", nargs="?", help="problem JSON file")
        sp.add_argument("--builtin", help=f"builtin instance ({', '.join(BUILTINS)})")
        sp.add_argument("--config", help="JSON file of settings; flags override it")
        sp.add_argument(
            "--eps",
            type=_eps_list,
            action="append",
            help=f"comma-separated epsilons (default {','.join(map(str, DEFAULT_EPS))} "
            f"for sweep, {DEFAULT_SINGLE_EPS} otherwise)",
        )
        sp.add_argument("--delta", type=float, help=f"energy offset above H0 (default {DEFAULT_DELTA})")
        sp.add_argument("--rel-tol", dest="rel_tol", type=float, help="integrator relative tolerance (default 1e-9)")
        sp.add_argument("--abs-tol", dest="abs_tol", type=float, help="integrator absolute tolerance (default 1e-11)")
        sp.add_argument("--max-step", dest="max_step_fast", type=float, help="largest step in fast time (default 0.1)")
        sp.add_argument(
            "--margin-fraction", dest="margin_fraction", type=float, help="chart margin around folds (default 0.05)"
        )
        sp.add_argument("--out", help="output directory (default: stdout only for check/energy/constants, else .)")
        sp.add_argument("--seed", type=int, help="seed for sampled checks (default 0)")
        if name in ("energy", "phase-portrait"):
            sp.add_argument("--t", type=float, help="frozen time (default 0)")
        if name == "energy":
            sp.add_argument("--level", type=float, help="energy level (default H0(t) + delta)")
            sp.add_argument("--well", help="orbit for action/frequency: outer, left or right (default outer)")
        if name == "simulate":
            sp.add_argument("--t0", type=float, help="start time (default t_begin)")
            sp.add_argument("--t1", type=float, help="end time, may precede t0 (default t_end)")
            sp.add_argument("--y0", type=float, help="initial y (default right turning point of H0 + delta)")
            sp.add_argument("--w0", type=float, help="initial w (default 0)")
    return parser


def parse_config(argv) -> RunConfig:
    """Resolve flags over the optional ``--config`` file into a RunConfig.

    Raises
    ------
    UsageError
        Unknown keys or flags, out-of-range values, or conflicting epsilons.
    """
    ns = vars(build_parser().parse_args(list(argv)))
    command = ns.pop("command")
    data = load_config_file(ns.pop("config")) if "config" in ns else {}
    data = {k: v for k, v in data.items() if k != "command"}
    if "eps" in ns:
        given = ns.pop("eps")
        if len(given) > 1:
            raise UsageError("conflicting epsilon values: --eps given more than once")
        ns["epsilons"] = given[0]
    if "problem" in ns or "builtin" in ns:
        # a source on the command line replaces the file's source
        data.pop("problem", None)
        data.pop("builtin", None)
    data.update(ns)
    if "epsilons" not in data and command != "sweep":
        data["epsilons"] = (DEFAULT_SINGLE_EPS,)
    data["command"] = command
    return RunConfig.from_dict(data)
