"""Oscillator problems, validation reports and the builtin instances."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import UnknownInstance
from .functions import FunctionSpec, evaluate

__all__ = [
    "OscillatorProblem",
    "ValidationReport",
    "Violation",
    "validate",
    "builtin",
    "BUILTINS",
    "load_problem",
    "dump_problem",
]


@dataclass(frozen=True)
class Violation:
    check: str
    location: float | None
    detail: str

    def to_dict(self) -> dict:
        return {"check": self.check, "location": self.location, "detail": self.detail}


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def passed(self) -> bool:
        return not self.violations

    def merged(self, other: ValidationReport) -> ValidationReport:
        return ValidationReport(self.violations + other.violations, {**self.extra, **other.extra})

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "violations": [v.to_dict() for v in self.violations],
            **self.extra,
        }


@dataclass(frozen=True)
class OscillatorProblem:
    """``eps**2 (a(t)**2 y')' + f(y) = m(t)`` on ``[t_begin, t_end]``."""

    a: FunctionSpec
    m: FunctionSpec
    f: FunctionSpec
    t_begin: float
    t_end: float
    name: str = field(default="custom", compare=False)

    def with_(self, **changes) -> OscillatorProblem:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "a": self.a.to_dict(),
            "m": self.m.to_dict(),
            "f": self.f.to_dict(),
            "t_begin": self.t_begin,
            "t_end": self.t_end,
        }

    @classmethod
    def from_dict(cls, data: dict, name: str = "custom") -> OscillatorProblem:
        expected = {"a", "m", "f", "t_begin", "t_end"}
        if set(data) != expected:
            raise ValueError(f"problem file keys must be exactly {sorted(expected)}")
        return cls(
            a=FunctionSpec.from_dict(data["a"]),
            m=FunctionSpec.from_dict(data["m"]),
            f=FunctionSpec.from_dict(data["f"]),
            t_begin=float(data["t_begin"]),
            t_end=float(data["t_end"]),
            name=name,
        )


def load_problem(path) -> OscillatorProblem:
    path = Path(path)
    with path.open() as fh:
        return OscillatorProblem.from_dict(json.load(fh), name=path.stem)


def dump_problem(problem: OscillatorProblem, path) -> None:
    Path(path).write_text(json.dumps(problem.to_dict(), indent=2) + "\n")


def validate(p: OscillatorProblem, grid_n: int = 256) -> ValidationReport:
    """Check interval ordering and positivity of ``a``.

    Positivity is certified on ``grid_n`` points: ``min a(t_k)`` must exceed
    ``L h / 2`` where ``h`` is the grid spacing and ``L`` bounds ``|a'|``
    between grid points (grid maximum of ``|a'|`` plus a second-derivative
    allowance over half a cell).
    """
    if grid_n < 16:
        raise ValueError("grid_n must be at least 16")
    violations = []
    if not (math.isfinite(p.t_begin) and math.isfinite(p.t_end)):
        violations.append(Violation("finite interval", None, "t_begin and t_end must be finite"))
        return ValidationReport(tuple(violations))
    if not p.t_begin < p.t_end:
        violations.append(
            Violation("empty interval", p.t_begin, f"t_begin={p.t_begin!r} >= t_end={p.t_end!r}")
        )
        return ValidationReport(tuple(violations))

    t = np.linspace(p.t_begin, p.t_end, grid_n)
    h = t[1] - t[0]
    a = evaluate(p.a, t)
    lip = np.max(np.abs(evaluate(p.a, t, 1))) + 0.5 * h * np.max(np.abs(evaluate(p.a, t, 2)))
    margin = 0.5 * h * lip
    bad = np.flatnonzero(a <= margin)
    if bad.size:
        k = bad[np.argmin(a[bad])]
        violations.append(
            Violation(
                "a positive",
                float(t[k]),
                f"a non-positive at t <= {t[bad[-1]]:.6g} (a={a[k]:.6g}, margin={margin:.3g})",
            )
        )
    return ValidationReport(tuple(violations), {"a_min": float(a.min()), "a_margin": float(margin)})


_POLY = FunctionSpec.polynomial

BUILTINS = {
    "D0": dict(a=_POLY([1.0]), m=_POLY([0.0]), f=_POLY([0.0, 1.0]), t_begin=0.0, t_end=1.0),
    "D1": dict(a=_POLY([1.0]), m=_POLY([0.0, -1.0]), f=_POLY([0.0, -1.0, 0.0, 1.0]), t_begin=-1.0, t_end=1.0),
    "D2": dict(a=_POLY([1.0, 0.25]), m=_POLY([0.0, -1.0]), f=_POLY([0.0, -1.0, 0.0, 1.0]), t_begin=-1.0, t_end=1.0),
}


def builtin(name: str) -> OscillatorProblem:
    """Builtin instances.

    ``D0``: harmonic oscillator, ``f(y)=y``, ``m=0``, ``a=1`` on ``[0, 1]``.
    ``D1``: double-well ramp, ``f(y)=y**3-y``, ``m(t)=-t``, ``a=1`` on ``[-1, 1]``.
    ``D2``: ``D1`` with ``a(t)=1+t/4``.
    """
    try:
        return OscillatorProblem(name=name, **BUILTINS[name])
    except KeyError:
        raise UnknownInstance(f"unknown builtin instance {name!r}; choose from {sorted(BUILTINS)}") from None
