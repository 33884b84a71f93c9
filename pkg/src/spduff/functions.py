"""Exactly differentiable scalar functions.

A :class:`FunctionSpec` is a polynomial, a sum of sines, or both::

    p(x) = c0 + c1 x + c2 x**2 + ...
    s(x) = sum_k A_k sin(w_k x + phi_k)

Values and derivatives of any order are computed in closed form, so no
numerical differentiation enters the downstream energy identity or the
gamma-rate formula. Evaluation accepts Python floats (fast scalar path used by
the integrator) or numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationOverflow

__all__ = ["FunctionSpec", "evaluate", "KINDS"]

KINDS = ("polynomial", "trig-sum", "sum-of-both")


def _poly_derivative(coeffs: tuple[float, ...], order: int) -> tuple[float, ...]:
    c = list(coeffs)
    for _ in range(order):
        c = [k * c[k] for k in range(1, len(c))]
    return tuple(c) if c else (0.0,)


@dataclass(frozen=True)
class FunctionSpec:
    """Polynomial / trig-sum function with exact derivatives.

    Parameters
    ----------
    kind : str
        One of ``"polynomial"``, ``"trig-sum"``, ``"sum-of-both"``.
    coefficients : tuple of float
        Polynomial coefficients in ascending powers.
    trig : tuple of (amplitude, angular frequency, phase)
        Terms ``A sin(w x + phi)``.
    """

    kind: str
    coefficients: tuple[float, ...] = ()
    trig: tuple[tuple[float, float, float], ...] = ()
    # derivative tables, filled in __post_init__
    _dpoly: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown function kind {self.kind!r}")
        coeffs = tuple(float(c) for c in self.coefficients)
        trig = tuple(tuple(float(v) for v in term) for term in self.trig)
        if any(len(term) != 3 for term in trig):
            raise ValueError("trig terms must be (amplitude, frequency, phase) triples")
        if self.kind == "polynomial" and (not coeffs or trig):
            raise ValueError("polynomial needs a non-empty coefficient list and no trig terms")
        if self.kind == "trig-sum" and (not trig or coeffs):
            raise ValueError("trig-sum needs at least one term and no polynomial part")
        if self.kind == "sum-of-both" and not (coeffs and trig):
            raise ValueError("sum-of-both needs both a polynomial and trig terms")
        flat = list(coeffs) + [v for term in trig for v in term]
        if not all(math.isfinite(v) for v in flat):
            raise ValueError("function coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "trig", trig)
        object.__setattr__(
            self, "_dpoly", tuple(_poly_derivative(coeffs, k) for k in range(4)) if coeffs else ()
        )

    # -- constructors ---------------------------------------------------------

    @classmethod
    def polynomial(cls, coefficients) -> FunctionSpec:
        return cls("polynomial", tuple(coefficients))

    @classmethod
    def trig_sum(cls, terms) -> FunctionSpec:
        return cls("trig-sum", (), tuple(tuple(t) for t in terms))

    @classmethod
    def constant(cls, value: float) -> FunctionSpec:
        return cls("polynomial", (float(value),))

    @classmethod
    def from_dict(cls, data: dict) -> FunctionSpec:
        """Build from the problem-file form ``{"kind": ..., "coefficients": ...}``.

        Trig terms are given either as a flat list of reals (grouped in
        threes) or as a list of triples. ``sum-of-both`` carries an object
        ``{"polynomial": [...], "trig": [...]}`` under ``coefficients``.
        """
        if not isinstance(data, dict) or set(data) != {"kind", "coefficients"}:
            raise ValueError('function spec must be {"kind": ..., "coefficients": ...}')
        kind, coeffs = data["kind"], data["coefficients"]
        if kind == "polynomial":
            return cls(kind, tuple(coeffs))
        if kind == "trig-sum":
            return cls(kind, (), _triples(coeffs))
        if kind == "sum-of-both":
            if not isinstance(coeffs, dict) or set(coeffs) != {"polynomial", "trig"}:
                raise ValueError('sum-of-both coefficients must be {"polynomial": [...], "trig": [...]}')
            return cls(kind, tuple(coeffs["polynomial"]), _triples(coeffs["trig"]))
        raise ValueError(f"unknown function kind {kind!r}")

    def to_dict(self) -> dict:
        flat_trig = [v for term in self.trig for v in term]
        if self.kind == "polynomial":
            return {"kind": self.kind, "coefficients": list(self.coefficients)}
        if self.kind == "trig-sum":
            return {"kind": self.kind, "coefficients": flat_trig}
        return {
            "kind": self.kind,
            "coefficients": {"polynomial": list(self.coefficients), "trig": flat_trig},
        }

    # -- calculus -------------------------------------------------------------

    @property
    def degree(self) -> int:
        """Polynomial degree ignoring trailing zeros (-1 when there is no polynomial part)."""
        c = self.coefficients
        for k in range(len(c) - 1, -1, -1):
            if c[k] != 0.0:
                return k
        return -1

    @property
    def trig_amplitude(self) -> float:
        """Upper bound on the magnitude of the trig part."""
        return sum(abs(a) for a, _, _ in self.trig)

    def antiderivative(self) -> FunctionSpec:
        """Formal antiderivative (zero integration constant in the polynomial part)."""
        poly = [0.0] + [c / (k + 1) for k, c in enumerate(self.coefficients)]
        trig = []
        for amp, w, phi in self.trig:
            if w == 0.0:
                poly[1] += amp * math.sin(phi)
            else:
                # -A/w cos(wx+phi) == A/w sin(wx + phi - pi/2)
                trig.append((amp / w, w, phi - math.pi / 2))
        trig = [t for t in trig if t[0] != 0.0]
        if not trig:
            return FunctionSpec.polynomial(poly)
        if not any(poly):
            return FunctionSpec.trig_sum(trig)
        return FunctionSpec("sum-of-both", tuple(poly), tuple(trig))

    def reflected(self) -> FunctionSpec:
        """The function ``x -> self(-x)``."""
        poly = tuple(c if k % 2 == 0 else -c for k, c in enumerate(self.coefficients))
        trig = tuple((amp, -w, phi) for amp, w, phi in self.trig)
        return FunctionSpec(self.kind, poly, trig)

    def __call__(self, x, order: int = 0):
        return evaluate(self, x, order)


def _triples(values) -> tuple[tuple[float, float, float], ...]:
    values = list(values)
    if values and all(isinstance(v, (list, tuple)) for v in values):
        return tuple(tuple(v) for v in values)
    if len(values) % 3:
        raise ValueError("flat trig coefficient list length must be a multiple of 3")
    return tuple(tuple(values[k:k + 3]) for k in range(0, len(values), 3))


def _horner(coeffs, x):
    acc = coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * x + c
    return acc


def evaluate(spec: FunctionSpec, x, order: int = 0):
    """Exact value of ``spec`` or its ``order``-th derivative at ``x``.

    ``x`` may be a float or an ndarray; the result has the same shape.

    Raises
    ------
    EvaluationOverflow
        If the result is not finite.
    """
    if order < 0 or order > 3:
        raise ValueError("order must be in 0..3")
    scalar = isinstance(x, (float, int))
    if scalar:
        x = float(x)
        value = _horner(spec._dpoly[order], x) if spec.coefficients else 0.0
        for amp, w, phi in spec.trig:
            value += amp * w ** order * math.sin(w * x + phi + order * math.pi / 2)
        if not math.isfinite(value):
            raise EvaluationOverflow(f"non-finite value at x={x!r} (order {order})")
        return value
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        if spec.coefficients:
            value = _horner(spec._dpoly[order], x) * np.ones_like(x)
        else:
            value = np.zeros_like(x)
        for amp, w, phi in spec.trig:
            value = value + amp * w ** order * np.sin(w * x + phi + order * np.pi / 2)
    if not np.all(np.isfinite(value)):
        raise EvaluationOverflow(f"non-finite value (order {order})")
    return value
