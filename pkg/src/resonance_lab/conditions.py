"""Existence / non-existence conditions and the counterexample family.

Everything here is arithmetic on the resonant magnitude sqrt(A_n^2 + B_n^2)
and the spans of F and g:

    rhs = 2 n span(F) + 2 span(g)

* magnitude >= rhs with f bounded below: no periodic solution, every
  solution escapes (Unbounded).
* f = 0 and magnitude < 2 span(g): periodic solutions exist (Lazer-Leach).
* g = 0 and magnitude < 2 n span(F): periodic solutions exist.
* mixed case with magnitude < rhs: the condition is only necessary, and the
  counterexample family built by ``build_counterexample`` shows it cannot be
  promoted to a sufficient one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .fourier import ResonantCoefficients, resonant_coefficients
from .model import (
    TWO_PI,
    BoundedNonlinearity,
    ConfigurationError,
    ForcingSignal,
    OscillatorProblem,
    PreconditionError,
    make_builtin_nonlinearity,
)
from .odeint import Trajectory


class Classification(str, Enum):
    PERIODIC_EXISTS = "PeriodicExists"
    UNBOUNDED = "Unbounded"
    NECESSARY_HOLDS_ONLY = "NecessaryHoldsOnly"
    NECESSARY_FAILS_NO_ESCAPE_GUARANTEE = "NecessaryFailsNoEscapeGuarantee"


EXISTENCE_STATEMENT = {
    Classification.PERIODIC_EXISTS: "a 2*pi-periodic solution exists",
    Classification.UNBOUNDED: "no 2*pi-periodic solution; every solution has x^2 + x'^2 -> infinity as t -> +-infinity",
    Classification.NECESSARY_HOLDS_ONLY: (
        "existence undetermined by the resonance theory: the combined necessary "
        "condition holds but is not sufficient"),
    Classification.NECESSARY_FAILS_NO_ESCAPE_GUARANTEE: (
        "no 2*pi-periodic solution; escape of solutions is not guaranteed (f has no lower bound)"),
}


@dataclass(frozen=True)
class ConditionReport:
    coefficients: ResonantCoefficients
    f_span: float
    g_span: float
    rhs_necessary: float
    special_case: str
    classification: Classification
    driver: str
    span_form: str

    @property
    def magnitude(self) -> float:
        return self.coefficients.magnitude

    @property
    def excess(self) -> float:
        """magnitude - rhs; negative when the necessary condition holds."""
        return self.magnitude - self.rhs_necessary

    @property
    def margin(self) -> float:
        """rhs - magnitude; positive when the necessary condition holds."""
        return self.rhs_necessary - self.magnitude

    @property
    def necessary_holds(self) -> bool:
        return self.magnitude < self.rhs_necessary

    @property
    def existence_statement(self) -> str:
        return EXISTENCE_STATEMENT[self.classification]

    def to_dict(self) -> dict:
        return {
            "coefficients": self.coefficients.to_dict(),
            "f_span": self.f_span,
            "g_span": self.g_span,
            "rhs_necessary": self.rhs_necessary,
            "excess": self.excess,
            "margin": self.margin,
            "necessary_holds": self.necessary_holds,
            "special_case": self.special_case,
            "classification": self.classification.value,
            "driver": self.driver,
            "span_form": self.span_form,
            "existence_statement": self.existence_statement,
        }

    def summary_lines(self) -> list[str]:
        c = self.coefficients
        return [
            f"A_n = {c.A_n:.17g}, B_n = {c.B_n:.17g}, magnitude = {c.magnitude:.17g}",
            f"2n span(F) = {self.f_span:.17g}, 2 span(g) = {self.g_span:.17g}, rhs = {self.rhs_necessary:.17g}",
            f"magnitude - rhs = {self.excess:.17g} ({'<' if self.necessary_holds else '>='} 0)",
            f"case: {self.special_case}; spans from {self.span_form}",
            f"classification: {self.classification.value}",
            f"driven by: {self.driver}",
            self.existence_statement,
        ]


def _require_bounds(h: BoundedNonlinearity, name: str) -> None:
    vals = (h.limit_neg, h.limit_pos, h.inf_val, h.sup_val)
    if any(v is None or not math.isfinite(v) for v in vals):
        raise ConfigurationError(f"{name} must declare finite limits and inf/sup")


def check_conditions(problem: OscillatorProblem) -> ConditionReport:
    """Evaluate the resonance conditions and classify the problem."""
    F, g, n = problem.F, problem.g, problem.n
    _require_bounds(F, "F")
    _require_bounds(g, "g")
    coeffs = resonant_coefficients(problem.e, n)
    f_span = 2.0 * n * F.span()
    g_span = 2.0 * g.span()
    rhs = f_span + g_span
    mag = coeffs.magnitude
    span_form = "limits" if (F.strict or F.is_zero) and (g.strict or g.is_zero) else "sup/inf"

    f_zero, g_zero = problem.f.is_zero, g.is_zero
    if f_zero and g_zero:
        special = "linear"
    elif f_zero:
        special = "pure-g"
    elif g_zero:
        special = "pure-f"
    else:
        special = "mixed"

    C = Classification
    if special == "linear":
        if mag == 0.0:
            cls, driver = C.PERIODIC_EXISTS, "linear resonance with A_n = B_n = 0 (every solution is periodic)"
        else:
            cls, driver = C.UNBOUNDED, "linear resonance with nonzero resonant forcing"
    elif mag >= rhs:
        if problem.f.lower_bound is not None:
            cls = C.UNBOUNDED
            driver = {
                "pure-g": "Lazer-Leach condition fails; f = 0 is bounded below, Lyapunov escape applies",
                "pure-f": "damping condition magnitude < 2n span(F) fails; f bounded below, Lyapunov escape applies",
                "mixed": "combined necessary condition fails; f bounded below, Lyapunov escape applies",
            }[special]
        else:
            cls = C.NECESSARY_FAILS_NO_ESCAPE_GUARANTEE
            driver = "combined necessary condition fails; f has no declared lower bound"
    elif special == "pure-g" and g.strict:
        cls, driver = C.PERIODIC_EXISTS, "Lazer-Leach: magnitude < 2 (g(inf) - g(-inf)) is necessary and sufficient"
    elif special == "pure-f" and F.strict:
        cls, driver = C.PERIODIC_EXISTS, "damping criterion: magnitude < 2n (F(inf) - F(-inf)) is necessary and sufficient"
    else:
        cls = C.NECESSARY_HOLDS_ONLY
        if special == "mixed":
            driver = "combined necessary condition holds; it is not sufficient in the mixed case"
        else:
            driver = "necessary condition holds; strict limit hypotheses fail, so sufficiency is not available"
    return ConditionReport(coeffs, f_span, g_span, rhs, special, cls, driver, span_form)


def _damping_for(F: BoundedNonlinearity) -> BoundedNonlinearity:
    """f = F' for a built-in F."""
    p = F.params
    if F.is_zero:
        return F
    if p.get("family") in ("arctan-scaled", "tanh-scaled", "algebraic-sigmoid") and not p.get("derivative"):
        return make_builtin_nonlinearity(p["family"], p["scale"], p["gain"], derivative=True)
    raise ConfigurationError("F must be a smooth built-in family (or pass a damping f with a primitive)")


def build_counterexample(F_span_source: BoundedNonlinearity, g_source: BoundedNonlinearity,
                         n: int, epsilon: float) -> OscillatorProblem:
    """x'' + f(x)x' + g(x) + n^2 x = E cos nt with E pi = rhs - epsilon.

    ``F_span_source`` is the antiderivative F (a damping function carrying a
    ``primitive`` is accepted too).  Requires 0 < epsilon < g(inf) - g(-inf).
    """
    g_limit_span = g_source.limit_pos - g_source.limit_neg
    if not (0.0 < epsilon < g_limit_span):
        raise PreconditionError(f"epsilon must lie in (0, {g_limit_span!r})")
    if F_span_source.primitive is not None:
        f, F = F_span_source, F_span_source.primitive
    else:
        F = F_span_source
        f = _damping_for(F)
    rhs = 2.0 * n * F.span() + 2.0 * g_source.span()
    E = (rhs - epsilon) / math.pi
    return OscillatorProblem(n=n, f=f, g=g_source, e=ForcingSignal.resonant_cosine(E, n), F=F)


# Gauss-Legendre nodes on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def oscillatory_residual(problem: OscillatorProblem, traj: Trajectory, n: int) -> tuple[float, float]:
    """(|int g(x) sin nt dt|, |int g(x) cos nt dt|) over a trajectory spanning [0, 2*pi].

    Uses 8-point Gauss-Legendre on each dense-output step; a trajectory without
    dense output is treated as piecewise linear between its nodes.
    """
    if abs(traj.t0) > 1e-12 or abs(traj.t1 - TWO_PI) > 1e-12:
        raise PreconditionError("trajectory must span exactly [0, 2*pi]")
    g = problem.g.eval
    s_acc = c_acc = 0.0
    if traj.has_dense:
        for seg in traj.segments:
            t0, h = seg[0], seg[1]
            for xg, wg in zip(_GL_X, _GL_W):
                t = t0 + h * xg
                gx = g(traj.dense(t)[0]) * wg * h
                s_acc += gx * math.sin(n * t)
                c_acc += gx * math.cos(n * t)
    else:
        ts, xs = traj.times, traj.states[:, 0]
        for i in range(len(ts) - 1):
            h = ts[i + 1] - ts[i]
            for xg, wg in zip(_GL_X, _GL_W):
                t = ts[i] + h * xg
                gx = g(xs[i] + xg * (xs[i + 1] - xs[i])) * wg * h
                s_acc += gx * math.sin(n * t)
                c_acc += gx * math.cos(n * t)
    return abs(s_acc), abs(c_acc)
