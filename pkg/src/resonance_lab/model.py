"""Problem data model for x'' + f(x)x' + g(x) + n^2 x = e(t).

Nonlinearities are bounded scalar functions that carry their asymptotic
data (limits at +-infinity, infimum, supremum, lower bound) explicitly,
because every existence and escape condition is written in terms of those
numbers.  Forcing is 2*pi periodic, either a trigonometric polynomial or a
uniformly sampled signal with a periodic cubic interpolant.

Built-in families (``s`` is the scale, ``k`` the gain)::

    arctan-scaled          s * arctan(k x)           limits -+ s*pi/2
    tanh-scaled            s * tanh(k x)             limits -+ s
    algebraic-sigmoid      s * k x / (1 + |k x|)     limits -+ s
    piecewise-saturation   s * clip(k x, -1, 1)      limits -+ s (attained)
    zero                   0

Each smooth family also has a ``derivative`` variant (e.g. ``k s/(1+k^2x^2)``
for arctan), which is the natural way to build a damping coefficient ``f``
whose antiderivative ``F`` is the family itself.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy import integrate as sp_integrate
from scipy.interpolate import CubicSpline

TWO_PI = 2.0 * math.pi

FAMILIES = (
    "arctan-scaled",
    "tanh-scaled",
    "algebraic-sigmoid",
    "piecewise-saturation",
    "tabulated",
    "zero",
    "custom",
)


class ConfigurationError(ValueError):
    """Invalid problem data (unknown family, inconsistent declared bounds, bad schema)."""


class PreconditionError(ValueError):
    """An operation was called outside the domain where it is defined."""


class NumericalLimitError(ArithmeticError):
    """F limits do not exist numerically."""


# ---------------------------------------------------------------------------
# scalar function objects (module level so problems stay picklable)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Zero:
    def __call__(self, x: float) -> float:
        return 0.0


@dataclass(frozen=True)
class _Arctan:
    s: float
    k: float

    def __call__(self, x: float) -> float:
        return self.s * math.atan(self.k * x)


@dataclass(frozen=True)
class _ArctanDerivative:
    s: float
    k: float

    def __call__(self, x: float) -> float:
        kx = self.k * x
        return self.s * self.k / (1.0 + kx * kx)


@dataclass(frozen=True)
class _Tanh:
    s: float
    k: float

    def __call__(self, x: float) -> float:
        return self.s * math.tanh(self.k * x)


@dataclass(frozen=True)
class _TanhDerivative:
    s: float
    k: float

    def __call__(self, x: float) -> float:
        # sech^2 written to avoid cosh overflow
        q = math.exp(-2.0 * abs(self.k * x))
        return self.s * self.k * 4.0 * q / ((1.0 + q) * (1.0 + q))


@dataclass(frozen=True)
class _Algebraic:
    s: float
    k: float

    def __call__(self, x: float) -> float:
        kx = self.k * x
        return self.s * kx / (1.0 + abs(kx))


@dataclass(frozen=True)
class _AlgebraicDerivative:
    s: float
    k: float

    def __call__(self, x: float) -> float:
        d = 1.0 + abs(self.k * x)
        return self.s * self.k / (d * d)


@dataclass(frozen=True)
class _Saturation:
    s: float
    k: float

    def __call__(self, x: float) -> float:
        return self.s * min(1.0, max(-1.0, self.k * x))


class _Tabulated:
    """Piecewise-linear table with algebraic (x0/x)^2 approach to the limits outside it."""

    def __init__(self, xs: np.ndarray, ys: np.ndarray, limit_neg: float, limit_pos: float):
        self.xs = [float(v) for v in xs]
        self.ys = [float(v) for v in ys]
        self.limit_neg = float(limit_neg)
        self.limit_pos = float(limit_pos)

    def __call__(self, x: float) -> float:
        xs, ys = self.xs, self.ys
        if x >= xs[-1]:
            r = xs[-1] / x
            return self.limit_pos + (ys[-1] - self.limit_pos) * r * r
        if x <= xs[0]:
            r = xs[0] / x
            return self.limit_neg + (ys[0] - self.limit_neg) * r * r
        i = _bisect(xs, x)
        w = (x - xs[i]) / (xs[i + 1] - xs[i])
        return ys[i] + w * (ys[i + 1] - ys[i])


class _TabulatedPrimitive:
    """Exact antiderivative (from 0) of a ``_Tabulated`` function whose limits are 0."""

    def __init__(self, table: _Tabulated):
        self.table = table
        xs = np.asarray(table.xs)
        ys = np.asarray(table.ys)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs))])
        self.cum = [float(v) for v in cum - self._interior(0.0, cum)]
        self.value_pos = self.cum[-1] + table.ys[-1] * table.xs[-1]
        self.value_neg = self.cum[0] + table.ys[0] * table.xs[0]

    def _interior(self, x: float, cum: Sequence[float]) -> float:
        xs, ys = self.table.xs, self.table.ys
        i = _bisect(xs, x)
        h = x - xs[i]
        slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
        return cum[i] + ys[i] * h + 0.5 * slope * h * h

    def __call__(self, x: float) -> float:
        xs, ys = self.table.xs, self.table.ys
        if x >= xs[-1]:
            # integral of y_N (x_N/t)^2 from x_N to x
            return self.cum[-1] + ys[-1] * xs[-1] * (1.0 - xs[-1] / x)
        if x <= xs[0]:
            return self.cum[0] + ys[0] * xs[0] * (1.0 - xs[0] / x)
        return self._interior(x, self.cum)


class _QuadPrimitive:
    """F(x) = int_0^x f by adaptive quadrature, for user callables."""

    def __init__(self, f: Callable[[float], float]):
        self.f = f

    def __call__(self, x: float) -> float:
        if x == 0.0:
            return 0.0
        val, _ = sp_integrate.quad(self.f, 0.0, x, epsabs=1e-13, epsrel=1e-12, limit=200)
        return float(val)


def _bisect(xs: Sequence[float], x: float) -> int:
    lo, hi = 0, len(xs) - 2
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if xs[mid] <= x:
            lo = mid
        else:
            hi = mid - 1
    return lo


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundedNonlinearity:
    """A bounded scalar function with declared asymptotic data.

    ``strict`` records whether ``limit_neg < eval(x) < limit_pos`` holds for
    every real x (the limit-form hypotheses).  ``primitive`` optionally holds
    a closed-form antiderivative vanishing at 0.
    """

    eval: Callable[[float], float]
    limit_neg: float
    limit_pos: float
    inf_val: float
    sup_val: float
    lower_bound: float | None = None
    family_tag: str = "custom"
    strict: bool = False
    primitive: BoundedNonlinearity | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family_tag not in FAMILIES:
            raise ConfigurationError(f"unknown family tag {self.family_tag!r}")
        for name in ("limit_neg", "limit_pos", "inf_val", "sup_val"):
            v = getattr(self, name)
            if v is None or not math.isfinite(v):
                raise ConfigurationError(f"{name} must be declared and finite")
        if self.inf_val > self.sup_val:
            raise ConfigurationError("inf_val exceeds sup_val")
        if not (self.inf_val <= self.limit_neg <= self.sup_val and self.inf_val <= self.limit_pos <= self.sup_val):
            raise ConfigurationError("limits must lie within [inf_val, sup_val]")
        if self.lower_bound is not None and self.lower_bound > self.inf_val:
            raise ConfigurationError("lower_bound exceeds the infimum")

    def __call__(self, x: float) -> float:
        return self.eval(x)

    def evaluate(self, xs: Iterable[float]) -> np.ndarray:
        return np.fromiter((self.eval(float(x)) for x in xs), dtype=float)

    @property
    def limit_span(self) -> float:
        return self.limit_pos - self.limit_neg

    @property
    def range_span(self) -> float:
        return self.sup_val - self.inf_val

    @property
    def is_zero(self) -> bool:
        return self.family_tag == "zero" or (self.inf_val == 0.0 and self.sup_val == 0.0)

    def span(self) -> float:
        """Limit span when the limit-form hypotheses hold, else sup - inf."""
        return self.limit_span if self.strict else self.range_span

    def to_dict(self) -> dict:
        return dict(self.params)

    # -- consistency checks --------------------------------------------------

    def check_strict(self, xs: Iterable[float]) -> bool:
        vals = self.evaluate(xs)
        return bool(np.all(vals > self.limit_neg) and np.all(vals < self.limit_pos))

    def check_range(self, xs: Iterable[float]) -> bool:
        vals = self.evaluate(xs)
        return bool(np.all(vals >= self.inf_val) and np.all(vals <= self.sup_val))

    def limit_errors(self, radii: Sequence[float] = (1e2, 1e4, 1e6)) -> list[tuple[float, float]]:
        """(error at -X, error at +X) for each radius X."""
        return [
            (abs(self.eval(-X) - self.limit_neg), abs(self.eval(X) - self.limit_pos))
            for X in radii
        ]

    def check_limits(self, radii: Sequence[float] = (1e2, 1e4, 1e6), tol: float | None = None) -> bool:
        """Limit errors are non-increasing in X and small at the largest radius."""
        if tol is None:
            tol = 1e-5 * max(1.0, abs(self.limit_span), abs(self.range_span))
        errs = self.limit_errors(radii)
        for side in (0, 1):
            seq = [e[side] for e in errs]
            if any(b > a for a, b in zip(seq, seq[1:])):
                return False
            if seq[-1] > tol:
                return False
        return True


@dataclass(frozen=True)
class PhasePoint:
    """Poincare section coordinate (x(0), x'(0))."""

    zeta: float
    eta: float

    def __post_init__(self):
        if not (math.isfinite(self.zeta) and math.isfinite(self.eta)):
            raise ValueError("phase point coordinates must be finite")

    def __iter__(self):
        yield self.zeta
        yield self.eta

    @property
    def norm(self) -> float:
        return math.hypot(self.zeta, self.eta)

    def as_array(self) -> np.ndarray:
        return np.array([self.zeta, self.eta])


class ForcingSignal:
    """2*pi periodic forcing, trig polynomial or uniform samples on [0, 2*pi).

    >>> e = ForcingSignal.trig([(1, 3.0, 4.0)])
    >>> round(e(0.0), 12)
    3.0
    """

    period = TWO_PI

    def __init__(self, terms: Sequence[Sequence[float]] | None = None, samples: Sequence[float] | None = None):
        if (terms is None) == (samples is None):
            raise ConfigurationError("forcing needs exactly one of trig terms or samples")
        self.terms: tuple[tuple[int, float, float], ...] | None = None
        self.samples: np.ndarray | None = None
        if terms is not None:
            parsed = []
            for term in terms:
                if len(term) != 3:
                    raise ConfigurationError("trig terms are [k, a_k, b_k] triples")
                k, a, b = term
                if int(k) != k or k < 0:
                    raise ConfigurationError(f"trig mode k must be a non-negative integer, got {k!r}")
                a, b = float(a), float(b)
                if not (math.isfinite(a) and math.isfinite(b)):
                    raise ConfigurationError("trig coefficients must be finite")
                parsed.append((int(k), a, b))
            self.terms = tuple(parsed)
        else:
            arr = np.asarray(samples, dtype=float)
            if arr.ndim != 1 or arr.size < 4:
                raise ConfigurationError("sampled forcing needs at least 4 samples")
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError("forcing samples must be finite")
            self.samples = arr
            M = arr.size
            knots = np.linspace(0.0, TWO_PI, M + 1)
            spline = CubicSpline(knots, np.append(arr, arr[0]), bc_type="periodic")
            self._dt = TWO_PI / M
            self._coef = [tuple(float(c) for c in spline.c[:, j]) for j in range(M)]

    @classmethod
    def trig(cls, terms: Sequence[Sequence[float]]) -> ForcingSignal:
        return cls(terms=terms)

    @classmethod
    def sampled(cls, samples: Sequence[float]) -> ForcingSignal:
        return cls(samples=samples)

    @classmethod
    def resonant_cosine(cls, amplitude: float, n: int) -> ForcingSignal:
        """e(t) = amplitude * cos(n t)."""
        return cls(terms=[(n, amplitude, 0.0)])

    @property
    def is_trig(self) -> bool:
        return self.terms is not None

    def __call__(self, t: float) -> float:
        if self.terms is not None:
            total = 0.0
            for k, a, b in self.terms:
                if k == 0:
                    total += a
                else:
                    kt = k * t
                    total += a * math.cos(kt) + b * math.sin(kt)
            return total
        tau = t % TWO_PI
        j = int(tau / self._dt)
        if j >= len(self._coef):
            j = len(self._coef) - 1
        h = tau - j * self._dt
        c3, c2, c1, c0 = self._coef[j]
        return ((c3 * h + c2) * h + c1) * h + c0

    def evaluate(self, ts: Iterable[float]) -> np.ndarray:
        return np.fromiter((self(float(t)) for t in ts), dtype=float)

    def max_abs(self, grid_size: int = 8192) -> float:
        """max |e(t)| over a uniform grid on one period."""
        ts = np.linspace(0.0, TWO_PI, grid_size, endpoint=False)
        m = float(np.max(np.abs(self.evaluate(ts))))
        if self.samples is not None:
            m = max(m, float(np.max(np.abs(self.samples))))
        return m

    def to_dict(self) -> dict:
        if self.terms is not None:
            return {"trig": [[k, a, b] for k, a, b in self.terms]}
        return {"samples": [float(v) for v in self.samples]}


@dataclass(frozen=True, eq=False)
class OscillatorProblem:
    """x'' + f(x) x' + g(x) + n^2 x = e(t) with F the antiderivative of f (F(0) = 0)."""

    n: int
    f: BoundedNonlinearity
    g: BoundedNonlinearity
    e: ForcingSignal
    F: BoundedNonlinearity | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError("n must be an integer >= 1")
        object.__setattr__(self, "n", int(self.n))
        if self.F is None:
            object.__setattr__(self, "F", antiderivative_of(self.f))
        if self.F(0.0) != 0.0:
            raise ConfigurationError("F must satisfy F(0) = 0")
        if not check_antiderivative(self.f, self.F):
            raise ConfigurationError("F' does not match f at sampled points")

    def rhs(self, t: float, x: float, v: float) -> tuple[float, float]:
        """First-order field (x, x')' = (v, e - f(x) v - g(x) - n^2 x)."""
        return v, self.e(t) - self.f.eval(x) * v - self.g.eval(x) - self.n * self.n * x

    def with_forcing(self, e: ForcingSignal, n: int | None = None) -> OscillatorProblem:
        return OscillatorProblem(n=self.n if n is None else n, f=self.f, g=self.g, e=e, F=self.F)

    def to_dict(self) -> dict:
        return {"n": self.n, "f": self.f.to_dict(), "g": self.g.to_dict(), "e": self.e.to_dict()}


def check_antiderivative(f: BoundedNonlinearity, F: BoundedNonlinearity, n_points: int = 32,
                         rtol: float = 1e-6, seed: int = 0) -> bool:
    """Central finite differences of F against f at random points in [-10, 10]."""
    rng = np.random.default_rng(seed)
    scale = max(abs(f.inf_val), abs(f.sup_val), 1e-300)
    for x in rng.uniform(-10.0, 10.0, n_points):
        h = 1e-5 * max(1.0, abs(x))
        fd = (F.eval(x + h) - F.eval(x - h)) / (2.0 * h)
        if abs(fd - f.eval(x)) > rtol * (abs(f.eval(x)) + scale):
            return False
    return True


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def zero_nonlinearity() -> BoundedNonlinearity:
    return BoundedNonlinearity(_Zero(), 0.0, 0.0, 0.0, 0.0, lower_bound=0.0, family_tag="zero",
                               strict=False, params={"family": "zero"})


_CLOSED_FORMS = {
    "arctan-scaled": (_Arctan, _ArctanDerivative, lambda s: s * math.pi / 2.0, True),
    "tanh-scaled": (_Tanh, _TanhDerivative, lambda s: s, True),
    "algebraic-sigmoid": (_Algebraic, _AlgebraicDerivative, lambda s: s, True),
    "piecewise-saturation": (_Saturation, None, lambda s: s, False),
}


def make_builtin_nonlinearity(family_tag: str, s: float = 1.0, k: float = 1.0,
                              derivative: bool = False) -> BoundedNonlinearity:
    """Build one of the saturating families with exact asymptotic data.

    With ``derivative=True`` the returned function is the family's derivative
    (a non-negative bump with limits 0 and sup ``s*k``); its ``primitive`` is
    the family itself, so it is ready to serve as a damping coefficient.
    """
    if family_tag == "zero":
        return zero_nonlinearity()
    if family_tag not in _CLOSED_FORMS:
        if family_tag == "tabulated":
            raise ConfigurationError("tabulated nonlinearities need table data; use make_tabulated")
        raise ConfigurationError(f"unknown family tag {family_tag!r}")
    if not (s > 0 and k > 0 and math.isfinite(s) and math.isfinite(k)):
        raise ConfigurationError("scale and gain must be positive and finite")
    value_cls, deriv_cls, limit_of, strict = _CLOSED_FORMS[family_tag]
    L = limit_of(s)
    params = {"family": family_tag, "scale": s, "gain": k}
    base = BoundedNonlinearity(value_cls(s, k), -L, L, -L, L, lower_bound=-L, family_tag=family_tag,
                               strict=strict, params=params)
    if not derivative:
        return base
    if deriv_cls is None:
        raise ConfigurationError(f"{family_tag} has a discontinuous derivative; not usable as f")
    return BoundedNonlinearity(deriv_cls(s, k), 0.0, 0.0, 0.0, s * k, lower_bound=0.0,
                               family_tag=family_tag, strict=False, primitive=base,
                               params={**params, "derivative": True})


def make_tabulated(xs: Sequence[float], ys: Sequence[float], limit_neg: float, limit_pos: float,
                   inf_val: float, sup_val: float, lower_bound: float | None = None,
                   strict: bool | None = None) -> BoundedNonlinearity:
    """Tabulated nonlinearity with explicitly declared asymptotic data.

    Inside the table the function is piecewise linear; outside it approaches
    the declared limits like (x_end/x)^2.  Declared infimum/supremum must match
    the exact values of that function, and ``strict`` (if given) must agree.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise ConfigurationError("table x and y must be equal-length 1-D arrays (>= 2 points)")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ConfigurationError("table entries must be finite")
    if np.any(np.diff(xs) <= 0):
        raise ConfigurationError("table x must be strictly increasing")
    if not (xs[0] < 0.0 < xs[-1]):
        raise ConfigurationError("table must straddle 0 (x_first < 0 < x_last)")
    true_inf = float(min(ys.min(), limit_neg, limit_pos))
    true_sup = float(max(ys.max(), limit_neg, limit_pos))
    tol = 1e-12 * max(1.0, abs(true_inf), abs(true_sup))
    if abs(inf_val - true_inf) > tol or abs(sup_val - true_sup) > tol:
        raise ConfigurationError(
            f"declared inf/sup ({inf_val}, {sup_val}) inconsistent with table ({true_inf}, {true_sup})")
    if lower_bound is not None and lower_bound > true_inf + tol:
        raise ConfigurationError("declared lower_bound exceeds the table minimum")
    is_strict = bool(np.all(ys > limit_neg) and np.all(ys < limit_pos))
    if strict is not None and bool(strict) != is_strict:
        raise ConfigurationError(f"declared strict={strict} but the table gives strict={is_strict}")
    params = {
        "family": "tabulated", "x": xs.tolist(), "y": ys.tolist(),
        "limit_neg": float(limit_neg), "limit_pos": float(limit_pos),
        "inf": float(inf_val), "sup": float(sup_val),
    }
    if lower_bound is not None:
        params["lower_bound"] = float(lower_bound)
    return BoundedNonlinearity(_Tabulated(xs, ys, limit_neg, limit_pos), float(limit_neg), float(limit_pos),
                               float(inf_val), float(sup_val), lower_bound=lower_bound,
                               family_tag="tabulated", strict=is_strict, params=params)


def _tail_limit(f: Callable[[float], float], sign: float, tol: float = 1e-8, x0: float = 1.0,
                max_doublings: int = 48) -> float:
    """lim_{X->inf} int_0^{sign X} f via doubling + Richardson (tail error ~ 1/X)."""
    def quad(a, b):
        val, _ = sp_integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-13, limit=400)
        return float(val)

    X = x0
    partial = quad(0.0, sign * X)
    prev_extrap = None
    for _ in range(max_doublings):
        nxt = partial + quad(sign * X, sign * 2.0 * X)
        extrap = 2.0 * nxt - partial
        if prev_extrap is not None and abs(extrap - prev_extrap) < tol:
            return extrap
        prev_extrap = extrap
        partial = nxt
        X *= 2.0
    raise NumericalLimitError("F limits do not exist numerically")


def antiderivative_of(f: BoundedNonlinearity) -> BoundedNonlinearity:
    """F(x) = int_0^x f(z) dz with its limits at +-infinity.

    Closed forms are used for built-ins, the exact piecewise-quadratic
    integral for tables, and adaptive quadrature (Richardson-extrapolated
    tails for the limits) for arbitrary callables.
    """
    if f.is_zero:
        return zero_nonlinearity()
    if f.primitive is not None:
        return f.primitive
    if f.family_tag == "tabulated":
        table: _Tabulated = f.eval
        if table.limit_neg != 0.0 or table.limit_pos != 0.0:
            raise NumericalLimitError("F limits do not exist numerically (f does not decay to 0)")
        prim = _TabulatedPrimitive(table)
        grid_vals = prim.cum + [prim.value_neg, prim.value_pos]
        lo, hi = min(grid_vals), max(grid_vals)
        strict = f.lower_bound is not None and f.lower_bound >= 0 and f.inf_val >= 0 and \
            all(y > 0 for y in table.ys)
        return BoundedNonlinearity(prim, prim.value_neg, prim.value_pos, lo, hi,
                                   lower_bound=lo, family_tag="tabulated", strict=strict,
                                   params={"antiderivative_of": f.to_dict()})
    if f.limit_neg != 0.0 or f.limit_pos != 0.0:
        raise NumericalLimitError("F limits do not exist numerically (f does not decay to 0)")
    prim = _QuadPrimitive(f.eval)
    lim_neg = _tail_limit(f.eval, -1.0)
    lim_pos = _tail_limit(f.eval, 1.0)
    monotone = f.lower_bound is not None and f.lower_bound >= 0.0
    if monotone:
        lo, hi = lim_neg, lim_pos
    else:
        xs = np.concatenate([-np.logspace(-3, 4, 200), [0.0], np.logspace(-3, 4, 200)])
        vals = [prim(float(x)) for x in xs]
        lo, hi = min(min(vals), lim_neg), max(max(vals), lim_pos)
    return BoundedNonlinearity(prim, lim_neg, lim_pos, lo, hi, lower_bound=lo, family_tag="custom",
                               strict=monotone and lim_neg < 0.0 < lim_pos, params={"antiderivative_of": "custom"})


# ---------------------------------------------------------------------------
# JSON problem documents
# ---------------------------------------------------------------------------

_PROBLEM_KEYS = {"n", "f", "g", "e"}
_BUILTIN_KEYS = {"family", "scale", "gain", "derivative"}
_TABLE_KEYS = {"family", "x", "y", "limit_neg", "limit_pos", "inf", "sup", "lower_bound", "strict"}


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigurationError(f"{where} must be a JSON object")
    extra = set(d) - allowed
    if extra:
        raise ConfigurationError(f"unknown keys in {where}: {sorted(extra)}")


def nonlinearity_from_dict(d: dict, where: str = "nonlinearity") -> BoundedNonlinearity:
    if not isinstance(d, dict) or "family" not in d:
        raise ConfigurationError(f"{where} needs a 'family' key")
    family = d["family"]
    if family == "tabulated":
        _reject_unknown(d, _TABLE_KEYS, where)
        missing = {"x", "y", "limit_neg", "limit_pos", "inf", "sup"} - set(d)
        if missing:
            raise ConfigurationError(f"{where} missing keys {sorted(missing)}")
        return make_tabulated(d["x"], d["y"], d["limit_neg"], d["limit_pos"], d["inf"], d["sup"],
                              lower_bound=d.get("lower_bound"), strict=d.get("strict"))
    if family == "zero":
        _reject_unknown(d, {"family"}, where)
        return zero_nonlinearity()
    _reject_unknown(d, _BUILTIN_KEYS, where)
    try:
        s = float(d.get("scale", 1.0))
        k = float(d.get("gain", 1.0))
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{where}: scale/gain must be numbers") from exc
    derivative = d.get("derivative", False)
    if not isinstance(derivative, bool):
        raise ConfigurationError(f"{where}: derivative must be true/false")
    return make_builtin_nonlinearity(family, s, k, derivative=derivative)


def forcing_from_dict(d: dict) -> ForcingSignal:
    _reject_unknown(d, {"trig", "samples"}, "e")
    if "trig" in d and "samples" not in d:
        return ForcingSignal.trig(d["trig"])
    if "samples" in d and "trig" not in d:
        return ForcingSignal.sampled(d["samples"])
    raise ConfigurationError("e needs exactly one of 'trig' or 'samples'")


def problem_from_dict(d: dict) -> OscillatorProblem:
    """Build a problem from the JSON schema ``{"n", "f", "g", "e"}``."""
    _reject_unknown(d, _PROBLEM_KEYS, "problem")
    missing = _PROBLEM_KEYS - set(d)
    if missing:
        raise ConfigurationError(f"problem missing keys {sorted(missing)}")
    n = d["n"]
    if isinstance(n, bool) or not isinstance(n, int):
        raise ConfigurationError("n must be an integer")
    return OscillatorProblem(n=n, f=nonlinearity_from_dict(d["f"], "f"),
                             g=nonlinearity_from_dict(d["g"], "g"), e=forcing_from_dict(d["e"]))


def load_problem(path: str | Path) -> OscillatorProblem:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed JSON in {path}: {exc}") from exc
    return problem_from_dict(doc)


def problem_from_json(text: str) -> OscillatorProblem:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed JSON: {exc}") from exc
    return problem_from_dict(doc)


def as_phase_point(xi: Any) -> PhasePoint:
    if isinstance(xi, PhasePoint):
        return xi
    zeta, eta = xi
    return PhasePoint(float(zeta), float(eta))
