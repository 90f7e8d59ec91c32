"""Resonant Fourier data of the forcing and the sign-set integral identities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as sp_integrate

from .model import TWO_PI, ForcingSignal, PreconditionError


@dataclass(frozen=True)
class ResonantCoefficients:
    """A_n = int e cos nt, B_n = int e sin nt over one period, and the phase.

    ``delta`` is None when A_n = B_n = 0 (the phase is undefined).
    """

    A_n: float
    B_n: float
    magnitude: float
    delta: float | None

    @property
    def delta_defined(self) -> bool:
        return self.delta is not None

    def to_dict(self) -> dict:
        return {"A_n": self.A_n, "B_n": self.B_n, "magnitude": self.magnitude,
                "delta": self.delta, "delta_defined": self.delta_defined}


def phase_delta(A: float, B: float) -> float:
    """delta in [0, 2*pi) with cos(delta), sin(delta) proportional to (A, B)."""
    if A == 0.0 and B == 0.0:
        raise PreconditionError("phase is undefined for the zero vector")
    d = math.atan2(B, A)
    if d < 0.0:
        d += TWO_PI
        if d >= TWO_PI:
            d = 0.0
    return d


def resonant_coefficients(e: ForcingSignal, n: int) -> ResonantCoefficients:
    """Exact for trig polynomials; periodic trapezoid rule for sampled forcing."""
    if int(n) != n or n < 1:
        raise PreconditionError("n must be an integer >= 1")
    if e.is_trig:
        A = sum(a for k, a, _ in e.terms if k == n) * math.pi
        B = sum(b for k, _, b in e.terms if k == n) * math.pi
    else:
        M = e.samples.size
        t = np.arange(M) * (TWO_PI / M)
        w = TWO_PI / M
        A = float(w * np.dot(e.samples, np.cos(n * t)))
        B = float(w * np.dot(e.samples, np.sin(n * t)))
    mag = math.hypot(A, B)
    delta = phase_delta(A, B) if mag > 0.0 else None
    return ResonantCoefficients(float(A), float(B), mag, delta)


def _sign_set_breakpoints(n: int, phi: float, kind: str) -> list[float]:
    # zeros of cos(nt - phi) at nt - phi = pi/2 + m*pi; of sin at nt - phi = m*pi
    offset = math.pi / 2.0 if kind == "cos" else 0.0
    m_lo = math.floor((-phi - offset) / math.pi) - 1
    m_hi = math.ceil((n * TWO_PI - phi - offset) / math.pi) + 1
    zeros = [(phi + offset + m * math.pi) / n for m in range(m_lo, m_hi + 1)]
    return sorted(z for z in zeros if 0.0 < z < TWO_PI)


def sign_set_integral(n: int, phi: float, kind: str = "cos", sign: str = "positive") -> float:
    """Integral of cos(nt - phi) (or sin) over the part of (0, 2*pi) where it has the given sign.

    The interval is cut at the exact zeros, each piece is classified by the
    sign at its midpoint, and matching pieces are integrated adaptively.
    The result is 2 on the positive set and -2 on the negative set.
    """
    if int(n) != n or n < 1:
        raise PreconditionError("n must be an integer >= 1")
    if kind not in ("cos", "sin"):
        raise ValueError("kind must be 'cos' or 'sin'")
    if sign in ("positive", "positive-set", "+"):
        want = 1.0
    elif sign in ("negative", "negative-set", "-"):
        want = -1.0
    else:
        raise ValueError("sign must be 'positive' or 'negative'")
    trig = math.cos if kind == "cos" else math.sin

    def h(t):
        return trig(n * t - phi)

    knots = [0.0] + _sign_set_breakpoints(n, phi, kind) + [TWO_PI]
    total = 0.0
    for a, b in zip(knots, knots[1:]):
        if b - a <= 0.0:
            continue
        if math.copysign(1.0, h(0.5 * (a + b))) != want:
            continue
        val, _ = sp_integrate.quad(h, a, b, epsabs=1e-14, epsrel=1e-13)
        total += val
    return total


def coefficient_table(e: ForcingSignal, modes) -> list[dict]:
    """Rows of (n, A_n, B_n, magnitude, delta) for the CLI table."""
    rows = []
    for n in modes:
        c = resonant_coefficients(e, n)
        rows.append({"n": int(n), **c.to_dict()})
    return rows
