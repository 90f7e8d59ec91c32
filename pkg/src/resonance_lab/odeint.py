"""Adaptive Dormand-Prince 5(4) integration of the oscillator and the energy monitor.

The oscillator is integrated as the first-order system

    u' = v,   v' = e(t) - f(u) v - g(u) - n^2 u

forward or backward in time.  The stepper works on plain floats (the system
is two-dimensional, so array overhead would dominate) and keeps the
4th-order continuous extension of every accepted step for dense output.

Integration failure (step-size underflow, non-finite state, norm threshold)
is not raised: the returned ``Trajectory`` carries ``status`` and the
partial data up to the failure point.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import TWO_PI, OscillatorProblem, PhasePoint, PreconditionError, as_phase_point

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12

# Dormand & Prince (1980) tableau, Hairer-Norsett-Wanner dense output
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
D1, D3, D4 = -12715105075 / 11282082432, 87487479700 / 32700410799, -10690763975 / 1880347072
D5, D6, D7 = 701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0


class IntegrationFailure(RuntimeError):
    """Raised by callers that need a complete flow (e.g. the Poincare map)."""

    def __init__(self, trajectory: Trajectory):
        super().__init__(f"integration failed: {trajectory.status} ({trajectory.message})")
        self.trajectory = trajectory


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Solution samples plus the dense-output pieces of every accepted step.

    ``segments`` holds ``(t_start, h, r1..r5)`` per step (each r a (u, v)
    pair); it is empty for hand-built stub trajectories.
    """

    times: np.ndarray
    states: np.ndarray
    n: int
    n_accepted: int = 0
    n_rejected: int = 0
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    status: str = "success"
    message: str = ""
    segments: tuple = field(default=(), repr=False)

    @property
    def energy(self) -> np.ndarray:
        x, v = self.states[:, 0], self.states[:, 1]
        return 0.5 * v * v + 0.5 * self.n * self.n * x * x

    @property
    def success(self) -> bool:
        return self.status == "success"

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> PhasePoint:
        return PhasePoint(float(self.states[-1, 0]), float(self.states[-1, 1]))

    @property
    def has_dense(self) -> bool:
        return len(self.segments) > 0

    def _locate(self, t: float) -> int:
        segs = self.segments
        forward = segs[0][1] > 0
        lo, hi = 0, len(segs) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            start = segs[mid][0]
            if (start <= t) if forward else (start >= t):
                lo = mid
            else:
                hi = mid - 1
        return lo

    def dense(self, t: float) -> tuple[float, float, float, float]:
        """(x, x', dx/dt, dx'/dt) of the continuous extension at time t."""
        if not self.segments:
            raise ValueError("trajectory carries no dense output")
        t0, h, r1, r2, r3, r4, r5 = self.segments[self._locate(t)]
        th = (t - t0) / h
        out = []
        for i in range(2):
            q = r4[i] + (1.0 - th) * r5[i]
            dq = -r5[i]
            p = r3[i] + th * q
            dp = q + th * dq
            s = r2[i] + (1.0 - th) * p
            ds = -p + (1.0 - th) * dp
            out.append((r1[i] + th * s, (s + th * ds) / h))
        return out[0][0], out[1][0], out[0][1], out[1][1]

    def sample(self, ts: Sequence[float]) -> np.ndarray:
        """States (x, x') at the requested times via the dense output."""
        return np.array([self.dense(float(t))[:2] for t in ts], dtype=float).reshape(-1, 2)

    def to_csv(self, path: str | Path) -> None:
        write_trajectory_csv(self, path)


def _initial_step(rhs, t0, u0, v0, direction, rtol, atol, span):
    du, dv = rhs(t0, u0, v0)
    su = atol + rtol * abs(u0)
    sv = atol + rtol * abs(v0)
    d0 = math.sqrt(0.5 * ((u0 / su) ** 2 + (v0 / sv) ** 2))
    d1 = math.sqrt(0.5 * ((du / su) ** 2 + (dv / sv) ** 2))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    u1, v1 = u0 + direction * h0 * du, v0 + direction * h0 * dv
    du1, dv1 = rhs(t0 + direction * h0, u1, v1)
    d2 = math.sqrt(0.5 * (((du1 - du) / su) ** 2 + ((dv1 - dv) / sv) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 5.0)
    return min(100.0 * h0, h1, span)


def integrate(problem: OscillatorProblem, xi0, t0: float = 0.0, t1: float = TWO_PI,
              rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
              t_eval: Sequence[float] | None = None, max_norm: float | None = None,
              max_steps: int = 1_000_000, h_max: float | None = None,
              first_step: float | None = None) -> Trajectory:
    """Integrate from xi0 = (x(t0), x'(t0)) to t1 (t1 < t0 runs backward).

    Each accepted step satisfies the local error bound
    ``|err_i| <= atol + rtol * max(|y_i|, |y_i_new|)`` componentwise.  When
    ``t_eval`` is given the trajectory nodes are those times (dense output);
    otherwise the accepted step endpoints.  ``max_norm`` stops integration
    with status ``"norm-exceeded"`` once sqrt(x^2 + x'^2) passes it.
    """
    xi0 = as_phase_point(xi0)
    if t0 == t1:
        raise PreconditionError("t0 and t1 must differ")
    if not (rtol > 0 and atol > 0):
        raise PreconditionError("tolerances must be positive")
    rhs = problem.rhs
    direction = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)
    if h_max is None:
        h_max = span
    t = float(t0)
    u, v = xi0.zeta, xi0.eta
    ts = [t]
    us = [u]
    vs = [v]
    segments = []
    n_acc = n_rej = 0
    status, message = "success", ""

    k1u, k1v = rhs(t, u, v)
    if first_step is None:
        first_step = _initial_step(rhs, t, u, v, direction, rtol, atol, span)
    h = min(abs(first_step), h_max)

    while direction * (t1 - t) > 0.0:
        if n_acc + n_rej >= max_steps:
            status, message = "max-steps", f"exceeded {max_steps} steps"
            break
        min_h = 16.0 * math.ulp(max(abs(t), 1.0))
        if h < min_h:
            status, message = "step-underflow", f"step size underflow at t={t!r}"
            break
        last = abs(t1 - t) <= h * (1.0 + 1e-10)
        hs = direction * (abs(t1 - t) if last else h)

        k2u, k2v = rhs(t + C2 * hs, u + hs * A21 * k1u, v + hs * A21 * k1v)
        k3u, k3v = rhs(t + C3 * hs, u + hs * (A31 * k1u + A32 * k2u), v + hs * (A31 * k1v + A32 * k2v))
        k4u, k4v = rhs(t + C4 * hs, u + hs * (A41 * k1u + A42 * k2u + A43 * k3u),
                       v + hs * (A41 * k1v + A42 * k2v + A43 * k3v))
        k5u, k5v = rhs(t + C5 * hs, u + hs * (A51 * k1u + A52 * k2u + A53 * k3u + A54 * k4u),
                       v + hs * (A51 * k1v + A52 * k2v + A53 * k3v + A54 * k4v))
        k6u, k6v = rhs(t + hs, u + hs * (A61 * k1u + A62 * k2u + A63 * k3u + A64 * k4u + A65 * k5u),
                       v + hs * (A61 * k1v + A62 * k2v + A63 * k3v + A64 * k4v + A65 * k5v))
        un = u + hs * (A71 * k1u + A73 * k3u + A74 * k4u + A75 * k5u + A76 * k6u)
        vn = v + hs * (A71 * k1v + A73 * k3v + A74 * k4v + A75 * k5v + A76 * k6v)
        t_new = t1 if last else t + hs
        k7u, k7v = rhs(t_new, un, vn)

        eu = hs * (E1 * k1u + E3 * k3u + E4 * k4u + E5 * k5u + E6 * k6u + E7 * k7u)
        ev = hs * (E1 * k1v + E3 * k3v + E4 * k4v + E5 * k5v + E6 * k6v + E7 * k7v)
        err = max(abs(eu) / (atol + rtol * max(abs(u), abs(un))),
                  abs(ev) / (atol + rtol * max(abs(v), abs(vn))))

        if not math.isfinite(err) or not (math.isfinite(un) and math.isfinite(vn)):
            n_rej += 1
            if abs(hs) <= min_h:
                status, message = "non-finite", f"non-finite state near t={t!r}"
                break
            h = abs(hs) * FAC_MIN
            continue

        if err <= 1.0:
            n_acc += 1
            ru2u, ru2v = un - u, vn - v
            r3u, r3v = hs * k1u - ru2u, hs * k1v - ru2v
            r4u, r4v = ru2u - hs * k7u - r3u, ru2v - hs * k7v - r3v
            r5u = hs * (D1 * k1u + D3 * k3u + D4 * k4u + D5 * k5u + D6 * k6u + D7 * k7u)
            r5v = hs * (D1 * k1v + D3 * k3v + D4 * k4v + D5 * k5v + D6 * k6v + D7 * k7v)
            segments.append((t, hs, (u, v), (ru2u, ru2v), (r3u, r3v), (r4u, r4v), (r5u, r5v)))
            t, u, v = t_new, un, vn
            k1u, k1v = k7u, k7v
            ts.append(t)
            us.append(u)
            vs.append(v)
            fac = FAC_MAX if err == 0.0 else min(FAC_MAX, max(FAC_MIN, SAFETY * err ** -0.2))
            h = min(abs(hs) * fac, h_max)
            if max_norm is not None and math.hypot(u, v) > max_norm:
                status, message = "norm-exceeded", f"|xi| exceeded {max_norm!r} at t={t!r}"
                break
        else:
            n_rej += 1
            h = abs(hs) * max(FAC_MIN, SAFETY * err ** -0.2)

    traj = Trajectory(times=np.array(ts), states=np.column_stack([us, vs]), n=problem.n,
                      n_accepted=n_acc, n_rejected=n_rej, rtol=rtol, atol=atol, status=status,
                      message=message, segments=tuple(segments))
    if t_eval is None:
        return traj
    reached = [float(s) for s in t_eval if direction * (s - t0) >= 0.0 and direction * (s - t) <= 0.0]
    if not reached or not segments:
        return traj
    states = traj.sample(reached)
    return Trajectory(times=np.array(reached), states=states, n=problem.n, n_accepted=n_acc,
                      n_rejected=n_rej, rtol=rtol, atol=atol, status=status, message=message,
                      segments=traj.segments)


def ode_residual(problem: OscillatorProblem, traj: Trajectory, samples_per_step: int = 4) -> float:
    """max |x'' + f(x)x' + g(x) + n^2 x - e(t)| along the dense output.

    x'' is the time derivative of the interpolated velocity; the velocity
    consistency |dx/dt - x'| is folded into the same max.
    """
    worst = 0.0
    for seg in traj.segments:
        t0, h = seg[0], seg[1]
        for j in range(samples_per_step + 1):
            t = t0 + h * j / samples_per_step
            x, v, dx, dv = traj.dense(t)
            _, acc = problem.rhs(t, x, v)
            worst = max(worst, abs(dv - acc), abs(dx - v))
    return worst


# ---------------------------------------------------------------------------
# energy envelope
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyBoundConstants:
    """Constants with E' <= c1 E + c2 for E = x'^2/2 + n^2 x^2/2.

    c1 = 2 max(-alpha, 0) + 1 and c2 = (g_bound + e_bound)^2 / 2: the damping
    term gives -f x'^2 <= 2 max(-alpha, 0) E, and Young's inequality gives
    |(e - g) x'| <= c2 + x'^2/2 <= c2 + E.
    """

    c1: float
    c2: float
    alpha: float
    g_bound: float
    e_bound: float

    def envelope(self, e0: float, dt: float) -> float:
        dt = abs(dt)
        if self.c1 == 0.0:
            return e0 + self.c2 * dt
        r = self.c2 / self.c1
        return (e0 + r) * math.exp(self.c1 * dt) - r


def energy_bound_constants(problem: OscillatorProblem, grid_size: int = 8192) -> EnergyBoundConstants:
    alpha = problem.f.lower_bound
    if alpha is None:
        raise PreconditionError("f needs a declared lower bound for the energy estimate")
    g_bound = max(abs(problem.g.inf_val), abs(problem.g.sup_val))
    e_bound = problem.e.max_abs(grid_size)
    c1 = 2.0 * max(-alpha, 0.0) + 1.0
    c2 = 0.5 * (g_bound + e_bound) ** 2
    return EnergyBoundConstants(c1=c1, c2=c2, alpha=float(alpha), g_bound=g_bound, e_bound=e_bound)


def check_energy_growth(traj: Trajectory, k: EnergyBoundConstants, slack: float = 1e-6) -> bool:
    """True iff E(t) stays under the Gronwall envelope at every node."""
    if abs(traj.t1 - traj.t0) > TWO_PI * (1.0 + 1e-12):
        raise PreconditionError("energy check applies to spans of at most one period")
    energy = traj.energy
    e0 = float(energy[0])
    for t, E in zip(traj.times, energy):
        bound = k.envelope(e0, float(t) - traj.t0)
        if E > bound * (1.0 + slack) + 1e-300:
            return False
    return True


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def fmt(x: float) -> str:
    """Full double precision, 17 significant digits."""
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    """Columns t, x, xprime, energy; the header row is always written."""
    energy = traj.energy
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "xprime", "energy"])
        for t, (x, v), E in zip(traj.times, traj.states, energy):
            w.writerow([fmt(t), fmt(x), fmt(v), fmt(E)])


def read_trajectory_csv(path: str | Path, n: int) -> Trajectory:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    times = np.array([float(r["t"]) for r in rows])
    states = np.array([[float(r["x"]), float(r["xprime"])] for r in rows]).reshape(-1, 2)
    return Trajectory(times=times, states=states, n=n)
