"""Time-2*pi Poincare map, the Lyapunov-type functional V, escape and shooting.

G(zeta, eta) = (x(2 pi), x'(2 pi)) for the solution with x(0) = zeta,
x'(0) = eta.  With delta the resonant phase of the forcing,

    V(zeta, eta) = eta cos(delta) - n zeta sin(delta) + F(zeta) cos(delta)

satisfies V(G(xi)) - V(xi) = magnitude - n int F(x) sin(nt - delta)
- int g(x) cos(nt - delta), which is positive for every xi once
magnitude >= 2n span(F) + 2 span(g).  A strictly increasing V along the
iterates rules out bounded orbits; that is the escape mechanism checked by
``iterate_orbit`` and ``escape_diagnostic``.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .conditions import Classification, check_conditions
from .fourier import resonant_coefficients
from .model import TWO_PI, OscillatorProblem, PhasePoint, PreconditionError, as_phase_point
from .odeint import DEFAULT_ATOL, DEFAULT_RTOL, IntegrationFailure, fmt, integrate, ode_residual

log = logging.getLogger(__name__)

OVERFLOW_NORM = 1e12
THREADS_ENV = "RESONANCE_LAB_THREADS"


def poincare_map(problem: OscillatorProblem, xi, backward: bool = False,
                 rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> PhasePoint:
    """G(xi), or the inverse map (time -2*pi flow) when ``backward``."""
    xi = as_phase_point(xi)
    traj = integrate(problem, xi, 0.0, -TWO_PI if backward else TWO_PI, rtol=rtol, atol=atol)
    if not traj.success:
        raise IntegrationFailure(traj)
    return traj.final


def lyapunov_v(problem: OscillatorProblem, xi, delta: float) -> float:
    zeta, eta = as_phase_point(xi)
    cd, sd = math.cos(delta), math.sin(delta)
    return eta * cd - problem.n * zeta * sd + problem.F.eval(zeta) * cd


def problem_delta(problem: OscillatorProblem) -> float | None:
    return resonant_coefficients(problem.e, problem.n).delta


@dataclass
class PoincareOrbit:
    """Iterates xi_0..xi_K with V and norm along them.

    ``period_min_norms[k]`` is the minimum of sqrt(x^2 + x'^2) over the flow
    segment from xi_k to xi_{k+1}.  ``incidents`` lists the steps where V
    failed to move monotonically although the problem guarantees it.
    """

    points: list[PhasePoint]
    v_values: list[float]
    norms: list[float]
    direction: str
    delta: float
    delta_defined: bool = True
    escaped_by_overflow: bool = False
    period_min_norms: list[float] = field(default_factory=list)
    incidents: list[int] = field(default_factory=list)
    expect_monotone: bool = False

    @property
    def K(self) -> int:
        return len(self.points) - 1

    def v_increments(self) -> np.ndarray:
        """V differences oriented along forward time (positive = V increases forward)."""
        dv = np.diff(self.v_values)
        return dv if self.direction == "forward" else -dv

    def v_monotone_count(self) -> tuple[int, int]:
        inc = self.v_increments()
        return int(np.sum(inc > 0.0)), int(inc.size)

    def to_csv(self, path: str | Path) -> None:
        write_orbit_csv(self, path)


def write_orbit_csv(orbit: PoincareOrbit, path: str | Path) -> None:
    """Columns k, zeta, eta, V, norm."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "zeta", "eta", "V", "norm"])
        for k, (p, V, r) in enumerate(zip(orbit.points, orbit.v_values, orbit.norms)):
            w.writerow([k, fmt(p.zeta), fmt(p.eta), fmt(V), fmt(r)])


def _segment_min_norm(traj, samples_per_step: int = 4) -> float:
    best = float(np.min(np.hypot(traj.states[:, 0], traj.states[:, 1])))
    for seg in traj.segments:
        t0, h = seg[0], seg[1]
        for j in range(1, samples_per_step):
            x, v = traj.dense(t0 + h * j / samples_per_step)[:2]
            best = min(best, math.hypot(x, v))
    return best


def iterate_orbit(problem: OscillatorProblem, xi0, K: int, direction: str = "forward",
                  delta: float | None = None, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                  overflow_norm: float = OVERFLOW_NORM) -> PoincareOrbit:
    """K iterates of G (or of its inverse for ``direction="backward"``)."""
    if K < 1:
        raise PreconditionError("K must be >= 1")
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    xi = as_phase_point(xi0)
    delta_defined = True
    if delta is None:
        delta = problem_delta(problem)
        if delta is None:
            delta, delta_defined = 0.0, False
    expect = check_conditions(problem).classification is Classification.UNBOUNDED and delta_defined
    t1 = TWO_PI if direction == "forward" else -TWO_PI
    orbit = PoincareOrbit(points=[xi], v_values=[lyapunov_v(problem, xi, delta)], norms=[xi.norm],
                          direction=direction, delta=delta, delta_defined=delta_defined,
                          expect_monotone=expect)
    for k in range(K):
        traj = integrate(problem, xi, 0.0, t1, rtol=rtol, atol=atol, max_norm=overflow_norm)
        if traj.segments:
            orbit.period_min_norms.append(_segment_min_norm(traj))
        if not traj.success:
            log.info("orbit stopped at k=%d: %s", k, traj.message)
            orbit.escaped_by_overflow = True
            break
        xi = traj.final
        V = lyapunov_v(problem, xi, delta)
        prev = orbit.v_values[-1]
        orbit.points.append(xi)
        orbit.v_values.append(V)
        orbit.norms.append(xi.norm)
        if expect and not ((V > prev) if direction == "forward" else (V < prev)):
            log.warning("V not monotone at step %d (integrator accuracy incident)", k)
            orbit.incidents.append(k)
    return orbit


# ---------------------------------------------------------------------------
# escape diagnostic
# ---------------------------------------------------------------------------


@dataclass
class DirectionEvidence:
    direction: str
    verdict: str  # "escaped", "escaped-by-overflow" or "inconclusive"
    iterates: int
    max_norm: float
    final_norm: float
    first_crossing: int | None
    v_monotone_steps: int
    v_steps: int
    final_period_min_norm: float
    pointwise_above_threshold: bool

    @property
    def escaped(self) -> bool:
        return self.verdict != "inconclusive"

    @property
    def v_strictly_monotone(self) -> bool:
        return self.v_steps > 0 and self.v_monotone_steps == self.v_steps

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "verdict": self.verdict,
            "iterates": self.iterates,
            "max_norm": self.max_norm,
            "final_norm": self.final_norm,
            "first_crossing": self.first_crossing,
            "v_monotone_steps": self.v_monotone_steps,
            "v_steps": self.v_steps,
            "v_strictly_monotone": self.v_strictly_monotone,
            "final_period_min_norm": self.final_period_min_norm,
            "pointwise_above_threshold": self.pointwise_above_threshold,
        }


@dataclass
class EscapeReport:
    xi0: PhasePoint
    K: int
    threshold: float
    forward: DirectionEvidence | None
    backward: DirectionEvidence | None
    orbits: dict = field(default_factory=dict, repr=False)

    @property
    def escaped_both(self) -> bool:
        return bool(self.forward and self.forward.escaped and self.backward and self.backward.escaped)

    @property
    def v_strictly_monotone(self) -> bool:
        ev = [e for e in (self.forward, self.backward) if e is not None]
        return bool(ev) and all(e.v_strictly_monotone for e in ev)

    @property
    def signals(self) -> list[str]:
        fired = []
        ev = [e for e in (self.forward, self.backward) if e is not None]
        if ev and all(e.v_strictly_monotone for e in ev):
            fired.append("v-monotone")
        if any(e.verdict == "escaped" for e in ev):
            fired.append("norm-threshold")
        if any(e.verdict == "escaped-by-overflow" for e in ev):
            fired.append("overflow")
        if any(e.pointwise_above_threshold for e in ev):
            fired.append("pointwise")
        return fired

    def summary(self) -> str:
        dirs = [e for e in (self.forward, self.backward) if e is not None]
        esc = [e.direction for e in dirs if e.escaped]
        if len(esc) == len(dirs) == 2:
            head = "escaped forward and backward"
        elif esc:
            head = "escaped " + " and ".join(esc)
        else:
            head = "inconclusive"
        mono = sum(e.v_monotone_steps for e in dirs)
        steps = sum(e.v_steps for e in dirs)
        if dirs and len(dirs) == 1:
            tail = f"V strictly increasing {mono}/{steps}"
        else:
            tail = "; ".join(f"{e.direction}: V strictly increasing {e.v_monotone_steps}/{e.v_steps}" for e in dirs)
        return f"{head}; {tail}"

    def to_dict(self) -> dict:
        return {
            "xi0": [self.xi0.zeta, self.xi0.eta],
            "K": self.K,
            "threshold": self.threshold,
            "forward": self.forward.to_dict() if self.forward else None,
            "backward": self.backward.to_dict() if self.backward else None,
            "escaped_both": self.escaped_both,
            "signals": self.signals,
            "summary": self.summary(),
        }


def _evidence(orbit: PoincareOrbit, threshold: float) -> DirectionEvidence:
    norms = orbit.norms
    crossing = next((k for k, r in enumerate(norms) if r >= threshold), None)
    final_min = orbit.period_min_norms[-1] if orbit.period_min_norms else norms[-1]
    if orbit.escaped_by_overflow:
        verdict = "escaped-by-overflow"
    elif norms[-1] >= threshold:
        verdict = "escaped"
    else:
        verdict = "inconclusive"
    mono, steps = orbit.v_monotone_count()
    return DirectionEvidence(
        direction=orbit.direction, verdict=verdict, iterates=orbit.K, max_norm=float(max(norms)),
        final_norm=float(norms[-1]), first_crossing=crossing, v_monotone_steps=mono, v_steps=steps,
        final_period_min_norm=float(final_min), pointwise_above_threshold=bool(final_min >= threshold))


def escape_diagnostic(problem: OscillatorProblem, xi0, K: int = 200, norm_threshold: float = 100.0,
                      directions: Sequence[str] = ("forward", "backward"),
                      rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> EscapeReport:
    """Per-initial-condition escape evidence, forward and/or backward in time.

    A direction counts as escaped when the last iterate norm is at least
    ``norm_threshold`` or the flow overflowed; the minimum of sqrt(x^2 + x'^2)
    over the final period is reported to show divergence in t, not only on
    the section.  Orbits that stay below the threshold are ``inconclusive``.
    """
    xi0 = as_phase_point(xi0)
    delta = problem_delta(problem)
    ev = {}
    orbits = {}
    for d in directions:
        orbit = iterate_orbit(problem, xi0, K, direction=d, delta=delta, rtol=rtol, atol=atol)
        orbits[d] = orbit
        ev[d] = _evidence(orbit, norm_threshold)
    return EscapeReport(xi0=xi0, K=K, threshold=norm_threshold, forward=ev.get("forward"),
                        backward=ev.get("backward"), orbits=orbits)


# ---------------------------------------------------------------------------
# shooting for fixed points of G
# ---------------------------------------------------------------------------


@dataclass
class FixedPointResult:
    found: bool
    xi_star: PhasePoint | None
    residual_norm: float
    starts_tried: int
    iterations: int
    start: PhasePoint | None = None
    ode_residual: float | None = None
    closure_error: float | None = None
    tol: float = 1e-9

    def to_dict(self) -> dict:
        return {
            "found": self.found,
            "xi_star": None if self.xi_star is None else [self.xi_star.zeta, self.xi_star.eta],
            "residual_norm": self.residual_norm,
            "starts_tried": self.starts_tried,
            "iterations": self.iterations,
            "start": None if self.start is None else [self.start.zeta, self.start.eta],
            "ode_residual": self.ode_residual,
            "closure_error": self.closure_error,
            "tol": self.tol,
        }


@dataclass
class _StartOutcome:
    converged: bool
    xi: PhasePoint
    residual: float
    iterations: int


def default_radius(problem: OscillatorProblem) -> float:
    """Half-width of the start grid, scaled from magnitude / (2n)."""
    mag = resonant_coefficients(problem.e, problem.n).magnitude
    return max(1.0, mag / (2.0 * problem.n))


def start_grid(R: float, size: int = 9) -> list[PhasePoint]:
    """size x size grid over [-R, R]^2, zeta-major order."""
    axis = np.linspace(-R, R, size) if size > 1 else np.array([0.0])
    return [PhasePoint(float(z), float(e)) for z in axis for e in axis]


def _lm_solve(problem: OscillatorProblem, xi0: PhasePoint, tol: float, max_iter: int,
              rtol: float, atol: float, escape_radius: float) -> _StartOutcome:
    """Levenberg-Marquardt on r(xi) = G(xi) - xi with a forward-difference Jacobian."""

    def residual(x):
        traj = integrate(problem, (x[0], x[1]), 0.0, TWO_PI, rtol=rtol, atol=atol)
        if not traj.success:
            return None
        return traj.states[-1] - x

    x = xi0.as_array()
    r = residual(x)
    if r is None:
        return _StartOutcome(False, xi0, math.inf, 0)
    rn = float(np.linalg.norm(r))
    lam = 1e-8
    history = [rn]
    it = 0
    while it < max_iter:
        if rn < tol:
            return _StartOutcome(True, PhasePoint(float(x[0]), float(x[1])), rn, it)
        it += 1
        J = np.empty((2, 2))
        for j in range(2):
            h = max(1e-6, 1e-6 * abs(x[j]))
            xp = x.copy()
            xp[j] += h
            rp = residual(xp)
            if rp is None:
                return _StartOutcome(False, PhasePoint(float(x[0]), float(x[1])), rn, it)
            J[:, j] = (rp - r) / h
        JtJ = J.T @ J
        g = J.T @ r
        scale = max(float(np.trace(JtJ)), 1e-300)
        improved = False
        while lam < 1e12:
            try:
                step = np.linalg.solve(JtJ + lam * scale * np.eye(2), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = x + step
            rt = residual(trial)
            if rt is not None:
                rtn = float(np.linalg.norm(rt))
                if rtn < rn:
                    x, r, rn = trial, rt, rtn
                    lam = max(lam / 10.0, 1e-12)
                    improved = True
                    break
            lam *= 10.0
        if not improved:
            break
        history.append(rn)
        if np.linalg.norm(x) > escape_radius:
            break
        # stalled: less than 1% decrease over the last 5 accepted steps
        if len(history) > 6 and history[-1] > 0.99 * history[-6] and rn > 1e3 * tol:
            break
    return _StartOutcome(rn < tol, PhasePoint(float(x[0]), float(x[1])), rn, it)


def _worker_count(requested: int | None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(THREADS_ENV)
    cap = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cap))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return 1


def find_periodic(problem: OscillatorProblem, starts: Sequence | None = None, tol: float = 1e-9,
                  R: float | None = None, grid_size: int = 9, max_iter: int = 60,
                  rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                  workers: int | None = None) -> FixedPointResult:
    """Multi-start damped Newton search for a fixed point of G.

    Starts are tried in deterministic grid order; with several workers they
    are evaluated in ordered batches and the first success in grid order
    wins, so the answer never depends on scheduling.  On success the periodic
    solution is re-integrated and its ODE residual on the dense output is
    reported.
    """
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    if starts is None:
        starts = start_grid(default_radius(problem) if R is None else R, grid_size)
    starts = [as_phase_point(s) for s in starts]
    radius = max(max(s.norm for s in starts), 1.0)
    escape_radius = 1e3 * radius
    nw = _worker_count(workers)

    def run_serial(batch):
        return [_lm_solve(problem, s, tol, max_iter, rtol, atol, escape_radius) for s in batch]

    pool = None
    if nw > 1:
        try:
            pool = ProcessPoolExecutor(max_workers=nw)
        except (OSError, ValueError):
            pool = None

    best: _StartOutcome | None = None
    total_iters = 0
    tried = 0
    winner = None
    try:
        step = nw if pool is not None else 1
        for i in range(0, len(starts), step):
            batch = starts[i:i + step]
            if pool is not None:
                try:
                    futures = [pool.submit(_lm_solve, problem, s, tol, max_iter, rtol, atol, escape_radius)
                               for s in batch]
                    outcomes = [fu.result() for fu in futures]
                except Exception:  # unpicklable user callables
                    pool.shutdown(cancel_futures=True)
                    pool, step = None, 1
                    outcomes = run_serial(batch)
            else:
                outcomes = run_serial(batch)
            for s, out in zip(batch, outcomes):
                tried += 1
                total_iters += out.iterations
                if best is None or out.residual < best.residual:
                    best = out
                if out.converged:
                    winner = (s, out)
                    break
            if winner is not None:
                break
    finally:
        if pool is not None:
            pool.shutdown()

    if winner is None:
        return FixedPointResult(found=False, xi_star=best.xi if best else None,
                                residual_norm=best.residual if best else math.inf,
                                starts_tried=tried, iterations=total_iters, tol=tol)
    start, out = winner
    traj = integrate(problem, out.xi, 0.0, TWO_PI, rtol=rtol, atol=atol)
    closure = abs(traj.states[-1, 0] - out.xi.zeta) + abs(traj.states[-1, 1] - out.xi.eta)
    return FixedPointResult(found=True, xi_star=out.xi, residual_norm=out.residual, starts_tried=tried,
                            iterations=total_iters, start=start, ode_residual=ode_residual(problem, traj),
                            closure_error=float(closure), tol=tol)
