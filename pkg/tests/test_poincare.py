import csv
import math

import numpy as np
import pytest

from conftest import arctan_damping, arctan_g, cosine_problem
from resonance_lab.model import TWO_PI, ForcingSignal, OscillatorProblem, PreconditionError, zero_nonlinearity
from resonance_lab.conditions import check_conditions
from resonance_lab.fourier import resonant_coefficients
from resonance_lab.odeint import IntegrationFailure, integrate
from resonance_lab.poincare import (
    default_radius,
    escape_diagnostic,
    find_periodic,
    iterate_orbit,
    lyapunov_v,
    poincare_map,
    start_grid,
    write_orbit_csv,
)

RNG = np.random.default_rng(20240611)


def linear(e, n=1):
    z = zero_nonlinearity()
    return OscillatorProblem(n=n, f=z, g=z, e=e)


class TestPoincareMap:
    def test_identity(self, free_oscillator):
        for xi in RNG.uniform(-5, 5, size=(5, 2)):
            out = poincare_map(free_oscillator, xi)
            assert abs(out.zeta - xi[0]) < 1e-9 and abs(out.eta - xi[1]) < 1e-9

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_cosine_resonance(self, n):
        p = linear(ForcingSignal.resonant_cosine(1.0, n), n)
        for xi in RNG.uniform(-3, 3, size=(4, 2)):
            out = poincare_map(p, xi)
            assert abs(out.zeta - xi[0]) < 1e-8
            assert abs(out.eta - (xi[1] + math.pi)) < 1e-8

    def test_sine_resonance(self):
        # y = zeta cos t + (eta + 1/2) sin t - t cos t / 2 solves y'' + y = sin t
        p = linear(ForcingSignal.trig([(1, 0.0, 1.0)]))
        for xi in RNG.uniform(-3, 3, size=(4, 2)):
            out = poincare_map(p, xi)
            assert abs(out.zeta - (xi[0] - math.pi)) < 1e-8
            assert abs(out.eta - xi[1]) < 1e-8

    def test_backward_inverts(self, pure_g_unbounded):
        xi = (0.3, -1.2)
        fwd = poincare_map(pure_g_unbounded, xi)
        back = poincare_map(pure_g_unbounded, fwd, backward=True)
        assert abs(back.zeta - xi[0]) + abs(back.eta - xi[1]) < 1e-8

    def test_rejects_non_finite(self, free_oscillator):
        with pytest.raises(ValueError):
            poincare_map(free_oscillator, (math.inf, 0.0))

    def test_failure_propagates(self, free_oscillator, monkeypatch):
        import resonance_lab.poincare as mod

        def tiny_budget(*args, **kw):
            return integrate(*args, **{**kw, "max_steps": 3})

        monkeypatch.setattr(mod, "integrate", tiny_budget)
        with pytest.raises(IntegrationFailure) as info:
            poincare_map(free_oscillator, (1.0, 0.0))
        assert info.value.trajectory.status == "max-steps"


class TestLyapunovV:
    def test_delta_zero_no_F(self, free_oscillator):
        assert lyapunov_v(free_oscillator, (3.0, -1.5), 0.0) == -1.5

    def test_delta_half_pi(self):
        p = cosine_problem(arctan_damping(), arctan_g(), 1.0, n=3)
        assert lyapunov_v(p, (2.0, 7.0), math.pi / 2) == pytest.approx(-6.0, abs=1e-15)

    def test_arctan_F(self):
        p = cosine_problem(arctan_damping(), zero_nonlinearity(), 1.0)
        assert lyapunov_v(p, (0.0, 2.0), 0.0) == 2.0
        assert lyapunov_v(p, (1.0, 0.0), 0.0) == pytest.approx(math.pi / 4)


class TestOrbit:
    def test_lengths_and_free_oscillator(self, free_oscillator):
        orbit = iterate_orbit(free_oscillator, (1.0, 2.0), 5)
        assert len(orbit.points) == len(orbit.v_values) == len(orbit.norms) == 6
        assert not orbit.delta_defined
        assert np.ptp(orbit.v_values) < 1e-9

    def test_linear_resonance_v_steps_pi(self):
        p = linear(ForcingSignal.resonant_cosine(1.0, 1))
        orbit = iterate_orbit(p, (0.5, 0.0), 8)
        assert orbit.delta == 0.0
        np.testing.assert_allclose(orbit.v_increments(), math.pi, atol=1e-8)

    def test_v_monotone_from_origin(self, pure_g_unbounded):
        orbit = iterate_orbit(pure_g_unbounded, (0.0, 0.0), 200)
        assert orbit.expect_monotone
        assert orbit.v_monotone_count() == (200, 200)
        assert orbit.incidents == []

    def test_backward_v_decreases_in_map_order(self, pure_g_unbounded):
        orbit = iterate_orbit(pure_g_unbounded, (0.0, 0.0), 20, direction="backward")
        assert np.all(np.diff(orbit.v_values) < 0)
        assert np.all(orbit.v_increments() > 0)

    @pytest.mark.parametrize("name", ["pure-g", "pure-f", "mixed"])
    def test_conjugacy(self, name):
        f = zero_nonlinearity() if name == "pure-g" else arctan_damping()
        g = zero_nonlinearity() if name == "pure-f" else arctan_g()
        p = cosine_problem(f, g, 3.0 if name != "mixed" else 5.0)
        K = 12
        orbit = iterate_orbit(p, (0.4, -0.2), K)
        for k in (1, 5, K):
            once = integrate(p, (0.4, -0.2), 0.0, k * TWO_PI).final
            assert math.hypot(once.zeta - orbit.points[k].zeta, once.eta - orbit.points[k].eta) < 1e-7 * k

    def test_bad_arguments(self, free_oscillator):
        with pytest.raises(PreconditionError):
            iterate_orbit(free_oscillator, (0, 0), 0)
        with pytest.raises(ValueError):
            iterate_orbit(free_oscillator, (0, 0), 2, direction="sideways")

    def test_csv(self, tmp_path, pure_g_unbounded):
        orbit = iterate_orbit(pure_g_unbounded, (0.0, 0.0), 3)
        path = tmp_path / "orbit.csv"
        write_orbit_csv(orbit, path)
        rows = list(csv.reader(open(path, encoding="utf-8")))
        assert rows[0] == ["k", "zeta", "eta", "V", "norm"]
        assert len(rows) == 5
        assert float(rows[2][1]) == orbit.points[1].zeta
        assert float(rows[3][3]) == orbit.v_values[2]


class TestVIncrease:
    @pytest.mark.parametrize("f_name, E", [("pure-g", 3.0), ("pure-f", 3.0), ("mixed", 5.0)])
    def test_lower_bound(self, f_name, E):
        f = zero_nonlinearity() if f_name == "pure-g" else arctan_damping()
        g = zero_nonlinearity() if f_name == "pure-f" else arctan_g()
        p = cosine_problem(f, g, E)
        rep = check_conditions(p)
        delta = rep.coefficients.delta
        bound = rep.magnitude - rep.rhs_necessary
        assert bound >= 0
        xs = np.random.default_rng(7).uniform(-50, 50, size=(40, 2))
        for xi in xs:
            dv = lyapunov_v(p, poincare_map(p, xi), delta) - lyapunov_v(p, xi, delta)
            assert dv > 0
            assert dv >= bound - 1e-6


class TestEscape:
    def test_pure_g_escapes_both(self, pure_g_unbounded):
        rep = escape_diagnostic(pure_g_unbounded, (0.0, 0.0), K=200, norm_threshold=100.0)
        assert rep.escaped_both
        assert rep.v_strictly_monotone
        assert rep.forward.v_monotone_steps == 200
        assert "v-monotone" in rep.signals and "norm-threshold" in rep.signals
        assert rep.summary().startswith("escaped forward and backward")
        assert rep.forward.final_period_min_norm >= 100.0

    def test_periodic_start_not_escaped(self, pure_g_periodic):
        fp = find_periodic(pure_g_periodic)
        rep = escape_diagnostic(pure_g_periodic, fp.xi_star, K=20)
        assert not rep.forward.escaped and not rep.backward.escaped
        assert rep.forward.verdict == "inconclusive"
        assert rep.forward.max_norm < 2.0

    def test_damping_escape(self):
        p = cosine_problem(arctan_damping(), zero_nonlinearity(), 3.0)
        rep = escape_diagnostic(p, (0.0, 0.0), K=200, directions=("forward",))
        assert rep.forward.escaped and rep.backward is None

    def test_report_dict(self, pure_g_unbounded):
        d = escape_diagnostic(pure_g_unbounded, (1.0, 1.0), K=5, norm_threshold=1.0).to_dict()
        assert set(d) >= {"xi0", "K", "threshold", "forward", "backward", "escaped_both", "signals", "summary"}


class TestFindPeriodic:
    def test_grid(self):
        g = start_grid(2.0, 3)
        assert [(p.zeta, p.eta) for p in g[:3]] == [(-2.0, -2.0), (-2.0, 0.0), (-2.0, 2.0)]
        assert len(start_grid(1.0)) == 81

    def test_default_radius(self, pure_g_unbounded, free_oscillator):
        assert default_radius(pure_g_unbounded) == pytest.approx(1.5 * math.pi)
        assert default_radius(free_oscillator) == 1.0

    def test_pure_g_found(self, pure_g_periodic):
        r = find_periodic(pure_g_periodic)
        assert r.found and r.residual_norm < 1e-9
        assert r.ode_residual < 1e-6
        assert r.closure_error < 10 * r.tol
        assert r.xi_star.zeta == pytest.approx(1.31987, abs=1e-4)

    def test_free_oscillator_first_start(self, free_oscillator):
        r = find_periodic(free_oscillator)
        assert r.found and r.starts_tried == 1 and r.iterations == 0
        assert (r.xi_star.zeta, r.xi_star.eta) == (-1.0, -1.0)

    def test_unbounded_not_found(self, pure_g_unbounded):
        r = find_periodic(pure_g_unbounded, grid_size=3)
        assert not r.found and r.starts_tried == 9
        assert r.residual_norm > 1.0

    def test_parallel_matches_serial(self, pure_g_periodic):
        a = find_periodic(pure_g_periodic, workers=1)
        b = find_periodic(pure_g_periodic, workers=2)
        assert a.to_dict() == b.to_dict()

    def test_tol_precondition(self, free_oscillator):
        with pytest.raises(PreconditionError):
            find_periodic(free_oscillator, tol=0.0)

    def test_explicit_starts(self, pure_g_periodic):
        r = find_periodic(pure_g_periodic, starts=[(1.0, 0.0)])
        assert r.found and r.starts_tried == 1
        assert resonant_coefficients(pure_g_periodic.e, 1).magnitude == pytest.approx(math.pi)
