"""Resonant forced oscillators x'' + f(x)x' + g(x) + n^2 x = e(t): conditions, periodic solutions, escape."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    BoundedNonlinearity,
    ConfigurationError,
    ForcingSignal,
    NumericalLimitError,
    OscillatorProblem,
    PhasePoint,
    PreconditionError,
    antiderivative_of,
    load_problem,
    make_builtin_nonlinearity,
    make_tabulated,
    problem_from_dict,
    zero_nonlinearity,
)
from .fourier import ResonantCoefficients, phase_delta, resonant_coefficients, sign_set_integral  # noqa: E402
from .odeint import (  # noqa: E402
    EnergyBoundConstants,
    IntegrationFailure,
    Trajectory,
    check_energy_growth,
    energy_bound_constants,
    integrate,
)
from .conditions import (  # noqa: E402
    Classification,
    ConditionReport,
    build_counterexample,
    check_conditions,
    oscillatory_residual,
)
from .poincare import (  # noqa: E402
    EscapeReport,
    FixedPointResult,
    PoincareOrbit,
    escape_diagnostic,
    find_periodic,
    iterate_orbit,
    lyapunov_v,
    poincare_map,
)
