import pytest

from resonance_lab.model import (
    ForcingSignal,
    OscillatorProblem,
    make_builtin_nonlinearity,
    zero_nonlinearity,
)

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def arctan_g():
    return make_builtin_nonlinearity("arctan-scaled", 1.0, 1.0)


def arctan_damping():
    """f = 1/(1 + x^2), F = arctan."""
    return make_builtin_nonlinearity("arctan-scaled", 1.0, 1.0, derivative=True)


def cosine_problem(f, g, E, n=1):
    return OscillatorProblem(n=n, f=f, g=g, e=ForcingSignal.resonant_cosine(E, n))


@pytest.fixture
def zero():
    return zero_nonlinearity()


@pytest.fixture
def free_oscillator():
    z = zero_nonlinearity()
    return OscillatorProblem(n=1, f=z, g=z, e=ForcingSignal.trig([]))


@pytest.fixture
def pure_g_periodic():
    return cosine_problem(zero_nonlinearity(), arctan_g(), 1.0)


@pytest.fixture
def pure_g_unbounded():
    return cosine_problem(zero_nonlinearity(), arctan_g(), 3.0)
