import numpy as np
import pytest

from lpplfit.model import LpplParams
from lpplfit.synth_oracle import SynthSpec, generate

TRUTH = LpplParams(A=10.0, m=5.0, alpha=0.5, C=0.2, omega=9.0, phi=1.0, t_c=2020.0)


def truth_spec(noise=0.0, seed=0, n_points=500):
    return SynthSpec(TRUTH, 2016.0, 2019.8, n_points=n_points, noise_sigma=noise, seed=seed)


@pytest.fixture(scope="session")
def truth():
    return TRUTH


@pytest.fixture(scope="session")
def clean_series():
    return generate(truth_spec())


@pytest.fixture(scope="session")
def clean_fit(clean_series):
    from lpplfit.fit_engine import fit

    return fit(clean_series)


@pytest.fixture(scope="session")
def small_series():
    """Short 1%-noise synthetic for quick optimiser tests."""
    return generate(truth_spec(noise=0.01, seed=7, n_points=120))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
