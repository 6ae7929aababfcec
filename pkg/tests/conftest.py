import numpy as np
import pytest

from qndinterface.protocols import PostSelection, ProbabilisticConfig
from qndinterface.wigner_calculus import single_photon_wigner


@pytest.fixture
def rng():
    return np.random.default_rng(20100901)


@pytest.fixture(scope="session")
def photon():
    return single_photon_wigner()


@pytest.fixture(scope="session")
def fig3_engines(photon):
    """Post-selection engines for the two published parameter sets."""
    return {
        k: PostSelection(photon, ProbabilisticConfig.symmetric(k, v_m=0.5, v_a=5.0))
        for k in (0.3, 0.5)
    }


ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


@pytest.fixture
def acceptance(request):
    """Record the outcome of an acceptance criterion for the terminal summary."""
    results = request.config.stash[ACCEPTANCE_KEY]

    def record(number, passed, detail):
        results[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        passed, detail = results[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
