import numpy as np
import pytest

from peach.scenario import (
    InterfererSpec, Scenario, SystemDims, build_pilot, exponential_correlation,
    kronecker_covariance,
)

SMALL_SEEDS = range(5)


def random_small_scenario(seed: int, beta: float = 0.1, nt=2, nr=4, b=2) -> Scenario:
    """Exponential-Kronecker scenario with seed-drawn coefficients, SNR and pilot."""
    rng = np.random.default_rng(1000 + seed)
    r_t, r_r = rng.uniform(0.1, 0.9, size=2)
    gamma = 10 ** (rng.uniform(0.0, 2.0))
    dims = SystemDims(nt, nr, b)
    raw = rng.standard_normal((nt, b)) + 1j * rng.standard_normal((nt, b))
    pilot = build_pilot(dims, gamma, kind="custom", custom=raw)
    r_cov = kronecker_covariance(exponential_correlation(nt, r_t),
                                 exponential_correlation(nr, r_r))
    interferers = []
    if beta > 0:
        for _ in range(2):
            it, ir = rng.uniform(0.1, 0.9, size=2)
            interferers.append(InterfererSpec(beta, exponential_correlation(nt, it),
                                              exponential_correlation(nr, ir)))
    return Scenario.build(dims, r_cov, pilot, 1.0, interferers, {"seed": seed})


@pytest.fixture(params=list(SMALL_SEEDS), ids=lambda s: f"seed{s}")
def small_scn(request):
    return random_small_scenario(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance report ------------------------------------------------------------------

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def criterion(request):
    """``record(label, passed, detail)``: one PASS/FAIL line per acceptance criterion."""

    def record(label: str, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        request.config.stash[_LINES].append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
