import numpy as np
import pytest

from lrst import TrialDataset

# filled by test_acceptance; printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def random_panel(rng, n_arms=(3, 3), T=2, K=1, ties=False, scale=1.0):
    """Dataset with control first; ``ties`` draws from a small integer grid."""
    arrays = []
    for n in n_arms:
        if ties:
            arrays.append(rng.integers(0, 4, size=(n, T, K)).astype(float))
        else:
            arrays.append(scale * rng.standard_normal((n, T, K)))
    return TrialDataset.from_arrays(arrays[0], arrays[1:])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
