import numpy as np
import pytest

from ensmc.datagen import DataGenSpec, generate
from ensmc.gpmodel import GpDataset, GpModelSpec

# data seed whose posterior puts substantial mass in both noise regimes (see README)
PAPER_DATA_SEED = 14


@pytest.fixture(scope="session")
def paper_data():
    Z, y = generate(DataGenSpec.paper(PAPER_DATA_SEED))
    return GpDataset(Z, y).centered()


@pytest.fixture(scope="session")
def small_data():
    Z, y = generate(DataGenSpec(n=12, p=3, noise_sd=0.4, seed=5))
    return GpDataset(Z, y).centered()


@pytest.fixture(scope="session")
def model_spec():
    return GpModelSpec()


@pytest.fixture
def nprng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from tests.test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(RESULTS):
        ok, detail = RESULTS[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
