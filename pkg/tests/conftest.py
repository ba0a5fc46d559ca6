import numpy as np
import pytest

from energytree import Dataset, Response, save_dataset
from energytree.simulate import GeneratorSpec, gen_covariates


def mixed_dataset(n=60, seed=1, signal="numeric"):
    """Four covariate kinds; the response depends on one of them."""
    rng = np.random.default_rng(seed)
    cols = gen_covariates(n, GeneratorSpec(grid_size=20, n_vertices=10, edge_prob=0.3), rng)
    if signal == "numeric":
        y = 3.0 * (cols[0].values > 0.5) + 0.3 * rng.standard_normal(n)
    else:
        y = rng.standard_normal(n)
    return Dataset(cols, Response.numeric(y))


@pytest.fixture
def mixed():
    return mixed_dataset()


@pytest.fixture
def manifest(tmp_path):
    save_dataset(mixed_dataset(), tmp_path / "data")
    return tmp_path / "data" / "manifest.json"


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
