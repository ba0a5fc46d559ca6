import json

import numpy as np
import pytest

from energytree.simulate import (GeneratorSpec, binomial_ci, corrected_frequencies, erdos_renyi,
                                 gen_covariates, power_at, scenario_power, scenario_unbiasedness)


def test_shapes():
    cols = gen_covariates(7, GeneratorSpec(grid_size=12, n_vertices=5), 0)
    assert [c.kind for c in cols] == ["numeric", "nominal", "functional", "graph"]
    assert cols[2].values.shape == (7, 12)
    assert cols[3].adjacency.shape == (7, 5, 5)
    a = cols[3].adjacency
    np.testing.assert_array_equal(a, np.swapaxes(a, 1, 2))
    assert np.all(np.diagonal(a, axis1=1, axis2=2) == 0)


def test_empty_and_complete_graphs():
    rng = np.random.default_rng(0)
    assert erdos_renyi(3, 6, 0.0, rng).sum() == 0
    full = erdos_renyi(2, 6, 1.0, rng)
    assert np.all(full.sum(axis=(1, 2)) == 30)
    with pytest.raises(ValueError):
        erdos_renyi(1, 3, 1.5, rng)


def test_edge_density():
    a = erdos_renyi(200, 20, 0.2, np.random.default_rng(1))
    density = a.sum() / (200 * 20 * 19)
    assert abs(density - 0.2) < 4 * np.sqrt(0.2 * 0.8 / (200 * 190))


def test_curve_mean_shift():
    cols = gen_covariates(4000, GeneratorSpec(grid_size=10, n_vertices=3, gp_mean=0.5), 2)
    means = cols[2].values.mean(axis=0)
    assert np.all(np.abs(means - 0.5) < 4 / np.sqrt(4000))


def test_binomial_ci():
    lo, hi = binomial_ci(0.25, 10000)
    assert (round(lo, 4), round(hi, 4)) == (0.2415, 0.2585)
    lo, hi = binomial_ci(0.5, 100)
    assert (round(lo, 3), round(hi, 3)) == (0.402, 0.598)
    assert binomial_ci(0.0, 50) == (0.0, 0.0)
    assert binomial_ci(1.0, 1) == (1.0, 1.0)
    with pytest.raises(ValueError):
        binomial_ci(0.5, 0)


def test_corrected_frequencies():
    f = [0.2, 0.2, 0.3]
    a = [0.5, 0.5, 0.9]
    got = corrected_frequencies(f, a, [0, 0, 1])
    np.testing.assert_allclose(got, [0.4 / (0.4 + 1 / 3), (1 / 3) / (0.4 + 1 / 3)])
    np.testing.assert_allclose(corrected_frequencies([0.2, 0.1], [1, 1], [0, 1]), [2 / 3, 1 / 3])
    with pytest.raises(ValueError):
        corrected_frequencies([0.5], [0.2], [0])


def test_unbiasedness_small(tmp_path):
    res = scenario_unbiasedness(R=20, n=40, seed=3, n_permutations=49)
    est = res.estimates()
    assert est.shape == (4,)
    assert est.sum() == pytest.approx(1.0)
    paths = res.write(tmp_path)
    lines = (tmp_path / "unbiasedness_selection.csv").read_text().splitlines()
    assert len(lines) == 5 and lines[0] == "label,estimate,lo,hi,count,total"
    meta = json.loads((tmp_path / "unbiasedness_metadata.json").read_text())
    assert meta["seed"] == 3 and meta["replications"] == 20
    assert len(paths) == 2


def test_single_replication():
    res = scenario_unbiasedness(R=1, n=30, seed=0, n_permutations=19)
    assert res.estimates().sum() == 1.0
    assert all(r["lo"] == r["hi"] for r in res.rows)


def test_power_small(tmp_path):
    res = scenario_power("graph", (0.0, 1.0), R=10, n=60, seed=1, n_permutations=49)
    assert len(res.rows) == 2 and len(res.conditional) == 2
    res.write(tmp_path)
    assert len((tmp_path / "power-graph_power.csv").read_text().splitlines()) == 3
    levels = [power_at(res, a) for a in (0.01, 0.05, 0.2)]
    assert np.all(levels[0] <= levels[1]) and np.all(levels[1] <= levels[2])
    np.testing.assert_allclose(power_at(res, 0.05), res.estimates())


def test_replications_independent_of_workers():
    a = scenario_unbiasedness(R=6, n=30, seed=5, n_permutations=19, n_jobs=1)
    b = scenario_unbiasedness(R=6, n=30, seed=5, n_permutations=19, n_jobs=2)
    np.testing.assert_array_equal(a.records["selected"], b.records["selected"])


def test_invalid_scenario():
    with pytest.raises(ValueError):
        scenario_power("numeric", R=1)
