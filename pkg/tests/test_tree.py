import json

import numpy as np
import pytest

from energytree import (Dataset, DatasetError, FitConfig, FunctionalColumn, GraphColumn,
                        NominalColumn, NumericColumn, Response, grow, load, render_text, save)
from energytree.tree import ModelFormatError, ModelVersionError, SchemaError

from conftest import mixed_dataset


def _fit(ds, **kw):
    kw.setdefault("n_permutations", 199)
    kw.setdefault("seed", 1)
    return grow(ds, FitConfig(**kw))


def test_step_function_recovered():
    rng = np.random.default_rng(0)
    x = rng.uniform(size=100)
    y = (x > 0.5).astype(float)
    noise = NumericColumn("z", rng.uniform(size=100))
    tree = _fit(Dataset([NumericColumn("x", x), noise], Response.numeric(y)))
    assert tree.depth == 1
    assert tree.root.selected == "x"
    assert abs(tree.root.rule.threshold - 0.5) < 0.05
    np.testing.assert_array_equal(tree.predict(Dataset([NumericColumn("x", x), noise])), y)


def test_too_small_is_single_node():
    ds = Dataset([NumericColumn("x", [1.0, 2.0, 3.0])], Response.numeric([1.0, 2.0, 3.0]))
    tree = _fit(ds, min_bucket=5)
    assert len(tree.nodes) == 1
    assert tree.root.prediction["mean"] == pytest.approx(2.0)


def test_mean_prediction():
    y = np.array([100.0, 110.0, 119.22, 109.74 * 4 - 329.22])
    ds = Dataset([NumericColumn("x", np.zeros(4))], Response.numeric(y))
    tree = _fit(ds)
    assert tree.predict(ds)[0] == pytest.approx(109.74)


def test_weights_conserved(mixed):
    tree = _fit(mixed)
    for node in tree.nodes:
        if not node.is_terminal:
            left, right = tree.nodes[node.left], tree.nodes[node.right]
            np.testing.assert_array_equal(left.weights + right.weights, node.weights)
            assert left.n > 0 and right.n > 0


def test_apply_matches_fit_partition(mixed):
    tree = _fit(mixed)
    leaves = tree.apply(mixed)
    for node in tree.leaves():
        np.testing.assert_array_equal(leaves == node.id, node.weights > 0)


def test_save_load_round_trip(mixed, tmp_path):
    tree = _fit(mixed)
    save(tree, tmp_path / "m.json")
    back = load(tmp_path / "m.json")
    assert back.to_json() == tree.to_json()
    np.testing.assert_array_equal(back.predict(mixed), tree.predict(mixed))


def test_truncated_model(mixed, tmp_path):
    path = tmp_path / "m.json"
    save(_fit(mixed), path)
    path.write_text(path.read_text()[:200])
    with pytest.raises(ModelFormatError):
        load(path)


def test_future_version(mixed, tmp_path):
    path = tmp_path / "m.json"
    d = _fit(mixed).to_dict()
    d["version"] = 99
    path.write_text(json.dumps(d))
    with pytest.raises(ModelVersionError, match="version"):
        load(path)


def test_schema_errors(mixed):
    tree = _fit(mixed)
    cols = list(mixed.covariates)
    f = cols[2]
    short = FunctionalColumn(f.name, f.grid[:10], f.values[:, :10])
    with pytest.raises(SchemaError, match="X3"):
        tree.predict(Dataset(cols[:2] + [short] + cols[3:]))
    with pytest.raises(SchemaError, match="missing"):
        tree.predict(Dataset(cols[:3]))
    bad = NominalColumn("X2", np.zeros(mixed.n, dtype=int), ("unseen",))
    with pytest.raises(SchemaError, match="unseen"):
        tree.predict(Dataset([cols[0], bad] + cols[2:]))
    g = cols[3]
    small = GraphColumn("X4", g.adjacency[:, :5, :5], "binary")
    with pytest.raises(SchemaError, match="vertices"):
        tree.predict(Dataset(cols[:3] + [small]))


def test_render_text(mixed):
    text = render_text(_fit(mixed))
    first = text.splitlines()[0]
    assert first.startswith("[0] n=60: split on X1")
    assert "yes [1]" in text and "no [" in text
    assert "mean =" in text


def test_determinism_across_workers(mixed):
    cfg = FitConfig(n_permutations=199, seed=11)
    a = grow(mixed, cfg, n_jobs=1).to_json()
    b = grow(mixed, cfg, n_jobs=8).to_json()
    assert a == b


def test_alpha_monotone(mixed):
    def paths(alpha):
        return {nd.path for nd in _fit(mixed, alpha=alpha, min_bucket=3).nodes}
    sizes = []
    prev = None
    for alpha in (0.01, 0.05, 0.2, 0.5, 1.0):
        cur = paths(alpha)
        if prev is not None:
            assert prev <= cur
        prev = cur
        sizes.append(len(cur))
    assert sizes == sorted(sizes)


def test_numeric_scaling_invariance(mixed):
    cols = list(mixed.covariates)
    scaled = Dataset([NumericColumn("X1", 7.5 * cols[0].values)] + cols[1:], mixed.response)
    a, b = _fit(mixed), _fit(scaled)
    assert len(a.nodes) == len(b.nodes)
    for na, nb in zip(a.nodes, b.nodes):
        np.testing.assert_array_equal(na.weights, nb.weights)
        assert na.p_values == nb.p_values


def _nominal_signal(seed=3, n=60):
    rng = np.random.default_rng(seed)
    labels = rng.choice(["a", "b", "c"], n)
    y = np.where(labels == "a", 2.0, 0.0) + 0.3 * rng.normal(size=n)
    return labels, NumericColumn("x", rng.uniform(size=n)), Response.numeric(y)


def test_nominal_relabel_invariance():
    labels, x, y = _nominal_signal()
    rename = {"a": "q", "b": "r", "c": "s"}
    a = _fit(Dataset([NominalColumn.from_labels("c", labels), x], y))
    relabeled = NominalColumn.from_labels("c", [rename[v] for v in labels], ("s", "q", "r"))
    b = _fit(Dataset([relabeled, x], y))
    assert len(a.nodes) == len(b.nodes)
    for na, nb in zip(a.nodes, b.nodes):
        np.testing.assert_array_equal(na.weights, nb.weights)
        assert na.p_values == nb.p_values
    rename_back = {"q": "a", "r": "b", "s": "c"}
    assert {rename_back[v] for v in b.root.rule.levels} == set(a.root.rule.levels)


def test_clustering_split_on_graphs():
    rng = np.random.default_rng(4)
    n = 60
    group = np.arange(n) >= 30
    p = np.where(group, 0.8, 0.2)
    up = np.triu(rng.random((n, 8, 8)) < p[:, None, None], 1)
    adj = (up | np.swapaxes(up, 1, 2)).astype(float)
    y = group * 2.0 + 0.2 * rng.normal(size=n)
    ds = Dataset([GraphColumn("g", adj, "binary"), NumericColumn("z", rng.uniform(size=n))],
                 Response.numeric(y))
    tree = _fit(ds, split_method="clustering")
    assert tree.root.rule.kind == "medoid_pair"
    assert tree.root.selected == "g"
    left = tree.nodes[tree.root.left].weights.astype(bool)
    assert max(np.mean(left == group), np.mean(left != group)) > 0.9
    np.testing.assert_array_equal(tree.predict(ds), load_round_trip(tree).predict(ds))


def load_round_trip(tree):
    from energytree.tree import EnergyTree
    return EnergyTree.from_dict(json.loads(tree.to_json()))


def test_fve_split_on_curves(tmp_path):
    rng = np.random.default_rng(5)
    n = 60
    t = np.linspace(0, 1, 30)
    amp = rng.uniform(-1, 1, n)
    curves = amp[:, None] * np.sin(2 * np.pi * t) + 0.05 * rng.normal(size=(n, 30))
    y = (amp > 0) * 3.0 + 0.2 * rng.normal(size=n)
    ds = Dataset([FunctionalColumn("f", t, curves)], Response.numeric(y))
    tree = _fit(ds, n_basis=8)
    assert tree.root.rule.kind == "component_threshold"
    save(tree, tmp_path / "m.json")
    np.testing.assert_array_equal(load(tmp_path / "m.json").predict(ds), tree.predict(ds))


def test_classification():
    rng = np.random.default_rng(6)
    x = rng.uniform(size=80)
    y = Response.categorical(np.where(x > 0.4, "hi", "lo"))
    tree = _fit(Dataset([NumericColumn("x", x)], y))
    assert tree.is_classifier
    assert list(tree.predict(Dataset([NumericColumn("x", [0.1, 0.9])]))) == ["lo", "hi"]
    proba = tree.predict_proba(Dataset([NumericColumn("x", [0.1, 0.9])]))
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert "predict" in render_text(tree)


def test_max_depth():
    tree = _fit(mixed_dataset(), max_depth=0)
    assert len(tree.nodes) == 1 and tree.root.stop_reason == "maximum depth"


def test_missing_response_rejected(mixed):
    with pytest.raises(DatasetError):
        grow(Dataset(mixed.covariates), FitConfig())


def test_pure_noise_root_usually_terminal():
    from energytree.simulate import GeneratorSpec, gen_covariates
    from energytree.energy import substream

    spec = GeneratorSpec(grid_size=20, n_vertices=30)
    terminal = 0
    for r in range(200):
        rng = substream(42, r)
        ds = Dataset(gen_covariates(100, spec, rng), Response.numeric(rng.standard_normal(100)))
        tree = grow(ds, FitConfig(alpha=0.05, n_permutations=999, seed=42, max_depth=1))
        terminal += tree.root.is_terminal
    assert terminal / 200 >= 0.93
