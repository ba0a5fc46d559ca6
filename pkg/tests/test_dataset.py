import json

import numpy as np
import pytest

from energytree import (Dataset, DatasetError, FunctionalColumn, GraphColumn, NominalColumn,
                        NumericColumn, Response, load_dataset, save_dataset, subset_view, validate)
from energytree.dataset import as_dataset


def _columns_equal(a, b):
    assert a.name == b.name and a.kind == b.kind
    if a.kind == "numeric":
        np.testing.assert_array_equal(a.values, b.values)
    elif a.kind == "nominal":
        assert list(a.labels()) == list(b.labels())
    elif a.kind == "functional":
        np.testing.assert_array_equal(a.grid, b.grid)
        np.testing.assert_array_equal(a.values, b.values)
    else:
        np.testing.assert_array_equal(a.adjacency, b.adjacency)


@pytest.mark.parametrize("graph_format", ["files", "edges"])
def test_round_trip(mixed, tmp_path, graph_format):
    save_dataset(mixed, tmp_path, graph_format=graph_format)
    back = load_dataset(tmp_path / "manifest.json")
    assert back.n == mixed.n
    for a, b in zip(mixed.covariates, back.covariates):
        _columns_equal(a, b)
    np.testing.assert_array_equal(back.response.values, mixed.response.values)


def test_categorical_round_trip(tmp_path):
    ds = Dataset([NumericColumn("x", [1.0, 2.0, 3.0])], Response.categorical(["b", "a", "b"]))
    save_dataset(ds, tmp_path)
    back = load_dataset(tmp_path / "manifest.json")
    assert back.response.kind == "categorical"
    assert [back.response.levels[c] for c in back.response.values] == ["b", "a", "b"]


def test_missing_manifest(tmp_path):
    with pytest.raises(DatasetError, match="manifest not found"):
        load_dataset(tmp_path / "nope.json")


def test_missing_response_allowed_for_scoring(mixed, tmp_path):
    save_dataset(Dataset(mixed.covariates), tmp_path)
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "manifest.json")
    assert load_dataset(tmp_path / "manifest.json", require_response=False).response is None


def test_bad_adjacency_names_covariate(mixed, tmp_path):
    save_dataset(mixed, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    entry = next(e for e in manifest["covariates"] if e["kind"] == "graph")
    first = tmp_path / entry["files"][0]
    rows = first.read_text().splitlines()
    first.write_text("\n".join(rows[:-1]) + "\n")  # drop a row: no longer square
    with pytest.raises(DatasetError, match="X4"):
        load_dataset(tmp_path / "manifest.json")


def test_asymmetric_graph_rejected():
    a = np.zeros((1, 3, 3))
    a[0, 0, 1] = 1.0
    ds = Dataset([GraphColumn("g", a, "binary")], Response.numeric([0.0]))
    assert any("g" in v for v in validate(ds))


def test_validate_reports_violations():
    ds = Dataset([NumericColumn("x", [1.0, np.nan]),
                  FunctionalColumn("f", [0.0, 0.5, 1.0], np.ones((3, 3)))],
                 Response.numeric([1.0, 2.0]))
    problems = validate(ds)
    assert any("'x'" in p for p in problems)
    assert any("'f'" in p for p in problems)


def test_valid_dataset_has_no_violations(mixed):
    assert validate(mixed) == []


def test_nominal_first_appearance_encoding():
    col = NominalColumn.from_labels("c", ["z", "a", "z", "m"])
    assert col.levels == ("z", "a", "m")
    assert list(col.codes) == [0, 1, 0, 2]
    assert list(col.labels()) == ["z", "a", "z", "m"]


def test_subset_view_repeats_and_excludes():
    ds = Dataset([NumericColumn("x", [1.0, 2.0, 3.0])], Response.numeric([0.0, 1.0, 2.0]))
    view = subset_view(ds, [2, 0, 1])
    assert list(view.index) == [0, 0, 2]
    assert view.m == 3
    with pytest.raises((DatasetError, ValueError)):
        subset_view(ds, [1, -1, 0])
    with pytest.raises((DatasetError, ValueError)):
        subset_view(ds, [0.5, 1, 0])


def test_as_dataset_from_array():
    ds = as_dataset(np.arange(6.0).reshape(3, 2), [1.0, 2.0, 3.0])
    assert ds.names == ["x0", "x1"]
    assert ds.response.kind == "numeric"
