"""Containers for mixed-type learning samples and manifest-based ingestion.

A learning sample is a response plus an ordered list of covariate columns.
Four column kinds are supported: numeric, nominal, functional (curves on a
shared grid) and graph (dense adjacency matrices with a shared vertex set).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

RESPONSE_KINDS = ("numeric", "categorical")
COVARIATE_KINDS = ("numeric", "nominal", "functional", "graph")
GRAPH_KINDS = ("binary", "weighted")


class DatasetError(ValueError):
    """Raised for malformed data: bad files, shape mismatches, broken invariants."""

    def __init__(self, message, covariate=None, row=None):
        self.covariate = covariate
        self.row = row
        where = []
        if covariate is not None:
            where.append(f"covariate {covariate!r}")
        if row is not None:
            where.append(f"row {row}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


def _encode_labels(labels, levels=None):
    """Encode labels as integer codes by first appearance (or a given table)."""
    labels = [str(v) for v in labels]
    if levels is None:
        levels = list(dict.fromkeys(labels))
    lookup = {lev: k for k, lev in enumerate(levels)}
    codes = np.array([lookup.get(v, -1) for v in labels], dtype=np.int64)
    return codes, tuple(levels)


@dataclass(eq=False)
class Response:
    kind: str
    values: np.ndarray
    levels: tuple = ()

    @classmethod
    def numeric(cls, values):
        return cls("numeric", np.asarray(values, dtype=np.float64).ravel())

    @classmethod
    def categorical(cls, labels, levels=None):
        codes, levels = _encode_labels(labels, levels)
        return cls("categorical", codes, levels)

    def __len__(self):
        return len(self.values)

    @property
    def n_classes(self):
        return len(self.levels)


@dataclass(eq=False)
class NumericColumn:
    name: str
    values: np.ndarray
    kind = "numeric"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()

    def __len__(self):
        return len(self.values)

    def take(self, index):
        return NumericColumn(self.name, self.values[index])


@dataclass(eq=False)
class NominalColumn:
    name: str
    codes: np.ndarray
    levels: tuple
    kind = "nominal"

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int64).ravel()
        self.levels = tuple(str(v) for v in self.levels)

    @classmethod
    def from_labels(cls, name, labels, levels=None):
        codes, levels = _encode_labels(labels, levels)
        return cls(name, codes, levels)

    def labels(self):
        return [self.levels[c] for c in self.codes]

    def __len__(self):
        return len(self.codes)

    def take(self, index):
        return NominalColumn(self.name, self.codes[index], self.levels)


@dataclass(eq=False)
class FunctionalColumn:
    name: str
    grid: np.ndarray
    values: np.ndarray
    kind = "functional"

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float64).ravel()
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))

    def __len__(self):
        return self.values.shape[0]

    def take(self, index):
        return FunctionalColumn(self.name, self.grid, self.values[index])


@dataclass(eq=False)
class GraphColumn:
    name: str
    adjacency: np.ndarray
    graph_kind: str = "binary"
    kind = "graph"

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=np.float64)
        if self.adjacency.ndim == 2:
            self.adjacency = self.adjacency[None]

    @property
    def n_vertices(self):
        return self.adjacency.shape[-1]

    def __len__(self):
        return self.adjacency.shape[0]

    def take(self, index):
        return GraphColumn(self.name, self.adjacency[index], self.graph_kind)


Covariate = NumericColumn | NominalColumn | FunctionalColumn | GraphColumn


@dataclass(eq=False)
class Dataset:
    """A response and its covariates over ``n`` observations.

    ``response`` may be ``None`` for data that is only scored, never fitted.
    """

    covariates: list
    response: Response | None = None

    @property
    def n(self):
        if self.covariates:
            return len(self.covariates[0])
        return 0 if self.response is None else len(self.response)

    @property
    def names(self):
        return [c.name for c in self.covariates]

    def __getitem__(self, name):
        for c in self.covariates:
            if c.name == name:
                return c
        raise KeyError(name)


# ---------------------------------------------------------------------------
# validation


def _column_violations(col, n):
    out = []
    name = col.name
    if len(col) != n:
        out.append(f"covariate {name!r}: length {len(col)} differs from n={n}")
    if col.kind == "numeric":
        bad = np.flatnonzero(~np.isfinite(col.values))
        if bad.size:
            out.append(f"covariate {name!r}, row {bad[0]}: non-finite value")
    elif col.kind == "nominal":
        bad = np.flatnonzero((col.codes < 0) | (col.codes >= len(col.levels)))
        if bad.size:
            out.append(f"covariate {name!r}, row {bad[0]}: level code out of range")
    elif col.kind == "functional":
        if col.values.ndim != 2 or col.values.shape[1] != col.grid.size:
            out.append(f"covariate {name!r}: values do not match grid of size {col.grid.size}")
        if col.grid.size < 2:
            out.append(f"covariate {name!r}: grid needs at least 2 points")
        elif np.any(np.diff(col.grid) <= 0):
            out.append(f"covariate {name!r}: functional grid is not strictly increasing")
        rows = np.flatnonzero(~np.all(np.isfinite(col.values), axis=-1)) if col.values.ndim == 2 else []
        if len(rows):
            out.append(f"covariate {name!r}, row {rows[0]}: non-finite curve value")
    elif col.kind == "graph":
        out.extend(_graph_violations(col))
    else:
        out.append(f"covariate {name!r}: unknown kind {col.kind!r}")
    return out


def _graph_violations(col):
    name = col.name
    a = col.adjacency
    if col.graph_kind not in GRAPH_KINDS:
        return [f"covariate {name!r}: unknown graph kind {col.graph_kind!r}"]
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        return [f"covariate {name!r}: adjacency matrices must be square"]
    out = []
    checks = [
        (~np.all(np.isfinite(a), axis=(1, 2)), "non-finite adjacency entry"),
        (np.any(a != np.swapaxes(a, 1, 2), axis=(1, 2)), "adjacency is not symmetric"),
        (np.any(a < 0, axis=(1, 2)), "negative edge weight"),
        (np.any(np.diagonal(a, axis1=1, axis2=2) != 0, axis=1), "nonzero diagonal"),
    ]
    if col.graph_kind == "binary":
        checks.append((np.any((a != 0) & (a != 1), axis=(1, 2)), "binary graph has entries outside {0,1}"))
    for mask, msg in checks:
        rows = np.flatnonzero(mask)
        if rows.size:
            out.append(f"covariate {name!r}, row {rows[0]}: {msg}")
    return out


def validate(dataset):
    """Return every invariant violation of ``dataset`` (empty list when valid)."""
    out = []
    n = dataset.n
    if n < 1:
        out.append("dataset has no observations")
    names = [c.name for c in dataset.covariates]
    dupes = sorted({x for x in names if names.count(x) > 1})
    if dupes:
        out.append(f"duplicate covariate names: {dupes}")
    r = dataset.response
    if r is not None:
        if r.kind not in RESPONSE_KINDS:
            out.append(f"response: unknown kind {r.kind!r}")
        if len(r) != n:
            out.append(f"response: length {len(r)} differs from n={n}")
        if r.kind == "numeric" and not np.all(np.isfinite(r.values)):
            out.append("response: non-finite value")
        if r.kind == "categorical":
            if len(r.levels) < 2:
                out.append(f"response: categorical response needs at least 2 levels, got {len(r.levels)}")
            if np.any((r.values < 0) | (r.values >= len(r.levels))):
                out.append("response: level code out of range")
    for col in dataset.covariates:
        out.extend(_column_violations(col, n))
    return out


def check_dataset(dataset, require_response=True):
    """Raise :class:`DatasetError` on the first violation."""
    if require_response and dataset.response is None:
        raise DatasetError("dataset has no response")
    problems = validate(dataset)
    if problems:
        raise DatasetError(problems[0])
    return dataset


# ---------------------------------------------------------------------------
# case weights


@dataclass(frozen=True)
class NodeView:
    """Observations of a node, each index repeated by its case weight."""

    index: np.ndarray = field(repr=False)

    @property
    def m(self):
        return len(self.index)


def subset_view(dataset, weights):
    weights = np.asarray(weights)
    if weights.shape != (dataset.n,):
        raise ValueError(f"weights must have length {dataset.n}, got shape {weights.shape}")
    if weights.dtype.kind == "f":
        if not np.all(np.isfinite(weights)) or np.any(weights != np.round(weights)):
            raise ValueError("case weights must be integers")
        weights = weights.astype(np.int64)
    elif weights.dtype.kind not in "iub":
        raise ValueError("case weights must be integers")
    if np.any(weights < 0):
        raise ValueError("case weights must be nonnegative")
    return NodeView(np.repeat(np.arange(dataset.n), weights))


# ---------------------------------------------------------------------------
# manifest I/O


def _read_rows(path, covariate=None):
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing file {str(path)!r}", covariate)
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh) if row]


def _read_matrix(path, covariate=None):
    rows = _read_rows(path, covariate)
    try:
        out = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        # ragged rows land here too
        raise DatasetError(f"cannot parse {str(path)!r}: {exc}", covariate) from None
    return out


def _read_column(path, covariate=None):
    rows = _read_rows(path, covariate)
    for i, row in enumerate(rows):
        if len(row) != 1:
            raise DatasetError(f"expected a single column in {str(path)!r}", covariate, i)
    return [row[0].strip() for row in rows]


def _to_float(values, covariate):
    out = np.empty(len(values))
    for i, v in enumerate(values):
        try:
            out[i] = float(v)
        except ValueError:
            raise DatasetError(f"not a number: {v!r}", covariate, i) from None
    return out


def _check_length(got, n, covariate):
    if got != n:
        raise DatasetError(f"expected {n} observations, found {got}", covariate)


def _load_graphs(entry, base, n, name):
    if "files" in entry:
        files = entry["files"]
        _check_length(len(files), n, name)
        mats = []
        for i, f in enumerate(files):
            a = _read_matrix(base / f, name)
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise DatasetError(f"adjacency is not square, shape {a.shape}", name, i)
            if mats and a.shape != mats[0].shape:
                raise DatasetError(
                    f"graph has {a.shape[0]} vertices, expected {mats[0].shape[0]}", name, i
                )
            mats.append(a)
        return np.stack(mats)
    if "edges_file" in entry:
        if "n_vertices" not in entry:
            raise DatasetError("edges_file requires n_vertices", name)
        v = int(entry["n_vertices"])
        adj = np.zeros((n, v, v))
        for row_no, row in enumerate(_read_rows(base / entry["edges_file"], name)):
            try:
                i, a, b = (int(x) for x in row[:3])
                w = float(row[3]) if len(row) > 3 else 1.0
            except (ValueError, IndexError):
                raise DatasetError(f"bad edge record {row!r}", name, row_no) from None
            if not (0 <= i < n and 0 <= a < v and 0 <= b < v):
                raise DatasetError(f"edge index out of range in {row!r}", name, i)
            adj[i, a, b] = adj[i, b, a] = w
        return adj
    raise DatasetError("graph covariate needs 'files' or 'edges_file'", name)


def _load_covariate(entry, base, n):
    name = entry.get("name")
    if not isinstance(name, str) or not name:
        raise DatasetError("covariate entry without a name")
    kind = entry.get("kind")
    if kind == "numeric":
        vals = _read_column(base / entry["file"], name)
        _check_length(len(vals), n, name)
        return NumericColumn(name, _to_float(vals, name))
    if kind == "nominal":
        vals = _read_column(base / entry["file"], name)
        _check_length(len(vals), n, name)
        return NominalColumn.from_labels(name, vals, entry.get("levels"))
    if kind == "functional":
        grid = _read_matrix(base / entry["grid_file"], name).ravel()
        if np.any(np.diff(grid) <= 0):
            raise DatasetError("functional grid is not strictly increasing", name)
        values = _read_matrix(base / entry["values_file"], name)
        _check_length(values.shape[0], n, name)
        if values.shape[1] != grid.size:
            raise DatasetError(f"curves have {values.shape[1]} points, grid has {grid.size}", name)
        return FunctionalColumn(name, grid, values)
    if kind == "graph":
        gkind = entry.get("graph_kind", "binary")
        if gkind not in GRAPH_KINDS:
            raise DatasetError(f"unknown graph kind {gkind!r}", name)
        col = GraphColumn(name, _load_graphs(entry, base, n, name), gkind)
        problems = _graph_violations(col)
        if problems:
            raise DatasetError(problems[0].split(": ", 1)[1], name,
                               _first_row(problems[0]))
        return col
    raise DatasetError(f"unknown covariate kind {kind!r}", name)


def _first_row(message):
    head = message.split(": ", 1)[0]
    if ", row " in head:
        return int(head.rsplit(" ", 1)[1])
    return None


def load_dataset(manifest_path, require_response=True):
    """Read a JSON manifest and the CSV files it references.

    Paths inside the manifest are resolved relative to the manifest's
    directory. With ``require_response=False`` a missing ``response`` entry
    is allowed (scoring data).
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DatasetError(f"manifest not found: {str(manifest_path)!r}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"manifest is not valid JSON: {exc}") from None
    base = manifest_path.parent
    try:
        n = int(manifest["n"])
        covariates = [_load_covariate(e, base, n) for e in manifest.get("covariates", [])]
    except KeyError as exc:
        raise DatasetError(f"manifest is missing field {exc}") from None
    response = None
    if "response" in manifest:
        spec = manifest["response"]
        vals = _read_column(base / spec["file"], "<response>")
        _check_length(len(vals), n, "<response>")
        if spec.get("kind") == "numeric":
            response = Response.numeric(_to_float(vals, "<response>"))
        elif spec.get("kind") == "categorical":
            response = Response.categorical(vals, spec.get("levels"))
        else:
            raise DatasetError(f"unknown response kind {spec.get('kind')!r}", "<response>")
    elif require_response:
        raise DatasetError("manifest has no response")
    dataset = Dataset(covariates, response)
    if not covariates and response is not None and len(response) != n:
        raise DatasetError(f"expected {n} observations")
    return check_dataset(dataset, require_response=require_response)


def _write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def save_dataset(dataset, directory, graph_format="files"):
    """Write ``dataset`` as a manifest plus CSV files; returns the manifest path.

    ``graph_format`` is ``"files"`` (one adjacency CSV per observation) or
    ``"edges"`` (a single edge list per graph covariate).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"n": dataset.n, "covariates": []}
    r = dataset.response
    if r is not None:
        if r.kind == "numeric":
            _write_rows(directory / "response.csv", [[v] for v in r.values])
            manifest["response"] = {"kind": "numeric", "file": "response.csv"}
        else:
            _write_rows(directory / "response.csv", [[r.levels[c]] for c in r.values])
            manifest["response"] = {"kind": "categorical", "file": "response.csv",
                                    "levels": list(r.levels)}
    for j, col in enumerate(dataset.covariates):
        stem = f"x{j}"
        entry = {"name": col.name, "kind": col.kind}
        if col.kind == "numeric":
            _write_rows(directory / f"{stem}.csv", [[v] for v in col.values])
            entry["file"] = f"{stem}.csv"
        elif col.kind == "nominal":
            _write_rows(directory / f"{stem}.csv", [[lab] for lab in col.labels()])
            entry["file"] = f"{stem}.csv"
            entry["levels"] = list(col.levels)
        elif col.kind == "functional":
            _write_rows(directory / f"{stem}_grid.csv", [col.grid])
            _write_rows(directory / f"{stem}_values.csv", col.values)
            entry["grid_file"] = f"{stem}_grid.csv"
            entry["values_file"] = f"{stem}_values.csv"
        elif col.kind == "graph":
            entry["graph_kind"] = col.graph_kind
            if graph_format == "edges":
                rows = []
                for i, a in enumerate(col.adjacency):
                    u, v = np.nonzero(np.triu(a, 1))
                    rows.extend([i, int(p), int(q), a[p, q]] for p, q in zip(u, v))
                _write_rows(directory / f"{stem}_edges.csv", rows)
                entry["edges_file"] = f"{stem}_edges.csv"
                entry["n_vertices"] = col.n_vertices
            else:
                sub = directory / stem
                sub.mkdir(exist_ok=True)
                files = []
                for i, a in enumerate(col.adjacency):
                    f = f"{stem}/g{i}.csv"
                    _write_rows(directory / f, a)
                    files.append(f)
                entry["files"] = files
        manifest["covariates"].append(entry)
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + os.linesep)
    return path


def as_dataset(X, y=None, kind=None):
    """Coerce estimator inputs into a :class:`Dataset`.

    ``X`` may be a Dataset, a sequence of covariate columns, or a 2-D array
    (every column numeric, named ``x0, x1, ...``). ``kind`` selects the
    response encoding when ``y`` is given.
    """
    if isinstance(X, Dataset):
        covariates = list(X.covariates)
    elif isinstance(X, Sequence) and X and all(hasattr(c, "kind") and hasattr(c, "name") for c in X):
        covariates = list(X)
    else:
        from sklearn.utils.validation import check_array

        arr = check_array(X, dtype=np.float64, ensure_2d=True)
        covariates = [NumericColumn(f"x{j}", arr[:, j]) for j in range(arr.shape[1])]
    response = X.response if isinstance(X, Dataset) else None
    if y is not None:
        if isinstance(y, Response):
            response = y
        elif kind == "categorical":
            response = Response.categorical(np.asarray(y).ravel())
        else:
            response = Response.numeric(y)
    return Dataset(covariates, response)
