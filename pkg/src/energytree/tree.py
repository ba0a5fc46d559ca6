"""Growing, applying, persisting and printing energy trees."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import DatasetError, NominalColumn, check_dataset
from .distances import pairwise_matrix
from .energy import double_center, select_variable
from .expansion import expand, fit_expansion
from .split import (
    ComponentThreshold,
    MedoidPair,
    NominalSubset,
    NoValidSplit,
    NumericThreshold,
    best_nominal_split,
    best_numeric_split,
    fve_split,
    pam_two_medoids,
    rule_from_dict,
)

logger = logging.getLogger(__name__)

FORMAT_NAME = "energytree-model"
FORMAT_VERSION = 1
SPLIT_METHODS = ("fve", "clustering")


class SchemaError(DatasetError):
    """Observations do not conform to the schema the tree was fitted on."""


class ModelFormatError(ValueError):
    """A model file is unreadable or structurally invalid."""


class ModelVersionError(ModelFormatError):
    """A model file was written by an unsupported format version."""


@dataclass
class FitConfig:
    alpha: float = 0.05
    min_bucket: int = 5
    n_permutations: int = 999
    split_method: str = "fve"
    n_basis: int | dict = 10
    shell_bins: int | dict = 10
    seed: int = 0
    max_depth: int | None = None

    def validate(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if int(self.min_bucket) != self.min_bucket or self.min_bucket < 1:
            raise ValueError(f"min_bucket must be a positive integer, got {self.min_bucket}")
        if int(self.n_permutations) != self.n_permutations or self.n_permutations < 1:
            raise ValueError(f"n_permutations must be a positive integer, got {self.n_permutations}")
        if self.split_method not in SPLIT_METHODS:
            raise ValueError(f"split_method must be one of {SPLIT_METHODS}, got {self.split_method!r}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be nonnegative")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        for name, value, low in (("n_basis", self.n_basis, 4), ("shell_bins", self.shell_bins, 1)):
            values = value.values() if isinstance(value, dict) else [value]
            if any(int(v) < low for v in values):
                raise ValueError(f"{name} must be at least {low}")
        return self

    def basis_for(self, name):
        return int(self.n_basis.get(name, 10) if isinstance(self.n_basis, dict) else self.n_basis)

    def bins_for(self, name):
        return int(self.shell_bins.get(name, 10) if isinstance(self.shell_bins, dict) else self.shell_bins)

    def to_dict(self):
        return asdict(self)


@dataclass
class TreeNode:
    id: int
    path: int  # 1 for the root, 2p / 2p+1 for the kids of p
    depth: int
    weights: np.ndarray
    prediction: dict
    p_values: list | None = None
    adjusted_p: list | None = None
    selected: str | None = None
    rule: object = None
    stop_reason: str | None = None
    left: int | None = None
    right: int | None = None

    @property
    def n(self):
        return int(self.weights.sum())

    @property
    def is_terminal(self):
        return self.left is None

    def to_dict(self):
        return {
            "id": self.id, "path": self.path, "depth": self.depth,
            "weights": self.weights.tolist(), "prediction": self.prediction,
            "p_values": self.p_values, "adjusted_p": self.adjusted_p,
            "selected": self.selected,
            "rule": None if self.rule is None else self.rule.to_dict(),
            "stop_reason": self.stop_reason, "left": self.left, "right": self.right,
        }

    @classmethod
    def from_dict(cls, d):
        rule = d.get("rule")
        return cls(
            id=int(d["id"]), path=int(d["path"]), depth=int(d["depth"]),
            weights=np.asarray(d["weights"], dtype=np.int64), prediction=d["prediction"],
            p_values=d.get("p_values"), adjusted_p=d.get("adjusted_p"),
            selected=d.get("selected"), rule=None if rule is None else rule_from_dict(rule),
            stop_reason=d.get("stop_reason"), left=d.get("left"), right=d.get("right"),
        )


def _column_schema(col, config):
    out = {"name": col.name, "kind": col.kind}
    if col.kind == "nominal":
        out["levels"] = list(col.levels)
    elif col.kind == "functional":
        out["grid"] = col.grid.tolist()
    elif col.kind == "graph":
        out["graph_kind"] = col.graph_kind
        out["n_vertices"] = int(col.n_vertices)
    return out


class _Grower:
    """Per-fit state: dataset-wide distance matrices and expansion caches."""

    def __init__(self, dataset, config, n_jobs=None):
        self.data = dataset
        self.config = config
        self.n_jobs = n_jobs
        self.y = dataset.response
        self.dist = [pairwise_matrix(c) for c in dataset.covariates]
        self.dist_y = pairwise_matrix(self.y)
        self._expansions = {}
        self.nodes = []

    def expansion(self, j):
        if j not in self._expansions:
            col = self.data.covariates[j]
            meta = fit_expansion(col, self.config.basis_for(col.name), self.config.bins_for(col.name))
            self._expansions[j] = (meta, expand(col, meta).values)
        return self._expansions[j]

    def payload(self, idx):
        if self.y.kind == "numeric":
            vals = self.y.values[idx]
            return {"mean": float(vals.mean()) if vals.size else float("nan"), "n": int(vals.size)}
        counts = np.bincount(self.y.values[idx], minlength=self.y.n_classes)
        return {"counts": counts.tolist(), "class": int(np.argmax(counts)), "n": int(idx.size)}

    def grow(self, weights, path=1, depth=0):
        cfg = self.config
        idx = np.repeat(np.arange(self.data.n), weights)
        node = TreeNode(len(self.nodes), path, depth, weights, self.payload(idx))
        self.nodes.append(node)
        m = idx.size
        yv = self.y.values[idx]
        if m < 2 * cfg.min_bucket or m < 2:
            node.stop_reason = "too few observations"
            return node.id
        if np.ptp(yv) == 0:
            node.stop_reason = "pure node"
            return node.id
        if cfg.max_depth is not None and depth >= cfg.max_depth:
            node.stop_reason = "maximum depth"
            return node.id

        sub = np.ix_(idx, idx)
        dy = self.dist_y[sub]
        outcome = select_variable([d[sub] for d in self.dist], dy, cfg.alpha, cfg.n_permutations,
                                  cfg.seed, key=(path, 0), n_jobs=self.n_jobs)
        node.p_values = outcome.p_values.tolist()
        node.adjusted_p = outcome.adjusted_p.tolist()
        if outcome.stop:
            node.stop_reason = "independence not rejected"
            return node.id
        j = outcome.selected
        col = self.data.covariates[j]
        node.selected = col.name
        try:
            rule, left = self.split(j, idx, double_center(dy), path)
        except (NoValidSplit, ValueError) as exc:
            node.stop_reason = f"no valid split on {col.name}: {exc}"
            return node.id
        w_left = weights * left
        w_right = weights * ~left
        if w_left.sum() < cfg.min_bucket or w_right.sum() < cfg.min_bucket:
            node.stop_reason = f"split on {col.name} leaves fewer than {cfg.min_bucket} observations in a kid"
            return node.id
        node.rule = rule
        logger.debug("node %d (n=%d): %s", node.id, m, rule.describe())
        node.left = self.grow(w_left, 2 * path, depth + 1)
        node.right = self.grow(w_right, 2 * path + 1, depth + 1)
        return node.id

    def split(self, j, idx, bc, path):
        """Rule for covariate ``j`` at a node, plus its routing of all n observations."""
        cfg = self.config
        col = self.data.covariates[j]
        common = dict(n_permutations=cfg.n_permutations, seed=cfg.seed, key=(path,),
                      min_bucket=cfg.min_bucket)
        if col.kind == "numeric":
            q, p = best_numeric_split(col.values[idx], bc, **common)
            rule = NumericThreshold(col.name, q, p)
            return rule, rule.route(col)
        if col.kind == "nominal":
            subset, p = best_nominal_split(col.codes[idx], bc, **common)
            rule = NominalSubset(col.name, tuple(col.levels[c] for c in subset), p)
            return rule, rule.route(col)
        if cfg.split_method == "fve":
            meta, comps = self.expansion(j)
            s, q, p = fve_split(comps[idx], bc, **common)
            rule = ComponentThreshold(col.name, meta, s, q, p)
            return rule, rule.route(col, cache=comps)
        c1, c2, _ = pam_two_medoids(self.dist[j][np.ix_(idx, idx)])
        if col.kind == "functional":
            rule = MedoidPair(col.name, col.values[idx[c1]], col.values[idx[c2]],
                              "functional", col.grid)
        else:
            rule = MedoidPair(col.name, col.adjacency[idx[c1]], col.adjacency[idx[c2]], "graph")
        return rule, rule.route(col)


class EnergyTree:
    """A fitted tree: node table, fit configuration and data schema."""

    def __init__(self, nodes, config, schema, response):
        self.nodes = nodes
        self.config = config
        self.schema = schema
        self.response = response  # {"kind": ..., "levels": [...]}

    @property
    def root(self):
        return self.nodes[0]

    @property
    def is_classifier(self):
        return self.response["kind"] == "categorical"

    def leaves(self):
        return [nd for nd in self.nodes if nd.is_terminal]

    @property
    def depth(self):
        return max(nd.depth for nd in self.nodes)

    # -- routing ----------------------------------------------------------

    def conform(self, dataset):
        """Map scoring data onto the fitted schema; raise SchemaError on mismatch."""
        by_name = {c.name: c for c in dataset.covariates}
        cols = {}
        for spec in self.schema:
            name = spec["name"]
            col = by_name.get(name)
            if col is None:
                raise SchemaError("covariate missing from data", name)
            if col.kind != spec["kind"]:
                raise SchemaError(f"expected kind {spec['kind']}, got {col.kind}", name)
            if col.kind == "nominal":
                lookup = {lev: k for k, lev in enumerate(spec["levels"])}
                labels = col.labels()
                for i, lab in enumerate(labels):
                    if lab not in lookup:
                        raise SchemaError(f"unknown level {lab!r}", name, i)
                col = NominalColumn(name, [lookup[lab] for lab in labels], spec["levels"])
            elif col.kind == "functional":
                grid = np.asarray(spec["grid"])
                if col.grid.shape != grid.shape:
                    raise SchemaError(f"grid has {col.grid.size} points, model expects {grid.size}", name)
                if not np.array_equal(col.grid, grid):
                    raise SchemaError("evaluation grid differs from the fitted grid", name)
            elif col.kind == "graph":
                if col.n_vertices != spec["n_vertices"]:
                    raise SchemaError(f"graphs have {col.n_vertices} vertices, model expects "
                                      f"{spec['n_vertices']}", name)
            cols[name] = col
        return cols

    def apply(self, X):
        """Leaf node id reached by every observation."""
        from .dataset import as_dataset

        dataset = as_dataset(X)
        cols = self.conform(dataset)
        out = np.empty(dataset.n, dtype=np.int64)
        stack = [(0, np.arange(dataset.n))]
        while stack:
            nid, idx = stack.pop()
            node = self.nodes[nid]
            if node.is_terminal or idx.size == 0:
                out[idx] = nid
                continue
            col = cols[node.rule.covariate].take(idx)
            left = np.asarray(node.rule.route(col), dtype=bool)
            stack.append((node.left, idx[left]))
            stack.append((node.right, idx[~left]))
        return out

    def predict(self, X):
        """Leaf mean (regression) or modal level name (classification)."""
        leaves = self.apply(X)
        if self.is_classifier:
            levels = self.response["levels"]
            return np.array([levels[self.nodes[i].prediction["class"]] for i in leaves], dtype=object)
        return np.array([self.nodes[i].prediction["mean"] for i in leaves])

    def predict_proba(self, X):
        if not self.is_classifier:
            raise AttributeError("predict_proba is only defined for classification trees")
        leaves = self.apply(X)
        counts = np.array([self.nodes[i].prediction["counts"] for i in leaves], dtype=np.float64)
        return counts / counts.sum(axis=1, keepdims=True)

    # -- persistence ------------------------------------------------------

    def to_dict(self):
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "response": self.response,
            "schema": self.schema,
            "nodes": [nd.to_dict() for nd in self.nodes],
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or d.get("format") != FORMAT_NAME:
            raise ModelFormatError("not an energy tree model")
        version = d.get("version")
        if not isinstance(version, int) or version > FORMAT_VERSION or version < 1:
            raise ModelVersionError(f"unsupported model format version {version!r} "
                                    f"(this build reads version {FORMAT_VERSION})")
        try:
            nodes = [TreeNode.from_dict(nd) for nd in d["nodes"]]
            config = FitConfig(**d["config"])
            tree = cls(nodes, config, d["schema"], d["response"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"corrupt model payload: {exc}") from None
        if not nodes or any(nd.id != i for i, nd in enumerate(nodes)):
            raise ModelFormatError("corrupt model payload: bad node table")
        return tree

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, allow_nan=False)


def grow(dataset, config=None, n_jobs=None):
    """Fit an energy tree to ``dataset`` (which must carry a response)."""
    config = (config or FitConfig()).validate()
    check_dataset(dataset)
    if not dataset.covariates:
        raise DatasetError("dataset has no covariates")
    grower = _Grower(dataset, config, n_jobs)
    grower.grow(np.ones(dataset.n, dtype=np.int64))
    schema = [_column_schema(c, config) for c in dataset.covariates]
    response = {"kind": dataset.response.kind, "levels": list(dataset.response.levels)}
    return EnergyTree(grower.nodes, config, schema, response)


fit = grow


def save(tree, path):
    Path(path).write_text(tree.to_json() + "\n")


def load(path):
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"corrupt model payload: {exc}") from None
    return EnergyTree.from_dict(payload)


def _fmt_p(p):
    return f"{p:.4g}"


def render_text(tree):
    """Indented outline of the tree, one line per node."""
    lines = []

    def leaf_text(node):
        pred = node.prediction
        if tree.is_classifier:
            levels = tree.response["levels"]
            balance = ", ".join(f"{lev}: {c}" for lev, c in zip(levels, pred["counts"]))
            return f"predict {levels[pred['class']]} ({balance})"
        return f"mean = {pred['mean']:.6g}"

    def visit(nid, indent, label):
        node = tree.nodes[nid]
        head = f"{'  ' * indent}{label}[{node.id}] n={node.n}"
        if node.is_terminal:
            lines.append(f"{head}: {leaf_text(node)}")
            return
        rule = node.rule
        parts = [f"split on {node.selected}: {rule.describe()}"]
        if node.adjusted_p is not None:
            parts.append(f"p = {_fmt_p(min(node.adjusted_p))}")
        if rule.p_value is not None:
            parts.append(f"split p = {_fmt_p(rule.p_value)}")
        lines.append(f"{head}: " + "; ".join(parts))
        visit(node.left, indent + 1, "yes ")
        visit(node.right, indent + 1, "no ")

    visit(0, 0, "")
    return "\n".join(lines)
