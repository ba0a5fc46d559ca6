"""Simulation experiments: selection unbiasedness, power and recovery at the root.

Four covariates are generated per replication: a uniform numeric, a
uniform binary nominal, Gaussian curves with identity covariance on an
equally spaced grid over [0, 1], and Erdos-Renyi graphs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .dataset import FunctionalColumn, GraphColumn, NominalColumn, NumericColumn
from .distances import pairwise_matrix
from .energy import response_distance, select_variable, substream

COVARIATE_NAMES = ("X1", "X2", "X3", "X4")
COVARIATE_LABELS = ("numeric", "nominal", "functional", "graph")
Z95 = 1.96

SCALES = {
    "desk": dict(grid_size=20, n_vertices=30, n_permutations=199, replications=1000),
    "paper": dict(grid_size=100, n_vertices=100, n_permutations=999, replications=10000),
}
DEFAULT_MU_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


@dataclass
class GeneratorSpec:
    """Parameters of the four covariates.

    ``gp_mean`` and ``edge_prob`` are scalars or per-observation arrays.
    """

    grid_size: int = 100
    n_vertices: int = 100
    edge_prob: float | np.ndarray = 0.2
    gp_mean: float | np.ndarray = 0.0


def erdos_renyi(n, n_vertices, p, rng):
    """``n`` undirected binary graphs with independent edges of probability ``p``."""
    p = np.broadcast_to(np.asarray(p, dtype=np.float64), (n,))
    if np.any((p < 0) | (p > 1)):
        raise ValueError("connection probability must lie in [0, 1]")
    upper = rng.random((n, n_vertices, n_vertices)) < p[:, None, None]
    upper = np.triu(upper, 1)
    return (upper | np.swapaxes(upper, 1, 2)).astype(np.float64)


def gen_covariates(n, spec=None, rng=None):
    """Draw the four covariates for ``n`` observations."""
    spec = spec or GeneratorSpec()
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if n < 1:
        raise ValueError("n must be positive")
    x1 = rng.uniform(0.0, 1.0, n)
    x2 = rng.integers(0, 2, n)
    grid = np.linspace(0.0, 1.0, spec.grid_size)
    mean = np.broadcast_to(np.asarray(spec.gp_mean, dtype=np.float64), (n,))
    x3 = rng.standard_normal((n, spec.grid_size)) + mean[:, None]
    x4 = erdos_renyi(n, spec.n_vertices, spec.edge_prob, rng)
    return [
        NumericColumn("X1", x1),
        NominalColumn("X2", x2, ("0", "1")),
        FunctionalColumn("X3", grid, x3),
        GraphColumn("X4", x4, "binary"),
    ]


def binomial_ci(p_hat, R, z=Z95):
    """Normal-approximation interval ``p_hat +- z * sqrt(p_hat (1 - p_hat) / R)`` in [0, 1]."""
    if R < 1:
        raise ValueError("R must be positive")
    half = z * np.sqrt(p_hat * (1.0 - p_hat) / R)
    return max(0.0, p_hat - half), min(1.0, p_hat + half)


def corrected_frequencies(f_hat, a_hat, grouping):
    """Per-covariate selection frequencies from per-component frequencies.

    Each component's selection frequency is divided by its availability
    frequency, averaged within its covariate, and the averages are
    normalized to sum to one.

    Parameters
    ----------
    f_hat, a_hat : array of shape (n_components,)
        Relative selection and availability frequencies of each component.
    grouping : array of shape (n_components,)
        Covariate index ``0..J-1`` that each component belongs to.
    """
    f_hat = np.asarray(f_hat, dtype=np.float64)
    a_hat = np.asarray(a_hat, dtype=np.float64)
    grouping = np.asarray(grouping, dtype=np.int64)
    if not (f_hat.shape == a_hat.shape == grouping.shape):
        raise ValueError("f_hat, a_hat and grouping must have the same length")
    if np.any((a_hat <= 0) & (f_hat > 0)):
        raise ValueError("component selected but never available")
    if np.any(f_hat > a_hat + 1e-12):
        raise ValueError("selection frequency exceeds availability")
    ratio = np.divide(f_hat, a_hat, out=np.zeros_like(f_hat), where=a_hat > 0)
    J = grouping.max() + 1
    sizes = np.bincount(grouping, minlength=J)
    p_tilde = np.bincount(grouping, weights=ratio, minlength=J) / np.maximum(sizes, 1)
    total = p_tilde.sum()
    if total <= 0:
        raise ValueError("no component was ever selected")
    return p_tilde / total


@dataclass
class ScenarioResult:
    """Estimates with 95% intervals, plus the per-replication records behind them."""

    scenario: str
    rows: list  # dicts: label, estimate, lo, hi, count, total
    conditional: list = field(default_factory=list)
    replications: int = 0
    seed: int = 0
    params: dict = field(default_factory=dict)
    records: dict = field(default_factory=dict, repr=False)

    def estimates(self):
        return np.array([r["estimate"] for r in self.rows])

    def write(self, out_dir):
        """Write CSV tables and a JSON metadata sidecar; returns the written paths."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        tables = [(self.rows, "power" if self.conditional else "selection")]
        if self.conditional:
            tables.append((self.conditional, "conditional"))
        for rows, suffix in tables:
            path = out / f"{self.scenario}_{suffix}.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
                writer.writeheader()
                for row in rows:
                    writer.writerow({k: _fmt(v) for k, v in row.items()})
            paths.append(path)
        meta = out / f"{self.scenario}_metadata.json"
        meta.write_text(json.dumps({"scenario": self.scenario, "replications": self.replications,
                                    "seed": self.seed, "params": self.params}, indent=2) + "\n")
        paths.append(meta)
        return paths


def _fmt(v):
    if isinstance(v, float):
        return "nan" if np.isnan(v) else f"{v:.6f}"
    return v


def _root_decision(columns, y, alpha, n_permutations, seed, key):
    dy = response_distance(y)
    dists = [pairwise_matrix(c) for c in columns]
    outcome = select_variable(dists, dy, alpha, n_permutations, seed, key=key)
    return (-1 if outcome.stop else outcome.selected), float(np.min(outcome.adjusted_p))


def _unbiased_rep(r, n, spec, n_permutations, seed):
    rng = substream(seed, 0, r)
    columns = gen_covariates(n, spec, rng)
    y = rng.standard_normal(n)
    return _root_decision(columns, y, 1.0, n_permutations, seed, (1, r))


def _power_rep(i, mu, r, n, associated, spec, n_permutations, alpha, seed):
    rng = substream(seed, 0, i, r)
    group = (np.arange(n) >= n // 2).astype(np.float64)
    if associated == "functional":
        spec = GeneratorSpec(spec.grid_size, spec.n_vertices, spec.edge_prob, 0.5 * group)
    else:
        spec = GeneratorSpec(spec.grid_size, spec.n_vertices,
                             np.where(group > 0, 0.8, spec.edge_prob), spec.gp_mean)
    columns = gen_covariates(n, spec, rng)
    y = rng.standard_normal(n) + mu * group
    return _root_decision(columns, y, alpha, n_permutations, seed, (1, i, r))


def _run(tasks, n_jobs):
    if n_jobs in (None, 1):
        return [fn(*args) for fn, args in tasks]
    return Parallel(n_jobs=n_jobs)(delayed(fn)(*args) for fn, args in tasks)


def scenario_unbiasedness(R=1000, n=100, seed=0, grid_size=20, n_vertices=30, edge_prob=0.2,
                          n_permutations=199, n_jobs=None):
    """Selection frequency of each covariate when the root split is forced under independence."""
    spec = GeneratorSpec(grid_size, n_vertices, edge_prob, 0.0)
    out = _run([(_unbiased_rep, (r, n, spec, n_permutations, seed)) for r in range(R)], n_jobs)
    selected = np.array([s for s, _ in out])
    rows = []
    for j, name in enumerate(COVARIATE_NAMES):
        count = int(np.sum(selected == j))
        est = count / R
        lo, hi = binomial_ci(est, R)
        rows.append({"label": f"{name} ({COVARIATE_LABELS[j]})", "estimate": est, "lo": lo,
                     "hi": hi, "count": count, "total": R})
    params = dict(n=n, grid_size=grid_size, n_vertices=n_vertices, edge_prob=edge_prob,
                  n_permutations=n_permutations, alpha=1.0)
    return ScenarioResult("unbiasedness", rows, [], R, seed, params, {"selected": selected})


def scenario_power(associated="functional", mu_grid=DEFAULT_MU_GRID, R=1000, n=100, seed=0,
                   grid_size=20, n_vertices=30, edge_prob=0.2, n_permutations=199, alpha=0.05,
                   n_jobs=None):
    """Power (any split at the root) and conditional recovery of the associated covariate.

    Half of the observations form a second group whose response mean is
    ``mu`` and whose associated covariate has curve mean 0.5 (functional)
    or connection probability 0.8 (graph).
    """
    if associated not in ("functional", "graph"):
        raise ValueError("associated must be 'functional' or 'graph'")
    target = COVARIATE_LABELS.index(associated)
    spec = GeneratorSpec(grid_size, n_vertices, edge_prob, 0.0)
    tasks = [(_power_rep, (i, mu, r, n, associated, spec, n_permutations, alpha, seed))
             for i, mu in enumerate(mu_grid) for r in range(R)]
    out = _run(tasks, n_jobs)
    selected = np.array([s for s, _ in out]).reshape(len(mu_grid), R)
    min_adj = np.array([p for _, p in out]).reshape(len(mu_grid), R)
    rows, cond = [], []
    for i, mu in enumerate(mu_grid):
        split = selected[i] >= 0
        n_split = int(split.sum())
        est = n_split / R
        lo, hi = binomial_ci(est, R)
        rows.append({"mu": float(mu), "estimate": est, "lo": lo, "hi": hi,
                     "count": n_split, "total": R})
        hits = int(np.sum(selected[i] == target))
        if n_split:
            c = hits / n_split
            clo, chi = binomial_ci(c, n_split)
        else:
            c = clo = chi = float("nan")
        cond.append({"mu": float(mu), "estimate": c, "lo": clo, "hi": chi,
                     "count": hits, "total": n_split})
    params = dict(associated=associated, mu_grid=[float(m) for m in mu_grid], n=n,
                  grid_size=grid_size, n_vertices=n_vertices, edge_prob=edge_prob,
                  n_permutations=n_permutations, alpha=alpha)
    return ScenarioResult(f"power-{associated}", rows, cond, R, seed, params,
                          {"selected": selected, "min_adjusted_p": min_adj})


def power_at(result, alpha):
    """Power per mu recomputed at another level from the stored replication records."""
    return np.mean(result.records["min_adjusted_p"] < alpha, axis=1)
