"""Coefficient expansion of structured covariates into real components.

Curves are expanded into least-squares cubic B-spline coefficients; graphs
into shell distributions obtained from k-core (binary) or s-core (weighted)
decompositions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

ORDER = 4  # cubic


@dataclass
class ComponentMatrix:
    """``m x s`` matrix of components plus the metadata that produced it."""

    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_components(self):
        return self.values.shape[1]


# ---------------------------------------------------------------------------
# B-splines


def bspline_knots(grid, n_basis):
    """Full knot vector for ``n_basis`` cubic B-splines equally spaced over the grid."""
    if n_basis < ORDER:
        raise ValueError(f"cubic B-splines need n_basis >= {ORDER}, got {n_basis}")
    lo, hi = float(grid[0]), float(grid[-1])
    breaks = np.linspace(lo, hi, n_basis - ORDER + 2)
    return np.r_[[lo] * (ORDER - 1), breaks, [hi] * (ORDER - 1)]


def bspline_design(grid, knots):
    grid = np.asarray(grid, dtype=np.float64)
    return BSpline.design_matrix(grid, np.asarray(knots), ORDER - 1).toarray()


def _projection(grid, knots):
    design = bspline_design(grid, knots)
    n_basis = design.shape[1]
    if design.shape[0] < n_basis or np.linalg.matrix_rank(design) < n_basis:
        raise ValueError(
            f"rank-deficient B-spline design: {design.shape[0]} grid points for {n_basis} basis functions"
        )
    return np.linalg.pinv(design)


def _project_rows(proj, curves):
    # row by row so a curve expands identically alone or in a batch
    return np.array([proj @ row for row in curves]).reshape(len(curves), proj.shape[0])


def bspline_coefficients(curves, grid, n_basis=10):
    """Least-squares cubic B-spline coefficients, one row per curve."""
    curves = np.atleast_2d(np.asarray(curves, dtype=np.float64))
    grid = np.asarray(grid, dtype=np.float64)
    if curves.shape[1] != grid.size:
        raise ValueError(f"curves have {curves.shape[1]} points, grid has {grid.size}")
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing with at least 2 points")
    knots = bspline_knots(grid, n_basis)
    proj = _projection(grid, knots)
    meta = {"type": "bspline", "n_basis": int(n_basis), "knots": knots.tolist(),
            "grid": grid.tolist()}
    return ComponentMatrix(_project_rows(proj, curves), meta)


def bspline_evaluate(coefficients, knots, points):
    """Evaluate the expansion with the given coefficients at ``points``."""
    return bspline_design(points, knots) @ np.asarray(coefficients)


# ---------------------------------------------------------------------------
# cores


def _peel(adjacency, strength):
    """Sequential minimum-strength pruning; returns the level at which each vertex leaves."""
    n = adjacency.shape[0]
    remaining = np.ones(n, dtype=bool)
    shell = np.zeros(n, dtype=strength.dtype)
    level = strength.dtype.type(0)
    while remaining.any():
        level = max(level, strength[remaining].min())
        while True:
            drop = remaining & (strength <= level)
            if not drop.any():
                break
            shell[drop] = level
            remaining &= ~drop
            strength = adjacency[:, remaining].sum(axis=1)
    return shell


def _check_square(a):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {a.shape}")
    if np.any(a != a.T):
        raise ValueError("adjacency must be symmetric")
    return a


def k_core_shell_indices(adjacency):
    """Shell index of every vertex of an undirected binary graph."""
    a = _check_square(adjacency)
    if np.any((a != 0) & (a != 1)):
        raise ValueError("k-core decomposition needs a binary adjacency matrix")
    a = a.astype(np.int64)
    np.fill_diagonal(a, 0)
    return _peel(a, a.sum(axis=1))


def s_core_shell_values(adjacency):
    """Shell value of every vertex of an undirected weighted graph.

    The value is the largest strength threshold ``s`` at which the vertex
    survives iterative removal of vertices whose strength is below ``s``.
    """
    a = _check_square(adjacency).astype(np.float64)
    if np.any(a < 0):
        raise ValueError("s-core decomposition needs nonnegative weights")
    a = a.copy()
    np.fill_diagonal(a, 0.0)
    return _peel(a, a.sum(axis=1))


def shell_distribution(shells, n_vertices=None, bin_edges=None):
    """Counts of vertices per shell index (binary) or per shell-value bin (weighted)."""
    shells = np.asarray(shells)
    if shells.size == 0:
        raise ValueError("graph has no vertices")
    if bin_edges is None:
        if shells.dtype.kind not in "iu":
            raise ValueError("weighted shells need bin edges")
        n_vertices = shells.size if n_vertices is None else n_vertices
        return np.bincount(shells, minlength=n_vertices).astype(np.float64)
    edges = np.asarray(bin_edges, dtype=np.float64)
    if edges.size < 2:
        raise ValueError("empty bin specification")
    # values beyond the training range fall into the end bins
    idx = np.searchsorted(edges, shells, side="right") - 1
    idx = np.clip(idx, 0, edges.size - 2)
    return np.bincount(idx, minlength=edges.size - 1).astype(np.float64)


def shell_bin_edges(values, n_bins=10):
    """Equal-width bin edges over the observed range of shell values."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, n_bins + 1)


# ---------------------------------------------------------------------------
# column-level expansion


def fit_expansion(column, n_basis=10, shell_bins=10):
    """Metadata needed to expand observations of ``column`` identically later."""
    if column.kind == "functional":
        knots = bspline_knots(column.grid, n_basis)
        _projection(column.grid, knots)  # fail early on a rank-deficient design
        return {"type": "bspline", "n_basis": int(n_basis), "knots": knots.tolist(),
                "grid": column.grid.tolist()}
    if column.kind == "graph":
        if column.graph_kind == "binary":
            return {"type": "k-core", "n_vertices": int(column.n_vertices)}
        shells = np.concatenate([s_core_shell_values(a) for a in column.adjacency])
        return {"type": "s-core", "n_vertices": int(column.n_vertices),
                "bin_edges": shell_bin_edges(shells, shell_bins).tolist()}
    raise ValueError(f"no coefficient expansion for kind {column.kind!r}")


def expand(column, meta):
    """Apply a fitted expansion to every observation of ``column``."""
    kind = meta["type"]
    if kind == "bspline":
        grid = np.asarray(meta["grid"])
        if column.grid.shape != grid.shape or np.any(column.grid != grid):
            raise ValueError(f"covariate {column.name!r}: grid differs from the fitted grid")
        proj = _projection(grid, np.asarray(meta["knots"]))
        return ComponentMatrix(_project_rows(proj, column.values), meta)
    if kind == "k-core":
        rows = [shell_distribution(k_core_shell_indices(a), meta["n_vertices"])
                for a in column.adjacency]
    elif kind == "s-core":
        edges = np.asarray(meta["bin_edges"])
        rows = [shell_distribution(s_core_shell_values(a), bin_edges=edges)
                for a in column.adjacency]
    else:
        raise ValueError(f"unknown expansion type {kind!r}")
    return ComponentMatrix(np.array(rows), meta)
