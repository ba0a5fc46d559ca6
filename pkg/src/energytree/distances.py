"""Distances between observations of each covariate type.

numeric     absolute difference
nominal     0/1 mismatch indicator (Gower)
functional  L2 distance between curves, trapezoidal quadrature on the grid
graph       edge difference distance (Frobenius norm of adjacency difference)
"""

import numpy as np
from scipy.spatial.distance import pdist, squareform


def dist_numeric(a, b):
    a, b = float(a), float(b)
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("numeric distance needs finite inputs")
    return abs(a - b)


def dist_nominal(a, b, n_levels=None):
    a, b = int(a), int(b)
    if n_levels is not None and not (0 <= a < n_levels and 0 <= b < n_levels):
        raise ValueError(f"level code out of range for {n_levels} levels")
    return float(a != b)


def trapezoid_weights(grid):
    """Quadrature weights w such that sum(w * f) is the trapezoid integral of f."""
    grid = np.asarray(grid, dtype=np.float64)
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def dist_functional(f, g, grid):
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    if not (f.shape == g.shape == grid.shape) or grid.ndim != 1:
        raise ValueError(f"length mismatch: f {f.shape}, g {g.shape}, grid {grid.shape}")
    if grid.size < 2:
        raise ValueError("grid needs at least 2 points")
    return float(np.sqrt(np.sum(trapezoid_weights(grid) * (f - g) ** 2)))


def dist_graph(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def distance_to(column, observation_values, reference):
    """Distance from each value in ``observation_values`` to one reference object.

    Uses exactly the same arithmetic as the scalar kernels, so routing
    decisions made at fit and predict time agree bit for bit.
    """
    if column.kind == "functional":
        w = trapezoid_weights(column.grid)
        return np.sqrt(np.sum(w * (observation_values - reference) ** 2, axis=-1))
    if column.kind == "graph":
        return np.sqrt(np.sum((observation_values - reference) ** 2, axis=(-2, -1)))
    if column.kind == "numeric":
        return np.abs(observation_values - reference)
    return (observation_values != reference).astype(np.float64)


def _full_matrix(column):
    kind = column.kind
    if kind == "numeric":
        v = column.values
        return np.abs(v[:, None] - v[None, :])
    if kind == "nominal":
        c = column.codes
        return (c[:, None] != c[None, :]).astype(np.float64)
    if kind == "functional":
        scaled = column.values * np.sqrt(trapezoid_weights(column.grid))
        return squareform(pdist(scaled)) if len(scaled) > 1 else np.zeros((1, 1))
    if kind == "graph":
        flat = column.adjacency.reshape(len(column), -1)
        return squareform(pdist(flat)) if len(flat) > 1 else np.zeros((1, 1))
    if kind == "categorical":
        c = column.values
        return (c[:, None] != c[None, :]).astype(np.float64)
    raise ValueError(f"no distance defined for kind {kind!r}")


def pairwise_matrix(column, view=None):
    """Node-local distance matrix of ``column`` over ``view``.

    ``view`` is a :class:`~energytree.dataset.NodeView` or an index array;
    repeated indices (case weights > 1) yield repeated rows and columns. The
    response uses absolute difference when numeric and the mismatch
    indicator when categorical.
    """
    index = None if view is None else np.asarray(getattr(view, "index", view))
    if index is not None and index.size == 0:
        raise ValueError("empty view")
    if index is None:
        return _full_matrix(column)
    uniq, inverse = np.unique(index, return_inverse=True)
    sub = _subset(column, uniq)
    d = _full_matrix(sub)
    return d[np.ix_(inverse, inverse)]


def _subset(column, index):
    if hasattr(column, "take"):
        return column.take(index)
    # Response
    return type(column)(column.kind, column.values[index], column.levels)
