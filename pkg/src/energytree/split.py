"""Split search and split rules.

Traditional covariates are split by testing every candidate binary
partition against the response and keeping the one with the smallest
p-value. Structured covariates are split either on their most associated
expanded component (feature vector extraction) or by two-medoid
clustering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import FunctionalColumn, GraphColumn, NominalColumn, NumericColumn
from .distances import distance_to
from .energy import _TIE_RTOL, centered_test, double_center, indicator_test, substream
from .expansion import ComponentMatrix, expand

MAX_LEVELS = 15
# largest node for the joint two-medoid exchange, O(m^3)
EXCHANGE_LIMIT = 1000

# substream tags: node selection uses 0
TAG_CANDIDATE = 1
TAG_COMPONENT = 2


class NoValidSplit(Exception):
    """No candidate partition satisfies the constraints at this node."""


# ---------------------------------------------------------------------------
# rules


@dataclass
class NumericThreshold:
    covariate: str
    threshold: float
    p_value: float | None = None
    kind = "numeric_threshold"

    def route(self, column, cache=None):
        return column.values <= self.threshold

    def describe(self):
        return f"{self.covariate} <= {self.threshold:.6g}"

    def to_dict(self):
        return {"kind": self.kind, "covariate": self.covariate,
                "threshold": float(self.threshold), "p_value": self.p_value}


@dataclass
class NominalSubset:
    covariate: str
    levels: tuple  # level names routed left
    p_value: float | None = None
    kind = "nominal_subset"

    def route(self, column, cache=None):
        left_codes = [k for k, lev in enumerate(column.levels) if lev in self.levels]
        return np.isin(column.codes, left_codes)

    def describe(self):
        return f"{self.covariate} in {{{', '.join(self.levels)}}}"

    def to_dict(self):
        return {"kind": self.kind, "covariate": self.covariate,
                "levels": list(self.levels), "p_value": self.p_value}


@dataclass
class ComponentThreshold:
    covariate: str
    expansion: dict
    component: int  # 0-based
    threshold: float
    p_value: float | None = None
    kind = "component_threshold"

    def route(self, column, cache=None):
        comps = cache if cache is not None else expand(column, self.expansion).values
        return comps[:, self.component] <= self.threshold

    def describe(self):
        return (f"{self.covariate}[component {self.component + 1}] "
                f"<= {self.threshold:.6g}")

    def to_dict(self):
        return {"kind": self.kind, "covariate": self.covariate, "expansion": self.expansion,
                "component": int(self.component), "threshold": float(self.threshold),
                "p_value": self.p_value}


@dataclass
class MedoidPair:
    covariate: str
    medoid_left: np.ndarray
    medoid_right: np.ndarray
    distance: str  # "functional" or "graph"
    grid: np.ndarray | None = None
    p_value = None
    kind = "medoid_pair"

    def route(self, column, cache=None):
        obs = column.values if self.distance == "functional" else column.adjacency
        if obs.shape[1:] != self.medoid_left.shape:
            raise ValueError(f"covariate {self.covariate!r}: observation shape {obs.shape[1:]} "
                             f"does not match medoid shape {self.medoid_left.shape}")
        d1 = distance_to(column, obs, self.medoid_left)
        d2 = distance_to(column, obs, self.medoid_right)
        return d1 <= d2

    def describe(self):
        return f"{self.covariate} closer to medoid 1 ({self.distance} distance)"

    def to_dict(self):
        out = {"kind": self.kind, "covariate": self.covariate, "distance": self.distance,
               "medoid_left": self.medoid_left.tolist(),
               "medoid_right": self.medoid_right.tolist(), "p_value": None}
        if self.grid is not None:
            out["grid"] = self.grid.tolist()
        return out


def rule_from_dict(d):
    kind = d["kind"]
    if kind == "numeric_threshold":
        return NumericThreshold(d["covariate"], float(d["threshold"]), d.get("p_value"))
    if kind == "nominal_subset":
        return NominalSubset(d["covariate"], tuple(d["levels"]), d.get("p_value"))
    if kind == "component_threshold":
        return ComponentThreshold(d["covariate"], d["expansion"], int(d["component"]),
                                  float(d["threshold"]), d.get("p_value"))
    if kind == "medoid_pair":
        grid = np.asarray(d["grid"], dtype=np.float64) if "grid" in d else None
        return MedoidPair(d["covariate"], np.asarray(d["medoid_left"], dtype=np.float64),
                          np.asarray(d["medoid_right"], dtype=np.float64), d["distance"], grid)
    raise ValueError(f"unknown rule kind {kind!r}")


def _single_column(rule, observation):
    name = rule.covariate
    if isinstance(rule, NumericThreshold):
        return NumericColumn(name, [float(observation)])
    if isinstance(rule, NominalSubset):
        levels = tuple(rule.levels) + (str(observation),)
        return NominalColumn(name, [len(levels) - 1], levels)
    if isinstance(rule, ComponentThreshold):
        if rule.expansion["type"] == "bspline":
            return FunctionalColumn(name, rule.expansion["grid"], [observation])
        kind = "binary" if rule.expansion["type"] == "k-core" else "weighted"
        return GraphColumn(name, [observation], kind)
    if rule.distance == "functional":
        return FunctionalColumn(name, rule.grid, [observation])
    return GraphColumn(name, [observation], "weighted")


def apply_rule(rule, observation):
    """Route one raw observation: ``"left"`` or ``"right"``.

    ``observation`` is a number, a level name, a curve on the rule's grid
    or an adjacency matrix, matching the rule's covariate type.
    """
    try:
        left = rule.route(_single_column(rule, observation))[0]
    except (TypeError, ValueError) as exc:
        raise ValueError(f"cannot route observation with {rule.kind} rule: {exc}") from None
    return "left" if left else "right"


# ---------------------------------------------------------------------------
# tested splits


def candidate_indicator(xs, threshold=None, subset=None):
    """Binary membership vector of the node's observations in a candidate set.

    The set is either ``(-inf, threshold]`` or the level set ``subset``.
    """
    xs = np.asarray(xs)
    if threshold is not None:
        ell = xs <= threshold
    else:
        ell = np.isin(xs, list(subset))
    if ell.all() or not ell.any():
        raise ValueError("trivial candidate set: every observation on one side")
    return ell.astype(np.float64)


def _improves(p, stat, best):
    """Lower p-value wins; equal p-values go to the larger statistic.

    With finitely many permutations several strong candidates can share the
    smallest attainable p-value, so the statistic separates them. Exact ties
    keep the earlier candidate.
    """
    if best is None or p < best[1]:
        return True
    return p == best[1] and stat > best[2] + _TIE_RTOL * abs(best[2])


def numeric_candidates(xs):
    """Thresholds x_(1) .. x_(k-1) over the k sorted distinct values."""
    return np.unique(xs)[:-1]


def best_numeric_split(xs, bc, n_permutations=999, seed=0, key=(), min_bucket=1):
    """Best right-closed threshold for a numeric vector.

    ``bc`` is the double-centered response distance matrix of the node.
    Returns ``(q, p_value)``. Among thresholds with the same p-value the
    larger statistic wins, then the smallest threshold.
    """
    xs = np.asarray(xs, dtype=np.float64)
    candidates = numeric_candidates(xs)
    if candidates.size == 0:
        raise ValueError("all values identical; nothing to split")
    best = None
    for i, q in enumerate(candidates):
        ell = xs <= q
        n_left = int(ell.sum())
        if n_left < min_bucket or xs.size - n_left < min_bucket:
            continue
        stat, p = indicator_test(ell, bc, n_permutations, substream(seed, *key, TAG_CANDIDATE, i))
        if _improves(p, stat, best):
            best = (float(q), p, stat)
    if best is None:
        raise NoValidSplit(f"no threshold leaves {min_bucket} observations on both sides")
    return best[:2]


def nominal_candidates(codes):
    """Level subsets to test: proper nonempty subsets, one per complement pair.

    Each kept subset contains the lowest level code present in the node.
    """
    present = np.unique(codes)
    if present.size < 2:
        raise ValueError("a single level is present; nothing to split")
    if present.size > MAX_LEVELS:
        raise ValueError(f"{present.size} levels exceed the limit of {MAX_LEVELS}")
    first, rest = present[0], present[1:]
    out = []
    for mask in range(2 ** rest.size - 1):  # skip the all-ones mask (the full set)
        chosen = [first] + [lev for b, lev in enumerate(rest) if mask >> b & 1]
        out.append(tuple(int(c) for c in chosen))
    return out


def best_nominal_split(codes, bc, n_permutations=999, seed=0, key=(), min_bucket=1):
    """Best level subset for a nominal vector; returns ``(subset_codes, p_value)``.

    Ties are broken as in :func:`best_numeric_split`, then by enumeration order.
    """
    codes = np.asarray(codes)
    best = None
    for i, subset in enumerate(nominal_candidates(codes)):
        ell = np.isin(codes, subset)
        n_left = int(ell.sum())
        if n_left < min_bucket or codes.size - n_left < min_bucket:
            continue
        stat, p = indicator_test(ell, bc, n_permutations, substream(seed, *key, TAG_CANDIDATE, i))
        if _improves(p, stat, best):
            best = (subset, p, stat)
    if best is None:
        raise NoValidSplit(f"no level subset leaves {min_bucket} observations on both sides")
    return best[:2]


def fve_split(components, bc, n_permutations=999, seed=0, key=(), min_bucket=1):
    """Split on the component most associated with the response.

    Every non-constant component is tested against the response without a
    stopping gate; the winner (lowest p-value, ties to the lowest index) is
    then split like a numeric covariate. Returns ``(s, q, p_value)`` with a
    0-based component index.
    """
    values = components.values if isinstance(components, ComponentMatrix) else np.asarray(components)
    m, s_j = values.shape
    if m < 2:
        raise ValueError("need at least 2 observations")
    varying = [s for s in range(s_j) if np.ptp(values[:, s]) > 0]
    if not varying:
        raise ValueError("all components are constant")
    pvals = []
    for s in varying:
        col = values[:, s]
        ac = double_center(np.abs(col[:, None] - col[None, :]))
        _, p = centered_test(ac, bc, n_permutations, substream(seed, *key, TAG_COMPONENT, s))
        pvals.append(p)
    s_star = varying[int(np.argmin(pvals))]
    q, p = best_numeric_split(values[:, s_star], bc, n_permutations, seed, key, min_bucket)
    return s_star, q, p


# ---------------------------------------------------------------------------
# clustering


def _pair_cost(d, a, b):
    return float(np.minimum(d[:, a], d[:, b]).sum())


def pair_costs(d):
    """Objective of every medoid pair: ``C[a, b] = sum_k min(d[k, a], d[k, b])``."""
    m = d.shape[0]
    out = np.empty((m, m))
    for a in range(m):
        out[a] = np.minimum(d[:, [a]], d).sum(axis=0)
    return out


def pam_two_medoids(d, exchange_limit=EXCHANGE_LIMIT):
    """Partitioning around two medoids.

    BUILD seeds the medoids greedily and SWAP exchanges one medoid at a
    time while the objective strictly decreases. Single exchanges can stall
    in a local optimum, so for ``m <= exchange_limit`` a final step also
    considers replacing both medoids at once, which for two medoids makes
    the result the global optimum.

    Returns ``(c1, c2, assignment)`` with ``c1 < c2`` and ``assignment[k]``
    0 for the first medoid, 1 for the second; equidistant points go to the
    first. Ties in the search resolve to the lowest indices.
    """
    d = np.asarray(d, dtype=np.float64)
    m = d.shape[0]
    if m < 2:
        raise ValueError("PAM needs at least 2 observations")
    if not np.any(d > 0):
        raise ValueError("all pairwise distances are zero; no bipartition exists")
    tol = 1e-12 * float(d.max()) * m

    # BUILD
    c1 = int(np.argmin(d.sum(axis=0)))
    costs = np.minimum(d, d[:, [c1]]).sum(axis=0)
    costs[c1] = np.inf
    c2 = int(np.argmin(costs))
    current = _pair_cost(d, c1, c2)

    # SWAP: best improving single exchange until none improves
    while True:
        keep_c1 = np.minimum(d, d[:, [c1]]).sum(axis=0)  # replace c2 by h
        keep_c2 = np.minimum(d, d[:, [c2]]).sum(axis=0)  # replace c1 by h
        keep_c1[[c1, c2]] = np.inf
        keep_c2[[c1, c2]] = np.inf
        h1, h2 = int(np.argmin(keep_c1)), int(np.argmin(keep_c2))
        best, pair = current, None
        if keep_c2[h2] < best - tol:
            best, pair = keep_c2[h2], (h2, c2)
        if keep_c1[h1] < best - tol and (pair is None or keep_c1[h1] < keep_c2[h2]):
            best, pair = keep_c1[h1], (c1, h1)
        if pair is None:
            break
        c1, c2 = pair
        current = float(best)

    if m <= exchange_limit:
        table = pair_costs(d)
        table[np.tril_indices(m)] = np.inf
        a, b = np.unravel_index(int(np.argmin(table)), table.shape)
        if table[a, b] < current - tol:
            c1, c2, current = int(a), int(b), float(table[a, b])

    c1, c2 = sorted((c1, c2))
    assignment = (d[:, c2] < d[:, c1]).astype(np.int64)
    return c1, c2, assignment


def pam_objective(d, c1, c2):
    """Sum of distances from every point to its closer medoid."""
    return _pair_cost(np.asarray(d, dtype=np.float64), c1, c2)
