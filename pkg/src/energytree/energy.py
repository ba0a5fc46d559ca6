"""Distance covariance, permutation tests of independence and variable selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from numba import njit

# a nonnegative quantity; anything above -FLOOR is rounding noise
FLOOR = 1e-12
# relative slack when comparing a replicate to the observed statistic, so that
# mathematically tied replicates count as ties regardless of rounding
_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class IndependenceTest:
    statistic: float
    p_value: float
    n_permutations: int
    covariate_index: int = -1


@dataclass
class SelectionOutcome:
    """Result of the stopping test and variable selection at one node.

    ``selected`` is ``None`` when the node stops.
    """

    selected: int | None
    tests: list = field(default_factory=list)
    adjusted_p: np.ndarray | None = None

    @property
    def stop(self):
        return self.selected is None

    @property
    def p_values(self):
        return np.array([t.p_value for t in self.tests])


def substream(seed, *key):
    """Independent generator for ``key`` under ``seed``.

    Streams are addressed by key rather than drawn in sequence, so results
    do not depend on the order in which keyed computations run.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def double_center(d):
    d = np.asarray(d, dtype=np.float64)
    row = d.mean(axis=1, keepdims=True)
    col = d.mean(axis=0, keepdims=True)
    return d - row - col + d.mean()


def _clamp(v):
    if -FLOOR <= v < 0:
        return 0.0
    return float(v)


def dcov_squared(dx, dy):
    """Squared sample distance covariance of two distance matrices."""
    dx = np.asarray(dx, dtype=np.float64)
    dy = np.asarray(dy, dtype=np.float64)
    if dx.shape != dy.shape or dx.ndim != 2 or dx.shape[0] != dx.shape[1]:
        raise ValueError(f"size mismatch: {dx.shape} vs {dy.shape}")
    m = dx.shape[0]
    if m < 1:
        raise ValueError("empty distance matrices")
    a = double_center(dx)
    b = double_center(dy)
    return _clamp(np.sum(a * b) / m**2)


def _permutations(rng, m, n_permutations):
    base = np.broadcast_to(np.arange(m), (n_permutations, m))
    return rng.permuted(base, axis=1)


def _p_value(observed, replicates):
    hits = np.count_nonzero(replicates >= observed - _TIE_RTOL * abs(observed))
    return (1 + hits) / (len(replicates) + 1)


@njit(cache=True)
def _replicates(ac, bc, perms):
    n_perm, m = perms.shape
    out = np.empty(n_perm)
    for b in range(n_perm):
        p = perms[b]
        total = 0.0
        for k in range(m):
            row = bc[p[k]]
            a = ac[k]
            for l in range(m):
                total += a[l] * row[p[l]]
        out[b] = total / m
    return out


def centered_test(ac, bc, n_permutations, rng):
    """Permutation test on double-centered matrices; returns (statistic, p_value).

    Replicate ``b`` uses the response reindexed by a uniform permutation,
    i.e. ``bc[pi][:, pi]``.
    """
    m = ac.shape[0]
    observed = _clamp(np.sum(ac * bc) / m)
    perms = _permutations(rng, m, n_permutations)
    reps = _replicates(np.ascontiguousarray(ac), np.ascontiguousarray(bc), perms)
    return observed, _p_value(observed, reps)


def indicator_test(ell, bc, n_permutations, rng):
    """Permutation test of a binary split indicator against the response.

    With 0/1 mismatch distances on ``ell`` the statistic reduces to
    ``-2/m * ell' Bc ell``; each replicate is the same quadratic form with
    the response permuted, which equals permuting the indicator by the
    inverse permutation.
    """
    ell = np.asarray(ell, dtype=np.float64)
    m = ell.size
    observed = _clamp(-2.0 * (ell @ bc @ ell) / m)
    perms = _permutations(rng, m, n_permutations)
    # permuted response -> Bc[pi][:, pi]; quadratic form picks rows pi[S]
    sel = np.zeros((n_permutations, m))
    rows = np.broadcast_to(np.arange(n_permutations)[:, None], perms.shape)
    sel[rows[:, ell > 0].ravel(), perms[:, ell > 0].ravel()] = 1.0
    reps = -2.0 * np.einsum("bk,bk->b", sel @ bc, sel) / m
    return observed, _p_value(observed, reps)


def response_distance(y, kind="numeric"):
    y = np.asarray(y)
    if kind == "numeric":
        y = y.astype(np.float64)
        return np.abs(y[:, None] - y[None, :])
    if kind == "categorical":
        return (y[:, None] != y[None, :]).astype(np.float64)
    raise ValueError(f"unknown response kind {kind!r}")


def energy_test(dx, y, kind="numeric", n_permutations=999, random_state=None,
                covariate_index=-1):
    """Energy test of independence between a covariate and the response.

    Parameters
    ----------
    dx : (m, m) array
        Covariate distance matrix over the node's observations.
    y : (m,) array
        Response values in the same enumeration; alternatively an (m, m)
        response distance matrix.
    kind : {"numeric", "categorical"}
        Response type; selects absolute difference or mismatch distance.
    n_permutations : int
        Number of permutation replicates B.
    random_state : int, Generator or None

    Returns
    -------
    IndependenceTest
        Statistic ``m * dcov^2`` and the add-one p-value
        ``(1 + #{T_b >= T}) / (B + 1)``.
    """
    dx = np.asarray(dx, dtype=np.float64)
    y = np.asarray(y)
    dy = y if y.ndim == 2 else response_distance(y, kind)
    m = dx.shape[0]
    if m < 2:
        raise ValueError(f"energy test needs at least 2 observations, got {m}")
    if dy.shape != dx.shape:
        raise ValueError(f"size mismatch: {dx.shape} vs {dy.shape}")
    if n_permutations < 1:
        raise ValueError("n_permutations must be positive")
    rng = random_state if isinstance(random_state, np.random.Generator) else np.random.default_rng(random_state)
    stat, p = centered_test(double_center(dx), double_center(dy), n_permutations, rng)
    return IndependenceTest(stat, p, int(n_permutations), covariate_index)


def bh_adjust(p):
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("p-values must be a vector")
    if np.any(~np.isfinite(p)) or np.any(p <= 0) or np.any(p > 1):
        raise ValueError("p-values must lie in (0, 1]")
    J = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * J / np.arange(1, J + 1)
    q = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(J)
    # q >= p holds exactly; the floor only undoes rounding in p * J / J
    out[order] = np.minimum(np.maximum(q, p[order]), 1.0)
    return out


def should_stop(adjusted, p_values, alpha):
    """Global stopping rule.

    For ``alpha < 1`` stop unless some adjusted p-value falls below alpha.
    ``alpha >= 1`` removes the criterion; the node only stops when no
    covariate shows any association at all (every raw p-value is 1).
    """
    if alpha >= 1:
        return bool(np.all(np.asarray(p_values) >= 1))
    return bool(np.min(adjusted) >= alpha)


def select_variable(distance_matrices, dy, alpha=0.05, n_permutations=999, seed=0,
                    key=(), n_jobs=None):
    """Test every covariate against the response and pick the split variable.

    Parameters
    ----------
    distance_matrices : list of (m, m) arrays
        One matrix per covariate, over the node's observations.
    dy : (m, m) array
        Response distance matrix.
    alpha : float
        Nominal level; 1 disables stopping.
    seed, key
        Covariate ``j`` draws its permutations from ``substream(seed, *key, j)``.
    """
    if not distance_matrices:
        raise ValueError("need at least one covariate")
    if dy.shape[0] < 2:
        raise ValueError("need at least 2 observations")
    bc = double_center(dy)

    def run(j, dx):
        rng = substream(seed, *key, j)
        stat, p = centered_test(double_center(dx), bc, n_permutations, rng)
        return IndependenceTest(stat, p, int(n_permutations), j)

    if n_jobs in (None, 1) or len(distance_matrices) == 1:
        tests = [run(j, dx) for j, dx in enumerate(distance_matrices)]
    else:
        tests = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(run)(j, dx) for j, dx in enumerate(distance_matrices)
        )
    raw = np.array([t.p_value for t in tests])
    adjusted = bh_adjust(raw)
    if should_stop(adjusted, raw, alpha):
        return SelectionOutcome(None, tests, adjusted)
    # argmin returns the first minimum: ties go to the lowest index
    return SelectionOutcome(int(np.argmin(raw)), tests, adjusted)
