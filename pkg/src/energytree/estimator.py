"""scikit-learn compatible estimators wrapping :func:`energytree.tree.grow`."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .dataset import Response, as_dataset
from .tree import EnergyTree, FitConfig, grow, load, render_text, save


class BaseEnergyTree(BaseEstimator):
    """Shared parameters and fitting logic.

    ``X`` may be a 2-D numeric array, a list of covariate columns
    (:class:`~energytree.dataset.NumericColumn`, ``NominalColumn``,
    ``FunctionalColumn``, ``GraphColumn``) or a
    :class:`~energytree.dataset.Dataset`.
    """

    def __init__(self, alpha=0.05, min_bucket=5, n_permutations=999, split_method="fve",
                 n_basis=10, shell_bins=10, max_depth=None, random_state=None, n_jobs=None):
        self.alpha = alpha
        self.min_bucket = min_bucket
        self.n_permutations = n_permutations
        self.split_method = split_method
        self.n_basis = n_basis
        self.shell_bins = shell_bins
        self.max_depth = max_depth
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _seed(self):
        if self.random_state is None:
            return int(np.random.SeedSequence().entropy % 2**64)
        if isinstance(self.random_state, (int, np.integer)):
            return int(self.random_state)
        # Generator / RandomState: draw a fixed seed from it
        rng = self.random_state
        draw = rng.integers if hasattr(rng, "integers") else rng.randint
        return int(draw(0, 2**63 - 1))

    def _config(self):
        return FitConfig(alpha=self.alpha, min_bucket=self.min_bucket,
                         n_permutations=self.n_permutations, split_method=self.split_method,
                         n_basis=self.n_basis, shell_bins=self.shell_bins, seed=self._seed(),
                         max_depth=self.max_depth)

    def _fit(self, dataset):
        config = self._config()
        self.tree_ = grow(dataset, config, n_jobs=self.n_jobs)
        self.seed_ = config.seed
        self.n_features_in_ = len(dataset.covariates)
        self.feature_names_in_ = np.array(dataset.names, dtype=object)
        return self

    def apply(self, X):
        check_is_fitted(self, "tree_")
        return self.tree_.apply(X)

    def get_depth(self):
        check_is_fitted(self, "tree_")
        return self.tree_.depth

    def get_n_leaves(self):
        check_is_fitted(self, "tree_")
        return len(self.tree_.leaves())

    def export_text(self):
        check_is_fitted(self, "tree_")
        return render_text(self.tree_)

    def save(self, path):
        check_is_fitted(self, "tree_")
        save(self.tree_, path)

    @classmethod
    def from_tree(cls, tree):
        """Wrap a fitted :class:`EnergyTree` (e.g. one read with :func:`load`)."""
        if isinstance(tree, (str, bytes)) or hasattr(tree, "__fspath__"):
            tree = load(tree)
        if not isinstance(tree, EnergyTree):
            raise TypeError("expected an EnergyTree or a path to a saved model")
        cfg = tree.config
        est = cls(alpha=cfg.alpha, min_bucket=cfg.min_bucket, n_permutations=cfg.n_permutations,
                  split_method=cfg.split_method, n_basis=cfg.n_basis, shell_bins=cfg.shell_bins,
                  max_depth=cfg.max_depth, random_state=cfg.seed)
        est.tree_ = tree
        est.seed_ = cfg.seed
        est.n_features_in_ = len(tree.schema)
        est.feature_names_in_ = np.array([s["name"] for s in tree.schema], dtype=object)
        if tree.is_classifier:
            est.classes_ = np.array(tree.response["levels"], dtype=object)
        return est


class EnergyTreeRegressor(RegressorMixin, BaseEnergyTree):
    """Energy tree for a numeric response; leaves predict the node mean."""

    def fit(self, X, y=None):
        dataset = as_dataset(X, y, kind="numeric")
        if dataset.response is None:
            raise ValueError("y is required")
        return self._fit(dataset)

    def predict(self, X):
        check_is_fitted(self, "tree_")
        return self.tree_.predict(X).astype(np.float64)


class EnergyTreeClassifier(ClassifierMixin, BaseEnergyTree):
    """Energy tree for a categorical response; leaves predict the modal class."""

    def fit(self, X, y=None):
        if y is None or isinstance(y, Response):
            dataset = as_dataset(X, y)
            classes = None
        else:
            y = np.asarray(y).ravel()
            classes = np.unique(y)
            codes = np.searchsorted(classes, y)
            dataset = as_dataset(X, Response("categorical", codes, tuple(str(c) for c in classes)))
        if dataset.response is None:
            raise ValueError("y is required")
        if dataset.response.kind != "categorical":
            raise ValueError("EnergyTreeClassifier needs a categorical response")
        if classes is None:
            classes = np.array(dataset.response.levels, dtype=object)
        self.classes_ = classes
        return self._fit(dataset)

    def predict_proba(self, X):
        check_is_fitted(self, "tree_")
        return self.tree_.predict_proba(X)

    def predict(self, X):
        check_is_fitted(self, "tree_")
        leaves = self.tree_.apply(X)
        codes = np.array([self.tree_.nodes[i].prediction["class"] for i in leaves], dtype=np.int64)
        return self.classes_[codes]
