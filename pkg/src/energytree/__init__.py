"""Energy trees: recursive partitioning with distance-covariance permutation tests.

Covariates may be numeric, nominal, functional (curves) or graphs.
"""

from .dataset import (
    Dataset,
    DatasetError,
    FunctionalColumn,
    GraphColumn,
    NominalColumn,
    NumericColumn,
    Response,
    load_dataset,
    save_dataset,
    subset_view,
    validate,
)
from .estimator import EnergyTreeClassifier, EnergyTreeRegressor
from .tree import EnergyTree, FitConfig, grow, load, render_text, save

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DatasetError",
    "EnergyTree",
    "EnergyTreeClassifier",
    "EnergyTreeRegressor",
    "FitConfig",
    "FunctionalColumn",
    "GraphColumn",
    "NominalColumn",
    "NumericColumn",
    "Response",
    "grow",
    "load",
    "load_dataset",
    "render_text",
    "save",
    "save_dataset",
    "subset_view",
    "validate",
]
