"""First-principles classifiers behind one fit / predict contract."""

from packscope.classifiers.bayes import bayes_posterior
from packscope.classifiers.config import (
    DEFAULTS, FAMILIES, GRID_RANGES, PRESETS, TRAINABLE, AlgoConfig, expand_grid, preset,
)
from packscope.classifiers.core import (
    GridCell, Model, cross_validate, fit, grid_search, pick_best, predict, predict_batch,
)
from packscope.classifiers.data import Dataset
from packscope.classifiers.linear import logistic, lr_objective
from packscope.classifiers.mlp import mlp_loss_grad
from packscope.classifiers.serialize import dumps_model, load_model, loads_model, save_model
from packscope.classifiers.tree import best_split

__all__ = [
    "AlgoConfig", "DEFAULTS", "Dataset", "FAMILIES", "GRID_RANGES", "GridCell", "Model", "PRESETS",
    "TRAINABLE", "bayes_posterior", "best_split", "cross_validate", "dumps_model", "expand_grid", "fit",
    "grid_search", "load_model", "loads_model", "logistic", "lr_objective", "mlp_loss_grad", "pick_best",
    "predict", "predict_batch", "preset", "save_model",
]
