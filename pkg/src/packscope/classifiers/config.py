"""Algorithm configurations, the tuning grid and the tuned presets."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace

from packscope.errors import BadConfig

FAMILIES = ("KNN", "GNBC", "BNBC", "LR", "LSVM", "DT", "RF", "GBDT", "MLP", "KSVM", "DL85")
PREPROCESSING = ("none", "boolean", "minmax", "zscore")

# defaults for every family; presets and user params are layered on top
DEFAULTS: dict[str, dict] = {
    "KNN": {"k": 5},
    "GNBC": {"var_smoothing": 1e-9},
    "BNBC": {"alpha": 1.0},
    "LR": {"loss": "squared_hinge", "l2": 1e-4, "max_iter": 500, "tol": 1e-6},
    "LSVM": {"loss": "squared_hinge", "l2": 1e-4, "max_iter": 500, "tol": 1e-6},
    "DT": {"criterion": "gini", "min_leaf": 1, "max_depth": None, "max_features": None},
    "RF": {"n_estimators": 100, "criterion": "gini", "min_leaf": 1, "max_depth": None,
           "max_features": "sqrt", "bootstrap": True},
    "GBDT": {"n_estimators": 100, "learning_rate": 0.1, "min_leaf": 1, "max_depth": 3},
    "MLP": {"layers": (100,), "activation": "relu", "solver": "sgd", "learning_rate": 0.05,
            "momentum": 0.9, "batch_size": 64, "max_iter": 200, "l2": 1e-4, "tol": 1e-4,
            "n_iter_no_change": 10},
    "KSVM": {"kernel": "rbf", "C": 1.0, "gamma": "scale", "degree": 3, "coef0": 0.0,
             "tol": 1e-3, "max_iter": 100000},
    "DL85": {"max_depth": 10},
}

_DT_GRID = {"criterion": ("entropy", "gini"), "min_leaf": range(2, 13), "max_depth": range(1, 13)}
GRID_RANGES: dict[str, dict] = {
    "KNN": {"k": range(1, 31)},
    "LR": {"loss": ("hinge", "squared_hinge")},
    "LSVM": {"loss": ("hinge", "squared_hinge")},
    "DT": _DT_GRID,
    "RF": dict(_DT_GRID, n_estimators=range(2, 151)),
    "GBDT": {"min_leaf": range(2, 13), "max_depth": range(1, 13), "n_estimators": range(2, 151)},
    "MLP": {"activation": ("identity", "tanh", "logistic", "relu"), "solver": ("adam", "sgd", "lbfgs")},
    "KSVM": {"kernel": ("linear", "poly", "rbf", "sigmoid")},
    "DL85": {"max_depth": range(1, 11)},
}
MLP_UNITS = (25, 50, 100)


@dataclass(frozen=True)
class AlgoConfig:
    family: str
    preprocessing: str = "none"
    params: dict = field(default_factory=dict)
    pca_k: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise BadConfig(f"unknown family {self.family!r}")
        if self.preprocessing not in PREPROCESSING:
            raise BadConfig(f"unknown preprocessing {self.preprocessing!r}")
        unknown = set(self.params) - set(DEFAULTS[self.family])
        if unknown:
            raise BadConfig(f"{self.family} has no hyperparameters {sorted(unknown)}")
        if self.pca_k is not None and self.pca_k < 1:
            raise BadConfig("pca_k must be positive")

    def resolved(self) -> dict:
        out = dict(DEFAULTS[self.family])
        out.update(self.params)
        if "layers" in out:
            out["layers"] = tuple(int(u) for u in out["layers"])
        return out

    def with_params(self, **kw) -> AlgoConfig:
        return replace(self, params={**self.params, **kw})

    def out_of_grid(self) -> list[str]:
        """Names of hyperparameters that fall outside the tuning grid."""
        p = self.resolved()
        bad = [name for name, allowed in GRID_RANGES.get(self.family, {}).items() if p.get(name) not in allowed]
        if self.family == "MLP":
            layers = p["layers"]
            if not 1 <= len(layers) <= 3 or any(u not in MLP_UNITS for u in layers):
                bad.append("layers")
        return bad

    def to_dict(self) -> dict:
        params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()}
        return {"family": self.family, "preprocessing": self.preprocessing, "params": params,
                "pca_k": self.pca_k, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> AlgoConfig:
        params = dict(d.get("params", {}))
        if "layers" in params:
            params["layers"] = tuple(params["layers"])
        return cls(d["family"], d.get("preprocessing", "none"), params, d.get("pca_k"), int(d.get("seed", 0)))

    def key(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


_TREE_PRESET = {"criterion": "entropy", "min_leaf": 10, "max_depth": 6}

PRESETS: dict[str, AlgoConfig] = {
    "KNN": AlgoConfig("KNN", "boolean", {"k": 16}),
    "BNBC": AlgoConfig("BNBC", "boolean"),
    "GNBC": AlgoConfig("GNBC", "zscore"),
    "LR": AlgoConfig("LR", "zscore", {"loss": "squared_hinge"}),
    "LSVM": AlgoConfig("LSVM", "boolean", {"loss": "squared_hinge"}),
    "DT": AlgoConfig("DT", "none", dict(_TREE_PRESET)),
    "DL85": AlgoConfig("DL85", "boolean", {"max_depth": 10}),
    "RF": AlgoConfig("RF", "none", dict(_TREE_PRESET, n_estimators=20)),
    "GBDT": AlgoConfig("GBDT", "none", {"min_leaf": 10, "max_depth": 6, "n_estimators": 20}),
    "MLP": AlgoConfig("MLP", "boolean", {"layers": (50, 100), "solver": "sgd", "activation": "logistic"}),
    "KSVM": AlgoConfig("KSVM", "zscore", {"kernel": "rbf"}),
}

# the ten families that can actually be trained
TRAINABLE = tuple(f for f in FAMILIES if f != "DL85")


def preset(family: str, seed: int = 0) -> AlgoConfig:
    if family not in PRESETS:
        raise BadConfig(f"no preset for {family!r}")
    return replace(PRESETS[family], seed=seed)


def expand_grid(family: str, preprocessing=PREPROCESSING, seed: int = 0, **axes) -> list[AlgoConfig]:
    """Cartesian product of ``axes`` (name -> values) over the given preprocessing modes."""
    names = sorted(axes)
    out = []
    for pre in preprocessing:
        for combo in itertools.product(*(axes[n] for n in names)):
            out.append(AlgoConfig(family, pre, dict(zip(names, combo)), seed=seed))
    return out
