"""Versioned JSON text format for trained models.

Floats are written by ``json`` with shortest round-trip repr, so a reload is
bit-exact. Arrays carry dtype and shape; nested state objects carry their
type name and are rebuilt from a registry.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from packscope.classifiers.bayes import BernoulliLikelihood, GaussianLikelihood, NaiveBayes
from packscope.classifiers.config import AlgoConfig
from packscope.classifiers.core import Model
from packscope.classifiers.ensemble import GradientBoosting, RandomForest
from packscope.classifiers.knn import KNearest
from packscope.classifiers.ksvm import KernelSVM
from packscope.classifiers.linear import LinearModel
from packscope.classifiers.mlp import Perceptron
from packscope.classifiers.tree import DecisionTree, Tree
from packscope.errors import FormatVersionMismatch
from packscope.preprocess import PcaModel, Preprocessor, ScalerModel

FORMAT = "packscope-model"
VERSION = 1

_TYPES = {cls.__name__: cls for cls in (
    BernoulliLikelihood, GaussianLikelihood, NaiveBayes, GradientBoosting, RandomForest, KNearest,
    KernelSVM, LinearModel, Perceptron, DecisionTree, Tree, PcaModel, Preprocessor, ScalerModel,
)}


def _encode(obj):
    if isinstance(obj, AlgoConfig):
        return {"__config__": obj.to_dict()}
    if dataclasses.is_dataclass(obj) and type(obj).__name__ in _TYPES:
        return {"__type__": type(obj).__name__,
                **{f.name: _encode(getattr(obj, f.name)) for f in dataclasses.fields(obj)}}
    if isinstance(obj, np.ndarray):
        return {"__array__": obj.dtype.str, "shape": list(obj.shape), "data": obj.ravel().tolist()}
    if isinstance(obj, (list, tuple)):
        return {"__tuple__": [_encode(v) for v in obj]}
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, dict):
        return {"__dict__": {k: _encode(v) for k, v in obj.items()}}
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__config__" in obj:
            return AlgoConfig.from_dict(obj["__config__"])
        if "__array__" in obj:
            return np.array(obj["data"], dtype=np.dtype(obj["__array__"])).reshape(obj["shape"])
        if "__tuple__" in obj:
            return tuple(_decode(v) for v in obj["__tuple__"])
        if "__dict__" in obj:
            return {k: _decode(v) for k, v in obj["__dict__"].items()}
        if "__type__" in obj:
            cls = _TYPES[obj["__type__"]]
            return cls(**{k: _decode(v) for k, v in obj.items() if k != "__type__"})
    return obj


def dumps_model(model: Model) -> str:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "family": model.family,
        "config": model.config.to_dict(),
        "feature_ids": list(model.feature_ids),
        "train_seconds": model.train_seconds,
        "train_end": model.train_end,
        "out_of_grid": list(model.out_of_grid),
        "n_train": model.n_train,
        "preprocessor": _encode(model.preprocessor),
        "estimator": _encode(model.estimator),
    }
    return json.dumps(doc, indent=1) + "\n"


def loads_model(text: str) -> Model:
    doc = json.loads(text)
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise FormatVersionMismatch(f"expected {FORMAT} v{VERSION}, got {doc.get('format')} v{doc.get('version')}")
    return Model(
        family=doc["family"],
        config=AlgoConfig.from_dict(doc["config"]),
        preprocessor=_decode(doc["preprocessor"]),
        estimator=_decode(doc["estimator"]),
        feature_ids=tuple(doc["feature_ids"]),
        train_seconds=float(doc["train_seconds"]),
        train_end=float(doc["train_end"]),
        out_of_grid=tuple(doc["out_of_grid"]),
        n_train=int(doc["n_train"]),
    )


def save_model(model: Model, path) -> None:
    from pathlib import Path

    from packscope.store import _write_atomic
    _write_atomic(Path(path), dumps_model(model))


def load_model(path) -> Model:
    from pathlib import Path
    return loads_model(Path(path).read_text(encoding="utf-8"))
