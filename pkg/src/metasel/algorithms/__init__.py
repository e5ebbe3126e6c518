"""The 14-algorithm rating-predictor pool behind one fit/predict contract.

Hyperparameter defaults are frozen here (documented library defaults for the
collaborative filters; this package's own for the feature models) so runs
are comparable without tuning.
"""

from __future__ import annotations

import io
import json

import numpy as np

from .base import (
    AlgorithmSpec,
    HyperparameterError,
    PredictionError,
    PredictionQuery,
    QueryBatch,
    TrainedModel,
)
from .baselines import BaselineOnly, NormalPredictor, fit_baselines
from .co_clustering import CoClustering
from .factorization import NMF, SVD, SVDpp, svd_sample_gradients
from .feature_models import (
    GradientBoosting,
    GradientBoostingEF,
    LinearRegression,
    LinearRegressionEF,
)
from .gbt import TreeEnsemble, fit_gbt
from .neighbors import KNNBasic, KNNBaseline, KNNWithMeans, similarity_matrix
from .slope_one import SlopeOne

__all__ = [
    "ALGORITHM_IDS", "AlgorithmSpec", "HyperparameterError", "PredictionError",
    "PredictionQuery", "QueryBatch", "TrainedModel", "feature_kind", "fit",
    "fit_baselines", "fit_gbt", "load_model", "make_spec", "predict",
    "save_model", "similarity_matrix", "svd_sample_gradients", "TreeEnsemble",
]

_KNN_PARAMS = {"k": 40, "min_k": 1, "similarity": "msd", "min_support": 1}

PARAM_SCHEMAS: dict[str, dict] = {
    "NormalPredictor": {},
    "BaselineOnly": {"reg_u": 15.0, "reg_i": 10.0, "epochs": 10},
    "KNNBasic": dict(_KNN_PARAMS),
    "KNNWithMeans": dict(_KNN_PARAMS),
    "KNNBaseline": dict(_KNN_PARAMS, bsl_reg_u=15.0, bsl_reg_i=10.0, bsl_epochs=10),
    "SVD": {"n_factors": 100, "n_epochs": 20, "lr": 0.005, "reg": 0.02, "init_std": 0.1},
    "SVDpp": {"n_factors": 20, "n_epochs": 20, "lr": 0.007, "reg": 0.02, "init_std": 0.1},
    "NMF": {"n_factors": 15, "n_epochs": 50, "reg_pu": 0.06, "reg_qi": 0.06,
            "init_low": 0.0, "init_high": 1.0},
    "SlopeOne": {},
    "CoClustering": {"n_cltr_u": 3, "n_cltr_i": 3, "n_epochs": 20},
    "LR": {"ridge": 1e-8},
    "LR_EF": {"ridge": 1e-8},
    "GBT": {"trees": 100, "depth": 6, "lr": 0.1, "min_leaf": 20},
    "GBT_EF": {"trees": 100, "depth": 6, "lr": 0.1, "min_leaf": 20},
}

ALGORITHM_IDS: tuple[str, ...] = tuple(PARAM_SCHEMAS)

MODEL_CLASSES: dict[str, type[TrainedModel]] = {
    "NormalPredictor": NormalPredictor,
    "BaselineOnly": BaselineOnly,
    "KNNBasic": KNNBasic,
    "KNNWithMeans": KNNWithMeans,
    "KNNBaseline": KNNBaseline,
    "SVD": SVD,
    "SVDpp": SVDpp,
    "NMF": NMF,
    "SlopeOne": SlopeOne,
    "CoClustering": CoClustering,
    "LR": LinearRegression,
    "LR_EF": LinearRegressionEF,
    "GBT": GradientBoosting,
    "GBT_EF": GradientBoostingEF,
}

_POSITIVE_INTS = {
    "epochs", "n_epochs", "k", "min_k", "n_factors", "trees", "depth",
    "min_leaf", "n_cltr_u", "n_cltr_i", "bsl_epochs",
}


def feature_kind(algorithm_id: str) -> str | None:
    """None for the collaborative filters, else 'base' or 'extended'."""
    cls = MODEL_CLASSES.get(algorithm_id)
    if cls is None:
        raise HyperparameterError(f"unknown algorithm id {algorithm_id!r}")
    return cls.feature_kind


def validate_spec(spec: AlgorithmSpec) -> AlgorithmSpec:
    """Fill defaults and type-check against the id's parameter schema."""
    if spec.id not in PARAM_SCHEMAS:
        raise HyperparameterError(
            f"unknown algorithm id {spec.id!r}; known: {', '.join(ALGORITHM_IDS)}"
        )
    defaults = PARAM_SCHEMAS[spec.id]
    params = dict(defaults)
    for name, value in spec.params.items():
        if name not in defaults:
            raise HyperparameterError(f"{spec.id}: unknown hyperparameter {name!r}")
        default = defaults[name]
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise HyperparameterError(f"{spec.id}.{name}: expected bool, got {value!r}")
        elif isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise HyperparameterError(f"{spec.id}.{name}: expected int, got {value!r}")
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise HyperparameterError(f"{spec.id}.{name}: expected float, got {value!r}")
            value = float(value)
        elif isinstance(default, str) and not isinstance(value, str):
            raise HyperparameterError(f"{spec.id}.{name}: expected str, got {value!r}")
        params[name] = value
    for name in _POSITIVE_INTS & params.keys():
        if params[name] < 1:
            raise HyperparameterError(f"{spec.id}.{name}: must be >= 1, got {params[name]}")
    if "similarity" in params and params["similarity"] not in ("msd", "cosine", "pearson"):
        raise HyperparameterError(
            f"{spec.id}.similarity: must be msd, cosine, or pearson, got {params['similarity']!r}"
        )
    for name in ("lr",):
        if name in params and params[name] <= 0:
            raise HyperparameterError(f"{spec.id}.{name}: must be > 0")
    return AlgorithmSpec(spec.id, params, spec.seed)


def make_spec(algorithm_id: str, seed: int = 0, **params) -> AlgorithmSpec:
    return validate_spec(AlgorithmSpec(algorithm_id, params, seed))


def fit(spec: AlgorithmSpec, train, features: np.ndarray | None = None) -> TrainedModel:
    """Validate hyperparameters, then train the requested model."""
    spec = validate_spec(spec)
    model = MODEL_CLASSES[spec.id](spec)
    return model.fit(train, features)


def predict(model: TrainedModel, q: PredictionQuery) -> float:
    return model.predict(q)


# ---------------------------------------------------------------------------
# Serialization: one .npz per model, format versioned via the meta entry.
# ---------------------------------------------------------------------------

MODEL_FORMAT_VERSION = 1


def save_model(model: TrainedModel, path) -> None:
    arrays: dict[str, np.ndarray] = {}
    scalars: dict[str, float | int | str | bool] = {}
    for name, attr in vars(model).items():
        if name == "spec":
            continue
        if isinstance(attr, np.ndarray):
            arrays[f"arr::{name}"] = attr
        elif isinstance(attr, dict):
            arrays[f"mapk::{name}"] = np.array(list(attr.keys()), dtype=np.int64)
            arrays[f"mapv::{name}"] = np.array(list(attr.values()), dtype=np.int64)
        elif isinstance(attr, TreeEnsemble):
            arrays[f"ens::{name}::features"] = attr.features
            arrays[f"ens::{name}::thresholds"] = attr.thresholds
            arrays[f"ens::{name}::values"] = attr.values
            arrays[f"ens::{name}::train_mse"] = attr.train_mse
            scalars[f"ens::{name}::base_score"] = attr.base_score
            scalars[f"ens::{name}::lr"] = attr.lr
        elif isinstance(attr, tuple):
            scalars[f"tuple::{name}"] = json.dumps(list(attr))
        elif isinstance(attr, (int, float, str, bool)):
            scalars[name] = attr
        else:
            raise TypeError(f"cannot serialize attribute {name!r} of {model.spec.id}")
    meta = {
        "format": MODEL_FORMAT_VERSION,
        "id": model.spec.id,
        "params": model.spec.params,
        "seed": model.spec.seed,
        "scalars": scalars,
    }
    buf = io.BytesIO()
    np.savez(buf, meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
             **arrays)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_model(path) -> TrainedModel:
    with np.load(path) as blob:
        meta = json.loads(bytes(blob["meta"]).decode())
        if meta.get("format") != MODEL_FORMAT_VERSION:
            raise ValueError(
                f"{path}: model format {meta.get('format')} != {MODEL_FORMAT_VERSION}; re-train"
            )
        spec = AlgorithmSpec(meta["id"], meta["params"], meta["seed"])
        model = MODEL_CLASSES[spec.id](spec)
        ensembles: dict[str, dict] = {}
        for key in blob.files:
            if key == "meta":
                continue
            tag, _, rest = key.partition("::")
            if tag == "arr":
                setattr(model, rest, blob[key])
            elif tag == "mapk":
                keys = blob[key]
                vals = blob[f"mapv::{rest}"]
                setattr(model, rest, {int(k): int(v) for k, v in zip(keys, vals)})
            elif tag == "ens":
                attr_name, _, part = rest.partition("::")
                ensembles.setdefault(attr_name, {})[part] = blob[key]
        for name, value in meta["scalars"].items():
            if name.startswith("ens::"):
                _, attr_name, part = name.split("::")
                ensembles.setdefault(attr_name, {})[part] = value
            elif name.startswith("tuple::"):
                setattr(model, name.split("::", 1)[1], tuple(json.loads(value)))
            else:
                setattr(model, name, value)
        for attr_name, parts in ensembles.items():
            setattr(model, attr_name, TreeEnsemble(
                base_score=parts["base_score"], lr=parts["lr"],
                features=parts["features"], thresholds=parts["thresholds"],
                values=parts["values"], train_mse=parts["train_mse"],
            ))
    return model
