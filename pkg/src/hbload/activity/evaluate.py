"""Prediction reports and model artifacts."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from .features import MODEL_FEATURES, ActivityType
from .linear import LinearModel
from .network import MlpModel

Model = Union[LinearModel, MlpModel]

CODES = tuple(int(a) for a in ActivityType)


def round_class(pred) -> np.ndarray:
    """Nearest activity code, halves rounded up, clamped to the valid codes."""
    return np.clip(np.floor(np.asarray(pred, dtype=float) + 0.5), min(CODES), max(CODES)).astype(int)


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    predictions: np.ndarray
    targets: np.ndarray
    classes: np.ndarray
    sse: float
    accuracy: float


def evaluate(model: Model, X, y) -> EvaluationReport:
    y = np.asarray(y, dtype=float).ravel()
    pred = model.predict(X)
    r = pred - y
    cls = round_class(pred)
    return EvaluationReport(
        predictions=pred,
        targets=y,
        classes=cls,
        sse=float(r @ r),
        accuracy=float(np.mean(cls == np.rint(y).astype(int))),
    )


# -- artifacts -------------------------------------------------------------

LEARNERS = ("lm", "nn", "dl")


class ArtifactError(ValueError):
    pass


def model_to_dict(model: Model, learner: str, model_id: int, extra: dict | None = None) -> dict:
    doc = {"learner": learner, "model_id": model_id, "features": list(MODEL_FEATURES[model_id])}
    if isinstance(model, LinearModel):
        doc.update(coef=model.coef.tolist(), intercept=model.intercept)
    else:
        doc.update(
            layer_sizes=list(model.layer_sizes),
            params=model.params.tolist(),
            x_mean=model.x_mean.tolist(),
            x_std=model.x_std.tolist(),
        )
    if extra:
        doc.update(extra)
    return doc


class _LoadedLinear:
    """Coefficients-only linear predictor restored from an artifact."""

    def __init__(self, coef, intercept):
        self.coef = np.asarray(coef, dtype=float)
        self.intercept = float(intercept)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.coef.size:
            raise ArtifactError(f"model expects {self.coef.size} features, got {X.shape[1]}")
        return X @ self.coef + self.intercept


def model_from_dict(doc: dict):
    try:
        learner = doc["learner"]
        model_id = int(doc["model_id"])
        if learner not in LEARNERS:
            raise ArtifactError(f"unknown learner {learner!r}")
        if list(doc["features"]) != list(MODEL_FEATURES[model_id]):
            raise ArtifactError("artifact feature list does not match its model id")
        n_features = len(doc["features"])
        if learner == "lm":
            if len(doc["coef"]) != n_features:
                raise ArtifactError(
                    f"artifact has {len(doc['coef'])} coefficients for {n_features} features")
            return _LoadedLinear(doc["coef"], doc["intercept"])
        if int(doc["layer_sizes"][0]) != n_features:
            raise ArtifactError(
                f"network takes {doc['layer_sizes'][0]} inputs, artifact lists {n_features} features")
        return MlpModel(tuple(doc["layer_sizes"]), np.array(doc["params"]),
                        np.array(doc["x_mean"]), np.array(doc["x_std"]))
    except (KeyError, TypeError, IndexError) as exc:
        raise ArtifactError(f"malformed model artifact: {exc}") from None


def dumps_model(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
