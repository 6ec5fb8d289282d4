"""Ridge-regression classification over PPV features.

Features are standardized column-wise with statistics from the training
split. Each class gets a +1/-1 one-vs-rest regression target; prediction is
the argmax over the per-class scores. The ridge penalty is chosen from a grid
by closed-form leave-one-out error, and the linear system is solved in
whichever of the sample or feature dimension is smaller.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SRocketError

# Column deviations below this floor are clamped so constant features do not
# blow up the standardization.
STD_FLOOR = 1e-8

# Guard for leave-one-out denominators 1 - h_ii that cancel to rounding noise.
_LOO_DENOM_FLOOR = 1e-12


class ClassifierError(SRocketError):
    pass


class DegenerateLabelsError(ClassifierError):
    pass


class WidthMismatchError(ClassifierError):
    pass


class LengthMismatchError(ClassifierError):
    pass


def default_alpha_grid() -> np.ndarray:
    """Ten ridge penalties spaced log-uniformly over [1e-3, 1e3]."""
    return 10.0 ** np.linspace(-3.0, 3.0, 10)


@dataclass
class RidgeModel:
    """Fitted ridge classifier with its standardization statistics."""

    weights: np.ndarray       # (num_features, num_classes)
    intercepts: np.ndarray    # (num_classes,)
    alpha: float
    scaler_mean: np.ndarray   # (num_features,)
    scaler_std: np.ndarray    # (num_features,), floored at STD_FLOOR
    num_classes: int
    alpha_grid: np.ndarray | None = None
    loo_errors: np.ndarray | None = None

    @property
    def num_features(self) -> int:
        return self.weights.shape[0]

    def standardize(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.num_features:
            raise WidthMismatchError(
                f"expected feature width {self.num_features}, got {features.shape}"
            )
        return (features - self.scaler_mean) / self.scaler_std


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    mcc: float
    confusion: np.ndarray


def _loo_sse_dual(K: np.ndarray, Yc: np.ndarray, alpha: float) -> float:
    # For ridge, residual_i / (1 - h_ii) equals (M @ Y)_i / M_ii with
    # M = (K + alpha I)^-1, which sidesteps forming the hat matrix.
    M = np.linalg.inv(K + alpha * np.eye(K.shape[0]))
    diag = np.maximum(np.diag(M), _LOO_DENOM_FLOOR)
    loo_resid = (M @ Yc) / diag[:, None]
    return float(np.sum(loo_resid ** 2))


def _loo_sse_primal(Z: np.ndarray, G: np.ndarray, Yc: np.ndarray, alpha: float) -> float:
    n_features = Z.shape[1]
    P = np.linalg.inv(G + alpha * np.eye(n_features))
    W = P @ (Z.T @ Yc)
    h = np.einsum("nd,nd->n", Z @ P, Z)
    denom = np.maximum(1.0 - h, _LOO_DENOM_FLOOR)
    loo_resid = (Yc - Z @ W) / denom[:, None]
    return float(np.sum(loo_resid ** 2))


def fit(features: np.ndarray, labels: np.ndarray, alpha_grid: np.ndarray | None = None) -> RidgeModel:
    """Fit the classifier, selecting alpha by leave-one-out squared error.

    Ties on the leave-one-out error keep the first (smallest) grid value.
    Labels must be dense ids 0..C-1 with at least two classes present.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2:
        raise ValueError("features must be 2-dimensional")
    if y.ndim != 1 or y.size != X.shape[0]:
        raise LengthMismatchError(f"{X.shape[0]} feature rows but {y.size} labels")
    if np.unique(y).size < 2:
        raise DegenerateLabelsError("training labels contain fewer than 2 classes")
    if y.min() < 0:
        raise ValueError("labels must be non-negative dense class ids")
    if alpha_grid is None:
        alpha_grid = default_alpha_grid()
    alpha_grid = np.asarray(alpha_grid, dtype=np.float64)
    if alpha_grid.size == 0 or np.any(alpha_grid <= 0):
        raise ValueError("alpha grid must contain positive values")

    n_samples, n_features = X.shape
    num_classes = int(y.max()) + 1

    mean = X.mean(axis=0)
    std = np.maximum(X.std(axis=0), STD_FLOOR)
    Z = (X - mean) / std

    Y = -np.ones((n_samples, num_classes), dtype=np.float64)
    Y[np.arange(n_samples), y] = 1.0
    # The intercept is the unpenalized column mean of the targets.
    intercepts = Y.mean(axis=0)
    Yc = Y - intercepts

    dual = n_samples < n_features
    if dual:
        K = Z @ Z.T
        sse = np.array([_loo_sse_dual(K, Yc, a) for a in alpha_grid])
    else:
        G = Z.T @ Z
        sse = np.array([_loo_sse_primal(Z, G, Yc, a) for a in alpha_grid])

    best = int(np.argmin(sse))
    alpha = float(alpha_grid[best])
    if dual:
        dual_coef = np.linalg.solve(K + alpha * np.eye(n_samples), Yc)
        weights = Z.T @ dual_coef
    else:
        weights = np.linalg.solve(G + alpha * np.eye(n_features), Z.T @ Yc)

    return RidgeModel(
        weights=weights,
        intercepts=intercepts,
        alpha=alpha,
        scaler_mean=mean,
        scaler_std=std,
        num_classes=num_classes,
        alpha_grid=alpha_grid,
        loo_errors=sse,
    )


def decision_scores(model: RidgeModel, features: np.ndarray) -> np.ndarray:
    return model.standardize(features) @ model.weights + model.intercepts


def predict(model: RidgeModel, features: np.ndarray) -> np.ndarray:
    """Predicted class ids; score ties resolve to the lowest class id."""
    return np.argmax(decision_scores(model, features), axis=1)


def masked_scores(Z: np.ndarray, weights: np.ndarray, intercepts: np.ndarray,
                  state: np.ndarray) -> np.ndarray:
    """Scores with a 0/1 kernel mask applied to already-standardized features.

    Masking multiplies weight rows rather than slicing columns, so an all-ones
    state reproduces the unmasked scores bit for bit.
    """
    mask = np.asarray(state, dtype=np.float64)
    return Z @ (weights * mask[:, None]) + intercepts


def predict_masked(model: RidgeModel, features: np.ndarray, state: np.ndarray) -> np.ndarray:
    """Predictions with a subset of kernels switched off.

    The mask is applied after standardization. Masked columns contribute
    exactly zero; an all-zeros state leaves only the intercepts.
    """
    state = np.asarray(state)
    if state.ndim != 1 or state.size != model.num_features:
        raise WidthMismatchError(
            f"state length {state.size} does not match feature width {model.num_features}"
        )
    Z = model.standardize(features)
    return np.argmax(masked_scores(Z, model.weights, model.intercepts, state), axis=1)


def accuracy(predictions: np.ndarray, truth: np.ndarray) -> float:
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape:
        raise LengthMismatchError(
            f"predictions shape {predictions.shape} != truth shape {truth.shape}"
        )
    if predictions.size == 0:
        raise LengthMismatchError("cannot score an empty prediction vector")
    return float(np.mean(predictions == truth))


def confusion_matrix(predictions: np.ndarray, truth: np.ndarray, num_classes: int) -> np.ndarray:
    """Counts with true classes on rows and predicted classes on columns."""
    predictions = np.asarray(predictions, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predictions.shape != truth.shape:
        raise LengthMismatchError(
            f"predictions shape {predictions.shape} != truth shape {truth.shape}"
        )
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (truth, predictions), 1)
    return cm


def mcc(predictions: np.ndarray, truth: np.ndarray, num_classes: int) -> float:
    """Multiclass Matthews correlation; 0 when the denominator vanishes."""
    cm = confusion_matrix(predictions, truth, num_classes)
    s = float(cm.sum())
    c = float(np.trace(cm))
    t = cm.sum(axis=1).astype(np.float64)   # true counts per class
    p = cm.sum(axis=0).astype(np.float64)   # predicted counts per class
    cov = c * s - float(p @ t)
    denom_sq = (s * s - float(p @ p)) * (s * s - float(t @ t))
    if denom_sq <= 0.0:
        return 0.0
    return cov / float(np.sqrt(denom_sq))


def compute_metrics(predictions: np.ndarray, truth: np.ndarray, num_classes: int) -> Metrics:
    return Metrics(
        accuracy=accuracy(predictions, truth),
        mcc=mcc(predictions, truth, num_classes),
        confusion=confusion_matrix(predictions, truth, num_classes),
    )


def model_to_dict(model: RidgeModel) -> dict:
    return {
        "weights": [[float(v) for v in row] for row in model.weights],
        "intercepts": [float(v) for v in model.intercepts],
        "alpha": float(model.alpha),
        "scaler_mean": [float(v) for v in model.scaler_mean],
        "scaler_std": [float(v) for v in model.scaler_std],
        "num_classes": int(model.num_classes),
    }


def model_from_dict(payload: dict) -> RidgeModel:
    return RidgeModel(
        weights=np.array(payload["weights"], dtype=np.float64).reshape(
            len(payload["weights"]), len(payload["intercepts"])
        ),
        intercepts=np.array(payload["intercepts"], dtype=np.float64),
        alpha=float(payload["alpha"]),
        scaler_mean=np.array(payload["scaler_mean"], dtype=np.float64),
        scaler_std=np.array(payload["scaler_std"], dtype=np.float64),
        num_classes=int(payload["num_classes"]),
    )
