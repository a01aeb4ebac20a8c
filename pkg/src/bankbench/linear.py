"""L2-regularized logistic regression on sparse design matrices.

The objective is the mean binary cross-entropy plus ``||w||^2 / (2 C n)``
— the inverse-regularization convention, so larger ``C`` means a weaker
penalty.  The bias is never penalized.  Training is full-batch gradient
descent with Armijo backtracking, which on these small, heavily
undersampled training sets converges in a few hundred steps and keeps
the whole procedure free of solver-version drift.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

__all__ = [
    "LogisticModel",
    "logreg_loss",
    "logreg_gradient",
    "train_logreg",
]


@dataclass(frozen=True)
class LogisticModel:
    """A trained linear scorer: p = sigmoid(X w + b)."""

    weights: tuple[float, ...]
    bias: float
    C: float
    feature_space_ref: str = ""
    loss_history: tuple[float, ...] = field(default=(), compare=False, repr=False)

    @property
    def dim(self) -> int:
        return len(self.weights)

    def decision(self, X: sp.csr_matrix) -> np.ndarray:
        if X.shape[1] != self.dim:
            raise ValueError(
                f"matrix has {X.shape[1]} columns, model expects {self.dim}"
            )
        return X @ np.asarray(self.weights) + self.bias

    def predict_proba(self, X: sp.csr_matrix) -> np.ndarray:
        return expit(self.decision(X))

    def save(self, path: str | Path) -> None:
        payload = {
            "weights": list(self.weights),
            "bias": self.bias,
            "C": self.C,
            "feature_space_ref": self.feature_space_ref,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "LogisticModel":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(
            weights=tuple(float(v) for v in payload["weights"]),
            bias=float(payload["bias"]),
            C=float(payload["C"]),
            feature_space_ref=str(payload.get("feature_space_ref", "")),
        )


def _decision(X: sp.csr_matrix, w: np.ndarray, b: float) -> np.ndarray:
    return X @ w + b


def logreg_loss(
    X: sp.csr_matrix, y: np.ndarray, w: np.ndarray, b: float, C: float
) -> float:
    """Mean BCE plus the scaled L2 penalty (bias excluded)."""
    z = _decision(X, w, b)
    # log(1 + e^z) - y z, computed without overflow
    bce = np.logaddexp(0.0, z) - y * z
    n = X.shape[0]
    return float(bce.mean() + (w @ w) / (2.0 * C * n))


def logreg_gradient(
    X: sp.csr_matrix, y: np.ndarray, w: np.ndarray, b: float, C: float
) -> tuple[np.ndarray, float]:
    z = _decision(X, w, b)
    residual = expit(z) - y
    n = X.shape[0]
    grad_w = (X.T @ residual) / n + w / (C * n)
    return np.asarray(grad_w), float(residual.mean())


def train_logreg(
    X: sp.csr_matrix,
    y: np.ndarray,
    C: float,
    *,
    tol: float = 1e-6,
    max_iter: int = 1000,
    feature_space_ref: str = "",
) -> LogisticModel:
    """Fit from zero init; stops when the gradient inf-norm drops below tol.

    Each step minimizes along the steepest-descent direction with Armijo
    backtracking (c1 = 1e-4).  The accepted step size is doubled as the
    starting guess of the next step, so well-conditioned problems take
    long strides while badly scaled ones stay stable.
    """
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != y.shape[0]:
        raise ValueError("matrix rows and labels must align")
    if set(np.unique(y)) != {0.0, 1.0}:
        raise ValueError("training labels must contain both classes")
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    X = sp.csr_matrix(X, dtype=np.float64)

    w = np.zeros(X.shape[1])
    b = 0.0
    loss = logreg_loss(X, y, w, b, C)
    history = [loss]
    alpha = 1.0
    c1 = 1e-4
    for iteration in range(max_iter):
        grad_w, grad_b = logreg_gradient(X, y, w, b, C)
        if not (np.isfinite(grad_w).all() and np.isfinite(grad_b)):
            raise FloatingPointError(
                f"non-finite gradient at iteration {iteration}"
            )
        gnorm_inf = max(np.abs(grad_w).max(initial=0.0), abs(grad_b))
        if gnorm_inf < tol:
            break
        gsq = grad_w @ grad_w + grad_b * grad_b
        alpha *= 2.0
        while True:
            new_loss = logreg_loss(X, y, w - alpha * grad_w, b - alpha * grad_b, C)
            if new_loss <= loss - c1 * alpha * gsq:
                break
            alpha *= 0.5
            if alpha < 1e-20:
                raise FloatingPointError(
                    f"line search stalled at iteration {iteration}"
                )
        w = w - alpha * grad_w
        b = b - alpha * grad_b
        loss = new_loss
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite loss at iteration {iteration}")
        history.append(loss)

    return LogisticModel(
        weights=tuple(float(v) for v in w),
        bias=float(b),
        C=float(C),
        feature_space_ref=feature_space_ref,
        loss_history=tuple(history),
    )
