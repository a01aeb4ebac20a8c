"""One-hidden-layer MLP head: ReLU, inverted dropout, sigmoid output.

The objective is mean binary cross-entropy plus an L2 penalty
``(lambda/2)(||W1||^2 + ||W2||^2)`` (biases unpenalized).  Gradients are
hand-derived and exact for whatever dropout masks the forward pass
used, so finite-difference checks run with frozen masks.

The L2 term can enter in exactly one of two places: ``backward`` adds
``lambda * W`` when asked (used by gradient checks against the full
objective), and ``adam_step`` adds it from ``AdamState.weight_decay``
(used during training, with ``backward`` called at ``weight_decay=0``).
Training uses the second path; never enable both at once.

Training is mini-batch Adam with per-epoch seeded shuffling and early
stopping on a validation ranking objective (AUC when the validation set
has both classes, negative mean BCE otherwise); the returned model is
the best-validation checkpoint, not the last epoch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .metrics import RankedPredictions, roc_auc

__all__ = [
    "MlpModel",
    "MlpHyperparams",
    "Grads",
    "AdamState",
    "init_mlp",
    "make_dropout_mask",
    "forward_batch",
    "bce_loss",
    "backward",
    "adam_step",
    "TrainLog",
    "train_mlp",
]


@dataclass(frozen=True, eq=False)
class MlpModel:
    """Parameters of sigmoid(W2 . dropout(relu(W1 x + b1)) + b2)."""

    W1: np.ndarray  # (hidden, input)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (hidden,)
    b2: float
    dropout_rate: float

    def __post_init__(self):
        hidden, _ = self.W1.shape
        if self.b1.shape != (hidden,) or self.W2.shape != (hidden,):
            raise ValueError("parameter shapes are inconsistent")
        for arr in (self.W1, self.b1, self.W2):
            if not np.isfinite(arr).all():
                raise ValueError("parameters must be finite")
        if not np.isfinite(self.b2):
            raise ValueError("parameters must be finite")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(
                f"dropout_rate must be in [0, 1), got {self.dropout_rate}"
            )

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Deterministic probabilities (no dropout)."""
        probs, _ = forward_batch(self, X)
        return probs

    def save(self, path: str | Path, *, hyperparams=None, seed=None) -> None:
        payload = {
            "input_dim": self.input_dim,
            "hidden": self.hidden_dim,
            "dropout_rate": self.dropout_rate,
            "W1": self.W1.ravel().tolist(),
            "b1": self.b1.tolist(),
            "W2": self.W2.tolist(),
            "b2": self.b2,
            "hyperparams": None if hyperparams is None else hyperparams.to_dict(),
            "seed": seed,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "MlpModel":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        hidden, input_dim = payload["hidden"], payload["input_dim"]
        return cls(
            W1=np.asarray(payload["W1"], dtype=np.float64).reshape(
                hidden, input_dim
            ),
            b1=np.asarray(payload["b1"], dtype=np.float64),
            W2=np.asarray(payload["W2"], dtype=np.float64),
            b2=float(payload["b2"]),
            dropout_rate=float(payload["dropout_rate"]),
        )


@dataclass(frozen=True)
class MlpHyperparams:
    learning_rate: float
    weight_decay: float
    hidden: int
    dropout: float
    batch_size: int = 64
    max_epochs: int = 200
    patience: int = 10

    def __post_init__(self):
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning_rate and weight_decay must be >= 0")
        if self.hidden <= 0 or self.batch_size <= 0 or self.max_epochs <= 0:
            raise ValueError("hidden, batch_size, and max_epochs must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "hidden": self.hidden,
            "dropout": self.dropout,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MlpHyperparams":
        return cls(**payload)


def init_mlp(
    input_dim: int, hidden: int, dropout_rate: float, rng: np.random.Generator
) -> MlpModel:
    """He-style uniform init scaled by fan-in; biases start at zero."""
    limit1 = np.sqrt(6.0 / input_dim)
    limit2 = np.sqrt(6.0 / hidden)
    return MlpModel(
        W1=rng.uniform(-limit1, limit1, size=(hidden, input_dim)),
        b1=np.zeros(hidden),
        W2=rng.uniform(-limit2, limit2, size=hidden),
        b2=0.0,
        dropout_rate=dropout_rate,
    )


def make_dropout_mask(
    rng: np.random.Generator, shape: tuple[int, ...], p: float
) -> np.ndarray:
    """Inverted-dropout mask: entries are 0 or 1/(1-p)."""
    return (rng.random(shape) >= p) / (1.0 - p)


def forward_batch(
    model: MlpModel,
    X: np.ndarray,
    *,
    rng: np.random.Generator | None = None,
    mask: np.ndarray | None = None,
) -> tuple[np.ndarray, dict]:
    """Probabilities plus the cache ``backward`` needs.

    Passing ``rng`` (with dropout_rate > 0) or an explicit ``mask``
    selects training mode; otherwise the pass is deterministic
    evaluation.  Inverted dropout scales kept units by 1/(1-p), so the
    expected training activation equals the evaluation activation.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.input_dim:
        raise ValueError(
            f"input has {X.shape[1]} columns, model expects {model.input_dim}"
        )
    z1 = X @ model.W1.T + model.b1
    a = np.maximum(z1, 0.0)
    if mask is None and rng is not None and model.dropout_rate > 0.0:
        mask = make_dropout_mask(rng, a.shape, model.dropout_rate)
    if mask is not None:
        if mask.shape != a.shape:
            raise ValueError("dropout mask shape does not match activations")
        h = a * mask
    else:
        h = a
    z2 = h @ model.W2 + model.b2
    cache = {"X": X, "z1": z1, "h": h, "mask": mask, "z2": z2}
    return expit(z2), cache


def bce_loss(z2: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy from pre-sigmoid scores, overflow-safe."""
    return float((np.logaddexp(0.0, z2) - y * z2).mean())


@dataclass(frozen=True, eq=False)
class Grads:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float

    def check_finite(self) -> None:
        ok = (
            np.isfinite(self.W1).all()
            and np.isfinite(self.b1).all()
            and np.isfinite(self.W2).all()
            and np.isfinite(self.b2)
        )
        if not ok:
            raise FloatingPointError("non-finite gradient")


def backward(
    model: MlpModel, cache: dict, y: np.ndarray, *, weight_decay: float = 0.0
) -> Grads:
    """Exact gradients of mean BCE (+ optional L2 term) for this batch.

    Uses the dropout masks stored by the paired forward pass.  Pass
    ``weight_decay`` only when the optimizer is not adding the L2 term
    itself.
    """
    X, z1, h, mask = cache["X"], cache["z1"], cache["h"], cache["mask"]
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    r = (expit(cache["z2"]) - y) / n  # dL/dz2
    grad_W2 = r @ h
    grad_b2 = float(r.sum())
    dh = np.outer(r, model.W2)
    da = dh * mask if mask is not None else dh
    dz1 = da * (z1 > 0.0)
    grad_W1 = dz1.T @ X
    grad_b1 = dz1.sum(axis=0)
    if weight_decay:
        grad_W1 = grad_W1 + weight_decay * model.W1
        grad_W2 = grad_W2 + weight_decay * model.W2
    return Grads(grad_W1, grad_b1, grad_W2, grad_b2)


@dataclass(frozen=True, eq=False)
class AdamState:
    """Per-parameter Adam moments plus the shared hyperparameters."""

    lr: float
    weight_decay: float
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: Grads | None = None
    v: Grads | None = None

    @classmethod
    def create(cls, model: MlpModel, lr: float, weight_decay: float) -> "AdamState":
        zeros = Grads(
            np.zeros_like(model.W1),
            np.zeros_like(model.b1),
            np.zeros_like(model.W2),
            0.0,
        )
        zeros2 = Grads(
            np.zeros_like(model.W1),
            np.zeros_like(model.b1),
            np.zeros_like(model.W2),
            0.0,
        )
        return cls(lr=lr, weight_decay=weight_decay, m=zeros, v=zeros2)


def adam_step(
    state: AdamState, model: MlpModel, grads: Grads
) -> tuple[MlpModel, AdamState]:
    """One bias-corrected Adam update; L2 decay joins the gradient here."""
    grads.check_finite()
    t = state.step + 1
    lam = state.weight_decay

    def upd(param, g, m, v, decay):
        g = g + lam * param if decay and lam else g
        m_new = state.beta1 * m + (1.0 - state.beta1) * g
        v_new = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m_new / (1.0 - state.beta1**t)
        v_hat = v_new / (1.0 - state.beta2**t)
        return param - state.lr * m_hat / (np.sqrt(v_hat) + state.eps), m_new, v_new

    W1, m_W1, v_W1 = upd(model.W1, grads.W1, state.m.W1, state.v.W1, True)
    b1, m_b1, v_b1 = upd(model.b1, grads.b1, state.m.b1, state.v.b1, False)
    W2, m_W2, v_W2 = upd(model.W2, grads.W2, state.m.W2, state.v.W2, True)
    b2, m_b2, v_b2 = upd(model.b2, grads.b2, state.m.b2, state.v.b2, False)
    new_model = replace(model, W1=W1, b1=b1, W2=W2, b2=float(b2))
    new_state = replace(
        state,
        step=t,
        m=Grads(m_W1, m_b1, m_W2, float(m_b2)),
        v=Grads(v_W1, v_b1, v_W2, float(v_b2)),
    )
    return new_model, new_state


@dataclass(frozen=True)
class TrainLog:
    train_losses: tuple[float, ...]
    val_objectives: tuple[float, ...]
    best_epoch: int
    stopped_epoch: int


def _val_objective(model: MlpModel, X_val, y_val) -> float:
    probs, cache = forward_batch(model, X_val)
    if len(set(np.unique(y_val))) == 2:
        return roc_auc(RankedPredictions(probs, np.asarray(y_val)))
    # degenerate validation split: fall back to likelihood
    return -bce_loss(cache["z2"], np.asarray(y_val, dtype=np.float64))


def train_mlp(
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    hp: MlpHyperparams,
    seed: int = 0,
) -> tuple[MlpModel, TrainLog]:
    """Mini-batch Adam with early stopping on the validation objective.

    Shuffling, initialization, and dropout all come from one generator
    seeded with ``seed``, so identical inputs give identical logs.  The
    epoch whose validation objective is strictly best is checkpointed
    and returned; training stops after ``hp.patience`` epochs without
    improvement.
    """
    X_train = np.atleast_2d(np.asarray(X_train, dtype=np.float64))
    y_train = np.asarray(y_train, dtype=np.float64)
    if X_train.shape[0] == 0:
        raise ValueError("training set is empty")
    if X_train.shape[0] != y_train.shape[0]:
        raise ValueError("training design and labels must align")
    rng = np.random.default_rng(seed)
    model = init_mlp(X_train.shape[1], hp.hidden, hp.dropout, rng)
    state = AdamState.create(model, hp.learning_rate, hp.weight_decay)

    best = model
    best_objective = -np.inf
    best_epoch = -1
    train_losses: list[float] = []
    val_objectives: list[float] = []
    n = X_train.shape[0]
    epoch = -1
    for epoch in range(hp.max_epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, hp.batch_size):
            idx = order[start : start + hp.batch_size]
            Xb, yb = X_train[idx], y_train[idx]
            _, cache = forward_batch(model, Xb, rng=rng)
            epoch_loss += bce_loss(cache["z2"], yb) * len(idx)
            grads = backward(model, cache, yb)
            model, state = adam_step(state, model, grads)
        train_losses.append(epoch_loss / n)
        objective = _val_objective(model, X_val, y_val)
        val_objectives.append(objective)
        if objective > best_objective:
            best_objective = objective
            best = model
            best_epoch = epoch
        elif epoch - best_epoch >= hp.patience:
            break

    return best, TrainLog(
        tuple(train_losses), tuple(val_objectives), best_epoch, epoch
    )
