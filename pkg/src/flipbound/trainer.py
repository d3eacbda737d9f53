"""SGD for linear classifiers under hinge, log and modified-Huber losses."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .dataset import Dataset
from .linsep import LinearClassifier
from .seeds import make_rng

__all__ = [
    "LossKind",
    "TrainConfig",
    "DivergenceError",
    "loss_value",
    "subgradient",
    "objective",
    "train",
    "classifier_to_json",
]

DIVERGENCE_LIMIT = 1e6


class DivergenceError(RuntimeError):
    pass


class LossKind(str, enum.Enum):
    HINGE = "hinge"
    LOG = "log"
    MODIFIED_HUBER = "modified-huber"

    @property
    def code(self) -> int:
        return _CODES[self]

    @classmethod
    def parse(cls, s) -> "LossKind":
        if isinstance(s, cls):
            return s
        key = str(s).strip().lower().replace("_", "-")
        aliases = {"modified-huber": cls.MODIFIED_HUBER, "modifiedhuber": cls.MODIFIED_HUBER,
                   "hinge": cls.HINGE, "log": cls.LOG, "logistic": cls.LOG}
        if key not in aliases:
            raise ValueError(f"unknown loss {s!r}")
        return aliases[key]


_CODES = {LossKind.HINGE: 0, LossKind.LOG: 1, LossKind.MODIFIED_HUBER: 2}
_DEFAULT_ETA0 = {LossKind.HINGE: 0.01, LossKind.LOG: 0.1, LossKind.MODIFIED_HUBER: 0.01}


@njit(cache=True)
def _loss(code, z):
    if code == 0:
        return max(0.0, 1.0 - z)
    if code == 1:
        if z > 0:
            return math.log1p(math.exp(-z))
        return -z + math.log1p(math.exp(z))
    if z >= -1.0:
        u = max(0.0, 1.0 - z)
        return u * u
    return -4.0 * z


@njit(cache=True)
def _dloss(code, z):
    if code == 0:
        return -1.0 if z < 1.0 else 0.0
    if code == 1:
        if z > 0:
            e = math.exp(-z)
            return -e / (1.0 + e)
        return -1.0 / (1.0 + math.exp(z))
    if z >= 1.0:
        return 0.0
    if z >= -1.0:
        return -2.0 * (1.0 - z)
    return -4.0


@njit(cache=True)
def _epoch(X, y, order, w, bias, code, l2, eta0, t, average, w_avg, b_avg, n_avg):
    d = X.shape[1]
    total = 0.0
    b = bias[0]
    for idx in order:
        s = b
        for j in range(d):
            s += w[j] * X[idx, j]
        z = y[idx] * s
        sq = 0.0
        for j in range(d):
            sq += w[j] * w[j]
        total += _loss(code, z) + 0.5 * l2 * sq
        eta = eta0 / (1.0 + eta0 * l2 * t)
        g = _dloss(code, z) * y[idx]
        shrink = 1.0 - eta * l2
        for j in range(d):
            w[j] = shrink * w[j] - eta * g * X[idx, j]
        b -= eta * g
        t += 1.0
        if average:
            n_avg[0] += 1.0
            r = 1.0 / n_avg[0]
            for j in range(d):
                w_avg[j] += (w[j] - w_avg[j]) * r
            b_avg[0] += (b - b_avg[0]) * r
    bias[0] = b
    return total, t


def loss_value(kind, margin: float) -> float:
    """Per-sample loss as a function of the margin ``z = y (w.x + b)``."""
    return float(_loss(LossKind.parse(kind).code, float(margin)))


def subgradient(kind, margin: float) -> float:
    """Derivative of the loss in ``z``; hinge returns 0 at its kink."""
    return float(_dloss(LossKind.parse(kind).code, float(margin)))


@dataclass(frozen=True)
class TrainConfig:
    loss: LossKind = LossKind.HINGE
    l2: float = 1e-4
    epochs_max: int = 1000
    eta0: float | None = None
    tol: float = 1e-3
    patience: int = 5
    seed: int = 0
    average: bool = False

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind.parse(self.loss))
        if self.eta0 is None:
            object.__setattr__(self, "eta0", _DEFAULT_ETA0[self.loss])
        if self.epochs_max < 1 or self.patience < 1:
            raise ValueError("epochs_max and patience must be >= 1")
        if self.l2 < 0 or self.tol < 0 or not self.eta0 > 0:
            raise ValueError("l2 and tol must be >= 0 and eta0 > 0")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return {"loss": self.loss.value, "l2": self.l2, "epochs_max": self.epochs_max,
                "eta0": self.eta0, "tol": self.tol, "patience": self.patience,
                "seed": self.seed, "average": self.average}


def objective(kind, X, y, w, b, l2: float = 0.0) -> float:
    """Mean loss over the rows plus ``l2/2 * |w|^2`` (bias unpenalised)."""
    code = LossKind.parse(kind).code
    z = np.asarray(y, dtype=float) * (np.asarray(X, dtype=float) @ np.asarray(w, dtype=float) + b)
    return float(np.mean([_loss(code, float(v)) for v in z]) + 0.5 * l2 * float(np.dot(w, w)))


def train(data: Dataset, cfg: TrainConfig) -> LinearClassifier:
    """Plain per-sample SGD from zero weights.

    Step size ``eta0 / (1 + eta0 * l2 * t)`` with ``t`` the global update count.
    Stops after ``epochs_max`` epochs, or once the epoch-average regularised loss
    has failed to beat its best value by ``tol`` for ``patience`` epochs.
    """
    X = np.ascontiguousarray(data.features, dtype=np.float64)
    y = np.ascontiguousarray(data.labels, dtype=np.float64)
    n, d = X.shape
    rng = make_rng(cfg.seed, "sgd")
    w = np.zeros(d)
    bias = np.zeros(1)
    w_avg = np.zeros(d)
    b_avg = np.zeros(1)
    n_avg = np.zeros(1)
    t = 0.0
    best = math.inf
    stale = 0
    for _ in range(cfg.epochs_max):
        order = rng.permutation(n)
        total, t = _epoch(X, y, order, w, bias, cfg.loss.code, cfg.l2, cfg.eta0, t,
                          cfg.average, w_avg, b_avg, n_avg)
        if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > DIVERGENCE_LIMIT or not math.isfinite(bias[0]):
            raise DivergenceError("SGD diverged: |w|_inf exceeded 1e6")
        avg = total / n
        if avg > best - cfg.tol:
            stale += 1
        else:
            stale = 0
        best = min(best, avg)
        if stale >= cfg.patience:
            break
    if cfg.average:
        return LinearClassifier(w_avg.copy(), float(b_avg[0]))
    return LinearClassifier(w.copy(), float(bias[0]))


def classifier_to_json(clf: LinearClassifier, cfg: TrainConfig) -> str:
    return json.dumps({"w": [float(v) for v in clf.w], "b": float(clf.b),
                       "loss": cfg.loss.value, "seed": cfg.seed})
