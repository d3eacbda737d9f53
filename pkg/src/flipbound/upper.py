"""Augmentation upper bound.

Train on the clean data plus ``k'`` copies of the target, keep classifiers
that put the target on the desired side, and count what they get wrong on
the original points.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, TestTarget
from .linsep import LinearClassifier, check_consistency
from .seeds import derive_seed
from .trainer import DivergenceError, TrainConfig, train

log = logging.getLogger(__name__)

__all__ = ["Trial", "UpperBoundReport", "augment", "upper_bound", "certify_upper", "DEFAULT_TRIALS"]

DEFAULT_TRIALS = 10


@dataclass
class Trial:
    seed: int
    loss: str
    target_ok: bool
    misclassified: int | None
    error: str | None = None

    def to_dict(self) -> dict:
        d = {"seed": self.seed, "loss": self.loss, "target_ok": self.target_ok,
             "misclassified": self.misclassified}
        if self.error:
            d["error"] = self.error
        return d


@dataclass
class UpperBoundReport:
    upper: int
    certified: bool
    flip_set: tuple[int, ...]
    witness: LinearClassifier | None
    trials: list[Trial] = field(default_factory=list)
    k_prime: int = 0

    def to_dict(self) -> dict:
        return {
            "upper": self.upper,
            "certified": self.certified,
            "flip_set": list(self.flip_set),
            "witness": self.witness.to_dict() if self.witness is not None else None,
            "k_prime": self.k_prime,
            "trials": [t.to_dict() for t in self.trials],
        }


def augment(data: Dataset, target: TestTarget, k_prime: int) -> Dataset:
    """Append ``k_prime`` copies of the target after the original rows."""
    if k_prime < 1:
        raise ValueError("k_prime must be >= 1")
    target.check_dim(data.d)
    X = np.vstack([data.features, np.tile(target.x_t, (k_prime, 1))])
    y = np.concatenate([data.labels, np.full(k_prime, target.y_t)])
    return Dataset(X, y, data.feature_names)


def upper_bound(data: Dataset, target: TestTarget, cfg: TrainConfig = TrainConfig(),
                n_trials: int = DEFAULT_TRIALS, k_prime: int | None = None) -> UpperBoundReport:
    """Best certified misclassification count over ``n_trials`` seeded trainings.

    Trial seeds are derived from ``cfg.seed``. All trials share one augmented
    set. Ties go to the lowest trial seed. If no trial classifies the target
    as desired, the report falls back to ``upper = m`` uncertified.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    k_prime = data.m + 1 if k_prime is None else int(k_prime)
    aug = augment(data, target, k_prime)
    points = (data.features, data.labels)
    trials = []
    best = None
    for i in range(n_trials):
        seed = derive_seed(cfg.seed, "trial", i)
        try:
            clf = train(aug, cfg.with_seed(seed))
        except DivergenceError as exc:
            trials.append(Trial(seed, cfg.loss.value, False, None, str(exc)))
            continue
        mis, ok = check_consistency(clf, points, target)
        trials.append(Trial(seed, cfg.loss.value, ok, len(mis)))
        if ok:
            key = (len(mis), seed)
            if best is None or key < best[0]:
                best = (key, clf, mis)
    if best is None:
        log.warning("no trial classified the target as desired; falling back to upper = m = %d", data.m)
        return UpperBoundReport(data.m, False, (), None, trials, k_prime)
    _, clf, mis = best
    return UpperBoundReport(len(mis), True, tuple(sorted(mis)), clf, trials, k_prime)


def certify_upper(report: UpperBoundReport, data: Dataset, target: TestTarget) -> bool:
    """Re-check the witness: target strictly on the desired side, mistakes == flip_set."""
    if report.witness is None:
        return False
    mis, ok = check_consistency(report.witness, (data.features, data.labels), target)
    return bool(ok) and mis == frozenset(report.flip_set) and report.upper == len(report.flip_set)
