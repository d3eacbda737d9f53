"""KNN label sanitization and before/after robustness comparison."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, TestTarget
from .lower import MilpParams, default_k, lower_bound, partition
from .seeds import derive_seed
from .trainer import TrainConfig
from .upper import upper_bound

__all__ = ["SanitizeConfig", "SanitizeResult", "sanitize", "compare_robustness", "ComparisonRow"]


@dataclass(frozen=True)
class SanitizeConfig:
    k_neighbors: int = 15

    def validate(self, m: int) -> None:
        if not 1 <= self.k_neighbors <= m - 1:
            raise ValueError(f"k_neighbors must lie in [1, m-1] = [1, {m - 1}], got {self.k_neighbors}")


@dataclass
class SanitizeResult:
    data: Dataset
    changed: tuple[int, ...]
    fixed_point: bool


def _relabel(X, y, k):
    m = X.shape[0]
    new = y.copy()
    for i in range(m):
        dist = np.sum((X - X[i]) ** 2, axis=1)
        dist[i] = np.inf
        nbrs = np.argsort(dist, kind="stable")[:k]
        vote = int(np.sum(y[nbrs]))
        if vote != 0:
            new[i] = 1 if vote > 0 else -1
    return new


def sanitize(data: Dataset, cfg: SanitizeConfig = SanitizeConfig()) -> SanitizeResult:
    """One synchronous majority-vote pass over the k nearest other points.

    Every vote reads the original labels. Equal distances go to the lower
    index and tied votes keep the current label. ``fixed_point`` says whether
    a second pass would change anything.
    """
    cfg.validate(data.m)
    X = data.features
    y = data.labels.astype(np.int64)
    new = _relabel(X, y, cfg.k_neighbors)
    changed = tuple(int(i) for i in np.flatnonzero(new != y))
    again = _relabel(X, new, cfg.k_neighbors)
    return SanitizeResult(data.with_labels(new), changed, bool(np.array_equal(again, new)))


@dataclass
class ComparisonRow:
    target: int
    upper_before: int
    upper_after: int
    lower_before: int
    lower_after: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def compare_robustness(data: Dataset, targets: list[TestTarget], cfg: SanitizeConfig = SanitizeConfig(),
                       train_cfg: TrainConfig = TrainConfig(), n_trials: int = 10,
                       milp: MilpParams = MilpParams(), k: int | None = None,
                       seed: int = 0) -> tuple[list[ComparisonRow], dict]:
    """Bounds on the original and the sanitized data for each target, plus column means."""
    clean = sanitize(data, cfg).data
    rows = []
    for t_idx, target in enumerate(targets):
        vals = []
        for tag, d in (("before", data), ("after", clean)):
            tc = train_cfg.with_seed(derive_seed(seed, "upper", t_idx))
            up = upper_bound(d, target, tc, n_trials)
            kk = k if k is not None else default_k(d.m, d.d)
            plan = partition(d, kk, derive_seed(seed, "partition", t_idx))
            lo = lower_bound(d, target, plan, milp)
            vals.append((up.upper, lo.lower))
        rows.append(ComparisonRow(t_idx, vals[0][0], vals[1][0], vals[0][1], vals[1][1]))
    keys = ("upper_before", "upper_after", "lower_before", "lower_after")
    avg = {k_: float(np.mean([getattr(r, k_) for r in rows])) if rows else 0.0 for k_ in keys}
    return rows, avg
