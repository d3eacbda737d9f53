"""Lower and upper robustness bounds for one target, end to end."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .dataset import Dataset, TestTarget
from .exact import DEFAULT_BIG_M, DEFAULT_NODE_BUDGET
from .linsep import DEFAULT_EPS
from .lower import LowerBoundReport, MilpParams, default_k, lower_bound, partition
from .seeds import derive_seed
from .trainer import LossKind, TrainConfig
from .upper import DEFAULT_TRIALS, UpperBoundReport, upper_bound

__all__ = ["BoundsParams", "IntervalResult", "robustness_interval"]


@dataclass(frozen=True)
class BoundsParams:
    bigM: float = DEFAULT_BIG_M
    eps: float = DEFAULT_EPS
    k: int | None = None
    k_prime: int | None = None
    loss: LossKind = LossKind.HINGE
    trials: int = DEFAULT_TRIALS
    node_budget: int = DEFAULT_NODE_BUDGET
    seed: int = 0
    l2: float = 1e-4
    epochs_max: int = 1000
    eta0: float | None = None
    tol: float = 1e-3
    patience: int = 5
    average: bool = False

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind.parse(self.loss))
        self.train_config(0)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.k_prime is not None and self.k_prime < 1:
            raise ValueError("k_prime must be >= 1")
        MilpParams(self.bigM, self.eps, self.node_budget)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(self.loss, self.l2, self.epochs_max, self.eta0, self.tol,
                           self.patience, seed, self.average)

    @property
    def milp(self) -> MilpParams:
        return MilpParams(self.bigM, self.eps, self.node_budget)

    def resolve_k(self, data: Dataset) -> int:
        k = self.k if self.k is not None else default_k(data.m, data.d)
        return min(k, data.m)

    def to_dict(self, data: Dataset | None = None) -> dict:
        d = {
            "M": self.bigM,
            "eps": self.eps,
            "k": self.k if self.k is not None else "auto",
            "k_prime": self.k_prime if self.k_prime is not None else "m+1",
            "loss": self.loss.value,
            "trials": self.trials,
            "node_budget": self.node_budget,
            "seed": self.seed,
            "train": {k: v for k, v in self.train_config(0).to_dict().items() if k not in ("loss", "seed")},
        }
        if data is not None:
            d["k_resolved"] = self.resolve_k(data)
            d["k_prime_resolved"] = self.k_prime if self.k_prime is not None else data.m + 1
        return d


@dataclass
class IntervalResult:
    index: int
    lower: LowerBoundReport
    upper: UpperBoundReport
    millis: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        """Deterministic part only; timings live in ``millis``."""
        return {
            "index": self.index,
            "lower": self.lower.lower,
            "upper": self.upper.upper,
            "lower_complete": self.lower.complete,
            "upper_certified": self.upper.certified,
            "upper_flip_set": list(self.upper.flip_set),
            "lower_flip_sets": [list(b.flip_set) for b in self.lower.per_block],
            "k": self.lower.k,
            "partition_seed": self.lower.seed,
            "blocks": [b.to_dict(timing=False) for b in self.lower.per_block],
            "witness": self.upper.witness.to_dict() if self.upper.witness is not None else None,
            "trials": [t.to_dict() for t in self.upper.trials],
        }


def robustness_interval(data: Dataset, target: TestTarget, params: BoundsParams = BoundsParams(),
                        index: int = 0, threads: int = 1) -> IntervalResult:
    """Partition lower bound and augmentation upper bound for one target.

    The upper bound runs first so its flip set, restricted to each block, can
    seed that block's branch-and-bound incumbent.
    """
    target.check_dim(data.d)
    t0 = time.perf_counter()
    cfg = params.train_config(derive_seed(params.seed, "upper", index))
    up = upper_bound(data, target, cfg, params.trials, params.k_prime)
    t1 = time.perf_counter()
    plan = partition(data, params.resolve_k(data), derive_seed(params.seed, "partition", index))
    hint = up.flip_set if up.certified else None
    lo = lower_bound(data, target, plan, params.milp, threads=threads, upper_flip_set=hint)
    t2 = time.perf_counter()
    return IntervalResult(index, lo, up, {"upper": (t1 - t0) * 1e3, "lower": (t2 - t1) * 1e3,
                                          "blocks": [b.millis for b in lo.per_block]})
