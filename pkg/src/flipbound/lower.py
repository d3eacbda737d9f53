"""Partition lower bound: exact robustness summed over disjoint blocks."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from .dataset import Dataset, TestTarget
from .exact import (
    DEFAULT_BIG_M,
    DEFAULT_NODE_BUDGET,
    ExactStatus,
    TargetUnreachableError,
    encode,
    solve_bnb,
)
from .linsep import DEFAULT_EPS, NumericalInstabilityError
from .parallel import parallel_map
from .seeds import make_rng

__all__ = ["PartitionPlan", "BlockResult", "LowerBoundReport", "MilpParams",
           "partition", "lower_bound", "default_k", "K_PRESETS"]

K_PRESETS = (20, 100, 250, 1000)


@dataclass(frozen=True)
class MilpParams:
    bigM: float = DEFAULT_BIG_M
    eps: float = DEFAULT_EPS
    node_budget: int = DEFAULT_NODE_BUDGET

    def __post_init__(self):
        if not (self.bigM > self.eps > 0):
            raise ValueError("need M > eps > 0")
        if self.node_budget < 1:
            raise ValueError("node_budget must be >= 1")


@dataclass(frozen=True)
class PartitionPlan:
    k: int
    seed: int
    block_indices: tuple[tuple[int, ...], ...]


@dataclass
class BlockResult:
    id: int
    size: int
    r: int
    status: str
    millis: float
    flip_set: tuple[int, ...] = ()
    error: str | None = None

    def to_dict(self, timing: bool = True) -> dict:
        d = {"id": self.id, "size": self.size, "r": self.r, "status": self.status,
             "flip_set": list(self.flip_set)}
        if timing:
            d["millis"] = round(self.millis, 3)
        if self.error:
            d["error"] = self.error
        return d


@dataclass
class LowerBoundReport:
    lower: int
    k: int
    seed: int
    per_block: list[BlockResult] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return all(b.status == ExactStatus.PROVEN.value for b in self.per_block)

    def to_dict(self, timing: bool = True) -> dict:
        return {"lower": self.lower, "k": self.k, "seed": self.seed,
                "blocks": [b.to_dict(timing) for b in self.per_block]}


def default_k(m: int, d: int) -> int:
    """Blocks of about ``2(d+1)`` points, never smaller when avoidable."""
    per = 2 * (d + 1)
    k = max(1, math.ceil(m / per))
    while k > 1 and m // k < per:
        k -= 1
    return k


def partition(data: Dataset | int, k: int, seed: int) -> PartitionPlan:
    """Random permutation chopped into ``k`` blocks; the last takes the remainder."""
    m = data if isinstance(data, int) else data.m
    if not 1 <= k <= m:
        raise ValueError(f"k must satisfy 1 <= k <= m (k={k}, m={m})")
    perm = make_rng(seed, "partition").permutation(m)
    size = m // k
    blocks = [tuple(sorted(int(i) for i in perm[j * size:(j + 1) * size])) for j in range(k - 1)]
    blocks.append(tuple(sorted(int(i) for i in perm[(k - 1) * size:])))
    return PartitionPlan(k, seed, tuple(blocks))


def _solve_block(args):
    j, idx, data, target, params, hint = args
    t0 = time.perf_counter()
    block = data.subset(idx)
    try:
        res = solve_bnb(encode(block, target, params.bigM, params.eps), params.node_budget, hint)
    except (TargetUnreachableError, NumericalInstabilityError) as exc:
        return BlockResult(j, len(idx), 0, "Error", (time.perf_counter() - t0) * 1e3, (),
                           f"{type(exc).__name__}: {exc}")
    flips = tuple(idx[i] for i in res.flip_set)
    return BlockResult(j, len(idx), res.robustness, res.status.value,
                       (time.perf_counter() - t0) * 1e3, flips)


def lower_bound(data: Dataset, target: TestTarget, plan: PartitionPlan,
                params: MilpParams = MilpParams(), threads: int = 1,
                upper_flip_set=None) -> LowerBoundReport:
    """Sum of per-block exact robustness; unproven blocks contribute zero.

    ``upper_flip_set`` is an optional certified flip set for the whole
    dataset; its restriction to a block is a valid starting incumbent there.
    """
    target.check_dim(data.d)
    covered = sorted(i for b in plan.block_indices for i in b)
    if covered != list(range(data.m)):
        raise ValueError("partition plan does not cover the dataset exactly once")
    hints = [None] * plan.k
    if upper_flip_set is not None:
        flips = set(int(i) for i in upper_flip_set)
        hints = [[p for p, i in enumerate(blk) if i in flips] for blk in plan.block_indices]
    jobs = [(j, blk, data, target, params, h)
            for (j, blk), h in zip(enumerate(plan.block_indices), hints)]
    blocks = parallel_map(_solve_block, jobs, threads)
    lower = sum(b.r for b in blocks if b.status == ExactStatus.PROVEN.value)
    return LowerBoundReport(int(lower), plan.k, plan.seed, blocks)
