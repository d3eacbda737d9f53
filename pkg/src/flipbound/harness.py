"""Poisoning experiments: fraction grids over loss pairs, histograms, summaries."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, TestTarget
from .parallel import parallel_map
from .seeds import derive_seed, make_rng
from .trainer import DivergenceError, LossKind, TrainConfig, train
from .upper import DEFAULT_TRIALS, upper_bound

log = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_FRACTIONS",
    "PoisonSpec",
    "EvalRow",
    "GridResult",
    "round_half_up",
    "poison",
    "evaluate_grid",
    "histogram",
    "summarize",
]

DEFAULT_FRACTIONS = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)
ALL_LOSSES = (LossKind.HINGE, LossKind.LOG, LossKind.MODIFIED_HUBER)


@dataclass(frozen=True)
class PoisonSpec:
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    seed: int = 0
    attack_loss: LossKind = LossKind.HINGE
    victim_loss: LossKind = LossKind.HINGE

    def __post_init__(self):
        fr = tuple(float(f) for f in self.fractions)
        if not fr or any(f < 0 for f in fr) or list(fr) != sorted(fr):
            raise ValueError("fractions must be nonnegative and sorted ascending")
        object.__setattr__(self, "fractions", fr)
        object.__setattr__(self, "attack_loss", LossKind.parse(self.attack_loss))
        object.__setattr__(self, "victim_loss", LossKind.parse(self.victim_loss))


@dataclass
class EvalRow:
    fraction: float
    rho: float
    accuracy: float
    n_points: int


@dataclass
class GridResult:
    attack_loss: LossKind
    victim_loss: LossKind
    rows: list[EvalRow]
    warnings: list[str] = field(default_factory=list)

    def rho(self, fraction: float) -> float:
        return next(r.rho for r in self.rows if r.fraction == fraction)

    def accuracy(self, fraction: float) -> float:
        return next(r.accuracy for r in self.rows if r.fraction == fraction)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def poison(data: Dataset, flip_set, extra: int, seed: int) -> Dataset:
    """Negate labels at ``flip_set`` and at ``extra`` further random indices."""
    flip = sorted(set(int(i) for i in flip_set))
    if any(not 0 <= i < data.m for i in flip):
        raise ValueError("flip_set index out of range")
    pool = np.setdiff1d(np.arange(data.m), flip)
    if extra < 0 or extra > pool.size:
        raise ValueError(f"extra={extra} exceeds the {pool.size} points outside flip_set")
    chosen = make_rng(seed, "poison-extra").choice(pool, size=extra, replace=False) if extra else []
    return data.flipped(flip + [int(i) for i in chosen])


def _poison_for_fraction(data, flip_set, r_hat, f, seed):
    n = round_half_up(f * r_hat)
    if n <= len(flip_set):
        rng = make_rng(seed, "poison-subset")
        sub = rng.choice(np.asarray(flip_set, dtype=np.int64), size=n, replace=False) if n else []
        return poison(data, sub, 0, seed)
    extra = min(n - len(flip_set), data.m - len(flip_set))
    return poison(data, flip_set, extra, seed)


def _attack_job(args):
    train_set, target, attack, n_trials, k_prime, seed, cfg_kw = args
    cfg = TrainConfig(loss=attack, seed=seed, **cfg_kw)
    return upper_bound(train_set, target, cfg, n_trials, k_prime)


def _victim_job(args):
    train_set, test, t_row, target, flip_set, r_hat, fractions, victim, pseeds, vseeds, cfg_kw = args
    others = np.delete(np.arange(test.m), t_row)
    out = []
    for f, ps, vs in zip(fractions, pseeds, vseeds):
        poisoned = _poison_for_fraction(train_set, flip_set, r_hat, f, ps)
        try:
            clf = train(poisoned, TrainConfig(loss=victim, seed=vs, **cfg_kw))
        except DivergenceError:
            out.append((0.0, float("nan")))
            continue
        hit = float(target.y_t * (clf.w @ target.x_t + clf.b) > 0)
        if others.size:
            pred = clf.decision(test.features[others])
            acc = float(np.mean(test.labels[others] * pred > 0))
        else:
            acc = float("nan")
        out.append((hit, acc))
    return out


def evaluate_grid(train_set: Dataset, test: Dataset, target_rows=None,
                  fractions=DEFAULT_FRACTIONS, seed: int = 0, losses=ALL_LOSSES,
                  n_trials: int = DEFAULT_TRIALS, k_prime: int | None = None,
                  train_kwargs: dict | None = None, threads: int = 1) -> list[GridResult]:
    """Fraction grid for every (attack loss, victim loss) pair.

    Each row of ``test`` listed in ``target_rows`` (default: all) becomes a
    target whose desired label is the opposite of its true one. Accuracy is
    measured on the remaining test rows. Targets whose upper bound is not
    certified are left out of the averages.
    """
    losses = tuple(LossKind.parse(l) for l in losses)
    PoisonSpec(tuple(fractions), seed)  # validation
    fractions = tuple(float(f) for f in fractions)
    cfg_kw = dict(train_kwargs or {})
    rows = list(range(test.m)) if target_rows is None else [int(r) for r in target_rows]
    targets = [TestTarget(test.features[r], -int(test.labels[r])) for r in rows]

    attack = {}
    for a in losses:
        jobs = [(train_set, t, a, n_trials, k_prime, derive_seed(seed, "attack", a.value, r), cfg_kw)
                for r, t in zip(rows, targets)]
        attack[a] = parallel_map(_attack_job, jobs, threads)

    grids = []
    for a, v in itertools.product(losses, losses):
        jobs = []
        for r, t, rep in zip(rows, targets, attack[a]):
            if not rep.certified:
                continue
            pseeds = [derive_seed(seed, "poison", a.value, r, i) for i in range(len(fractions))]
            vseeds = [derive_seed(seed, "victim", a.value, v.value, r, i) for i in range(len(fractions))]
            jobs.append((train_set, test, r, t, rep.flip_set, rep.upper, fractions, v, pseeds, vseeds, cfg_kw))
        results = parallel_map(_victim_job, jobs, threads)
        eval_rows = []
        for i, f in enumerate(fractions):
            hits = [res[i][0] for res in results]
            accs = [res[i][1] for res in results if not math.isnan(res[i][1])]
            eval_rows.append(EvalRow(f, float(np.mean(hits)) if hits else float("nan"),
                                     float(np.mean(accs)) if accs else float("nan"), len(hits)))
        grid = GridResult(a, v, eval_rows)
        if 0.0 in fractions and 1.0 in fractions and grid.rho(1.0) < grid.rho(0.0):
            msg = f"rho(1) < rho(0) for attack={a.value}, victim={v.value}"
            log.warning(msg)
            grid.warnings.append(msg)
        grids.append(grid)
    return grids


def histogram(values, width: float | None = 1.0, edges=None) -> list[tuple[float, float, int]]:
    """Counts per bin as ``(lo, hi, count)``.

    Fixed-width bins are half-open ``[lo, lo + width)`` and start at the
    multiple of ``width`` at or below the minimum. With explicit ``edges``
    the last bin is closed, and values outside the edges are an error.
    """
    vals = np.asarray(list(values), dtype=float)
    if vals.size == 0:
        raise ValueError("histogram of an empty sample")
    if edges is not None:
        e = np.asarray(edges, dtype=float)
        if e.size < 2 or np.any(np.diff(e) <= 0):
            raise ValueError("edges must be strictly increasing with at least two entries")
        if vals.min() < e[0] or vals.max() > e[-1]:
            raise ValueError("values fall outside the histogram edges")
        idx = np.searchsorted(e, vals, side="right") - 1
        idx[idx == e.size - 1] = e.size - 2
        counts = np.bincount(idx, minlength=e.size - 1)
        return [(float(e[i]), float(e[i + 1]), int(counts[i])) for i in range(e.size - 1)]
    if width is None or width <= 0:
        raise ValueError("width must be positive")
    start = math.floor(vals.min() / width) * width
    idx = np.floor((vals - start) / width).astype(np.int64)
    counts = np.bincount(idx)
    return [(start + i * width, start + (i + 1) * width, int(c)) for i, c in enumerate(counts)]


def summarize(values) -> dict:
    """Mean, median and a few percentiles (linear interpolation)."""
    vals = np.asarray(list(values), dtype=float)
    if vals.size == 0:
        raise ValueError("summary of an empty sample")
    q = np.percentile(vals, [25, 50, 75, 90])
    return {"n": int(vals.size), "mean": float(vals.mean()), "min": float(vals.min()),
            "p25": float(q[0]), "median": float(q[1]), "p75": float(q[2]), "p90": float(q[3]),
            "max": float(vals.max()), "nonzero_fraction": float(np.mean(vals > 0))}
