"""Exact label-flip robustness.

The big-M mixed-integer encoding, a best-first branch-and-bound over its LP
relaxations, and a subset-enumeration oracle.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, TestTarget
from .linsep import (
    DEFAULT_CAP,
    DEFAULT_EPS,
    DEFAULT_TOL,
    LinearClassifier,
    LpProblem,
    LpStatus,
    Tolerances,
    check_consistency,
    feasible_labeling,
    solve_lp,
)

__all__ = [
    "MilpInstance",
    "ExactStatus",
    "ExactResult",
    "TargetUnreachableError",
    "BruteForceLimitError",
    "encode",
    "solve_bnb",
    "brute_force_robustness",
    "verify_certificate",
    "dump_instance",
    "DEFAULT_BIG_M",
    "DEFAULT_NODE_BUDGET",
    "BRUTE_FORCE_LIMIT",
]

DEFAULT_BIG_M = 1000.0
DEFAULT_NODE_BUDGET = 1_000_000
BRUTE_FORCE_LIMIT = 20
INTEGRALITY_TOL = 1e-6


class TargetUnreachableError(RuntimeError):
    """No classifier within the weight cap can give the target its label."""


class BruteForceLimitError(ValueError):
    pass


class ExactStatus(str, enum.Enum):
    PROVEN = "Proven"
    BUDGET_EXHAUSTED = "BudgetExhausted"


@dataclass(frozen=True, eq=False)
class MilpInstance:
    """Variables are ordered ``w_1..w_d, b, delta_1..delta_m``.

    Rows: the target row, then ``m`` "keep" rows, then ``m`` "flip" rows.
    """

    base: LpProblem
    binary_indices: tuple[int, ...]
    bigM: float
    eps: float
    data: Dataset
    target: TestTarget
    bias: bool = True

    @property
    def m(self) -> int:
        return len(self.binary_indices)

    @property
    def d(self) -> int:
        return self.data.d


@dataclass
class ExactResult:
    robustness: int
    flip_set: tuple[int, ...]
    witness: LinearClassifier | None
    node_count: int
    status: ExactStatus
    best_bound: int | None = None

    def to_dict(self) -> dict:
        return {
            "robustness": self.robustness,
            "flip_set": list(self.flip_set),
            "witness": self.witness.to_dict() if self.witness is not None else None,
            "node_count": self.node_count,
            "status": self.status.value,
            "best_bound": self.best_bound,
        }


def encode(data: Dataset, target: TestTarget, bigM: float = DEFAULT_BIG_M,
           eps: float = DEFAULT_EPS, bias: bool = True) -> MilpInstance:
    """Big-M encoding; ``bias=False`` pins ``b`` to zero."""
    if not (bigM > 0 and eps > 0 and bigM > eps):
        raise ValueError("need bigM > eps > 0")
    target.check_dim(data.d)
    X = data.features
    y = data.labels.astype(float)
    m, d = X.shape
    n = d + 1 + m
    c = np.zeros(n)
    c[d + 1:] = 1.0

    yt = float(target.y_t)
    target_row = np.zeros(n)
    target_row[:d] = yt * target.x_t
    target_row[d] = yt

    lin = np.hstack([y[:, None] * X, y[:, None]])
    eye = np.eye(m) * bigM
    keep_rows = np.hstack([lin, eye])
    flip_rows = np.hstack([lin, eye])

    A = np.vstack([target_row, keep_rows, flip_rows])
    senses = (">=",) + (">=",) * m + ("<=",) * m
    # y(w.x+b) - M(1 - delta) <= -eps  <=>  y(w.x+b) + M delta <= M - eps
    rhs = np.concatenate([[eps], np.full(m, eps), np.full(m, bigM - eps)])
    lo = np.concatenate([np.full(d + 1, -bigM), np.zeros(m)])
    hi = np.concatenate([np.full(d + 1, bigM), np.ones(m)])
    if not bias:
        lo[d] = hi[d] = 0.0
    base = LpProblem(c, A, senses, rhs, lo, hi)
    return MilpInstance(base, tuple(range(d + 1, n)), float(bigM), float(eps), data, target, bool(bias))


def dump_instance(inst: MilpInstance) -> str:
    """Plain-text rendering in the spirit of the LP file format."""
    names = [f"w{j + 1}" for j in range(inst.d)] + ["b"] + [f"delta{i + 1}" for i in range(inst.m)]

    def expr(row):
        terms = []
        for coef, name in zip(row, names):
            if coef == 0:
                continue
            sign = "-" if coef < 0 else "+"
            terms.append(f"{sign} {abs(coef):.17g} {name}")
        s = " ".join(terms) or "0"
        return s[2:] if s.startswith("+ ") else s

    p = inst.base
    lines = ["Minimize", f" obj: {expr(p.objective)}", "Subject To"]
    for k, (row, sense, rhs) in enumerate(zip(p.A, p.senses, p.rhs)):
        lines.append(f" c{k + 1}: {expr(row)} {sense} {rhs:.17g}")
    lines.append("Bounds")
    for name, lo, hi in zip(names, p.lower, p.upper):
        lines.append(f" {lo:.17g} <= {name} <= {hi:.17g}")
    lines.append("Binaries")
    lines.append(" " + " ".join(names[i] for i in inst.binary_indices))
    lines.append("End")
    return "\n".join(lines) + "\n"


def verify_certificate(data: Dataset, target: TestTarget, flip_set, witness: LinearClassifier,
                       eps: float = DEFAULT_EPS, cap: float = DEFAULT_CAP,
                       tol: Tolerances = DEFAULT_TOL, bias: bool = True) -> bool:
    """Polynomial-time check of a claimed flip set.

    The witness must be sign-consistent with the flipped labels and the target
    (O(m d)), and one feasibility LP must agree.
    """
    flipped = data.flipped(flip_set)
    mis, ok = check_consistency(witness, (flipped.features, flipped.labels), target)
    if mis or not ok or (not bias and witness.b != 0):
        return False
    return feasible_labeling((flipped.features, flipped.labels), target, eps, cap, tol, bias).feasible


def _check_flip_set(data, target, flips, eps, cap, tol, bias=True):
    flipped = data.flipped(flips)
    return feasible_labeling((flipped.features, flipped.labels), target, eps, cap, tol, bias)


def solve_bnb(inst: MilpInstance, node_budget: int = DEFAULT_NODE_BUDGET,
              incumbent_hint=None, tol: Tolerances = DEFAULT_TOL) -> ExactResult:
    """Minimum number of label flips for ``inst`` by branch-and-bound.

    Nodes are explored best-first on ``ceil(LP - tau_o)``, branching on the most
    fractional flip indicator. Integer points are only accepted after a
    margin-feasibility LP confirms the induced labelling.

    ``incumbent_hint`` is either a certified upper bound (int) or a candidate
    flip set (sequence of indices). The constant classifier ``sign(y_t)`` gives
    an always-valid starting incumbent: flip every point labelled ``-y_t``.
    Without a bias there is no such classifier and the search starts with no
    incumbent.

    A node whose fixed indicators already describe a labelling that cannot be
    strictly separated together with the target is pruned without its LP.
    """
    if node_budget < 1:
        raise ValueError("node_budget must be >= 1")
    data, target = inst.data, inst.target
    d, m = inst.d, inst.m
    eps, cap = inst.eps, inst.bigM
    base = inst.base
    delta = np.asarray(inst.binary_indices)

    def _install(flips, witness=None):
        nonlocal best_flips, best_witness
        flips = tuple(sorted(int(i) for i in flips))
        if witness is None:
            fw = _check_flip_set(data, target, flips, eps, cap, tol, inst.bias)
            if not fw.feasible:
                return False
            witness = fw.classifier
        best_flips, best_witness = flips, witness
        return True

    best_flips: tuple[int, ...] | None = None
    best_witness: LinearClassifier | None = None
    trivial = np.flatnonzero(data.labels != target.y_t)
    if not _install(trivial) and inst.bias:
        raise TargetUnreachableError("target point cannot be classified as desired within the cap")
    cutoff = m + 1 if best_flips is None else len(best_flips)  # bounds >= cutoff cannot improve

    if incumbent_hint is not None:
        if isinstance(incumbent_hint, (int, np.integer)):
            cutoff = min(cutoff, int(incumbent_hint) + 1)
        else:
            hint = tuple(sorted(set(int(i) for i in incumbent_hint)))
            if len(hint) < cutoff:
                saved = best_flips, best_witness
                if _install(hint):
                    cutoff = min(cutoff, len(best_flips))
                else:
                    best_flips, best_witness = saved

    def incumbent_value():
        return m + 1 if best_flips is None else len(best_flips)

    def _try_witness(clf):
        if not target.y_t * (clf.w @ target.x_t + clf.b) > 0:
            return
        margins = data.labels * clf.decision(data.features)
        if np.all(margins != 0):
            mis = np.flatnonzero(margins < 0)
            if len(mis) < incumbent_value():
                _install(mis)

    root_lo = base.lower.copy()
    root_hi = base.upper.copy()
    counter = itertools.count()
    heap = [(0, 0, next(counter), root_lo, root_hi)]
    nodes = 0

    while heap:
        if nodes >= node_budget:
            break
        bound, neg_depth, _, lo, hi = heapq.heappop(heap)
        if bound >= min(cutoff, incumbent_value()):
            continue
        nodes += 1
        fixed = np.flatnonzero(lo[delta] == hi[delta])
        if fixed.size:
            # the fixed part must itself be strictly separable
            ys = data.labels[fixed] * np.where(lo[delta][fixed] > 0.5, -1, 1)
            fw = feasible_labeling((data.features[fixed], ys), target, eps, cap, tol, inst.bias)
            if not fw.feasible:
                continue
            _try_witness(fw.classifier)
        sol = solve_lp(base.with_bounds(lo, hi), tol)
        if sol.status != LpStatus.OPTIMAL:
            if nodes == 1:
                raise TargetUnreachableError("root relaxation infeasible: target unreachable within the cap")
            continue
        node_bound = max(bound, math.ceil(sol.objective_value - tol.objective))
        if node_bound >= min(cutoff, incumbent_value()):
            continue

        x = sol.assignment
        dv = x[delta]

        # rounding: the relaxation's own (w, b) may already certify a flip set
        _try_witness(LinearClassifier(x[:d], x[d]))

        free = lo[delta] != hi[delta]
        integral = np.all(np.minimum(np.abs(dv), np.abs(1 - dv)) <= INTEGRALITY_TOL)
        if integral:
            flips = np.flatnonzero(dv > 0.5)
            if len(flips) >= incumbent_value() or _install(flips):
                continue
            # integral only up to the eps margin; keep splitting the free indicators
            if not free.any():
                continue
            j = int(np.flatnonzero(free)[0])
        else:
            frac = np.where(free, np.abs(dv - 0.5), np.inf)
            j = int(np.argmin(frac))
            if not np.isfinite(frac[j]):
                continue
        var = int(delta[j])
        for val in (0.0, 1.0):
            clo, chi = lo.copy(), hi.copy()
            clo[var] = chi[var] = val
            child_bound = max(node_bound, int(np.sum(clo[delta])))
            heapq.heappush(heap, (child_bound, neg_depth - 1, next(counter), clo, chi))

    limit = min(cutoff, incumbent_value())
    open_bounds = [h[0] for h in heap if h[0] < limit]
    if best_flips is None:
        if not open_bounds:
            raise TargetUnreachableError("no flip set makes the target reachable within the cap")
        return ExactResult(m, (), None, nodes, ExactStatus.BUDGET_EXHAUSTED, int(min(open_bounds)))
    if not open_bounds:
        return ExactResult(incumbent_value(), best_flips, best_witness, nodes, ExactStatus.PROVEN,
                           incumbent_value())
    return ExactResult(incumbent_value(), best_flips, best_witness, nodes,
                       ExactStatus.BUDGET_EXHAUSTED, int(min(open_bounds)))


def brute_force_robustness(data: Dataset, target: TestTarget, eps: float = DEFAULT_EPS,
                           cap: float = DEFAULT_CAP, tol: Tolerances = DEFAULT_TOL,
                           bias: bool = True) -> ExactResult:
    """Enumerate flip sets by increasing size, lexicographic within a size."""
    target.check_dim(data.d)
    m = data.m
    if m > BRUTE_FORCE_LIMIT:
        raise BruteForceLimitError(f"brute force limited to m <= {BRUTE_FORCE_LIMIT}, got {m}")
    checked = 0
    for size in range(m + 1):
        for flips in itertools.combinations(range(m), size):
            checked += 1
            fw = _check_flip_set(data, target, flips, eps, cap, tol, bias)
            if fw.feasible:
                return ExactResult(size, flips, fw.classifier, checked, ExactStatus.PROVEN, size)
    raise TargetUnreachableError("no flip set makes the target reachable within the cap")
