"""Linear feasibility and LP machinery.

A dense two-phase simplex solver, the margin-feasibility test used to decide
whether a relabelled point set (plus the target point) can be realised by a
linear classifier, and the sign-consistency check used to certify witnesses.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "LpStatus",
    "Tolerances",
    "LpProblem",
    "LpSolution",
    "LinearClassifier",
    "FeasibilityWitness",
    "NumericalInstabilityError",
    "solve_lp",
    "feasible_labeling",
    "check_consistency",
    "DEFAULT_TOL",
    "DEFAULT_EPS",
    "DEFAULT_CAP",
]

DEFAULT_EPS = 1e-10
DEFAULT_CAP = 1000.0

BLAND_AFTER_DEGENERATE = 1000


class NumericalInstabilityError(RuntimeError):
    """Raised when the simplex fails to terminate within its pivot budget."""


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-7
    objective: float = 1e-6
    pivot: float = 1e-9


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class LpProblem:
    """``min c.x`` subject to ``A x (<=|>=|=) rhs`` and ``lower <= x <= upper``.

    Bounds may be infinite; rows are stored densely.
    """

    objective: np.ndarray
    A: np.ndarray
    senses: tuple[str, ...]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        n = c.size
        A = np.asarray(self.A, dtype=float).reshape(-1, n) if n else np.zeros((0, 0))
        rhs = np.asarray(self.rhs, dtype=float).ravel()
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "senses", tuple(self.senses))
        if n < 1:
            raise ValueError("LP needs at least one variable")
        if A.shape[0] != rhs.size or len(self.senses) != rhs.size:
            raise ValueError("constraint rows, senses and rhs disagree in length")
        if lo.size != n or hi.size != n:
            raise ValueError("bounds must have one entry per variable")
        if any(s not in ("<=", ">=", "=") for s in self.senses):
            raise ValueError(f"unknown relation in {self.senses}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(rhs))):
            raise ValueError("LP coefficients must be finite")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise ValueError("each variable needs lower <= upper")
        if np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise ValueError("bounds are inverted at infinity")
        if rhs.size == 0 and not (np.any(np.isfinite(lo)) or np.any(np.isfinite(hi))):
            raise ValueError("LP needs at least one constraint or finite bound")

    @property
    def n(self) -> int:
        return self.objective.size

    @classmethod
    def from_rows(cls, objective, rows, bounds) -> "LpProblem":
        """Build from ``[(row, relation, rhs), ...]`` and ``[(lo, hi), ...]``."""
        objective = np.asarray(objective, dtype=float)
        n = objective.size
        A = np.array([r for r, _, _ in rows], dtype=float).reshape(len(rows), n)
        senses = tuple(s for _, s, _ in rows)
        rhs = np.array([b for _, _, b in rows], dtype=float)
        lo = np.array([b[0] for b in bounds], dtype=float)
        hi = np.array([b[1] for b in bounds], dtype=float)
        return cls(objective, A, senses, rhs, lo, hi)

    def with_bounds(self, lower, upper) -> "LpProblem":
        return LpProblem(self.objective, self.A, self.senses, self.rhs, lower, upper)

    def max_violation(self, x: np.ndarray) -> float:
        """Largest constraint or bound violation at ``x``, rows scaled by their inf-norm."""
        viol = 0.0
        if self.rhs.size:
            scale = np.maximum(np.abs(self.A).max(axis=1), 1.0)
            act = (self.A @ x - self.rhs) / scale
            for s, a in zip(self.senses, act):
                if s == "<=":
                    viol = max(viol, a)
                elif s == ">=":
                    viol = max(viol, -a)
                else:
                    viol = max(viol, abs(a))
        viol = max(viol, float(np.max(self.lower - x, initial=0.0)))
        viol = max(viol, float(np.max(x - self.upper, initial=0.0)))
        return viol


@dataclass
class LpSolution:
    status: LpStatus
    objective_value: float
    assignment: np.ndarray
    iterations: int = 0


def _standardize(p: LpProblem):
    """Map x = offset + T y with y >= 0; return the pieces of the y-space LP."""
    n = p.n
    cols = []  # (original var, coefficient)
    offset = np.zeros(n)
    bound_rows = []  # (y column, upper limit)
    for j in range(n):
        lo, hi = p.lower[j], p.upper[j]
        if np.isfinite(lo) and lo == hi:
            offset[j] = lo
        elif np.isfinite(lo):
            offset[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                bound_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    T = np.zeros((n, len(cols)))
    for k, (j, s) in enumerate(cols):
        T[j, k] = s
    return T, offset, bound_rows


def _pivot(tab: np.ndarray, r: int, c: int) -> None:
    tab[r] /= tab[r, c]
    col = tab[:, c].copy()
    col[r] = 0.0
    tab -= np.outer(col, tab[r])


def _run_simplex(tab, basis, allowed, tol: Tolerances, budget, state):
    """Iterate on ``tab`` (last row = reduced costs, last column = rhs).

    Returns ``"optimal"`` or ``"unbounded"``; mutates ``tab`` and ``basis``.
    """
    nrows = tab.shape[0] - 1
    while True:
        d = tab[-1, :-1]
        cand = np.flatnonzero(allowed & (d < -tol.pivot))
        if cand.size == 0:
            return "optimal"
        if state["bland"]:
            j = int(cand[0])
        else:
            j = int(cand[np.argmin(d[cand])])
        colj = tab[:nrows, j]
        pos = np.flatnonzero(colj > tol.pivot)
        if pos.size == 0:
            return "unbounded"
        ratios = tab[pos, -1] / colj[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        if state["iters"] >= budget:
            raise NumericalInstabilityError(
                f"simplex exceeded {budget} pivots without converging"
            )
        if best <= tol.pivot:
            state["degenerate"] += 1
            if state["degenerate"] >= BLAND_AFTER_DEGENERATE:
                state["bland"] = True
        _pivot(tab, r, j)
        basis[r] = j
        state["iters"] += 1
        # keep rhs nonnegative against roundoff
        np.maximum(tab[:nrows, -1], 0.0, out=tab[:nrows, -1])


def solve_lp(p: LpProblem, tol: Tolerances = DEFAULT_TOL, max_iter: int | None = None) -> LpSolution:
    """Solve ``p`` with a dense two-phase simplex.

    Dantzig pricing is used until 1000 degenerate pivots have occurred, after
    which Bland's rule guarantees termination. The pivot cap defaults to
    ``50 * (n + number of constraints)``.
    """
    budget = max_iter if max_iter is not None else 50 * (p.n + p.rhs.size)
    T, offset, bound_rows = _standardize(p)
    ny = T.shape[1]

    # constraints in y-space, each row scaled to unit inf-norm
    A = p.A @ T if p.rhs.size else np.zeros((0, ny))
    b = p.rhs - (p.A @ offset if p.rhs.size else 0.0)
    senses = list(p.senses)
    rows_A = [A]
    rows_b = [b]
    if bound_rows:
        Bm = np.zeros((len(bound_rows), ny))
        for k, (col, _) in enumerate(bound_rows):
            Bm[k, col] = 1.0
        rows_A.append(Bm)
        rows_b.append(np.array([u for _, u in bound_rows]))
        senses += ["<="] * len(bound_rows)
    A = np.vstack(rows_A)
    b = np.concatenate(rows_b)
    m = A.shape[0]

    const = float(p.objective @ offset)
    c = p.objective @ T

    # rows with no y-columns reduce to a constant check
    if ny == 0:
        x = offset.copy()
        if p.max_violation(x) > tol.feasibility:
            return LpSolution(LpStatus.INFEASIBLE, float("nan"), x)
        return LpSolution(LpStatus.OPTIMAL, float(p.objective @ x), x)

    if m:
        scale = np.abs(A).max(axis=1)
        zero_rows = scale == 0.0
        for i in np.flatnonzero(zero_rows):
            s = senses[i]
            ok = (
                (s == "<=" and b[i] >= -tol.feasibility)
                or (s == ">=" and b[i] <= tol.feasibility)
                or (s == "=" and abs(b[i]) <= tol.feasibility)
            )
            if not ok:
                return LpSolution(LpStatus.INFEASIBLE, float("nan"), offset.copy())
        keep = ~zero_rows
        A = A[keep] / scale[keep, None]
        b = b[keep] / scale[keep]
        senses = [s for s, k in zip(senses, keep) if k]
        m = A.shape[0]

    if m == 0:
        # only nonnegativity: optimum at y = 0 unless some cost is negative
        if np.any(c < -tol.pivot):
            return LpSolution(LpStatus.UNBOUNDED, -np.inf, offset.copy())
        return LpSolution(LpStatus.OPTIMAL, const, offset.copy())

    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    senses = [
        ({"<=": ">=", ">=": "<=", "=": "="}[s] if f else s) for s, f in zip(senses, flip)
    ]

    n_slack = sum(1 for s in senses if s != "=")
    art_rows = [i for i, s in enumerate(senses) if s != "<="]
    n_art = len(art_rows)
    ncols = ny + n_slack + n_art
    tab = np.zeros((m + 1, ncols + 1))
    tab[:m, :ny] = A
    tab[:m, -1] = b
    basis = [-1] * m
    k = ny
    a = ny + n_slack
    for i, s in enumerate(senses):
        if s == "<=":
            tab[i, k] = 1.0
            basis[i] = k
            k += 1
        elif s == ">=":
            tab[i, k] = -1.0
            k += 1
        if s != "<=":
            tab[i, a] = 1.0
            basis[i] = a
            a += 1

    state = {"iters": 0, "degenerate": 0, "bland": False}
    is_art = np.zeros(ncols, dtype=bool)
    is_art[ny + n_slack:] = True

    if n_art:
        tab[-1, :] = 0.0
        tab[-1, ny + n_slack:ncols] = 1.0
        for i in art_rows:
            tab[-1] -= tab[i]
        outcome = _run_simplex(tab, basis, np.ones(ncols, dtype=bool), tol, budget, state)
        if outcome != "optimal" or -tab[-1, -1] > tol.feasibility:
            return LpSolution(LpStatus.INFEASIBLE, float("nan"), offset.copy(), state["iters"])
        # drive zero-level artificials out of the basis
        drop = []
        for i in range(m):
            if is_art[basis[i]]:
                cand = np.flatnonzero((~is_art) & (np.abs(tab[i, :-1]) > tol.pivot))
                if cand.size:
                    _pivot(tab, i, int(cand[0]))
                    basis[i] = int(cand[0])
                else:
                    drop.append(i)
        if drop:
            keep_rows = [i for i in range(m) if i not in drop]
            tab = np.vstack([tab[keep_rows], tab[-1:]])
            basis = [basis[i] for i in keep_rows]
            m = len(keep_rows)

    # phase 2 on the non-artificial columns
    cost = np.zeros(ncols)
    cost[:ny] = c
    tab[-1, :] = 0.0
    tab[-1, :ncols] = cost
    for i in range(m):
        cb = cost[basis[i]]
        if cb != 0.0:
            tab[-1] -= cb * tab[i]
    outcome = _run_simplex(tab, basis, ~is_art, tol, budget, state)

    y = np.zeros(ncols)
    for i in range(m):
        y[basis[i]] = tab[i, -1]
    x = offset + T @ y[:ny]
    if outcome == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, -np.inf, x, state["iters"])
    return LpSolution(LpStatus.OPTIMAL, float(p.objective @ x), x, state["iters"])


@dataclass(frozen=True)
class LinearClassifier:
    """``f(x) = sign(w.x + b)``."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))
        if not (np.all(np.isfinite(w)) and np.isfinite(self.b)):
            raise ValueError("classifier parameters must be finite")

    def decision(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.w + self.b

    def predict(self, X) -> np.ndarray:
        return np.sign(self.decision(X)).astype(int)

    def to_dict(self) -> dict:
        return {"w": [float(v) for v in self.w], "b": float(self.b)}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearClassifier":
        return cls(np.asarray(d["w"], dtype=float), d["b"])


@dataclass
class FeasibilityWitness:
    feasible: bool
    classifier: LinearClassifier | None = None
    margin: float = 0.0


def _as_points(points):
    if isinstance(points, tuple) and len(points) == 2 and isinstance(points[0], np.ndarray):
        X, y = points
    else:
        pts = list(points)
        if not pts:
            return None, np.zeros(0)
        X = np.array([np.atleast_1d(np.asarray(p[0], dtype=float)) for p in pts])
        y = np.array([p[1] for p in pts], dtype=float)
    return np.asarray(X, dtype=float), np.asarray(y, dtype=float)


def feasible_labeling(points, target, eps: float = DEFAULT_EPS, cap: float = DEFAULT_CAP,
                      tol: Tolerances = DEFAULT_TOL, bias: bool = True) -> FeasibilityWitness:
    """Decide whether some ``(w, b)`` with ``|w_j|, |b| <= cap`` puts every point
    and the target on the side of its label with margin at least ``eps``.

    ``points`` is either ``(X, y)`` arrays or an iterable of ``(x, y)`` pairs;
    ``target`` is an ``(x_t, y_t)`` pair, a ``TestTarget``, or ``None``.

    The LP maximises the common margin ``t`` and the labelling counts as
    realisable when ``t`` clears ``max(eps, tol.feasibility)``: below that the
    simplex cannot tell a positive margin from a zero one.

    ``bias=False`` restricts the search to classifiers through the origin.
    """
    if eps <= 0 or cap <= 0:
        raise ValueError("eps and cap must be positive")
    X, y = _as_points(points)
    rows_X = []
    rows_y = []
    if X is not None and len(y):
        rows_X.append(X)
        rows_y.append(y)
    if target is not None:
        xt, yt = _target_pair(target)
        rows_X.append(xt[None, :])
        rows_y.append(np.array([yt], dtype=float))
    if not rows_X:
        raise ValueError("nothing to separate")
    Xa = np.vstack(rows_X)
    ya = np.concatenate(rows_y)
    k, d = Xa.shape
    # variables: w (d), b, t ; maximise t
    obj = np.zeros(d + 2)
    obj[-1] = -1.0
    A = np.hstack([ya[:, None] * Xa, ya[:, None], -np.ones((k, 1))])
    lo = np.concatenate([np.full(d + 1, -cap), [0.0]])
    hi = np.concatenate([np.full(d + 1, cap), [cap]])
    if not bias:
        lo[d] = hi[d] = 0.0
    prob = LpProblem(obj, A, (">=",) * k, np.zeros(k), lo, hi)
    sol = solve_lp(prob, tol)
    if sol.status != LpStatus.OPTIMAL:
        return FeasibilityWitness(False)
    t = -sol.objective_value
    if t < max(eps, tol.feasibility):
        return FeasibilityWitness(False, margin=t)
    clf = LinearClassifier(sol.assignment[:d], sol.assignment[d])
    return FeasibilityWitness(True, clf, margin=t)


def _target_pair(target):
    if hasattr(target, "x_t"):
        return np.asarray(target.x_t, dtype=float).ravel(), float(target.y_t)
    xt, yt = target
    return np.atleast_1d(np.asarray(xt, dtype=float)).ravel(), float(yt)


def check_consistency(c: LinearClassifier, points, target=None) -> tuple[frozenset, bool | None]:
    """Indices whose sign disagrees with their label, and whether the target is met.

    A zero decision value counts as wrong for both labels.
    """
    X, y = _as_points(points)
    if X is None:
        mis = frozenset()
    else:
        if X.shape[1] != c.w.size:
            raise ValueError("dimension mismatch between classifier and points")
        margins = y * c.decision(X)
        mis = frozenset(int(i) for i in np.flatnonzero(~(margins > 0)))
    if target is None:
        return mis, None
    xt, yt = _target_pair(target)
    if xt.size != c.w.size:
        raise ValueError("dimension mismatch between classifier and target")
    return mis, bool(yt * (c.w @ xt + c.b) > 0)
