"""Vertex cover to label-flip robustness reduction, with brute-force oracles."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset, TestTarget
from .exact import brute_force_robustness, encode, solve_bnb
from .seeds import make_rng

__all__ = ["Graph", "reduce", "min_vertex_cover", "verify_reduction", "random_graph",
           "read_edge_list", "format_edge_list", "cover_witness", "reduced_robustness", "VC_LIMIT"]

VC_LIMIT = 20


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on vertices ``1..n``; edges stored as sorted pairs."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one vertex")
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (1 <= u <= self.n and 1 <= v <= self.n):
                raise ValueError(f"edge ({u}, {v}) outside 1..{self.n}")
            e = (min(u, v), max(u, v))
            if e in norm:
                raise ValueError(f"duplicate edge {e}")
            norm.add(e)
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, tuple(itertools.combinations(range(1, n + 1), 2)))

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls(n, tuple((i, i + 1) for i in range(1, n)))

    @classmethod
    def star(cls, leaves: int) -> "Graph":
        return cls(leaves + 1, tuple((1, j) for j in range(2, leaves + 2)))


def reduce(g: Graph) -> tuple[Dataset, TestTarget]:
    """Vertex rows (unit vectors, label -1) then edge rows (label +1), in {0,1}^(n+1)."""
    n = g.n
    rows, labels = [], []
    for i in range(1, n + 1):
        x = np.zeros(n + 1)
        x[i - 1] = 1.0
        rows.append(x)
        labels.append(-1)
    for i, j in g.edges:
        x = np.zeros(n + 1)
        x[[i - 1, j - 1, n]] = 1.0
        rows.append(x)
        labels.append(1)
    xt = np.zeros(n + 1)
    xt[n] = 1.0
    return Dataset(np.array(rows), np.array(labels)), TestTarget(xt, -1)


def cover_witness(g: Graph, cover) -> tuple[tuple[int, ...], "np.ndarray", float]:
    """Flip indices and the explicit classifier for a vertex cover.

    Weight 3 on covered vertices, -1 on the others and on the extra
    coordinate, bias 0.
    """
    cover = set(cover)
    w = np.array([3.0 if v in cover else -1.0 for v in range(1, g.n + 1)] + [-1.0])
    flips = tuple(sorted(v - 1 for v in cover))
    return flips, w, 0.0


def min_vertex_cover(g: Graph) -> tuple[int, tuple[int, ...]]:
    """Smallest cover by increasing-size enumeration; first (lexicographic) wins."""
    if g.n > VC_LIMIT:
        raise ValueError(f"brute-force vertex cover limited to n <= {VC_LIMIT}")
    for size in range(g.n + 1):
        for cand in itertools.combinations(range(1, g.n + 1), size):
            s = set(cand)
            if all(u in s or v in s for u, v in g.edges):
                return size, cand
    raise AssertionError("the full vertex set is always a cover")


def reduced_robustness(g: Graph, solver: str = "bnb") -> int:
    """Robustness of ``reduce(g)`` over classifiers through the origin.

    The correspondence with vertex covers needs ``b = 0``: with a free bias
    an unflipped vertex row only gives ``w_i < -b``, and already for K3 the
    target can be reached without any flip.
    """
    data, target = reduce(g)
    if solver == "bnb":
        return solve_bnb(encode(data, target, bias=False)).robustness
    if solver == "brute":
        return brute_force_robustness(data, target, bias=False).robustness
    raise ValueError(f"unknown solver {solver!r}")


def verify_reduction(g: Graph, solver: str = "bnb") -> bool:
    return reduced_robustness(g, solver) == min_vertex_cover(g)[0]


def random_graph(n: int, p: float, seed: int) -> Graph:
    """Erdos-Renyi G(n, p)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = make_rng(seed, "graph", n)
    edges = [(i, j) for i, j in itertools.combinations(range(1, n + 1), 2) if rng.random() < p]
    return Graph(n, tuple(edges))


def read_edge_list(path) -> Graph:
    """First line ``n``, then one ``u v`` pair per line (1-based)."""
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path} is empty")
    try:
        n = int(lines[0])
        edges = [tuple(int(t) for t in ln.split()) for ln in lines[1:]]
    except ValueError as exc:
        raise ValueError(f"malformed edge list {path}: {exc}") from None
    if any(len(e) != 2 for e in edges):
        raise ValueError(f"malformed edge list {path}: each edge line needs two vertices")
    return Graph(n, tuple(edges))


def format_edge_list(g: Graph) -> str:
    return "\n".join([str(g.n)] + [f"{u} {v}" for u, v in g.edges]) + "\n"
