"""Gossip graphs, mixing matrices, and the consensus contraction factor."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import MixingMatrixError, SpectralGapError, TopologyError

__all__ = [
    "Graph",
    "TopologyKind",
    "WeightScheme",
    "MixingMatrix",
    "build_topology",
    "build_mixing_matrix",
    "check_mixing_matrix",
    "mixing_residuals",
    "spectral_gap",
]

logger = logging.getLogger(__name__)

STOCHASTIC_ATOL = 1e-12
EIG_RTOL = 1e-10


class TopologyKind(str, Enum):
    RING = "ring"
    HYPERCUBE = "hypercube"
    EXPONENTIAL = "exponential"
    COMPLETE = "complete"
    PATH = "path"


class WeightScheme(str, Enum):
    METROPOLIS = "metropolis"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0..n-1``.

    Edges are stored as ``(i, j)`` with ``i < j``. Connectivity is not
    enforced here; :func:`build_mixing_matrix` rejects disconnected graphs.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise TopologyError(f"n must be >= 1, got {self.n}")
        normalized = set()
        for i, j in self.edges:
            if i == j:
                raise TopologyError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise TopologyError(f"edge ({i}, {j}) has an endpoint outside [0, {self.n})")
            normalized.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(normalized))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self, i: int) -> list[int]:
        return sorted({b if a == i else a for a, b in self.edges if i in (a, b)})

    def is_regular(self) -> bool:
        deg = self.degrees()
        return bool(np.all(deg == deg[0]))

    def is_connected(self) -> bool:
        adj = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        seen = {0}
        queue = deque([0])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == self.n

    def relabel(self, perm) -> "Graph":
        """Graph with node ``i`` renamed to ``perm[i]``."""
        return Graph(self.n, frozenset((int(perm[i]), int(perm[j])) for i, j in self.edges))


def build_topology(kind: TopologyKind | str, n: int) -> Graph:
    """Construct one of the named graph families on ``n`` nodes.

    Raises:
        TopologyError: ``n`` violates the family's size constraint.
    """
    kind = TopologyKind(kind)
    if n < 1:
        raise TopologyError(f"topology.n must be >= 1, got {n}")
    edges: set[tuple[int, int]] = set()
    if kind is TopologyKind.RING:
        if n < 3:
            raise TopologyError(f"ring requires n >= 3, got {n}")
        edges = {(i, (i + 1) % n) for i in range(n)}
    elif kind is TopologyKind.HYPERCUBE:
        if n & (n - 1):
            raise TopologyError(f"hypercube requires n to be a power of two, got {n}")
        k = n.bit_length() - 1
        edges = {(i, i ^ (1 << b)) for i in range(n) for b in range(k)}
    elif kind is TopologyKind.EXPONENTIAL:
        hop = 1
        while hop < n:
            edges |= {(i, (i + hop) % n) for i in range(n)}
            edges |= {(i, (i - hop) % n) for i in range(n)}
            hop *= 2
        edges = {e for e in edges if e[0] != e[1]}
    elif kind is TopologyKind.COMPLETE:
        edges = {(i, j) for i in range(n) for j in range(i + 1, n)}
    elif kind is TopologyKind.PATH:
        edges = {(i, i + 1) for i in range(n - 1)}
    return Graph(n, frozenset(edges))


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Symmetric doubly stochastic weights supported on ``graph``.

    ``fallback`` is True when uniform weights were requested on a
    non-regular graph and Metropolis weights were used instead.
    """

    w: np.ndarray
    graph: Graph | None = None
    scheme: WeightScheme = WeightScheme.METROPOLIS
    fallback: bool = False

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def directed_links(self) -> int:
        """Number of ordered (sender, receiver) pairs with nonzero weight."""
        off = self.w.copy()
        np.fill_diagonal(off, 0.0)
        return int(np.count_nonzero(off))


def build_mixing_matrix(g: Graph, scheme: WeightScheme | str = WeightScheme.METROPOLIS) -> MixingMatrix:
    """Build gossip weights over ``g``.

    Metropolis weights are ``1 / (1 + max(deg_i, deg_j))`` on every edge with
    the diagonal absorbing the remainder. Uniform weights give every node and
    each of its neighbors ``1 / (1 + deg)`` and need a regular graph.
    """
    scheme = WeightScheme(scheme)
    if not g.is_connected():
        raise MixingMatrixError("graph is disconnected; no mixing matrix has a spectral gap")
    deg = g.degrees()
    w = np.zeros((g.n, g.n))
    fallback = False
    if scheme is WeightScheme.UNIFORM and not g.is_regular():
        logger.warning("uniform weights need a regular graph; falling back to metropolis")
        fallback = True
    if scheme is WeightScheme.UNIFORM and not fallback:
        weight = 1.0 / (1 + deg[0])
        for i, j in g.edges:
            w[i, j] = w[j, i] = weight
        np.fill_diagonal(w, weight)
    else:
        for i, j in g.edges:
            w[i, j] = w[j, i] = 1.0 / (1 + max(deg[i], deg[j]))
        np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    mm = MixingMatrix(w=w, graph=g, scheme=scheme, fallback=fallback)
    check_mixing_matrix(mm)
    return mm


def mixing_residuals(w) -> dict[str, float]:
    """Worst-case violations of each mixing-matrix invariant (0 when exact)."""
    w = np.asarray(getattr(w, "w", w), dtype=float)
    n = w.shape[0]
    return {
        "row_sum": float(np.max(np.abs(w.sum(axis=1) - 1.0))),
        "col_sum": float(np.max(np.abs(w.sum(axis=0) - 1.0))),
        "symmetry": float(np.max(np.abs(w - w.T))),
        "negativity": float(max(0.0, -w.min())),
        "above_one": float(max(0.0, w.max() - 1.0)),
        "shape": 0.0 if w.shape == (n, n) else 1.0,
    }


def check_mixing_matrix(mm: MixingMatrix, atol: float = STOCHASTIC_ATOL) -> None:
    """Raise :class:`MixingMatrixError` naming every violated invariant."""
    w = mm.w
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise MixingMatrixError(f"mixing matrix must be square, got shape {w.shape}")
    res = mixing_residuals(w)
    problems = []
    if res["row_sum"] > atol or res["col_sum"] > atol:
        problems.append(f"not doubly stochastic (row residual {res['row_sum']:.3g}, column residual {res['col_sum']:.3g})")
    if res["symmetry"] != 0.0:
        problems.append(f"not symmetric (max asymmetry {res['symmetry']:.3g})")
    if res["negativity"] > 0.0 or res["above_one"] > 0.0:
        problems.append("entries outside [0, 1]")
    if mm.graph is not None:
        mask = np.ones_like(w, dtype=bool)
        np.fill_diagonal(mask, False)
        for i, j in mm.graph.edges:
            mask[i, j] = mask[j, i] = False
        if np.any(w[mask] != 0.0):
            problems.append("nonzero weight on a non-edge")
    if problems:
        raise MixingMatrixError("; ".join(problems))


def spectral_gap(w) -> float:
    """Tightest ``p`` with ``||XW - Xbar||_F^2 <= (1 - p) ||X - Xbar||_F^2``.

    Computed as ``1 - lam**2`` where ``lam`` is the largest-magnitude
    eigenvalue of ``W - 11^T/n``.

    Raises:
        SpectralGapError: ``lam`` is 1 within relative tolerance.
    """
    w = np.asarray(getattr(w, "w", w), dtype=float)
    n = w.shape[0]
    deflated = w - np.full((n, n), 1.0 / n)
    # symmetrize away rounding so eigvalsh sees the matrix it assumes
    lam = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (deflated + deflated.T)))))
    if lam >= 1.0 - EIG_RTOL:
        raise SpectralGapError(f"no spectral gap: largest deflated eigenvalue magnitude is {lam!r}")
    return 1.0 - lam * lam
