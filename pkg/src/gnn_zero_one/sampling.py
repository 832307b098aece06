"""Random graphs (ER, sparse ER, Barabasi-Albert) and random node features.

Graphs are stored as bit-packed adjacency rows: row ``v`` holds one bit per
node, most significant bit first (``np.packbits`` order).  Dense ER graphs at
n = 20000 then fit in 50 MB, and neighbour aggregation becomes a sequence of
0/1 block products handed to BLAS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .rng import RngState, derive_rng

__all__ = [
    "EdgeProbPolicy",
    "FeatureDistribution",
    "Graph",
    "derive_rng",
    "sample_ba",
    "sample_er",
    "sample_features",
]

# Upper bound on the dense float block materialised by neighbour_sum (elements).
_BLOCK_ELEMS = 1 << 23


class Graph:
    """Simple undirected graph on nodes ``0..n-1``."""

    __slots__ = ("n", "bits", "degrees", "_adjacency")

    def __init__(self, n: int, bits: np.ndarray, degrees: np.ndarray | None = None):
        if n < 0:
            raise ValueError("node count must be non-negative")
        nbytes = (n + 7) // 8
        bits = np.ascontiguousarray(bits, dtype=np.uint8)
        if bits.shape != (n, nbytes):
            raise ValueError(f"bit matrix must have shape {(n, nbytes)}, got {bits.shape}")
        self.n = n
        self.bits = bits
        if degrees is None:
            degrees = np.unpackbits(bits, axis=1, count=n).sum(axis=1, dtype=np.int64) if n else np.zeros(0, np.int64)
        self.degrees = np.asarray(degrees, dtype=np.int64)
        self._adjacency = None

    # construction -------------------------------------------------------

    @classmethod
    def from_edges(cls, n: int, edges) -> Graph:
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loops are not allowed")
        bits = np.zeros((n, (n + 7) // 8), dtype=np.uint8)
        u = np.concatenate([edges[:, 0], edges[:, 1]])
        v = np.concatenate([edges[:, 1], edges[:, 0]])
        np.bitwise_or.at(bits, (u, v >> 3), (0x80 >> (v & 7)).astype(np.uint8))
        return cls(n, bits)

    @classmethod
    def from_dense(cls, adj) -> Graph:
        adj = np.asarray(adj).astype(bool)
        n = adj.shape[0]
        if adj.shape != (n, n) or np.any(adj != adj.T) or np.any(np.diag(adj)):
            raise ValueError("adjacency must be symmetric with an empty diagonal")
        return cls(n, np.packbits(adj, axis=1))

    @classmethod
    def complete(cls, n: int) -> Graph:
        adj = ~np.eye(n, dtype=bool)
        return cls(n, np.packbits(adj, axis=1), np.full(n, n - 1, dtype=np.int64))

    @classmethod
    def empty(cls, n: int) -> Graph:
        return cls(n, np.zeros((n, (n + 7) // 8), dtype=np.uint8), np.zeros(n, np.int64))

    # views ----------------------------------------------------------------

    @property
    def adjacency(self) -> list[np.ndarray]:
        """Sorted neighbour index arrays, one per node."""
        if self._adjacency is None:
            self._adjacency = [self.neighbors(v) for v in range(self.n)]
        return self._adjacency

    def neighbors(self, v: int) -> np.ndarray:
        return np.flatnonzero(np.unpackbits(self.bits[v], count=self.n))

    @property
    def num_edges(self) -> int:
        return int(self.degrees.sum()) // 2

    def edges(self) -> np.ndarray:
        """(m, 2) array of edges ``u < v`` in ascending lexicographic order."""
        out = []
        for u in range(self.n):
            nb = self.neighbors(u)
            nb = nb[nb > u]
            out.append(np.column_stack([np.full(nb.size, u), nb]))
        if not out:
            return np.zeros((0, 2), dtype=np.int64)
        return np.concatenate(out).astype(np.int64)

    def dense(self) -> np.ndarray:
        return np.unpackbits(self.bits, axis=1, count=self.n).astype(np.float64)

    def permuted(self, perm) -> Graph:
        """Relabelled copy in which old node ``v`` becomes ``perm[v]``."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.n)):
            raise ValueError("perm must be a permutation of range(n)")
        e = self.edges()
        return Graph.from_edges(self.n, perm[e]) if e.size else Graph.empty(self.n)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.bits, other.bits)

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.num_edges})"

    # aggregation ----------------------------------------------------------

    def block_rows(self) -> int:
        return max(1, min(self.n, _BLOCK_ELEMS // max(self.n, 1)))

    def neighbor_sum(self, X: np.ndarray) -> np.ndarray:
        """``Y[:, v] = sum over u in N(v) of X[:, u]`` for a (k, n) matrix X.

        The block shape depends only on n, so the floating-point result is a
        deterministic function of (graph, X).
        """
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n:
            raise ValueError(f"expected a (k, {self.n}) matrix, got {X.shape}")
        Y = np.zeros_like(X)
        if self.n == 0 or not self.degrees.any():
            return Y
        step = self.block_rows()
        buf = np.empty((step, self.n), dtype=np.float64)
        for s in range(0, self.n, step):
            rows = self.bits[s : s + step]
            block = buf[: rows.shape[0]]
            np.copyto(block, np.unpackbits(rows, axis=1, count=self.n))
            Y[:, s : s + step] = X @ block.T
        return Y


@dataclass(frozen=True)
class EdgeProbPolicy:
    """Edge probability as a function of n: ``fixed`` r or ``sparse_log`` ln(n)/n."""

    kind: str = "fixed"
    r: float = 0.5

    def __post_init__(self):
        if self.kind not in ("fixed", "sparse_log"):
            raise ValueError(f"unknown edge policy {self.kind!r}")
        if self.kind == "fixed" and not 0.0 <= self.r <= 1.0:
            raise ValueError(f"edge probability must lie in [0, 1], got {self.r}")

    @classmethod
    def fixed(cls, r: float) -> EdgeProbPolicy:
        return cls("fixed", float(r))

    @classmethod
    def sparse_log(cls) -> EdgeProbPolicy:
        return cls("sparse_log", 0.0)

    def prob(self, n: int) -> float:
        if self.kind == "fixed":
            return self.r
        if n < 2:
            raise ValueError("undefined edge probability: sparse_log needs n >= 2")
        return min(1.0, max(0.0, math.log(n) / n))


@dataclass(frozen=True)
class FeatureDistribution:
    """i.i.d. node features: ``uniform01`` or ``normal(mean, stddev)``."""

    kind: str = "uniform01"
    d: int = 1
    mean: float = 0.5
    stddev: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform01", "normal"):
            raise ValueError(f"unknown feature distribution {self.kind!r}")
        if self.d < 1:
            raise ValueError("feature dimension must be >= 1")
        if self.kind == "normal" and not self.stddev > 0:
            raise ValueError(f"normal stddev must be positive, got {self.stddev}")

    @classmethod
    def uniform01(cls, d: int) -> FeatureDistribution:
        return cls("uniform01", d, 0.5, math.sqrt(1 / 12))

    @classmethod
    def normal(cls, d: int, mean: float = 0.5, stddev: float = 1.0) -> FeatureDistribution:
        return cls("normal", d, float(mean), float(stddev))

    def mean_vector(self) -> np.ndarray:
        return np.full(self.d, 0.5 if self.kind == "uniform01" else self.mean)


def sample_er(n: int, policy: EdgeProbPolicy | float, rng: RngState) -> Graph:
    """Erdos-Renyi graph: every unordered pair is an edge independently."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not isinstance(policy, EdgeProbPolicy):
        policy = EdgeProbPolicy.fixed(policy)
    r = policy.prob(n)
    start = rng.reserve(n * n)
    # counters start..start+n*n-1 are owned by this graph
    key = (rng.key + start * rng.gamma) & ((1 << 64) - 1)
    bits, deg = _kernels.er_bits(n, np.uint64(key), np.uint64(rng.gamma), float(r))
    return Graph(n, bits, deg)


def sample_ba(n: int, m: int, rng: RngState) -> Graph:
    """Barabasi-Albert graph with m isolated seeds and m attachments per new node.

    Node m joins every seed; later nodes pick targets proportionally to degree,
    redrawing repeats so the graph stays simple.  Total edges: m * (n - m).
    """
    if m < 1 or m >= n:
        raise ValueError(f"invalid attachment count m={m} for n={n}")
    ends = np.empty(2 * m * (n - m), dtype=np.int64)
    edges = np.empty((m * (n - m), 2), dtype=np.int64)
    size = 0
    k = 0
    for s in range(m):
        edges[k] = (s, m)
        k += 1
        ends[size : size + 2] = (s, m)
        size += 2
    for v in range(m + 1, n):
        chosen: list[int] = []
        while len(chosen) < m:
            t = int(ends[rng.randbelow(size)])
            if t not in chosen:
                chosen.append(t)
        for t in chosen:
            edges[k] = (t, v)
            k += 1
            ends[size : size + 2] = (t, v)
            size += 2
    return Graph.from_edges(n, edges)


def sample_features(n: int, dist: FeatureDistribution, rng: RngState) -> np.ndarray:
    """(d, n) matrix whose column v is the feature vector of node v."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if dist.kind == "uniform01":
        return rng.uniform((dist.d, n))
    return rng.normal((dist.d, n), dist.mean, dist.stddev)
