"""Undirected weighted graphs, edge-list I/O and structural queries."""

from __future__ import annotations

import io
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    """Raised for malformed graph input or an invalid graph query."""


class DisconnectedGraphError(GraphError):
    pass


class Graph:
    """Immutable undirected graph with positive edge weights and no self-loops.

    Edges are stored once, canonicalised so that ``src < dst``. A symmetric
    CSR adjacency matrix and the weighted degree vector are built eagerly.
    """

    __slots__ = ("n", "src", "dst", "weight", "_adj", "_deg", "_cache")

    def __init__(self, n: int, src, dst, weight=None):
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if weight is None:
            weight = np.ones(src.shape[0])
        weight = np.asarray(weight, dtype=float).ravel()
        if not (src.shape == dst.shape == weight.shape):
            raise GraphError("src, dst and weight must have equal length")
        if n < 0:
            raise GraphError("node count must be nonnegative")
        if src.size:
            if min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n:
                raise GraphError("edge endpoint out of range")
            if np.any(src == dst):
                raise GraphError("self-loops are not allowed")
            if not np.all(np.isfinite(weight)) or np.any(weight <= 0):
                raise GraphError("edge weights must be finite and positive")
        lo = np.minimum(src, dst)
        hi = np.maximum(src, dst)
        order = np.lexsort((hi, lo))
        lo, hi, weight = lo[order], hi[order], weight[order]
        if lo.size > 1:
            dup = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
            if np.any(dup):
                k = int(np.flatnonzero(dup)[0])
                raise GraphError(f"duplicate edge ({lo[k]}, {hi[k]})")
        self.n = int(n)
        self.src = lo
        self.dst = hi
        self.weight = weight
        for arr in (self.src, self.dst, self.weight):
            arr.setflags(write=False)
        rows = np.concatenate([lo, hi])
        cols = np.concatenate([hi, lo])
        vals = np.concatenate([weight, weight])
        self._adj = sp.csr_array((vals, (rows, cols)), shape=(self.n, self.n))
        self._adj.sort_indices()
        deg = np.bincount(lo, weights=weight, minlength=self.n)
        deg += np.bincount(hi, weights=weight, minlength=self.n)
        deg.setflags(write=False)
        self._deg = deg
        # memo for derived spectral data; valid because the graph is immutable
        self._cache = {}

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple]) -> "Graph":
        """Build from ``(i, j)`` or ``(i, j, w)`` tuples."""
        src, dst, w = [], [], []
        for e in edges:
            src.append(e[0])
            dst.append(e[1])
            w.append(e[2] if len(e) > 2 else 1.0)
        return cls(n, src, dst, w)

    @classmethod
    def from_dense(cls, a) -> "Graph":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError("adjacency matrix must be square")
        if not np.allclose(a, a.T, rtol=0, atol=0):
            raise GraphError("adjacency matrix must be symmetric")
        if np.any(np.diag(a) != 0):
            raise GraphError("self-loops are not allowed")
        i, j = np.nonzero(np.triu(a, 1))
        return cls(a.shape[0], i, j, a[i, j])

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    @property
    def degrees(self) -> np.ndarray:
        return self._deg

    @property
    def adjacency(self) -> sp.csr_array:
        """Symmetric CSR adjacency. Callers must not mutate it."""
        return self._adj

    def dense(self) -> np.ndarray:
        return self._adj.toarray()

    def edges(self):
        """Iterate ``(i, j, w)`` with ``i < j``."""
        for i, j, w in zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()):
            yield i, j, w

    def neighbors(self, i: int) -> np.ndarray:
        self._check_node(i)
        a = self._adj
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def _check_node(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f"node {i} out of range for graph with {self.n} nodes")

    def scaled(self, factor: float) -> "Graph":
        return Graph(self.n, self.src, self.dst, self.weight * factor)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.src, other.src)
                and np.array_equal(self.dst, other.dst)
                and np.array_equal(self.weight, other.weight))

    __hash__ = None

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.num_edges})"


class NodeSet:
    """A subset S of the nodes of a graph with ``n`` nodes."""

    __slots__ = ("n", "mask")

    def __init__(self, n: int, members: Iterable[int] = ()):
        mask = np.zeros(n, dtype=bool)
        idx = np.fromiter((int(m) for m in members), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise GraphError("node set member out of range")
        mask[idx] = True
        mask.setflags(write=False)
        self.n = n
        self.mask = mask

    @classmethod
    def from_mask(cls, mask) -> "NodeSet":
        mask = np.asarray(mask, dtype=bool)
        return cls(mask.size, np.flatnonzero(mask))

    @property
    def members(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def complement(self) -> "NodeSet":
        return NodeSet.from_mask(~self.mask)

    def __len__(self):
        return int(self.mask.sum())

    def __contains__(self, i):
        return 0 <= i < self.n and bool(self.mask[i])

    def __eq__(self, other):
        if not isinstance(other, NodeSet):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.mask, other.mask)

    __hash__ = None

    def __repr__(self):
        return f"NodeSet(n={self.n}, members={self.members.tolist()})"


def degree(g: Graph, i: int) -> float:
    g._check_node(i)
    return float(g.degrees[i])


def volume(g: Graph, s: NodeSet) -> float:
    if s.n != g.n:
        raise GraphError("node set does not match graph size")
    return float(g.degrees[s.mask].sum())


def _components(g: Graph) -> np.ndarray:
    """Component labels numbered in order of each component's smallest node."""
    _, labels = connected_components(g.adjacency, directed=False)
    _, first = np.unique(labels, return_index=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(first.size)
    return rank[labels]


def is_connected(g: Graph) -> bool:
    """BFS connectivity test. The empty graph counts as connected."""
    if g.n <= 1:
        return True
    return bool(_components(g).max() == 0)


def largest_component(g: Graph) -> tuple[Graph, np.ndarray]:
    """Induced subgraph on the largest connected component.

    Returns the subgraph and ``mapping`` with ``mapping[old] = new`` (or -1
    for dropped nodes). Ties go to the component holding the smallest index;
    components are labelled in order of their smallest node so ``argmax``
    already gives that.
    """
    if g.n == 0:
        return g, np.zeros(0, dtype=np.int64)
    labels = _components(g)
    sizes = np.bincount(labels)
    keep = labels == int(np.argmax(sizes))
    mapping = np.full(g.n, -1, dtype=np.int64)
    mapping[keep] = np.arange(int(keep.sum()))
    emask = keep[g.src] & keep[g.dst]
    sub = Graph(int(keep.sum()), mapping[g.src[emask]], mapping[g.dst[emask]], g.weight[emask])
    return sub, mapping


def require_connected(g: Graph) -> None:
    if not is_connected(g):
        raise DisconnectedGraphError(
            "graph is disconnected; restrict to the largest component first")


def reweight_by_centrality(g: Graph, theta) -> Graph:
    """Multiply each edge weight by the centralities of both endpoints."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (g.n,):
        raise GraphError(f"centrality vector has length {theta.size}, expected {g.n}")
    if np.any(theta <= 0):
        raise GraphError("centrality vector must be strictly positive")
    return Graph(g.n, g.src, g.dst, g.weight * theta[g.src] * theta[g.dst])


# -- edge-list I/O ---------------------------------------------------------

def load_edge_list(text: str | TextIO, one_indexed: bool = False, n: int | None = None) -> Graph:
    """Parse ``i j [w]`` lines. ``#`` starts a comment; blank lines are skipped.

    ``n`` may force a node count larger than the largest index (to keep
    trailing isolated nodes).
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    shift = 1 if one_indexed else 0
    src, dst, w = [], [], []
    seen = {}
    for lineno, raw in enumerate(text, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphError(f"line {lineno}: expected 'i j [w]', got {raw.rstrip()!r}")
        try:
            i = int(parts[0]) - shift
            j = int(parts[1]) - shift
            wt = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise GraphError(f"line {lineno}: malformed entry {raw.rstrip()!r}") from None
        if i < 0 or j < 0:
            raise GraphError(f"line {lineno}: negative node index")
        if i == j:
            raise GraphError(f"line {lineno}: self-loop on node {parts[0]}")
        if not np.isfinite(wt) or wt <= 0:
            raise GraphError(f"line {lineno}: nonpositive weight {parts[2]}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphError(f"line {lineno}: duplicate edge (first seen on line {seen[key]})")
        seen[key] = lineno
        src.append(i)
        dst.append(j)
        w.append(wt)
    size = 1 + max(max(src, default=-1), max(dst, default=-1))
    if n is not None:
        if n < size:
            raise GraphError(f"node count {n} smaller than largest index + 1 ({size})")
        size = n
    return Graph(size, src, dst, w)


def read_edge_list(path, one_indexed: bool = False) -> Graph:
    with open(path, encoding="utf-8", newline=None) as fh:
        return load_edge_list(fh, one_indexed=one_indexed)


def dump_edge_list(g: Graph, one_indexed: bool = False) -> str:
    shift = 1 if one_indexed else 0
    lines = [f"# n={g.n}"]
    for i, j, w in g.edges():
        lines.append(f"{i + shift} {j + shift} {w:.17g}")
    return "\n".join(lines) + "\n"


def write_edge_list(g: Graph, path, one_indexed: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_edge_list(g, one_indexed=one_indexed))


# -- fixtures --------------------------------------------------------------

def toy_graph() -> tuple[Graph, NodeSet, NodeSet]:
    """Eleven-node hub example: a 6-clique on nodes 6..11 and a path 1-2-3-4-5
    whose every node also links to the hub, node 6.

    Node labels in the docstring are 1-based; internally node k is index k-1.
    Returns the graph, cut A (S = {1..5}) and cut B (S = {1..6}).
    """
    edges = [(i, j) for i in range(5, 11) for j in range(i + 1, 11)]
    edges += [(k, k + 1) for k in range(4)]
    edges += [(k, 5) for k in range(5)]
    g = Graph.from_edges(11, edges)
    return g, NodeSet(11, range(5)), NodeSet(11, range(6))


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(leaves: int) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, k) for k in range(1, leaves + 1)])


def two_cliques_bridge(k: int) -> Graph:
    """Two k-cliques on nodes ``0..k-1`` and ``k..2k-1`` joined by edge ``(k-1, k)``."""
    edges = [(i, j) for i in range(k) for j in range(i + 1, k)]
    edges += [(i + k, j + k) for i, j in edges]
    edges.append((k - 1, k))
    return Graph.from_edges(2 * k, edges)


def erdos_renyi(n: int, p: float, rng: np.random.Generator, connected: bool = True) -> Graph:
    """G(n, p) sample; with ``connected`` a random spanning path is added first."""
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    edges = set(zip(iu[keep].tolist(), ju[keep].tolist()))
    if connected and n > 1:
        perm = rng.permutation(n).tolist()
        for a, b in zip(perm[:-1], perm[1:]):
            edges.add((min(a, b), max(a, b)))
    src, dst = (zip(*sorted(edges)) if edges else ((), ()))
    return Graph(n, list(src), list(dst))


def random_sparse_graph(n: int, mean_degree: float, rng: np.random.Generator) -> Graph:
    """Connected sparse random graph: a random spanning path plus uniformly
    drawn extra edges, for a total of about ``n * mean_degree / 2`` edges."""
    m = int(round(n * mean_degree / 2))
    perm = rng.permutation(n)
    a = [perm[:-1]]
    b = [perm[1:]]
    extra = max(m - (n - 1), 0)
    a.append(rng.integers(0, n, size=int(extra * 1.1) + 10))
    b.append(rng.integers(0, n, size=a[-1].size))
    a = np.concatenate(a)
    b = np.concatenate(b)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    keep = lo != hi
    key = lo[keep] * n + hi[keep]
    _, first = np.unique(key, return_index=True)
    first.sort()
    # path edges come first in ``key`` so they always survive the truncation
    first = first[:max(m, n - 1)]
    return Graph(n, lo[keep][first], hi[keep][first])
