"""Approximating graphs, lavish graphs, Schreier graphs and edge-list I/O."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._random import make_rng
from .actions import IDENTITY, ActionInstance
from .exceptions import ParseError, RetryExhaustedError, SpaceMismatchError
from .geometry import NetIndex
from .partition import Partition


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph; ``edges`` is a sorted ``(m, 2)`` array with ``u < v``."""

    n: int
    edges: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e) and (e.min() < 0 or e.max() >= self.n):
            raise ValueError("edge endpoint out of range")
        if np.any(e[:, 0] >= e[:, 1]):
            raise ValueError("edges must satisfy u < v (no loops)")
        if len(e) > 1:
            keys = e[:, 0] * self.n + e[:, 1]
            if np.any(np.diff(keys) <= 0):
                raise ValueError("edges must be sorted and unique")
        object.__setattr__(self, "edges", e)

    @classmethod
    def from_pairs(cls, n, pairs) -> "Graph":
        """Canonical graph from arbitrary pairs: loops dropped, duplicates merged."""
        p = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        u = np.minimum(p[:, 0], p[:, 1])
        v = np.maximum(p[:, 0], p[:, 1])
        keep = u != v
        keys = np.unique(u[keep] * n + v[keep])
        return cls(int(n), np.stack([keys // n, keys % n], axis=1) if len(keys) else np.empty((0, 2)))

    @property
    def m(self) -> int:
        return len(self.edges)

    def __eq__(self, other):
        return (
            isinstance(other, Graph)
            and self.n == other.n
            and np.array_equal(self.edges, other.edges)
        )

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"

    def adjacency(self) -> sp.csr_matrix:
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * self.m)
        return sp.csr_matrix(
            (data, (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(self.n, self.n)
        )

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def edge_keys(self) -> np.ndarray:
        return self.edges[:, 0] * self.n + self.edges[:, 1]

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        ncomp = sp.csgraph.connected_components(self.adjacency(), directed=False)[0]
        return ncomp == 1


def max_degree(graph: Graph) -> int:
    return int(graph.degrees().max()) if graph.n else 0


GRAPH_HEADER = "# warpcone-graph v1"


def serialize(graph: Graph, t: float | None = None) -> bytes:
    """Edge-list bytes; ``t`` adds the level-set scale line after the header."""
    lines = [GRAPH_HEADER]
    if t is not None:
        lines.append(f"t {format(float(t), '.17g')}")
    lines.append(f"n {graph.n} m {graph.m}")
    lines.extend(f"{u} {v}" for u, v in graph.edges.tolist())
    return ("\n".join(lines) + "\n").encode("ascii")


def _parse(data):
    text = data.decode("ascii") if isinstance(data, (bytes, bytearray)) else data
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != GRAPH_HEADER:
        raise ParseError(f"expected {GRAPH_HEADER!r}", line=1)
    pos, t = 1, None
    if len(lines) > 1 and lines[1].startswith("t "):
        try:
            t = float(lines[1][2:])
        except ValueError:
            raise ParseError("bad scale line", line=2) from None
        pos = 2
    if len(lines) <= pos:
        raise ParseError("missing 'n <vertices> m <edges>' line", line=pos + 1)
    head = lines[pos].split()
    if len(head) != 4 or head[0] != "n" or head[2] != "m":
        raise ParseError("expected 'n <vertices> m <edges>'", line=pos + 1)
    try:
        n, m = int(head[1]), int(head[3])
    except ValueError:
        raise ParseError("non-integer counts", line=pos + 1) from None
    body = lines[pos + 1 :]
    if len(body) != m:
        raise ParseError(f"header says {m} edges, found {len(body)}", line=pos + 2 + min(m, len(body)))
    edges = np.empty((m, 2), dtype=np.int64)
    prev = -1
    for k, line in enumerate(body):
        lineno = pos + 2 + k
        parts = line.split(" ")
        if len(parts) != 2:
            raise ParseError(f"expected 'u v', got {line!r}", line=lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer vertex in {line!r}", line=lineno) from None
        if not (0 <= u < v < n):
            raise ParseError(f"edge {u} {v} violates 0 <= u < v < n", line=lineno)
        key = u * n + v
        if key <= prev:
            raise ParseError("edges not strictly sorted", line=lineno)
        prev = key
        edges[k] = (u, v)
    return Graph(n, edges), t


def deserialize(data) -> Graph:
    """Parse edge-list bytes; errors carry the offending line number."""
    return _parse(data)[0]


# -- transition operator --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic cell-to-cell operator of the uniform generator average.

    ``measures`` are the cell measures the operator is reversible against in
    the ideal (measure-preserving) case.
    """

    matrix: sp.csr_matrix
    measures: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _image_cells(action: ActionInstance, partition: Partition, g: str) -> np.ndarray:
    images = action.maps[g](partition.cloud.points)
    return partition.net.assign(images)


def build_approximating_graph(action: ActionInstance, partition: Partition, threshold: int = 1):
    """Approximating graph and transition matrix of ``action`` on ``partition``.

    For every cloud point ``x`` of cell ``i`` and generator ``s`` the cell ``j``
    containing ``s x`` is recorded. Cells ``i != j`` are joined when, for some
    single generator, at least ``threshold`` cloud points of ``i`` land in
    ``j``. The transition matrix keeps the diagonal and averages over all
    generators with the cloud weights.
    """
    if action.space != partition.space:
        raise SpaceMismatchError(f"action on {action.space}, partition on {partition.space}")
    if partition.n_cells == 0:
        raise ValueError("empty partition")
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    n = partition.n_cells
    src = partition.assignment
    w = partition.cloud.weights
    trans = sp.csr_matrix((n, n))
    pairs = []
    for g in action.generators:
        dst = src if g == IDENTITY else _image_cells(action, partition, g)
        counts = sp.csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
        counts.sum_duplicates()
        coo = counts.tocoo()
        hit = coo.data >= threshold
        pairs.append(np.stack([coo.row[hit], coo.col[hit]], axis=1))
        trans = trans + sp.csr_matrix((w, (src, dst)), shape=(n, n))
    graph = Graph.from_pairs(n, np.concatenate(pairs))
    row_mass = partition.cell_measures * len(action.generators)
    trans = sp.diags(1.0 / row_mass) @ trans
    return graph, TransitionMatrix(trans.tocsr(), partition.cell_measures.copy())


def build_lavish_graph(action: ActionInstance, partition: Partition, inflation: float = 0.0) -> Graph:
    """Lavish approximating graph, an empirical proxy for ``s cl(R_i)`` meeting ``cl(R_j)``.

    Cells ``i`` and ``j`` are joined when some cloud point ``x`` of ``i`` has
    ``s x`` inside cell ``j``, or within ``inflation`` of a cloud point of
    ``j``. With ``inflation == 0`` this is the approximating graph with
    threshold 1, so the result always contains it.
    """
    if inflation < 0:
        raise ValueError("inflation must be nonnegative")
    if action.space != partition.space:
        raise SpaceMismatchError(f"action on {action.space}, partition on {partition.space}")
    n = partition.n_cells
    src = partition.assignment
    cloud_index = NetIndex(partition.space, partition.cloud.points) if inflation > 0 else None
    pairs = []
    for g in action.generators:
        if g == IDENTITY and inflation == 0:
            continue
        images = action.maps[g](partition.cloud.points)
        if g != IDENTITY:
            pairs.append(np.stack([src, partition.net.assign(images)], axis=1))
        if cloud_index is not None:
            rows, cols = cloud_index.query_pairs(images, inflation)
            pairs.append(np.stack([src[rows], src[cols]], axis=1))
    if not pairs:
        return Graph(n, np.empty((0, 2)))
    return Graph.from_pairs(n, np.concatenate(pairs))


def build_schreier_graph(action: ActionInstance) -> Graph:
    """Graph on the finite set with an edge ``{x, s x}`` for every ``x`` and ``s``."""
    if not action.is_finite:
        raise SpaceMismatchError("Schreier graphs need a finite permutation action")
    n = action.space.size
    x = np.arange(n)
    pairs = [
        np.stack([x, action.maps[g](x[:, None].astype(float))[:, 0].astype(np.int64)], axis=1)
        for g in action.generators
    ]
    return Graph.from_pairs(n, np.concatenate(pairs))


def random_regular_graph(n: int, d: int, random_state=None, max_retries: int = 1000) -> Graph:
    """Uniform simple ``d``-regular graph by the pairing model with rejection."""
    if (n * d) % 2 or not 0 <= d < n:
        raise ValueError("need n*d even and 0 <= d < n")
    rng = make_rng(random_state)
    stubs = np.repeat(np.arange(n), d)
    for _ in range(max_retries):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        u, v = np.minimum(pairs[:, 0], pairs[:, 1]), np.maximum(pairs[:, 0], pairs[:, 1])
        if np.any(u == v):
            continue
        keys = u * n + v
        if len(np.unique(keys)) != len(keys):
            continue
        return Graph.from_pairs(n, pairs)
    raise RetryExhaustedError(f"no simple {d}-regular graph on {n} vertices after {max_retries} tries")
