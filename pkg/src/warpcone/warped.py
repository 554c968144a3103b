"""Warped distances on a finite complex and the level-set graphs ``X_t``.

The warped metric at scale ``t`` is the largest metric below ``t * d`` in
which every generator jump ``x -> s x`` costs at most 1. It is approximated
on a net ``Y`` of separation ``1 / (3 t)`` by shortest paths over two edge
kinds:

* metric edges ``{y, y'}`` with weight ``t d(y, y')`` when that is at most
  ``metric_cutoff``;
* jump edges ``{y, z}`` for every generator ``s``, with weight
  ``1 + t d(s y, z)``, for the net point ``z`` nearest to ``s y`` and every
  ``z`` with ``t d(s y, z) <= jump_reach``.

Each edge weight is the cost of an actual path in the continuum, so graph
distances bound the warped distance from above.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from ._random import make_rng
from .actions import IDENTITY, ActionInstance
from .exceptions import NetMismatchError, ScaleTooSmallError, SizeLimitError
from .geometry import FiniteSet, Net, NetIndex, Space, net_from_candidates
from .graphs import Graph, serialize
from .partition import Partition, SampleCloud, build_voronoi_partition

LEVEL_SET_THRESHOLD = 2.0
DEFAULT_MAX_NODES = 300_000
CANDIDATES_PER_NODE = 10


def level_set_bilipschitz_constant(space: Space) -> float:
    """Constant ``max(pi/2, diam/2)`` relating a warped cone level to the warped rescaled space."""
    return max(math.pi / 2.0, space.diameter / 2.0)


@dataclass(frozen=True, eq=False)
class WarpedComplex:
    t: float
    net: Net
    metric_edges: np.ndarray  # (k, 2) with u < v
    metric_weights: np.ndarray
    jump_edges: np.ndarray
    jump_weights: np.ndarray
    metric_cutoff: float = 2.0

    @property
    def n(self) -> int:
        return len(self.net)

    def csgraph(self, jumps: bool = True) -> sp.csr_matrix:
        """Symmetric weighted adjacency, keeping the lightest parallel edge."""
        edges, weights = [self.metric_edges], [self.metric_weights]
        if jumps:
            edges.append(self.jump_edges)
            weights.append(self.jump_weights)
        e = np.concatenate(edges).reshape(-1, 2)
        w = np.concatenate(weights)
        if len(e) == 0:
            return sp.csr_matrix((self.n, self.n))
        u = np.concatenate([e[:, 0], e[:, 1]])
        v = np.concatenate([e[:, 1], e[:, 0]])
        w = np.concatenate([w, w])
        key = u * self.n + v
        order = np.lexsort((w, key))
        key, w = key[order], w[order]
        first = np.ones(len(key), dtype=bool)
        first[1:] = key[1:] != key[:-1]
        key, w = key[first], w[first]
        return sp.csr_matrix((w, (key // self.n, key % self.n)), shape=(self.n, self.n))


def _undirected(rows, cols, weights, n):
    """Merge pairs to ``u < v`` keeping the minimum weight; loops dropped."""
    u = np.minimum(rows, cols)
    v = np.maximum(rows, cols)
    keep = u != v
    u, v, w = u[keep], v[keep], weights[keep]
    if len(u) == 0:
        return np.empty((0, 2), dtype=np.int64), np.empty(0)
    key = u * n + v
    order = np.lexsort((w, key))
    key, w = key[order], w[order]
    first = np.ones(len(key), dtype=bool)
    first[1:] = key[1:] != key[:-1]
    key, w = key[first], w[first]
    return np.stack([key // n, key % n], axis=1), w


def build_warped_complex(
    action: ActionInstance,
    net: Net,
    t: float,
    metric_cutoff: float = 2.0,
    jump_reach: float = 1.0,
) -> WarpedComplex:
    if t < 1:
        raise ValueError("scale t must be >= 1")
    space = net.space
    index = NetIndex(space, net.points)
    n = len(net)
    rows, cols = index.query_pairs(net.points, metric_cutoff / t)
    d = space.distance(net.points[rows], net.points[cols])
    metric_edges, metric_weights = _undirected(rows, cols, t * d, n)

    jr, jc, jw = [], [], []
    for g in action.generators:
        if g == IDENTITY:
            continue
        images = action.maps[g](net.points)
        nearest, dist = index.query(images)
        jr.append(np.arange(n))
        jc.append(nearest)
        jw.append(1.0 + t * dist)
        if jump_reach > 0:
            r2, c2 = index.query_pairs(images, jump_reach / t)
            jr.append(r2)
            jc.append(c2)
            jw.append(1.0 + t * space.distance(images[r2], net.points[c2]))
    if jr:
        jump_edges, jump_weights = _undirected(
            np.concatenate(jr), np.concatenate(jc), np.concatenate(jw), n
        )
    else:
        jump_edges, jump_weights = np.empty((0, 2), dtype=np.int64), np.empty(0)
    return WarpedComplex(float(t), net, metric_edges, metric_weights,
                         jump_edges, jump_weights, float(metric_cutoff))


def warped_distances_from(complex_: WarpedComplex, x: int, limit: float = np.inf, jumps=True):
    """Approximate warped distances from node ``x`` to every node (``inf`` if unreachable)."""
    return dijkstra(complex_.csgraph(jumps), directed=False, indices=int(x), limit=limit)


def warped_distance(complex_: WarpedComplex, x: int, y: int) -> float:
    """Shortest path over metric and jump edges; an upper bound on the warped distance."""
    if not (0 <= x < complex_.n and 0 <= y < complex_.n):
        raise IndexError("node out of range")
    return float(warped_distances_from(complex_, x)[y])


@dataclass(frozen=True, eq=False)
class LevelSetGraph:
    """``X_t``: net nodes joined when their approximate warped distance is below 2."""

    graph: Graph
    t: float
    net: Net
    candidates: np.ndarray = field(repr=False)
    complex: WarpedComplex | None = field(default=None, repr=False)

    def matched_partition(self) -> Partition:
        """Voronoi partition of the candidate cloud over this graph's net.

        Every candidate lies within the separation of the net, which is what
        the lavish-graph comparison relies on.
        """
        return build_voronoi_partition(
            self.net.space, self.net, SampleCloud.uniform(self.candidates), drop_empty=False
        )


def serialize_level_set(level: LevelSetGraph) -> bytes:
    return serialize(level.graph, t=level.t)


def _dijkstra_edges(complex_: WarpedComplex, threshold: float, chunk: int = 256) -> np.ndarray:
    graph = complex_.csgraph()
    pairs = []
    for start in range(0, complex_.n, chunk):
        idx = np.arange(start, min(start + chunk, complex_.n))
        dist = dijkstra(graph, directed=False, indices=idx, limit=threshold)
        r, c = np.nonzero(dist < threshold)
        pairs.append(np.stack([idx[r], c], axis=1))
    return np.concatenate(pairs)


def _one_jump_edges(action, net, t, threshold):
    """Closed form of the threshold graph for isometric actions.

    Any path with two jumps costs at least 2, and for an isometry the
    cheapest one-jump path from ``y`` to ``y'`` is the direct jump, so
    ``dist < 2`` iff ``t d(y, y') < 2`` or ``1 + t d(s y, y') < 2`` for some
    ``s``. This equals the Dijkstra answer on the complex without building
    its edges.
    """
    space = net.space
    index = NetIndex(space, net.points)
    rows, cols = index.query_pairs(net.points, threshold / t)
    d = space.distance(net.points[rows], net.points[cols])
    keep = t * d < threshold
    pairs = [np.stack([rows[keep], cols[keep]], axis=1)]
    for g in action.generators:
        if g == IDENTITY:
            continue
        images = action.maps[g](net.points)
        r2, c2 = index.query_pairs(images, (threshold - 1.0) / t)
        d2 = space.distance(images[r2], net.points[c2])
        keep = 1.0 + t * d2 < threshold
        pairs.append(np.stack([r2[keep], c2[keep]], axis=1))
    return np.concatenate(pairs)


def build_level_set_graph(
    action: ActionInstance,
    t: float,
    cloud_budget: int | None = None,
    random_state=None,
    method: str = "auto",
    metric_cutoff: float = 2.0,
    max_nodes: int = DEFAULT_MAX_NODES,
    keep_complex: bool | None = None,
) -> LevelSetGraph:
    """Level-set graph ``X_t`` of the warped space at scale ``t``.

    The net is a greedy maximal ``1/(3t)``-separated subset of
    ``cloud_budget`` uniform candidates (all points for finite spaces).
    ``method`` is ``"dijkstra"`` (bounded shortest paths on the complex),
    ``"one_jump"`` (closed form, isometric actions only) or ``"auto"``.
    Runs whose estimated net exceeds ``max_nodes`` are refused with
    :class:`SizeLimitError` before any allocation.
    """
    if t < 1:
        raise ValueError("scale t must be >= 1")
    space = action.space
    r = 1.0 / (3.0 * t)
    expected = space.estimate_net_size(r)
    if expected > max_nodes:
        raise SizeLimitError(
            f"level set at t={t} on {space.kind} needs about {expected} nodes "
            f"(limit {max_nodes})"
        )
    rng = make_rng(random_state)
    if isinstance(space, FiniteSet):
        candidates = space.points()
    else:
        budget = cloud_budget or CANDIDATES_PER_NODE * expected
        candidates = space.sample(budget, rng)
    net = net_from_candidates(space, candidates, r, rng=rng)
    if len(net) < 2:
        raise ScaleTooSmallError(f"net at t={t} has a single node")
    if method == "auto":
        method = "one_jump" if action.isometric else "dijkstra"
    cx = None
    if method == "one_jump":
        if not action.isometric:
            raise ValueError("one_jump closed form needs an isometric action")
        pairs = _one_jump_edges(action, net, t, LEVEL_SET_THRESHOLD)
        if keep_complex:
            cx = build_warped_complex(action, net, t, metric_cutoff)
    elif method == "dijkstra":
        cx = build_warped_complex(action, net, t, metric_cutoff)
        pairs = _dijkstra_edges(cx, LEVEL_SET_THRESHOLD)
        if keep_complex is False:
            cx = None
    else:
        raise ValueError(f"unknown method {method!r}")
    graph = Graph.from_pairs(len(net), pairs)
    return LevelSetGraph(graph, float(t), net, candidates, cx)


def check_lavish_subgraph(lavish: Graph, level: LevelSetGraph, lavish_net: Net | None = None):
    """Whether every lavish edge is an ``X_t`` edge; returns ``(ok, missing_edges)``."""
    if lavish.n != level.graph.n:
        raise NetMismatchError(f"lavish graph has {lavish.n} nodes, X_t has {level.graph.n}")
    if lavish_net is not None and not np.array_equal(lavish_net.points, level.net.points):
        raise NetMismatchError("graphs were built on different nets")
    present = np.isin(lavish.edge_keys(), level.graph.edge_keys())
    missing = lavish.edges[~present]
    return bool(len(missing) == 0), missing
