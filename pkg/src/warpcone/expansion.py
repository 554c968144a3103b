"""Expansion in measure: estimation, exact enumeration, and closed-form constants."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._random import make_rng
from .exceptions import SizeLimitError
from .graphs import Graph, TransitionMatrix
from .partition import Partition

BRUTE_FORCE_LIMIT = 24
MEASURE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FiniteMeasureSystem:
    """Cells with measures and, per generator, which cells each image meets.

    ``incidence[k, i, j]`` is true when generator ``k`` carries cell ``i``
    onto cell ``j`` with positive measure.
    """

    measures: np.ndarray
    incidence: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.measures, dtype=float)
        inc = np.asarray(self.incidence, dtype=bool)
        if inc.ndim == 2:
            inc = inc[None]
        n = len(mu)
        if inc.shape[1:] != (n, n):
            raise ValueError("incidence must be (generators, n, n)")
        if np.any(mu <= 0) or abs(mu.sum() - 1.0) > 1e-9:
            raise ValueError("measures must be positive and sum to 1")
        object.__setattr__(self, "measures", mu)
        object.__setattr__(self, "incidence", inc)

    @property
    def n(self) -> int:
        return len(self.measures)

    @property
    def reach(self) -> np.ndarray:
        """Union over generators, with the diagonal (identity) included."""
        return self.incidence.any(axis=0) | np.eye(self.n, dtype=bool)

    @property
    def Q(self) -> float:
        return float(self.measures.max() / self.measures.min())

    def graph(self) -> Graph:
        i, j = np.nonzero(self.reach)
        return Graph.from_pairs(self.n, np.stack([i, j], axis=1))

    @classmethod
    def from_transition(cls, tm: TransitionMatrix):
        reach = tm.matrix.toarray() > 0
        return cls(np.asarray(tm.measures) / np.sum(tm.measures), reach)


@dataclass(frozen=True, eq=False)
class ExpansionReport:
    alpha_hat: float
    witness_cells: np.ndarray
    families: tuple
    slack: float

    def to_dict(self) -> dict:
        return {
            "alpha_hat": self.alpha_hat,
            "witness_cells": [int(c) for c in self.witness_cells],
            "families": list(self.families),
            "slack": self.slack,
        }


def _reach_masks(reach: np.ndarray) -> np.ndarray:
    n = reach.shape[0]
    weights = (np.uint64(1) << np.arange(n, dtype=np.uint64))
    return (reach.astype(np.uint64) * weights).sum(axis=1).astype(np.uint64)


def brute_force_alpha(system: FiniteMeasureSystem, slack: float = 0.0):
    """Exact expansion constant over all cell unions of measure at most ``1/2 + slack``.

    Returns ``(alpha, witness_cells)`` where ``alpha = min nu(S A) / nu(A) - 1``.
    """
    n = system.n
    if n > BRUTE_FORCE_LIMIT:
        raise SizeLimitError(f"brute force limited to {BRUTE_FORCE_LIMIT} cells (got {n})")
    masks = _reach_masks(system.reach).astype(np.uint32)
    image = np.zeros(1 << n, dtype=np.uint32)
    measure = np.zeros(1 << n)
    for k in range(n):
        half = 1 << k
        np.bitwise_or(image[:half], masks[k], out=image[half : 2 * half])
        np.add(measure[:half], system.measures[k], out=measure[half : 2 * half])
    ok = (measure > 0) & (measure <= 0.5 + slack + MEASURE_TOL)
    ratio = np.full(1 << n, np.inf)
    ratio[ok] = measure[image[ok]] / measure[ok]
    best = int(np.argmin(ratio))
    witness = np.array([i for i in range(n) if (best >> i) & 1], dtype=np.int64)
    return float(ratio[best] - 1.0), witness


class _PrefixScanner:
    """Measures of ``A`` and ``S A`` along growing prefixes of a cell order."""

    def __init__(self, reach_lists, measures):
        self.reach_lists = reach_lists
        self.measures = measures

    def scan(self, order, limit):
        hits = np.zeros(len(self.measures), dtype=np.int64)
        inside = 0.0
        image = 0.0
        best, best_k = math.inf, 0
        for k, c in enumerate(order, start=1):
            inside += self.measures[c]
            if inside > limit:
                break
            targets = self.reach_lists[c]
            fresh = targets[hits[targets] == 0]
            image += float(self.measures[fresh].sum())
            hits[targets] += 1
            ratio = image / inside
            if ratio < best:
                best, best_k = ratio, k
        return best, np.asarray(order[:best_k])


def _refine(reach: sp.csr_matrix, mu: np.ndarray, start, limit: float, max_steps: int):
    """Steepest descent on ``nu(S A) / nu(A)`` by toggling one cell at a time.

    ``reach`` is the boolean reach matrix (row ``i``: cells reachable from
    ``i``). Only unions of measure in ``(0, limit]`` are visited.
    """
    n = len(mu)
    inside = np.zeros(n, dtype=bool)
    inside[np.asarray(start, dtype=np.int64)] = True
    reach_t = reach.T.tocsr()
    hits = reach_t @ inside.astype(np.int64)
    a = float(mu[inside].sum())
    b = float(mu[hits > 0].sum())
    for _ in range(max_steps):
        gain = reach @ (mu * (hits == 0))
        loss = reach @ (mu * (hits == 1))
        new_a = np.where(inside, a - mu, a + mu)
        new_b = np.where(inside, b - loss, b + gain)
        feasible = (new_a > MEASURE_TOL) & (new_a <= limit)
        ratio = np.where(feasible, new_b / np.where(feasible, new_a, 1.0), np.inf)
        c = int(np.argmin(ratio))
        if not ratio[c] < b / a - 1e-12:
            break
        step = -1 if inside[c] else 1
        inside[c] = not inside[c]
        hits += step * reach[c].toarray().ravel().astype(np.int64)
        a, b = float(new_a[c]), float(new_b[c])
    return b / a, np.flatnonzero(inside)


def estimate_alpha(
    action,
    partition: Partition,
    tm: TransitionMatrix,
    fiedler=None,
    n_random: int = 1000,
    n_balls: int = 32,
    exhaustive: bool = False,
    refine: int = 20,
    slack: float | None = None,
    random_state=0,
) -> ExpansionReport:
    """Upper estimate of the expansion constant over families of cell unions.

    ``S A`` is the union of cells reachable from ``A`` with positive
    transition probability. Families: random unions, metric balls around
    random net points, and Fiedler sweep prefixes from both ends (when a
    vector is given); ``exhaustive`` adds every union (at most 24 cells).
    The ``refine`` best witnesses are then improved by single-cell toggles.
    Unions may exceed measure 1/2 by ``slack``, which defaults to half the
    smallest cell measure.
    """
    mu = np.asarray(tm.measures, dtype=float)
    mu = mu / mu.sum()
    n = len(mu)
    if slack is None:
        slack = float(mu.min()) / 2.0
    limit = 0.5 + slack + MEASURE_TOL
    P = tm.matrix.tocsr()
    reach_lists = [np.union1d(P.indices[P.indptr[i] : P.indptr[i + 1]], [i]) for i in range(n)]
    scanner = _PrefixScanner(reach_lists, mu)
    rng = make_rng(random_state)
    candidates = []
    families = []

    if n_random:
        families.append("random")
        for _ in range(n_random):
            candidates.append(scanner.scan(rng.permutation(n), rng.uniform(0, limit)))
    if n_balls and partition is not None and len(partition.net) == n:
        families.append("balls")
        space = partition.space
        centers = rng.choice(n, size=min(n_balls, n), replace=False)
        for c in centers:
            d = space.distance(partition.net.points, partition.net.points[c])
            candidates.append(scanner.scan(np.argsort(d, kind="stable"), limit))
    if fiedler is not None:
        families.append("sweep")
        order = np.argsort(np.asarray(fiedler, dtype=float), kind="stable")
        candidates.append(scanner.scan(order, limit))
        candidates.append(scanner.scan(order[::-1], limit))
    if exhaustive:
        families.append("exhaustive")
        alpha, witness = brute_force_alpha(FiniteMeasureSystem(mu, P.toarray() > 0), slack)
        candidates.append((alpha + 1.0, witness))

    if refine and candidates:
        families.append("local")
        reach = sp.csr_matrix(P, copy=True)
        reach.data[:] = 1.0
        reach = (reach + sp.identity(n, format="csr")).astype(bool).astype(float).tocsr()
        ranked = sorted(candidates, key=lambda c: c[0])
        seen = set()
        for _, start in ranked:
            key = tuple(np.sort(start).tolist())
            if key in seen or not len(start):
                continue
            seen.add(key)
            candidates.append(_refine(reach, mu, start, limit, max_steps=4 * n))
            if len(seen) >= refine:
                break

    ratio, witness = min(candidates, key=lambda c: c[0])
    return ExpansionReport(float(ratio - 1.0), np.sort(witness), tuple(families), float(slack))


def alpha_to_cheeger(alpha: float, Q: float) -> float:
    """Cheeger lower bound implied by ``alpha``-expansion and measure ratio ``Q``."""
    if alpha < 0 or Q < 1:
        raise ValueError("need alpha >= 0 and Q >= 1")
    return min(alpha / Q, alpha / ((1.0 + alpha) * Q * Q))


def _ceil_log2(x: float) -> int:
    # Snap values within rounding of an exact power of two before ceiling.
    e = math.log2(x)
    r = round(e)
    return int(r) if abs(e - r) < 1e-12 else math.ceil(e)


def degree_bound(D: float, eta_of_xi: float, Theta: float, Q: float, xi: float) -> float:
    """Degree bound for approximating graphs of quasi-symmetric actions on doubling spaces.

    Evaluates ``sup_t min(Q L2(t), Q Theta L3(1/t) L1)`` with
    ``L1 = D^ceil(log2 eta)``, ``L2(t) = D^ceil(log2(4 xi (1 + t)))`` and
    ``L3(s) = D^ceil(log2(s + 1))``. Both branches are step functions of
    ``t``, so besides the grid ``2^-30 .. 2^30`` every jump point is also
    probed from both sides.
    """
    if min(D, eta_of_xi, Theta, Q, xi) < 1:
        raise ValueError("all arguments must be >= 1")
    L1 = D ** _ceil_log2(eta_of_xi)

    def value(t):
        L2 = D ** _ceil_log2(4.0 * xi * (1.0 + t))
        L3 = D ** _ceil_log2(1.0 / t + 1.0)
        return min(Q * L2, Q * Theta * L3 * L1)

    ts = {2.0**k for k in range(-30, 31)}
    for k in range(-32, 64):
        for jump in (2.0**k / (4.0 * xi) - 1.0, 1.0 / (2.0**k - 1.0) if k > 0 else -1.0):
            if 2.0**-30 <= jump <= 2.0**30:
                ts.update((jump, jump * (1 - 1e-9), jump * (1 + 1e-9)))
    return max(value(t) for t in sorted(ts))


def kazhdan_constant(m: int) -> float:
    """Kazhdan constant ``sqrt(2 - 2 sqrt(2m - 1) / m)`` of an ``m``-element Kazhdan set."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return math.sqrt(max(2.0 - 2.0 * math.sqrt(2 * m - 1) / m, 0.0))
