"""Spectral and isoperimetric diagnostics of graphs and transition operators."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import ConvergenceError, NotStochasticError, SizeLimitError
from .graphs import Graph, TransitionMatrix

EXACT_CHEEGER_LIMIT = 24


@dataclass(frozen=True, eq=False)
class SpectralReport:
    lambda2: float
    fiedler: np.ndarray = field(repr=False)
    iterations: int
    residual: float


@dataclass(frozen=True, eq=False)
class CheegerReport:
    method: str
    lower: float
    upper: float
    witness: np.ndarray

    @property
    def value(self) -> float | None:
        return self.upper if self.method == "exact" else None


def _seed_from(*arrays) -> int:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return int.from_bytes(h.digest()[:8], "little")


def boundary(graph: Graph, W) -> np.ndarray:
    """Exterior vertex boundary: vertices outside ``W`` adjacent to ``W``."""
    W = np.unique(np.asarray(W, dtype=np.int64).ravel())
    if len(W) and (W[0] < 0 or W[-1] >= graph.n):
        raise IndexError(f"vertex out of range for a graph on {graph.n} vertices")
    inside = np.zeros(graph.n, dtype=bool)
    inside[W] = True
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    touched = np.concatenate([v[inside[u]], u[inside[v]]])
    out = np.unique(touched)
    return out[~inside[out]]


# -- exact Cheeger constant ------------------------------------------------------


def _neighbor_masks(graph: Graph) -> np.ndarray:
    masks = np.zeros(graph.n, dtype=np.uint32)
    for u, v in graph.edges.tolist():
        masks[u] |= np.uint32(1 << v)
        masks[v] |= np.uint32(1 << u)
    return masks


def _subset_union_table(masks: np.ndarray) -> np.ndarray:
    """``table[S]`` = OR of ``masks[i]`` over the bits ``i`` of ``S``."""
    n = len(masks)
    table = np.zeros(1 << n, dtype=np.uint32)
    for k in range(n):
        half = 1 << k
        np.bitwise_or(table[:half], masks[k], out=table[half : 2 * half])
    return table


def cheeger_exact(graph: Graph) -> CheegerReport:
    """Exact vertex Cheeger constant by enumerating all subsets of at most half size.

    Neighbourhoods of all ``2^n`` subsets are built by doubling, so the cost
    is a handful of vectorized passes over ``2^n`` words. Limited to
    ``n <= 24``.
    """
    n = graph.n
    if n > EXACT_CHEEGER_LIMIT:
        raise SizeLimitError(
            f"exhaustive Cheeger limited to {EXACT_CHEEGER_LIMIT} vertices (got {n}); "
            "use cheeger_bounds instead"
        )
    if n < 2:
        raise ValueError("Cheeger constant needs at least two vertices")
    nbr = _subset_union_table(_neighbor_masks(graph))
    subsets = np.arange(1 << n, dtype=np.uint32)
    size = np.bitwise_count(subsets)
    bsize = np.bitwise_count(nbr & ~subsets)
    ok = (size >= 1) & (size <= n // 2)
    ratio = np.where(ok, bsize / np.maximum(size, 1), np.inf)
    best = int(np.argmin(ratio))
    value = float(ratio[best])
    witness = np.flatnonzero([(best >> i) & 1 for i in range(n)])
    return CheegerReport("exact", value, value, witness)


# -- Lanczos for the second eigenvalue ---------------------------------------------


def _thick_restart_lanczos(matvec, n, deflate, v0, tol, max_iter, krylov=60, keep=20):
    """Smallest eigenpair of a symmetric operator on the complement of ``deflate``.

    Lanczos with full reorthogonalization, restarted by keeping the ``keep``
    lowest Ritz vectors. Returns ``(theta, vector, matvecs, residual)``.
    """
    dim = n - deflate.shape[1]
    m = min(krylov, dim)
    keep = min(keep, max(m - 1, 1))

    def project(x):
        return x - deflate @ (deflate.T @ x)

    V = np.zeros((n, m + 1))
    H = np.zeros((m + 1, m + 1))
    v = project(v0)
    V[:, 0] = v / np.linalg.norm(v)
    start = 0
    matvecs = 0
    theta, y, res = math.nan, V[:, 0], math.inf
    while True:
        beta = 0.0
        j_end = m
        for j in range(start, m):
            w = matvec(V[:, j])
            matvecs += 1
            w = project(w)
            h = V[:, : j + 1].T @ w
            w -= V[:, : j + 1] @ h
            h2 = V[:, : j + 1].T @ w
            w -= V[:, : j + 1] @ h2
            w = project(w)
            h += h2
            H[: j + 1, j] = h
            H[j, : j + 1] = h
            beta = float(np.linalg.norm(w))
            if beta <= 1e-12 * max(1.0, abs(h[j])) or j + 1 == dim:
                j_end = j + 1
                beta = 0.0
                break
            V[:, j + 1] = w / beta
            H[j + 1, j] = H[j, j + 1] = beta
        T = H[:j_end, :j_end]
        evals, evecs = np.linalg.eigh((T + T.T) / 2.0)
        theta = float(evals[0])
        y = V[:, :j_end] @ evecs[:, 0]
        res = abs(beta * evecs[j_end - 1, 0])
        if res < tol or beta == 0.0:
            break
        if matvecs >= max_iter:
            raise ConvergenceError(
                f"Lanczos did not reach residual {tol} in {max_iter} steps",
                best_estimate=theta, residual=res,
            )
        k = min(keep, j_end - 1)
        Vk = V[:, :j_end] @ evecs[:, :k]
        coupling = beta * evecs[j_end - 1, :k]
        nxt = V[:, j_end].copy()
        H[:] = 0.0
        V[:, :k] = Vk
        V[:, k] = nxt
        V[:, k + 1 :] = 0.0
        H[np.arange(k), np.arange(k)] = evals[:k]
        H[k, :k] = coupling
        H[:k, k] = coupling
        start = k
    resid = float(np.linalg.norm(project(matvec(y)) - theta * y))
    return theta, y, matvecs, resid


def normalized_laplacian(graph: Graph) -> sp.csr_matrix:
    A = graph.adjacency()
    d = graph.degrees().astype(float)
    inv = np.where(d > 0, 1.0 / np.sqrt(np.maximum(d, 1e-300)), 0.0)
    return (sp.identity(graph.n, format="csr") - sp.diags(inv) @ A @ sp.diags(inv)).tocsr()


def lambda2(graph: Graph, tol: float = 1e-10, max_iter: int = 50_000) -> SpectralReport:
    """Second-smallest eigenvalue of the normalized Laplacian and its eigenvector.

    Disconnected graphs return 0 at once, with a Fiedler vector separating
    the smallest component. The Lanczos start vector is seeded from the edge
    list, so reports are reproducible bit for bit.
    """
    n = graph.n
    if n < 2:
        return SpectralReport(0.0, np.zeros(n), 0, 0.0)
    d = graph.degrees().astype(float)
    sqrt_d = np.sqrt(d)
    labels = sp.csgraph.connected_components(graph.adjacency(), directed=False)[1]
    if labels.max() > 0 or np.any(d == 0):
        sizes = np.bincount(labels)
        comp = labels == np.argmin(sizes)
        f = np.where(comp, 1.0, -comp.sum() / max((~comp).sum(), 1))
        return SpectralReport(0.0, f / np.linalg.norm(f), 0, 0.0)
    L = normalized_laplacian(graph)
    u = (sqrt_d / np.linalg.norm(sqrt_d))[:, None]
    rng = np.random.default_rng(_seed_from(np.array([n]), graph.edges))
    theta, vec, its, resid = _thick_restart_lanczos(
        lambda x: L @ x, n, u, rng.standard_normal(n), tol, max_iter
    )
    if resid > max(tol, 1e-12) * 10:
        raise ConvergenceError("Lanczos residual check failed", best_estimate=theta, residual=resid)
    return SpectralReport(float(min(max(theta, 0.0), 2.0)), vec, its, resid)


# -- sweep cuts and bounds -------------------------------------------------------------


def _sweep(graph: Graph, order: np.ndarray, limit: int):
    A = graph.adjacency()
    indptr, indices = A.indptr, A.indices
    inside = np.zeros(graph.n, dtype=bool)
    hits = np.zeros(graph.n, dtype=np.int64)
    bsize = 0
    best, best_k = math.inf, 0
    for k, v in enumerate(order[:limit].tolist(), start=1):
        if hits[v] > 0:
            bsize -= 1
        inside[v] = True
        nb = indices[indptr[v] : indptr[v + 1]]
        hits[nb] += 1
        bsize += int(np.count_nonzero((hits[nb] == 1) & ~inside[nb]))
        if bsize / k < best:
            best, best_k = bsize / k, k
    return best, np.sort(order[:best_k])


def cheeger_sweep(graph: Graph, fiedler):
    """Best prefix cut of the Fiedler order (either end, size at most ``n // 2``).

    Returns ``(upper_bound, witness)``; the witness attains the bound.
    """
    n = graph.n
    limit = n // 2
    if limit < 1:
        raise ValueError("sweep needs at least two vertices")
    d = graph.degrees().astype(float)
    score = np.asarray(fiedler, dtype=float) / np.sqrt(np.maximum(d, 1.0))
    order = np.argsort(score, kind="stable")
    lo = _sweep(graph, order, limit)
    hi = _sweep(graph, order[::-1].copy(), limit)
    return min(lo, hi, key=lambda r: r[0])


def cheeger_bounds(graph: Graph, spectral: SpectralReport | None = None) -> CheegerReport:
    """Sandwich for the vertex Cheeger constant.

    The lower bound converts the spectral edge bound ``lambda2 / 2`` to vertex
    boundaries by dividing by the maximum degree; the upper bound is the
    sweep cut.
    """
    if spectral is None:
        spectral = lambda2(graph)
    dmax = max(int(graph.degrees().max()), 1)
    lower = (spectral.lambda2 / 2.0) / dmax
    upper, witness = cheeger_sweep(graph, spectral.fiedler)
    return CheegerReport("bounds", float(lower), float(upper), witness)


# -- transition operators ------------------------------------------------------------------


def sigma2(tm: TransitionMatrix, tol: float = 1e-10, max_iter: int = 200_000) -> float:
    """Second singular value of the transition operator on mean-zero functions.

    Works in ``L^2`` of the cell measures: the operator is conjugated by the
    square root of the measures, the constant direction is projected out on
    both sides, and power iteration runs on the result composed with its
    adjoint.
    """
    P = sp.csr_matrix(tm.matrix)
    if P.shape[0] != P.shape[1]:
        raise NotStochasticError("transition matrix must be square")
    if P.nnz and P.data.min() < -1e-12:
        raise NotStochasticError("negative transition probabilities")
    rows = np.asarray(P.sum(axis=1)).ravel()
    if np.any(np.abs(rows - 1.0) > 1e-9):
        raise NotStochasticError(f"rows sum to {rows.min()}..{rows.max()}, not 1")
    mu = np.asarray(tm.measures, dtype=float)
    mu = mu / mu.sum()
    n = P.shape[0]
    if n < 2:
        return 0.0
    s = np.sqrt(mu)
    T = sp.diags(s) @ P @ sp.diags(1.0 / s)
    u = s / np.linalg.norm(s)

    def proj(x):
        return x - u * (u @ x)

    def op(x):
        y = proj(T @ proj(x))
        return proj(T.T @ y)

    rng = np.random.default_rng(_seed_from(P.indptr, P.indices, P.data))
    x = proj(rng.standard_normal(n))
    x /= np.linalg.norm(x)
    rho = 0.0
    for _ in range(max_iter):
        y = op(x)
        rho = float(x @ y)
        norm = float(np.linalg.norm(y))
        if norm <= 1e-300:
            return 0.0
        if np.linalg.norm(y - rho * x) <= tol:
            break
        x = y / norm
    else:
        raise ConvergenceError("power iteration for sigma2 did not converge",
                               best_estimate=math.sqrt(max(rho, 0.0)))
    return float(min(math.sqrt(max(rho, 0.0)), 1.0))
