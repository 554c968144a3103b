"""Independent reference implementations used only by the tests.

Nothing here imports the package's numerical code, so agreement is a real
cross-check rather than a tautology.
"""
import itertools
import math

import numpy as np


def jacobi_eigvalsh(A, tol=1e-14, max_sweeps=100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off < tol * max(1.0, np.abs(A).max()):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q], J[q, p] = s, -s
                A = J.T @ A @ J
    return np.sort(np.diag(A))


def normalized_laplacian_dense(n, edges):
    A = np.zeros((n, n))
    for u, v in edges:
        A[u, v] = A[v, u] = 1.0
    d = A.sum(axis=1)
    inv = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    L = np.eye(n) - inv[:, None] * A * inv[None, :]
    L[d == 0, d == 0] = 0.0
    return L


def lambda2_oracle(n, edges):
    return float(jacobi_eigvalsh(normalized_laplacian_dense(n, edges))[1])


def neighbor_sets(n, edges):
    nb = [set() for _ in range(n)]
    for u, v in edges:
        nb[u].add(v)
        nb[v].add(u)
    return nb


def vertex_boundary(nb, W):
    W = set(W)
    return {v for w in W for v in nb[w]} - W


def cheeger_oracle(n, edges):
    """Minimum of |dW| / |W| over nonempty W with |W| <= n // 2."""
    nb = neighbor_sets(n, edges)
    best = math.inf
    for k in range(1, n // 2 + 1):
        for W in itertools.combinations(range(n), k):
            best = min(best, len(vertex_boundary(nb, W)) / k)
    return best


def alpha_oracle(measures, reach, limit=0.5):
    """min over unions A with 0 < nu(A) <= limit of nu(S A) / nu(A), minus 1."""
    mu = np.asarray(measures, dtype=float)
    reach = np.asarray(reach, dtype=bool) | np.eye(len(mu), dtype=bool)
    best = math.inf
    for bits in itertools.product((False, True), repeat=len(mu)):
        A = np.array(bits)
        a = mu[A].sum()
        if a <= 0 or a > limit + 1e-12:
            continue
        image = reach[A].any(axis=0)
        best = min(best, mu[image].sum() / a)
    return best - 1.0


def degree_bound_oracle(D, eta, Theta, Q, xi, per_octave=97):
    """Dense log-grid scan of sup_t min(Q L2(t), Q Theta L3(1/t) L1)."""
    L1 = D ** math.ceil(math.log2(eta) - 1e-12)
    best = 0.0
    for k in range(-30 * per_octave, 30 * per_octave + 1):
        t = 2.0 ** (k / per_octave)
        L2 = D ** math.ceil(math.log2(4 * xi * (1 + t)) - 1e-12)
        L3 = D ** math.ceil(math.log2(1 / t + 1) - 1e-12)
        best = max(best, min(Q * L2, Q * Theta * L3 * L1))
    return best


def cycle_edges(n):
    return sorted(tuple(sorted((i, (i + 1) % n))) for i in range(n)) if n > 2 else [(0, 1)]


def complete_edges(n):
    return list(itertools.combinations(range(n), 2))
