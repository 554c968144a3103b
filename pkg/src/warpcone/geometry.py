"""Compact model spaces, maximal nets and Voronoi assignment.

Points are plain ``numpy`` arrays of coordinates. A batch of points is a
``(n, dim)`` array and a single point a ``(dim,)`` array; every space method
broadcasts over leading axes. Coordinates per space:

* :class:`Circle` -- angle in ``[0, 2*pi)``
* :class:`Torus2` -- pair in ``[0, a) x [0, b)``
* :class:`Sphere2` -- unit 3-vector (the radius only scales distances)
* :class:`RotationGroup3` -- unit quaternion ``(w, x, y, z)`` with ``w >= 0``
* :class:`FiniteSet` -- integer label stored as a float, discrete metric
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from ._random import make_rng
from .exceptions import ParseError, SpaceMismatchError, UndersamplingError

logger = logging.getLogger(__name__)

STRUCTURAL_TOL = 1e-9
TRANSCENDENTAL_TOL = 1e-6
TIE_TOL = 1e-12

TWO_PI = 2.0 * math.pi


class Space:
    """Base class for the compact metric-measure spaces.

    Subclasses are frozen dataclasses, so two spaces with the same kind and
    parameters compare equal.
    """

    kind: str = ""
    dim: int = 0
    boxsize = None

    # -- to be provided by subclasses
    def distance(self, p, q):
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    @property
    def volume(self) -> float:
        raise NotImplementedError

    def ball_volume(self, r: float) -> float:
        raise NotImplementedError

    def sample(self, n: int, random_state=None) -> np.ndarray:
        raise NotImplementedError

    def canonicalize(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float)

    def embed(self, points) -> np.ndarray | None:
        """Euclidean coordinates whose distance is monotone in the geodesic one.

        ``None`` means no useful embedding; nearest-neighbour queries then fall
        back to brute force.
        """
        return None

    def chord(self, r: float) -> float:
        """Embedding radius enclosing the geodesic ball of radius ``r``."""
        raise NotImplementedError

    def params(self) -> tuple:
        raise NotImplementedError

    # -- shared helpers
    def check(self, points) -> np.ndarray:
        """Validate coordinates, returning them as a float array.

        Raises :class:`SpaceMismatchError` when the trailing dimension is wrong
        or the normalization of the space is violated.
        """
        arr = np.asarray(points, dtype=float)
        if arr.ndim == 0 or arr.shape[-1] != self.dim:
            raise SpaceMismatchError(
                f"{self.kind} points need {self.dim} coordinates, got shape {arr.shape}"
            )
        self._check_normalization(arr)
        return arr

    def _check_normalization(self, arr):
        pass

    def estimate_net_size(self, r: float) -> int:
        """Rough size of a maximal ``r``-separated set (between covering and packing)."""
        if r >= self.diameter:
            return 1
        cover = self.volume / self.ball_volume(r)
        pack = self.volume / self.ball_volume(r / 2.0)
        return max(1, int(math.ceil(math.sqrt(cover * pack))))

    def describe(self) -> str:
        return " ".join([self.kind, *(_fmt(p) for p in self.params())])

    def __str__(self):
        return self.describe()


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


@dataclass(frozen=True)
class Circle(Space):
    circumference: float = TWO_PI

    kind = "circle"
    dim = 1

    def __post_init__(self):
        if not self.circumference > 0:
            raise ValueError("circumference must be positive")

    @property
    def radius(self):
        return self.circumference / TWO_PI

    def distance(self, p, q):
        p = np.asarray(p, dtype=float)[..., 0]
        q = np.asarray(q, dtype=float)[..., 0]
        delta = np.abs(p - q) % TWO_PI
        return self.radius * np.minimum(delta, TWO_PI - delta)

    @property
    def diameter(self):
        return self.circumference / 2.0

    @property
    def volume(self):
        return self.circumference

    def ball_volume(self, r):
        return min(2.0 * r, self.circumference)

    def sample(self, n, random_state=None):
        rng = make_rng(random_state)
        return rng.uniform(0.0, TWO_PI, size=(n, 1))

    def canonicalize(self, points):
        x = np.mod(np.asarray(points, dtype=float), TWO_PI)
        return np.where(x >= TWO_PI, 0.0, x)

    def _check_normalization(self, arr):
        if np.any(arr < -STRUCTURAL_TOL) or np.any(arr >= TWO_PI + STRUCTURAL_TOL):
            raise SpaceMismatchError("circle angles must lie in [0, 2*pi)")

    def embed(self, points):
        theta = np.asarray(points, dtype=float)[..., 0]
        return self.radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)

    def chord(self, r):
        return 2.0 * self.radius * math.sin(min(r / self.radius, math.pi) / 2.0)

    def params(self):
        return (self.circumference,)


@dataclass(frozen=True)
class Torus2(Space):
    side_a: float = 1.0
    side_b: float = 1.0

    kind = "torus2"
    dim = 2

    def __post_init__(self):
        if not (self.side_a > 0 and self.side_b > 0):
            raise ValueError("torus sides must be positive")

    @property
    def sides(self):
        return np.array([self.side_a, self.side_b])

    @property
    def boxsize(self):
        return self.sides

    def distance(self, p, q):
        delta = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
        delta = np.mod(delta, self.sides)
        delta = np.minimum(delta, self.sides - delta)
        return np.sqrt(np.sum(delta * delta, axis=-1))

    @property
    def diameter(self):
        return 0.5 * math.hypot(self.side_a, self.side_b)

    @property
    def volume(self):
        return self.side_a * self.side_b

    def ball_volume(self, r):
        return min(math.pi * r * r, self.volume)

    def sample(self, n, random_state=None):
        rng = make_rng(random_state)
        return rng.uniform(0.0, 1.0, size=(n, 2)) * self.sides

    def canonicalize(self, points):
        x = np.mod(np.asarray(points, dtype=float), self.sides)
        return np.where(x >= self.sides, 0.0, x)

    def _check_normalization(self, arr):
        if np.any(arr < -STRUCTURAL_TOL) or np.any(arr >= self.sides + STRUCTURAL_TOL):
            raise SpaceMismatchError("torus coordinates must lie in [0,a) x [0,b)")

    def embed(self, points):
        return self.canonicalize(points)

    def chord(self, r):
        return r

    def params(self):
        return (self.side_a, self.side_b)


@dataclass(frozen=True)
class Sphere2(Space):
    radius: float = 1.0

    kind = "sphere2"
    dim = 3

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def distance(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        # atan2 form stays accurate near 0 and pi, unlike a bare arccos.
        cross = np.linalg.norm(np.cross(p, q), axis=-1)
        dot = np.sum(p * q, axis=-1)
        return self.radius * np.arctan2(cross, dot)

    @property
    def diameter(self):
        return math.pi * self.radius

    @property
    def volume(self):
        return 4.0 * math.pi * self.radius**2

    def ball_volume(self, r):
        angle = min(r / self.radius, math.pi)
        return 2.0 * math.pi * self.radius**2 * (1.0 - math.cos(angle))

    def sample(self, n, random_state=None):
        rng = make_rng(random_state)
        v = rng.standard_normal((n, 3))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    def canonicalize(self, points):
        v = np.asarray(points, dtype=float)
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    def _check_normalization(self, arr):
        if np.any(np.abs(np.linalg.norm(arr, axis=-1) - 1.0) > STRUCTURAL_TOL):
            raise SpaceMismatchError("sphere points must be unit vectors")

    def embed(self, points):
        return np.asarray(points, dtype=float)

    def chord(self, r):
        return 2.0 * math.sin(min(r / self.radius, math.pi) / 2.0)

    def params(self):
        return (self.radius,)


def quat_multiply(p, q):
    """Hamilton product of quaternion arrays ``(..., 4)`` in ``(w, x, y, z)`` order."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pw, px, py, pz = np.moveaxis(p, -1, 0)
    qw, qx, qy, qz = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ],
        axis=-1,
    )


def quat_to_matrix(q):
    q = np.asarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
        ],
        axis=-2,
    )


@dataclass(frozen=True)
class RotationGroup3(Space):
    """SO(3) with the bi-invariant metric ``d(p, q) = angle of q p^-1``."""

    kind = "so3"
    dim = 4

    def distance(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        dot = np.sum(p * q, axis=-1)
        sign = np.where(dot < 0, -1.0, 1.0)[..., None]
        gap = np.linalg.norm(p - sign * q, axis=-1)
        return 4.0 * np.arcsin(np.clip(gap / 2.0, 0.0, 1.0))

    @property
    def diameter(self):
        return math.pi

    @property
    def volume(self):
        return 8.0 * math.pi**2

    def ball_volume(self, r):
        r = min(r, math.pi)
        return 8.0 * math.pi * (r - math.sin(r))

    def sample(self, n, random_state=None):
        rng = make_rng(random_state)
        v = rng.standard_normal((n, 4))
        return self.canonicalize(v)

    def canonicalize(self, points):
        q = np.asarray(points, dtype=float)
        q = q / np.linalg.norm(q, axis=-1, keepdims=True)
        return np.where(q[..., :1] < 0, -q, q)

    def _check_normalization(self, arr):
        if np.any(np.abs(np.linalg.norm(arr, axis=-1) - 1.0) > STRUCTURAL_TOL):
            raise SpaceMismatchError("rotations must be unit quaternions")
        if np.any(arr[..., 0] < -STRUCTURAL_TOL):
            raise SpaceMismatchError("rotations need a nonnegative scalar part")

    def embed(self, points):
        return np.asarray(points, dtype=float)

    def chord(self, r):
        return 2.0 * math.sin(min(r, math.pi) / 4.0)

    def params(self):
        return ()


@dataclass(frozen=True)
class FiniteSet(Space):
    """``{0, ..., size-1}`` with the discrete metric and counting measure.

    Only used as the degenerate space of finite permutation actions.
    """

    size: int = 1

    kind = "finite"
    dim = 1

    def __post_init__(self):
        if int(self.size) < 1:
            raise ValueError("finite set needs at least one point")

    def distance(self, p, q):
        p = np.asarray(p, dtype=float)[..., 0]
        q = np.asarray(q, dtype=float)[..., 0]
        return (p != q).astype(float)

    @property
    def diameter(self):
        return 1.0 if self.size > 1 else 0.0

    @property
    def volume(self):
        return float(self.size)

    def ball_volume(self, r):
        return 1.0 if r <= 1.0 else float(self.size)

    def sample(self, n, random_state=None):
        rng = make_rng(random_state)
        return rng.integers(0, self.size, size=(n, 1)).astype(float)

    def _check_normalization(self, arr):
        if np.any(arr != np.round(arr)) or np.any(arr < 0) or np.any(arr >= self.size):
            raise SpaceMismatchError(f"finite points must be integers in [0, {self.size})")

    def points(self):
        return np.arange(self.size, dtype=float)[:, None]

    def chord(self, r):
        return r

    def estimate_net_size(self, r):
        return 1 if r > 1.0 else self.size

    def params(self):
        return (int(self.size),)


SPACE_KINDS = {
    "circle": Circle,
    "torus2": Torus2,
    "sphere2": Sphere2,
    "so3": RotationGroup3,
    "finite": FiniteSet,
}


def make_space(kind: str, *params) -> Space:
    """Build a space from its kind name and numeric parameters."""
    try:
        cls = SPACE_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown space kind {kind!r}; expected one of {sorted(SPACE_KINDS)}")
    if cls is FiniteSet:
        return cls(*(int(float(p)) for p in params))
    return cls(*(float(p) for p in params))


def parse_space(spec: str) -> Space:
    """Parse ``"kind"`` or ``"kind:p1,p2"``, e.g. ``"circle:6.283"`` or ``"torus2:1,1"``."""
    kind, _, rest = spec.partition(":")
    params = [p for p in rest.split(",") if p] if rest else []
    return make_space(kind, *params)


def distance(space: Space, p, q):
    """Geodesic distance between (batches of) points of ``space``."""
    return space.distance(space.check(p), space.check(q))


def sample_uniform(space: Space, random_state=None, n: int | None = None) -> np.ndarray:
    """Draw from the normalized invariant measure of ``space``.

    Returns a single point when ``n`` is None, else an ``(n, dim)`` batch.
    """
    pts = space.sample(1 if n is None else n, random_state)
    return pts[0] if n is None else pts


class NetIndex:
    """Nearest-point and radius queries against a fixed point set.

    Ties between equidistant points are resolved toward the lowest index.
    """

    def __init__(self, space: Space, points):
        self.space = space
        self.points = np.asarray(points, dtype=float).reshape(-1, space.dim)
        self.n = len(self.points)
        emb = space.embed(self.points)
        self.tree = None
        self._mirror = False
        if emb is not None and self.n > 0:
            if isinstance(space, RotationGroup3):
                # q and -q are the same rotation; index both signs.
                emb = np.vstack([emb, -emb])
                self._mirror = True
            self.tree = cKDTree(emb, boxsize=space.boxsize)

    def _map(self, idx):
        return idx % self.n if self._mirror else idx

    def query(self, X, chunk=200_000):
        """Return ``(index, distance)`` of the nearest point for each row of ``X``."""
        X = np.asarray(X, dtype=float).reshape(-1, self.space.dim)
        idx = np.empty(len(X), dtype=np.int64)
        dist = np.empty(len(X))
        for start in range(0, len(X), chunk):
            sl = slice(start, start + chunk)
            idx[sl], dist[sl] = self._query(X[sl])
        return idx, dist

    def _query(self, X):
        if self.tree is None:
            d = self.space.distance(X[:, None, :], self.points[None, :, :])
            i = np.argmin(d, axis=1)
            return i, d[np.arange(len(X)), i]
        k = min(4 if self._mirror else 2, self.tree.n)
        _, cand = self.tree.query(self.space.embed(X), k=k)
        cand = self._map(cand.reshape(len(X), k))
        d = self.space.distance(X[:, None, :], self.points[cand])
        best = d.min(axis=1, keepdims=True)
        tied = d <= best + TIE_TOL * (1.0 + best)
        i = np.where(tied, cand, np.iinfo(np.int64).max).min(axis=1)
        return i, self.space.distance(X, self.points[i])

    def query_pairs(self, X, radius, chunk=100_000):
        """All ``(row of X, point index)`` pairs at geodesic distance ``<= radius``."""
        X = np.asarray(X, dtype=float).reshape(-1, self.space.dim)
        rows, cols = [], []
        for start in range(0, len(X), chunk):
            part = X[start : start + chunk]
            if self.tree is None:
                d = self.space.distance(part[:, None, :], self.points[None, :, :])
                r, c = np.nonzero(d <= radius)
            else:
                other = cKDTree(self.space.embed(part), boxsize=self.space.boxsize)
                hits = other.sparse_distance_matrix(
                    self.tree, self.space.chord(radius) * (1 + 1e-9) + 1e-12,
                    output_type="ndarray",
                )
                r = hits["i"].astype(np.int64)
                c = self._map(hits["j"].astype(np.int64))
                keep = self.space.distance(part[r], self.points[c]) <= radius
                r, c = r[keep], c[keep]
                if self._mirror and len(r):
                    key = np.unique(r * self.n + c)
                    r, c = key // self.n, key % self.n
            rows.append(r + start)
            cols.append(c)
        if not rows:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        return np.concatenate(rows), np.concatenate(cols)


@dataclass(frozen=True, eq=False)
class Net:
    """An ``r``-separated point set, maximal within the candidate cloud it came from."""

    space: Space
    points: np.ndarray
    r: float
    candidate_budget: int = 0
    density_deficit: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    @cached_property
    def index(self) -> NetIndex:
        return NetIndex(self.space, self.points)

    def assign(self, X) -> np.ndarray:
        """Voronoi cell index of each point in ``X``."""
        return self.index.query(X)[0]


def greedy_net_indices(space: Space, candidates, r: float) -> np.ndarray:
    """Greedy maximal ``r``-separated subset of ``candidates``, in input order.

    A candidate is kept unless an earlier kept point lies at distance ``< r``,
    so the result is ``r``-separated and every candidate is within ``r`` of
    it.
    """
    candidates = np.asarray(candidates, dtype=float).reshape(-1, space.dim)
    n = len(candidates)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    if r > space.diameter:
        return np.zeros(1, dtype=np.int64)
    index = NetIndex(space, candidates)
    covered = np.zeros(n, dtype=bool)
    kept = []
    radius = space.chord(r) * (1 + 1e-9) + 1e-12
    for i in range(n):
        if covered[i]:
            continue
        kept.append(i)
        covered[i] = True
        if index.tree is None:
            near = np.flatnonzero(space.distance(candidates, candidates[i]) < r)
        else:
            hits = index.tree.query_ball_point(space.embed(candidates[i]), radius)
            near = index._map(np.asarray(hits, dtype=np.int64))
            near = near[space.distance(candidates[near], candidates[i]) < r]
        covered[near] = True
    return np.asarray(kept, dtype=np.int64)


def measure_density_deficit(net: Net, n_probe: int = 2000, random_state=None) -> float:
    """Fraction of fresh uniform samples farther than ``r`` from the net."""
    probe = net.space.sample(n_probe, random_state)
    _, d = net.index.query(probe)
    return float(np.mean(d >= net.r))


def greedy_net(
    space: Space,
    r: float,
    candidate_budget: int,
    random_state=None,
    n_probe: int = 2000,
) -> Net:
    """Maximal ``r``-separated net by greedy insertion over uniform candidates.

    Maximality holds with respect to the ``candidate_budget`` sampled
    candidates. The fraction of fresh probe samples left uncovered is stored
    as ``density_deficit``; a nonzero value means the budget was too small
    for the net to be ``r``-dense in the whole space.
    """
    if not r > 0:
        raise ValueError("separation r must be positive")
    if candidate_budget < 1:
        raise ValueError("candidate_budget must be at least 1")
    rng = make_rng(random_state)
    candidates = space.sample(candidate_budget, rng)
    return net_from_candidates(space, candidates, r, rng=rng, n_probe=n_probe)


def net_from_candidates(space, candidates, r, rng=None, n_probe=2000) -> Net:
    """Like :func:`greedy_net` but over an explicit candidate cloud."""
    keep = greedy_net_indices(space, candidates, r)
    net = Net(space, np.array(candidates)[keep], float(r), candidate_budget=len(candidates))
    if n_probe and not isinstance(space, FiniteSet):
        deficit = measure_density_deficit(net, n_probe, make_rng(rng))
        object.__setattr__(net, "density_deficit", deficit)
        if deficit > 0:
            logger.warning(
                "net with r=%g is not r-dense: %.2f%% of probes uncovered "
                "(candidate budget %d)", r, 100 * deficit, len(candidates),
            )
    return net


def voronoi_assign(net: Net, p):
    """Index of the net point nearest to ``p`` (lowest index on exact ties).

    Accepts a single point or a batch; returns an int or an index array.
    """
    p = net.space.check(p)
    if p.ndim == 1:
        return int(net.assign(p[None, :])[0])
    return net.assign(p)


def estimate_doubling(
    space: Space,
    radii,
    samples: int,
    random_state=None,
    n_centers: int = 8,
) -> float:
    """Monte Carlo estimate of the doubling constant ``max nu(B(2r)) / nu(B(r))``.

    Raises :class:`UndersamplingError` if some ball of radius ``r`` caught no
    samples.
    """
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    if np.any(2 * radii >= space.diameter):
        raise ValueError("each 2r must stay below the diameter")
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    rng = make_rng(random_state)
    cloud = space.sample(samples, rng)
    centers = space.sample(n_centers, rng)
    worst = 1.0
    for c in centers:
        d = space.distance(cloud, c)
        for r in radii:
            inner = np.count_nonzero(d < r)
            if inner == 0:
                raise UndersamplingError(f"ball of radius {r} caught no samples")
            worst = max(worst, np.count_nonzero(d < 2 * r) / inner)
    return float(worst)


NET_HEADER = "# warpcone-net v1"


def dumps_net(net: Net) -> str:
    lines = [NET_HEADER, f"space {net.space.describe()} r {_fmt(net.r)}"]
    for p in np.asarray(net.points).reshape(len(net), -1):
        lines.append(" ".join(format(float(x), ".17g") for x in p))
    return "\n".join(lines) + "\n"


def loads_net(text: str) -> Net:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != NET_HEADER:
        raise ParseError(f"expected {NET_HEADER!r}", line=1)
    if len(lines) < 2:
        raise ParseError("missing space line", line=2)
    tokens = lines[1].split()
    if len(tokens) < 4 or tokens[0] != "space" or tokens[-2] != "r":
        raise ParseError("expected 'space <kind> <params...> r <r>'", line=2)
    try:
        space = make_space(tokens[1], *tokens[2:-2])
        r = float(tokens[-1])
    except ValueError as exc:
        raise ParseError(str(exc), line=2) from None
    points = []
    for lineno, line in enumerate(lines[2:], start=3):
        try:
            row = [float(x) for x in line.split()]
        except ValueError:
            raise ParseError(f"bad coordinate in {line!r}", line=lineno) from None
        if len(row) != space.dim:
            raise ParseError(f"expected {space.dim} coordinates", line=lineno)
        points.append(row)
    pts = np.array(points, dtype=float).reshape(-1, space.dim)
    return Net(space, pts, r)
