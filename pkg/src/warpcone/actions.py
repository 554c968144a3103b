"""Finitely generated group actions on the model spaces.

An action is a symmetric generating set ``S`` (identity included, closed
under inverses) together with one concrete map per generator. The catalog
holds the expanding and amenable examples used by the experiments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._random import make_rng
from .exceptions import SpaceMismatchError
from .geometry import (
    TWO_PI,
    Circle,
    FiniteSet,
    NetIndex,
    RotationGroup3,
    Space,
    Sphere2,
    Torus2,
    quat_multiply,
)

IDENTITY = "1"
INVERSE_SUFFIX = "^-1"


def formal_inverse(name: str) -> str:
    if name == IDENTITY:
        return IDENTITY
    if name.endswith(INVERSE_SUFFIX):
        return name[: -len(INVERSE_SUFFIX)]
    return name + INVERSE_SUFFIX


@dataclass(frozen=True)
class GeneratorSet:
    """Ordered symmetric generating set containing the identity."""

    elements: tuple

    def __post_init__(self):
        names = set(self.elements)
        if IDENTITY not in names:
            raise ValueError("generating set must contain the identity")
        missing = [g for g in self.elements if formal_inverse(g) not in names]
        if missing:
            raise ValueError(f"generating set not closed under inverses: {missing}")
        if len(names) != len(self.elements):
            raise ValueError("duplicate generators")

    def __iter__(self):
        return iter(self.elements)

    def __len__(self):
        return len(self.elements)

    def __contains__(self, g):
        return g in self.elements

    def inverse(self, g: str) -> str:
        if g not in self:
            raise KeyError(g)
        return formal_inverse(g)


def symmetrize(raw_generators) -> GeneratorSet:
    """Add the identity and the formal inverses; applying it twice changes nothing.

    >>> symmetrize(["a"]).elements
    ('1', 'a', 'a^-1')
    """
    out = [IDENTITY]
    for g in raw_generators:
        for h in (g, formal_inverse(g)):
            if h not in out:
                out.append(h)
    return GeneratorSet(tuple(out))


# -- generator maps ---------------------------------------------------------
# Each map acts on a batch of points of a fixed space and knows its inverse.


class IdentityMap:
    isometry = True

    def __call__(self, points):
        return np.array(points, dtype=float, copy=True)

    def inverse(self):
        return self


@dataclass(frozen=True, eq=False)
class CircleRotation:
    angle: float
    isometry = True

    def __call__(self, points):
        x = np.mod(np.asarray(points, dtype=float) + self.angle, TWO_PI)
        return np.where(x >= TWO_PI, 0.0, x)

    def inverse(self):
        return CircleRotation(-self.angle)


@dataclass(frozen=True, eq=False)
class Translation:
    shift: np.ndarray
    sides: np.ndarray
    isometry = True

    def __call__(self, points):
        x = np.mod(np.asarray(points, dtype=float) + self.shift, self.sides)
        return np.where(x >= self.sides, 0.0, x)

    def inverse(self):
        return Translation(-np.asarray(self.shift), self.sides)


@dataclass(frozen=True, eq=False)
class SphereRotation:
    matrix: np.ndarray
    isometry = True

    def __call__(self, points):
        return np.asarray(points, dtype=float) @ np.asarray(self.matrix).T

    def inverse(self):
        return SphereRotation(np.asarray(self.matrix).T)


@dataclass(frozen=True, eq=False)
class LeftMultiplication:
    """``p -> g p`` on unit quaternions, sign-canonicalized afterwards."""

    quaternion: np.ndarray
    isometry = True

    def __call__(self, points):
        q = quat_multiply(self.quaternion, np.asarray(points, dtype=float))
        return np.where(q[..., :1] < 0, -q, q)

    def inverse(self):
        w, x, y, z = self.quaternion
        return LeftMultiplication(np.array([w, -x, -y, -z]))


@dataclass(frozen=True, eq=False)
class Permutation:
    perm: np.ndarray
    isometry = True

    def __call__(self, points):
        idx = np.asarray(points, dtype=float).astype(np.int64)
        return np.asarray(self.perm)[idx].astype(float)

    def inverse(self):
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(len(self.perm))
        return Permutation(inv)


@dataclass(frozen=True, eq=False)
class ActionInstance:
    """A symmetric generating set acting on ``space`` by the given maps."""

    name: str
    space: Space
    generators: GeneratorSet
    maps: dict = field(repr=False)

    def __post_init__(self):
        missing = [g for g in self.generators if g not in self.maps]
        if missing:
            raise ValueError(f"no map for generators {missing}")

    @property
    def isometric(self) -> bool:
        return all(getattr(self.maps[g], "isometry", False) for g in self.generators)

    @property
    def is_finite(self) -> bool:
        return isinstance(self.space, FiniteSet)

    def apply(self, g: str, p):
        """Image of the point(s) ``p`` under generator ``g``."""
        if g not in self.generators:
            raise KeyError(f"{g!r} is not a generator of {self.name}")
        return self.maps[g](self.space.check(p))

    def apply_all(self, points):
        """Stack of images, shape ``(|S|, n, dim)``, in generator order."""
        pts = self.space.check(points)
        return np.stack([self.maps[g](pts) for g in self.generators])


def build_action(name, space, raw_maps: dict) -> ActionInstance:
    """Symmetrize ``raw_maps`` (name -> map), filling in identity and inverses."""
    gens = symmetrize(raw_maps)
    maps = {IDENTITY: IdentityMap()}
    for g, m in raw_maps.items():
        maps[g] = m
        maps.setdefault(formal_inverse(g), m.inverse())
    return ActionInstance(name, space, gens, maps)


def apply(action: ActionInstance, g: str, p, space: Space | None = None):
    if space is not None and space != action.space:
        raise SpaceMismatchError(f"action lives on {action.space}, not {space}")
    return action.apply(g, p)


# -- catalog ------------------------------------------------------------------

# cos = 3/5, sin = 4/5: algebraic entries, and the pair generates a free group.
ROT_X = np.array([[1.0, 0.0, 0.0], [0.0, 0.6, -0.8], [0.0, 0.8, 0.6]])
ROT_Z = np.array([[0.6, -0.8, 0.0], [0.8, 0.6, 0.0], [0.0, 0.0, 1.0]])
# Same rotations as unit quaternions: cos(theta/2) = 2/sqrt5, sin(theta/2) = 1/sqrt5.
QUAT_X = np.array([2.0, 1.0, 0.0, 0.0]) / math.sqrt(5.0)
QUAT_Z = np.array([2.0, 0.0, 0.0, 1.0]) / math.sqrt(5.0)

GOLDEN_ANGLE = TWO_PI * (math.sqrt(5.0) - 1.0) / 2.0


def identity_action(space: Space) -> ActionInstance:
    return build_action("identity", space, {})


def s2_free_rotations() -> ActionInstance:
    return build_action(
        "s2_free_rotations", Sphere2(1.0),
        {"a": SphereRotation(ROT_X), "b": SphereRotation(ROT_Z)},
    )


def so3_left_mult() -> ActionInstance:
    return build_action(
        "so3_left_mult", RotationGroup3(),
        {"a": LeftMultiplication(QUAT_X), "b": LeftMultiplication(QUAT_Z)},
    )


def circle_golden_rotation() -> ActionInstance:
    return build_action("circle_golden_rotation", Circle(TWO_PI), {"rho": CircleRotation(GOLDEN_ANGLE)})


def torus_translations() -> ActionInstance:
    space = Torus2(1.0, 1.0)
    sides = space.sides
    return build_action(
        "torus_translations", space,
        {
            "u": Translation(np.array([math.sqrt(2.0) - 1.0, 0.0]), sides),
            "v": Translation(np.array([0.0, math.sqrt(3.0) - 1.0]), sides),
        },
    )


def schreier_cyclic(n: int) -> ActionInstance:
    """Shift by one on ``Z/n``."""
    if n < 2:
        raise ValueError("cyclic action needs n >= 2")
    perm = (np.arange(n) + 1) % n
    return build_action(f"schreier_cyclic:{n}", FiniteSet(n), {"shift": Permutation(perm)})


def _projective_line_permutation(matrix, p):
    """Permutation of P^1(F_p) induced by a 2x2 matrix; label p stands for infinity."""
    (a, b), (c, d) = matrix
    perm = np.empty(p + 1, dtype=np.int64)
    for label in range(p + 1):
        x, y = (label, 1) if label < p else (1, 0)
        u, v = (a * x + b * y) % p, (c * x + d * y) % p
        perm[label] = p if v == 0 else (u * pow(int(v), -1, p)) % p
    return perm


def _is_prime(p):
    return p >= 2 and all(p % k for k in range(2, int(math.isqrt(p)) + 1))


def schreier_sl2(p: int) -> ActionInstance:
    """SL_2(Z/p) generated by ``[[1,2],[0,1]]`` and ``[[1,0],[2,1]]`` on the projective line."""
    if not _is_prime(p) or p == 2:
        raise ValueError("schreier_sl2 needs an odd prime")
    upper = _projective_line_permutation(((1, 2), (0, 1)), p)
    lower = _projective_line_permutation(((1, 0), (2, 1)), p)
    return build_action(
        f"schreier_sl2:{p}", FiniteSet(p + 1),
        {"A": Permutation(upper), "B": Permutation(lower)},
    )


CATALOG = {
    "s2_free_rotations": s2_free_rotations,
    "so3_left_mult": so3_left_mult,
    "circle_golden_rotation": circle_golden_rotation,
    "torus_translations": torus_translations,
}
PARAMETRIC = {"schreier_cyclic": schreier_cyclic, "schreier_sl2": schreier_sl2}


def make_action(action_id: str, space: Space | None = None) -> ActionInstance:
    """Resolve a catalog id such as ``"so3_left_mult"`` or ``"schreier_sl2:5"``.

    ``"identity"`` builds the trivial action on ``space`` (a circle if omitted).
    """
    if action_id == "identity":
        return identity_action(space if space is not None else Circle(TWO_PI))
    if action_id in CATALOG:
        return CATALOG[action_id]()
    base, _, arg = action_id.partition(":")
    if base in PARAMETRIC and arg:
        return PARAMETRIC[base](int(arg))
    raise KeyError(
        f"unknown action {action_id!r}; known: {sorted(CATALOG)} + "
        "schreier_cyclic:<n>, schreier_sl2:<p>, identity"
    )


# -- verification ---------------------------------------------------------------


@dataclass(frozen=True)
class ActionVerificationReport:
    isometry_defect: float
    inverse_defect: float
    measure_distortion: float


def verify_action_properties(
    action: ActionInstance, samples: int = 1000, random_state=None, n_cells: int = 4
) -> ActionVerificationReport:
    """Empirical isometry, inverse and measure-distortion checks.

    Measure distortion is estimated on a random ``n_cells`` Voronoi partition
    by comparing the sample mass of ``s(R)`` (points ``y`` with
    ``s^-1 y`` in ``R``) to the sample mass of ``R``, for every cell ``R``
    and generator ``s``.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    rng = make_rng(random_state)
    space = action.space
    x = space.sample(samples, rng)
    y = space.sample(samples, rng)
    base = space.distance(x, y)
    iso = inv = 0.0
    for g in action.generators:
        m = action.maps[g]
        sx, sy = m(x), m(y)
        iso = max(iso, float(np.max(np.abs(space.distance(sx, sy) - base))))
        back = action.maps[action.generators.inverse(g)](sx)
        inv = max(inv, float(np.max(space.distance(back, x))))

    centers = space.sample(n_cells, rng)
    index = NetIndex(space, centers)
    cells = index.query(x)[0]
    mass = np.bincount(cells, minlength=n_cells).astype(float)
    theta = 1.0
    for g in action.generators:
        pulled = action.maps[action.generators.inverse(g)](x)
        image_mass = np.bincount(index.query(pulled)[0], minlength=n_cells).astype(float)
        ok = (mass > 0) & (image_mass > 0)
        ratio = image_mass[ok] / mass[ok]
        if ratio.size:
            theta = max(theta, float(np.max(ratio)), float(np.max(1.0 / ratio)))
    return ActionVerificationReport(iso, inv, theta)
