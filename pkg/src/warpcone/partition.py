"""Voronoi partitions with empirical cell measures and their statistics."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._random import make_rng
from .exceptions import DegenerateCloudError, EmptyCellError, SpaceMismatchError
from .geometry import Net, Space

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES_PER_CELL = 200
MESH_SUBSAMPLE = 1000


@dataclass(frozen=True, eq=False)
class SampleCloud:
    """Weighted point cloud standing in for the invariant measure."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.points),):
            raise ValueError("one weight per point required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")

    @classmethod
    def uniform(cls, points):
        points = np.asarray(points, dtype=float)
        n = len(points)
        return cls(points, np.full(n, 1.0 / n) if n else np.empty(0))

    @classmethod
    def sample(cls, space: Space, n: int, random_state=None):
        return cls.uniform(space.sample(n, make_rng(random_state)))

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class Partition:
    """Voronoi cells of ``net`` represented through the cloud points they hold.

    ``dropped`` lists the original net indices removed because they caught no
    cloud mass; ``net`` is already the reduced net.
    """

    net: Net
    cloud: SampleCloud
    assignment: np.ndarray
    cell_measures: np.ndarray
    dropped: tuple = ()

    @property
    def space(self) -> Space:
        return self.net.space

    @property
    def n_cells(self) -> int:
        return len(self.cell_measures)

    @property
    def empty_cells(self) -> np.ndarray:
        return np.flatnonzero(self.cell_measures <= 0)

    def cell_members(self):
        """List of cloud-index arrays, one per cell."""
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.searchsorted(self.assignment[order], np.arange(self.n_cells + 1))
        return [order[bounds[k] : bounds[k + 1]] for k in range(self.n_cells)]


def build_voronoi_partition(
    space: Space, net: Net, cloud: SampleCloud, drop_empty: bool = True
) -> Partition:
    """Assign every cloud point to its nearest net point and total the weights.

    Cells that received no mass are dropped (with a logged warning) when
    ``drop_empty`` is set; otherwise they stay with measure zero.
    """
    if net.space != space:
        raise SpaceMismatchError(f"net lives on {net.space}, not {space}")
    if len(cloud) == 0:
        raise ValueError("cloud is empty")
    if len(net) == 0:
        raise ValueError("net is empty")
    pts = space.check(cloud.points)
    assignment = net.assign(pts)
    measures = np.bincount(assignment, weights=cloud.weights, minlength=len(net))
    if len(net) > 1 and np.count_nonzero(measures > 0) == 1:
        raise DegenerateCloudError("all cloud mass fell into a single cell")
    empty = np.flatnonzero(measures <= 0)
    if drop_empty and len(empty):
        logger.warning("dropping %d empty Voronoi cells out of %d", len(empty), len(net))
        keep = np.flatnonzero(measures > 0)
        reduced = Net(space, net.points[keep], net.r, net.candidate_budget,
                      net.density_deficit, dict(net.metadata))
        # Empty cells own no samples, so only the labels shift.
        relabel = np.full(len(net), -1, dtype=np.int64)
        relabel[keep] = np.arange(len(keep))
        return Partition(reduced, cloud, relabel[assignment], measures[keep],
                         tuple(int(k) for k in empty))
    return Partition(net, cloud, assignment, measures)


@dataclass(frozen=True)
class PartitionStats:
    Q: float
    mesh: float
    eccentricity_max: float | None
    empty_cells: int


def measure_ratio_Q(partition: Partition) -> float:
    """Largest over smallest cell measure."""
    m = partition.cell_measures
    if np.any(m <= 0):
        raise EmptyCellError(f"{np.count_nonzero(m <= 0)} empty cells; Q is infinite")
    return float(m.max() / m.min())


def _diameter(space, pts):
    if len(pts) < 2:
        return 0.0
    best = 0.0
    for start in range(0, len(pts), 256):
        d = space.distance(pts[start : start + 256, None, :], pts[None, :, :])
        best = max(best, float(d.max()))
    return best


def mesh(partition: Partition, subsample: int = MESH_SUBSAMPLE, random_state=0) -> float:
    """Largest empirical cell diameter (max pairwise distance within a cell).

    Cells with more than ``subsample`` cloud points are subsampled, so the
    value underestimates the true mesh.
    """
    rng = make_rng(random_state)
    space = partition.space
    pts = partition.cloud.points
    worst = 0.0
    for members in partition.cell_members():
        if len(members) > subsample:
            members = np.sort(rng.choice(members, subsample, replace=False))
        worst = max(worst, _diameter(space, pts[members]))
    return worst


def eccentricity_stats(partition: Partition):
    """Per-cell ratio of outer to inner radius around the cell's net point.

    Outer radius is the farthest cloud point of the cell, inner radius half
    the distance to the nearest other net point. A cell contains its inner
    ball, so values are clamped below at 1 (sampling can leave the farthest
    point short of it). Returns ``(per_cell, max)``; both are ``None`` for a
    single-cell partition.
    """
    net = partition.net
    space = partition.space
    if len(net) < 2:
        return None, None
    centers = net.points
    inner = np.empty(len(net))
    for start in range(0, len(net), 256):
        d = space.distance(centers[start : start + 256, None, :], centers[None, :, :])
        rows = np.arange(d.shape[0])
        d[rows, rows + start] = np.inf
        inner[start : start + 256] = d.min(axis=1) / 2.0
    own = space.distance(partition.cloud.points, centers[partition.assignment])
    outer = np.zeros(len(net))
    np.maximum.at(outer, partition.assignment, own)
    ecc = np.maximum(outer / inner, 1.0)
    return ecc, float(ecc.max())


def partition_stats(partition: Partition) -> PartitionStats:
    ecc = eccentricity_stats(partition)[1]
    return PartitionStats(
        Q=measure_ratio_Q(partition),
        mesh=mesh(partition),
        eccentricity_max=ecc,
        empty_cells=len(partition.dropped) + len(partition.empty_cells),
    )


def partition_summary(partition: Partition, seed=None) -> dict:
    stats = partition_stats(partition)
    return {
        "cells": partition.n_cells,
        "Q": stats.Q,
        "mesh": stats.mesh,
        "ecc_max": stats.eccentricity_max,
        "empty_cells": stats.empty_cells,
        "seed": seed,
    }
