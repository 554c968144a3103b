"""scikit-learn style wrappers around the functional pipeline.

The estimators learn discrete structure from a space (and optionally a
sample cloud passed as ``X``); ``predict`` maps points to cells or nodes.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from ._random import make_rng
from .actions import ActionInstance, make_action
from .exceptions import ConfigError
from .expansion import estimate_alpha
from .geometry import Net, Space, greedy_net, net_from_candidates, parse_space
from .graphs import build_approximating_graph, build_lavish_graph, max_degree
from .partition import DEFAULT_SAMPLES_PER_CELL, SampleCloud, build_voronoi_partition, partition_stats
from .spectra import cheeger_bounds, lambda2, sigma2
from .warped import build_level_set_graph


def _resolve_space(space) -> Space:
    if isinstance(space, Space):
        return space
    if isinstance(space, str):
        return parse_space(space)
    raise ConfigError(f"space must be a Space or an id string, got {type(space).__name__}")


def _resolve_action(action) -> ActionInstance:
    if isinstance(action, ActionInstance):
        return action
    if isinstance(action, str):
        return make_action(action)
    raise ConfigError(f"action must be an ActionInstance or a catalog id, got {type(action).__name__}")


def _points(space: Space, X):
    X = check_array(X, ensure_2d=True, dtype=np.float64)
    return space.check(X)


class VoronoiNet(BaseEstimator):
    """Maximal ``r``-separated net; ``predict`` gives Voronoi cell indices.

    ``fit(X)`` uses the rows of ``X`` as candidate cloud; ``fit()`` samples
    ``candidate_budget`` uniform candidates instead.
    """

    def __init__(self, space="sphere2:1", r=0.2, candidate_budget=None, random_state=None):
        self.space = space
        self.r = r
        self.candidate_budget = candidate_budget
        self.random_state = random_state

    def fit(self, X=None, y=None):
        space = _resolve_space(self.space)
        if not self.r > 0:
            raise ValueError("r must be positive")
        rng = make_rng(self.random_state)
        if X is None:
            budget = self.candidate_budget or 20 * space.estimate_net_size(self.r)
            self.net_ = greedy_net(space, self.r, budget, rng)
        else:
            self.net_ = net_from_candidates(space, _points(space, X), self.r, rng=rng)
        self.space_ = space
        self.n_cells_ = len(self.net_)
        return self

    def predict(self, X):
        check_is_fitted(self, "net_")
        return self.net_.assign(_points(self.space_, X))

    def transform(self, X):
        """Distance from each point to its nearest net point."""
        check_is_fitted(self, "net_")
        pts = _points(self.space_, X)
        return self.space_.distance(pts, self.net_.points[self.net_.assign(pts)])


class ApproximatingGraph(BaseEstimator):
    """Voronoi approximating (or lavish) graph of an action with its diagnostics.

    After ``fit`` the estimator exposes ``graph_``, ``transition_``,
    ``lambda2_``, ``sigma2_``, ``cheeger_`` (bounds), ``alpha_`` and the
    partition statistics ``stats_``.
    """

    def __init__(self, action="s2_free_rotations", r=0.2, samples_per_cell=DEFAULT_SAMPLES_PER_CELL,
                 threshold=1, inflation=0.0, estimate_expansion=True, random_state=None):
        self.action = action
        self.r = r
        self.samples_per_cell = samples_per_cell
        self.threshold = threshold
        self.inflation = inflation
        self.estimate_expansion = estimate_expansion
        self.random_state = random_state

    def fit(self, X=None, y=None):
        action = _resolve_action(self.action)
        space = action.space
        rng = make_rng(self.random_state)
        net = greedy_net(space, self.r, 20 * space.estimate_net_size(self.r), rng)
        if X is None:
            cloud = SampleCloud.sample(space, self.samples_per_cell * len(net), rng)
        else:
            cloud = SampleCloud.uniform(_points(space, X))
        part = build_voronoi_partition(space, net, cloud)
        graph, tm = build_approximating_graph(action, part, self.threshold)
        if self.inflation > 0:
            graph = build_lavish_graph(action, part, self.inflation)
        spec = lambda2(graph)
        self.action_ = action
        self.partition_ = part
        self.graph_ = graph
        self.transition_ = tm
        self.max_degree_ = max_degree(graph)
        self.lambda2_ = spec.lambda2
        self.sigma2_ = sigma2(tm)
        self.cheeger_ = cheeger_bounds(graph, spec) if graph.n > 1 else None
        self.stats_ = partition_stats(part)
        self.alpha_ = None
        if self.estimate_expansion:
            self.alpha_ = estimate_alpha(action, part, tm, spec.fiedler, random_state=rng).alpha_hat
        return self

    @property
    def net_(self) -> Net:
        check_is_fitted(self, "partition_")
        return self.partition_.net

    def predict(self, X):
        """Cell index of each point."""
        check_is_fitted(self, "partition_")
        return self.partition_.net.assign(_points(self.action_.space, X))

    def transform(self, X):
        """Apply the cell transition operator to cell functions (rows of ``X``^T)."""
        check_is_fitted(self, "transition_")
        F = check_array(X, ensure_2d=False, dtype=np.float64)
        if F.shape[0] != self.transition_.n:
            raise ValueError(f"expected {self.transition_.n} cell values, got {F.shape[0]}")
        return self.transition_.matrix @ F


class WarpedLevelSet(BaseEstimator):
    """Level-set graph ``X_t``; ``predict`` gives the nearest node."""

    def __init__(self, action="circle_golden_rotation", t=10.0, random_state=None):
        self.action = action
        self.t = t
        self.random_state = random_state

    def fit(self, X=None, y=None):
        action = _resolve_action(self.action)
        level = build_level_set_graph(action, self.t, random_state=self.random_state)
        self.action_ = action
        self.level_set_ = level
        self.graph_ = level.graph
        self.net_ = level.net
        self.n_nodes_ = level.graph.n
        return self

    def predict(self, X):
        check_is_fitted(self, "net_")
        return self.net_.assign(_points(self.action_.space, X))
