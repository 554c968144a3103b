import math

import numpy as np
import pytest

from warpcone.actions import CircleRotation, build_action, identity_action, make_action
from warpcone.exceptions import NetMismatchError, ScaleTooSmallError, SizeLimitError
from warpcone.geometry import Circle, Net, NetIndex, Sphere2, Torus2, greedy_net
from warpcone.graphs import Graph, build_lavish_graph, deserialize
from warpcone.warped import (
    build_level_set_graph,
    build_warped_complex,
    check_lavish_subgraph,
    level_set_bilipschitz_constant,
    serialize_level_set,
    warped_distance,
    warped_distances_from,
)

CIRCLE = Circle(2 * math.pi)


def net_at_scale(space, t, seed=0):
    r = 1 / (3 * t)
    return greedy_net(space, r, 10 * space.estimate_net_size(r), seed)


def test_identity_only_is_rescaled_metric():
    net = greedy_net(CIRCLE, 0.3, 2000, 0)
    for t in (1.0, 4.0):
        cx = build_warped_complex(identity_action(CIRCLE), net, t, metric_cutoff=t)
        assert len(cx.jump_edges) == 0
        np.testing.assert_allclose(cx.metric_weights,
                                   t * CIRCLE.distance(net.points[cx.metric_edges[:, 0]],
                                                       net.points[cx.metric_edges[:, 1]]))
        # along a circle net, chaining short edges reproduces the geodesic
        for x in (0, len(net) // 2):
            expected = t * CIRCLE.distance(net.points[x:x + 1], net.points)
            np.testing.assert_allclose(warped_distances_from(cx, x), expected, atol=1e-9)


def test_half_turn_jump_is_cheap():
    action = build_action("half", CIRCLE, {"h": CircleRotation(math.pi)})
    net = net_at_scale(CIRCLE, 10.0)
    cx = build_warped_complex(action, net, 10.0)
    nearest, _ = NetIndex(CIRCLE, net.points).query(action.apply("h", net.points))
    for x in range(0, len(net), 7):
        assert warped_distance(cx, x, int(nearest[x])) <= 5 / 3
    # without jumps the antipode is t * pi away
    assert warped_distances_from(cx, 0, jumps=False)[nearest[0]] > 10 * math.pi - 1


@pytest.mark.parametrize("action_id, t", [("circle_golden_rotation", 10.0), ("torus_translations", 5.0),
                                          ("s2_free_rotations", 3.0)])
def test_warped_distance_properties(action_id, t):
    action = make_action(action_id)
    space = action.space
    net = net_at_scale(space, t)
    cx = build_warped_complex(action, net, t)
    index = NetIndex(space, net.points)
    rng = np.random.default_rng(0)
    sources = rng.choice(len(net), size=6, replace=False)
    with_jumps = {int(x): warped_distances_from(cx, x) for x in sources}
    for x in sources:
        x = int(x)
        no_jumps = warped_distances_from(cx, x, jumps=False)
        # removing jumps never shortens a path; metric paths dominate t * d
        assert np.all(with_jumps[x] <= no_jumps + 1e-9)
        direct = t * space.distance(net.points[x:x + 1], net.points)
        assert np.all(no_jumps >= direct - 1e-9)
        for g in action.generators:
            if g == "1":
                continue
            nearest, _ = index.query(action.apply(g, net.points[x:x + 1]))
            assert with_jumps[x][nearest[0]] <= 5 / 3
    for a in sources:
        for b in sources:
            for c in range(0, len(net), max(1, len(net) // 50)):
                assert with_jumps[int(a)][int(b)] <= with_jumps[int(a)][c] + with_jumps[int(b)][c] + 1e-9


@pytest.mark.parametrize("action_id, t", [("circle_golden_rotation", 4.0), ("circle_golden_rotation", 12.0),
                                          ("torus_translations", 2.0), ("s2_free_rotations", 2.0),
                                          ("schreier_sl2:7", 1.0)])
def test_one_jump_equals_dijkstra(action_id, t):
    action = make_action(action_id)
    a = build_level_set_graph(action, t, random_state=3, method="one_jump")
    b = build_level_set_graph(action, t, random_state=3, method="dijkstra")
    assert np.array_equal(a.net.points, b.net.points)
    assert a.graph == b.graph


def test_one_jump_requires_isometry():
    class Squash:
        isometry = False

        def __call__(self, pts):
            return np.mod(np.asarray(pts) ** 2 / (2 * math.pi), 2 * math.pi)

        def inverse(self):
            return self

    action = build_action("squash", CIRCLE, {"s": Squash()})
    with pytest.raises(ValueError):
        build_level_set_graph(action, 2.0, random_state=0, method="one_jump")
    with pytest.raises(ValueError):
        build_level_set_graph(make_action("circle_golden_rotation"), 2.0, method="fastest")


def test_identity_circle_level_set_is_connected_cycle():
    level = build_level_set_graph(identity_action(CIRCLE), 1.0, random_state=0)
    g = level.graph
    assert g.is_connected()
    order = np.argsort(level.net.points[:, 0])
    consecutive = {tuple(sorted((int(order[i]), int(order[(i + 1) % g.n])))) for i in range(g.n)}
    assert consecutive <= set(map(tuple, g.edges.tolist()))
    # the level set only sees distances below 2
    far = CIRCLE.distance(level.net.points[g.edges[:, 0]], level.net.points[g.edges[:, 1]])
    assert np.all(far < 2.0)


def test_small_diameter_gives_complete_graph():
    space = Circle(3.0)
    level = build_level_set_graph(identity_action(space), 1.0, random_state=0)
    n = level.graph.n
    assert n >= 2
    assert level.graph.m == n * (n - 1) // 2


def test_rotation_pairs_are_edges():
    action = make_action("circle_golden_rotation")
    level = build_level_set_graph(action, 10.0, random_state=0)
    nearest, _ = NetIndex(CIRCLE, level.net.points).query(action.apply("rho", level.net.points))
    pairs = np.sort(np.stack([np.arange(level.graph.n), nearest], axis=1), axis=1)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    keys = pairs[:, 0] * level.graph.n + pairs[:, 1]
    assert np.all(np.isin(keys, level.graph.edge_keys()))


@pytest.mark.parametrize("action_id", ["circle_golden_rotation", "torus_translations"])
def test_lavish_graph_is_inside_level_set(action_id):
    action = make_action(action_id)
    t = 10.0
    level = build_level_set_graph(action, t, random_state=0)
    part = level.matched_partition()
    lavish = build_lavish_graph(action, part, inflation=1 / (6 * t))
    ok, missing = check_lavish_subgraph(lavish, level, part.net)
    assert ok and len(missing) == 0

    # an edge joining antipodal nodes cannot be in X_t
    pts = level.net.points
    far = int(np.argmax(action.space.distance(pts[:1], pts)))
    extra = Graph.from_pairs(lavish.n, np.vstack([lavish.edges, [[0, far]]]))
    ok, missing = check_lavish_subgraph(extra, level)
    assert not ok
    assert missing.tolist() == [sorted([0, far])]


def test_lavish_check_rejects_other_nets():
    level = build_level_set_graph(make_action("circle_golden_rotation"), 5.0, random_state=0)
    with pytest.raises(NetMismatchError):
        check_lavish_subgraph(Graph(level.graph.n + 1, np.empty((0, 2))), level)
    shifted = Net(CIRCLE, np.mod(level.net.points + 1e-3, 2 * math.pi), level.net.r)
    with pytest.raises(NetMismatchError):
        check_lavish_subgraph(Graph(level.graph.n, np.empty((0, 2))), level, shifted)


def test_scale_errors():
    with pytest.raises(ScaleTooSmallError):
        build_level_set_graph(identity_action(Circle(0.1)), 1.0, random_state=0)
    with pytest.raises(ValueError):
        build_level_set_graph(make_action("circle_golden_rotation"), 0.5)
    with pytest.raises(SizeLimitError):
        build_level_set_graph(make_action("so3_left_mult"), 10.0)


def test_serialized_level_set_records_scale():
    level = build_level_set_graph(make_action("circle_golden_rotation"), 10.0, random_state=0)
    data = serialize_level_set(level)
    assert data.splitlines()[1] == b"t 10"
    assert deserialize(data) == level.graph


def test_level_set_is_deterministic():
    action = make_action("torus_translations")
    a = build_level_set_graph(action, 5.0, random_state=11)
    b = build_level_set_graph(action, 5.0, random_state=11)
    assert serialize_level_set(a) == serialize_level_set(b)


@pytest.mark.parametrize("space, value", [(Sphere2(1.0), math.pi / 2), (CIRCLE, math.pi / 2),
                                          (Circle(20.0), 5.0), (Torus2(1.0, 1.0), math.pi / 2)])
def test_bilipschitz_constant(space, value):
    assert level_set_bilipschitz_constant(space) == pytest.approx(value)
