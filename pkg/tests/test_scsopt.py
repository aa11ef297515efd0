import numpy as np
import pytest

from corridor.cpoly import HPolytope
from corridor.drm import PwlPath
from corridor.inflation import Segment
from corridor.errors import InfeasibleEndpoint
from corridor.scsopt import Scs, scs_shortest_path, project_polytope


def make_scs(boxes, knots, coverage=None):
    path = PwlPath(np.asarray(knots, dtype=float))
    coverage = coverage if coverage is not None else list(range(path.n_segments))
    seeds = [Segment(path.knots[k], path.knots[k + 1]) for k in range(path.n_segments)]
    # one seed per set, taken from the first segment it covers
    set_seeds = []
    for j in range(len(boxes)):
        first = coverage.index(j)
        set_seeds.append(Segment(path.knots[first], path.knots[first + 1]))
    return Scs(list(boxes), coverage, set_seeds, path)


def test_single_set_straight_line():
    box = HPolytope.from_bounds([0, 0], [3, 3])
    s, g = np.array([0.5, 0.5]), np.array([2.5, 2.5])
    scs = make_scs([box], [s, g])
    path = scs_shortest_path(scs, s, g)
    assert np.isclose(path.cost, np.linalg.norm(g - s))
    assert path.knots.shape == (2, 2)
    assert path.converged


def test_collinear_boxes_cost_two():
    b1 = HPolytope.from_bounds([0, 0], [2, 1])
    b2 = HPolytope.from_bounds([1, 0], [3, 1])
    s, g = np.array([0.5, 0.5]), np.array([2.5, 0.5])
    scs = make_scs([b1, b2], [s, [1.5, 0.5], g])
    path = scs_shortest_path(scs, s, g)
    assert np.isclose(path.cost, 2.0, atol=1e-9)
    assert b1.contains(path.knots[1], 1e-7) and b2.contains(path.knots[1], 1e-7)


def grid_oracle_two_sets(b1, b2, s, g, res=1e-3):
    """Brute-force the single interior knot over the intersection box."""
    lo = np.maximum(-b1.b[b1.dim:], -b2.b[b2.dim:])
    hi = np.minimum(b1.b[:b1.dim], b2.b[:b2.dim])
    xs = np.arange(lo[0], hi[0] + res / 2, res)
    ys = np.arange(lo[1], hi[1] + res / 2, res)
    X, Y = np.meshgrid(xs, ys)
    P = np.stack([X.ravel(), Y.ravel()], axis=1)
    cost = (np.linalg.norm(P - s, axis=1) + np.linalg.norm(P - g, axis=1))
    return float(cost.min())


def test_l_shape_matches_grid_oracle():
    b1 = HPolytope.from_bounds([0, 0], [1, 3])
    b2 = HPolytope.from_bounds([0, 2], [3, 3])
    s, g = np.array([0.5, 0.5]), np.array([2.5, 2.5])
    scs = make_scs([b1, b2], [s, [0.5, 2.5], g])
    path = scs_shortest_path(scs, s, g)
    oracle = grid_oracle_two_sets(b1, b2, s, g)
    assert path.cost <= oracle * 1.01
    assert abs(path.cost - oracle) / oracle <= 0.01


def random_two_box_instance(rng):
    lo1 = rng.uniform(-2, 0, 2)
    hi1 = lo1 + rng.uniform(1.0, 2.5, 2)
    # second box overlaps the first
    lo2 = rng.uniform(lo1, hi1 - 0.3)
    hi2 = lo2 + rng.uniform(1.0, 2.5, 2)
    b1 = HPolytope.from_bounds(lo1, hi1)
    b2 = HPolytope.from_bounds(lo2, hi2)
    s = rng.uniform(lo1, hi1)
    g = rng.uniform(lo2, hi2)
    mid = project_polytope(np.vstack([b1.A, b2.A]), np.concatenate([b1.b, b2.b]),
                           (s + g) / 2)
    return b1, b2, s, g, mid


def test_feasibility_and_dominance_randomized():
    rng = np.random.default_rng(42)
    for _ in range(25):
        b1, b2, s, g, mid = random_two_box_instance(rng)
        scs = make_scs([b1, b2], [s, mid, g])
        path = scs_shortest_path(scs, s, g)
        seed_len = scs.path.length
        assert path.cost <= seed_len + 1e-6
        assert np.allclose(path.knots[0], s) and np.allclose(path.knots[-1], g)
        assert b1.contains(path.knots[1], 1e-7) and b2.contains(path.knots[1], 1e-7)


def test_doubling_sweep_budget_never_increases_cost():
    rng = np.random.default_rng(7)
    for _ in range(10):
        b1, b2, s, g, mid = random_two_box_instance(rng)
        scs = make_scs([b1, b2], [s, mid, g])
        c1 = scs_shortest_path(scs, s, g, max_sweeps=3).cost
        c2 = scs_shortest_path(scs, s, g, max_sweeps=6).cost
        assert c2 <= c1 + 1e-12


def test_infeasible_endpoints():
    box = HPolytope.from_bounds([0, 0], [1, 1])
    scs = make_scs([box], [[0.5, 0.5], [0.6, 0.6]])
    with pytest.raises(InfeasibleEndpoint):
        scs_shortest_path(scs, np.array([5.0, 5.0]), np.array([0.5, 0.5]))
    with pytest.raises(InfeasibleEndpoint):
        scs_shortest_path(scs, np.array([0.5, 0.5]), np.array([5.0, 5.0]))


def test_degenerate_coincident_endpoints():
    b1 = HPolytope.from_bounds([0, 0], [2, 2])
    b2 = HPolytope.from_bounds([1, 1], [3, 3])
    s = np.array([1.5, 1.5])
    scs = make_scs([b1, b2], [s, [1.5, 1.5], s])
    path = scs_shortest_path(scs, s, s)
    assert path.cost <= 1e-9


def test_sequence_runs_and_transitions():
    b = [HPolytope.from_bounds([0, 0], [1, 1])] * 3
    path = np.array([[0.1, 0.1], [0.3, 0.3], [0.5, 0.5], [0.9, 0.9]])
    scs = Scs(list(b), [0, 0, 1], [Segment(path[0], path[1]), Segment(path[2], path[3])],
              PwlPath(path))
    assert scs.sequence() == [0, 1]
    trans = scs.transition_knots()
    assert trans.shape == (1, 2) and np.allclose(trans[0], [0.5, 0.5])
    # a set revisited later in the coverage appears twice in the sequence
    scs2 = Scs(list(b), [0, 1, 0], [Segment(path[0], path[1]), Segment(path[1], path[2])],
               PwlPath(path))
    assert scs2.sequence() == [0, 1, 0]


def test_projection_helper():
    A = np.vstack([np.eye(2), -np.eye(2)])
    b = np.array([1.0, 1.0, 0.0, 0.0])
    inside = project_polytope(A, b, np.array([0.5, 0.5]))
    assert np.allclose(inside, [0.5, 0.5])
    out = project_polytope(A, b, np.array([2.0, 0.5]))
    assert np.allclose(out, [1.0, 0.5], atol=1e-7)
