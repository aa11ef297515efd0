"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete. The desk-scale benchmark (criteria 1, 2, 4) runs
once in a session fixture.
"""

import heapq
import time

import numpy as np
import pytest

from corridor.bench import (BenchConfig, arm_base_world, arm_grid, arm_smoke_scene,
                            gen_forest, point_robot_model, run_benchmark)
from corridor.cpoly import HPolytope
from corridor.drm import (CollisionSet, Grid, PwlPath, astar_lazy, build_drm,
                          collision_set, shortcut)
from corridor.inflation import (InflationParams, Segment, compute_step_back, dist_gradient,
                           dist_to_segment, inflate_edge)
from corridor.errors import NoPath
from corridor.planner import PlanRequest, STATUS_OK, plan
from corridor.scsopt import Scs, scs_shortest_path, project_polytope
from corridor.seeding import child_seed
from corridor.world import (SPHERE, Geometry, RigidTransform, VoxelMap, World,
                            forward_kinematics, pose_vector)
from conftest import disc_world, forest_disc_world
from test_drm import eager_dijkstra_cost


def report(criterion: int, ok: bool, detail: str):
    print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {criterion}: {detail}"


# ---------------------------------------------------------------------------
# criteria 1 + 2 + 4a: the desk-scale Forest benchmark
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def desk_benchmark():
    cfg = BenchConfig(env_seeds=list(range(10)), drm_seeds=list(range(5)),
                      sizes=[400], master_seed=2024)
    t0 = time.perf_counter()
    records, summary = run_benchmark(cfg, keep_results=True)
    elapsed = time.perf_counter() - t0
    return records, summary, elapsed


def test_criterion_1_success_rates_and_runtime(desk_benchmark):
    records, summary, elapsed = desk_benchmark
    ok = (len(records) == 50
          and summary["drm_success_rate"] == 1.0
          and summary["opt_success_rate"] == 1.0
          and summary["collision_free_rate"] == 1.0
          and elapsed < 900.0)
    report(1, ok, (f"DRM SR {summary['drm_success_rate']:.2f}, "
                   f"SCS optimizer SR {summary['opt_success_rate']:.2f}, "
                   f"CFR {summary['collision_free_rate']:.2f}, "
                   f"runtime {elapsed:.0f}s (< 900s)"))


def test_criterion_2_statistics(desk_benchmark):
    records, summary, _ = desk_benchmark
    mean_len = summary["drm_path_len_mean"]
    mean_cost = summary["scs_cost_mean"]
    mean_sets = summary["n_sets_mean"]
    ok = (10.1 <= mean_len <= 11.7
          and 10.2 <= mean_cost <= 11.4
          and mean_sets <= 4.0
          and mean_cost <= mean_len)
    report(2, ok, (f"mean DRM path len {mean_len:.3f} in [10.1, 11.7], "
                   f"mean SCS optimizer cost {mean_cost:.3f} in [10.2, 11.4], "
                   f"mean sets {mean_sets:.2f} <= 4.0, cost <= len"))


# ---------------------------------------------------------------------------
# criterion 3 + 4b: probabilistic guarantee audit
# ---------------------------------------------------------------------------

def random_free_segment(world, rng, min_len=0.5, max_len=2.5):
    ck = world.checker(margin=0.01)
    while True:
        v1 = rng.uniform(-4.5, 4.5, 2)
        if not ck.check(v1):
            continue
        direction = rng.normal(size=2)
        direction /= np.linalg.norm(direction)
        v2 = v1 + direction * rng.uniform(min_len, max_len)
        if np.any(np.abs(v2) > 4.7):
            continue
        if ck.check_segment(v1, v2, 0.01):
            return Segment(v1, v2)


@pytest.fixture(scope="module")
def guarantee_audit():
    domain = HPolytope.from_bounds([-5, -5], [5, 5])
    params = InflationParams(delta=0.05, eps=0.01)
    exceed = 0
    inflated = []  # (polytope, segment) pairs for criterion 4
    t0 = time.perf_counter()
    for run in range(100):
        world, _ = forest_disc_world(7000 + run)
        rng = np.random.default_rng(child_seed(31, run))
        seg = random_free_segment(world, rng)
        report_ = inflate_edge(seg, domain, params, world.checker(),
                               seed=child_seed(77, run))
        poly = report_.polytope
        inflated.append((poly, seg))
        # independent uniform sampling in the polytope by rejection from the box
        mc = np.random.default_rng(child_seed(99, run))
        kept = []
        need = 50_000
        while need > 0:
            draw = mc.uniform(-5, 5, size=(200_000, 2))
            inside = draw[poly.contains_many(draw)]
            take = inside[:need]
            kept.append(take)
            need -= take.shape[0]
        samples = np.concatenate(kept)
        frac = float(np.mean(~world.checker().check_batch(samples)))
        exceed += frac > params.eps
    return exceed, inflated, time.perf_counter() - t0


def test_criterion_3_guarantee(guarantee_audit):
    exceed, inflated, elapsed = guarantee_audit
    ok = exceed <= 15 and elapsed < 300.0
    report(3, ok, (f"{exceed}/100 audits exceeded eps=0.01 (allowed 15), "
                   f"runtime {elapsed:.0f}s (< 300s)"))


def test_criterion_4_seed_containment(desk_benchmark, guarantee_audit):
    checked = 0
    worst = 0.0
    for row in desk_benchmark[0]:
        res = row["_result"]
        if res.scs is None:
            continue
        for poly, seg in zip(res.scs.sets, res.scs.seeds):
            for v in (seg.v1, seg.v2):
                worst = max(worst, poly.slack(v))
            checked += 1
    for poly, seg in guarantee_audit[1]:
        for v in (seg.v1, seg.v2):
            worst = max(worst, poly.slack(v))
        checked += 1
    ok = checked > 0 and worst <= 1e-9
    report(4, ok, f"{checked} polytopes, worst seed-vertex slack {worst:.2e} <= 1e-9")


# ---------------------------------------------------------------------------
# criterion 5: convexity and gradient properties
# ---------------------------------------------------------------------------

def test_criterion_5_distance_properties():
    rng = np.random.default_rng(55)
    jensen_ok = True
    for _ in range(10_000):
        d = int(rng.integers(2, 5))
        seg = Segment(rng.normal(size=d) * 3, rng.normal(size=d) * 3)
        x1, x2 = rng.normal(size=(2, d)) * 4
        lam = rng.uniform()
        lhs = dist_to_segment(lam * x1 + (1 - lam) * x2, seg)
        rhs = lam * dist_to_segment(x1, seg) + (1 - lam) * dist_to_segment(x2, seg)
        if lhs > rhs + 1e-9:
            jensen_ok = False
            break
    grad_ok = True
    worst = 0.0
    h = 1e-6
    checked = 0
    while checked < 1000:
        d = int(rng.integers(2, 5))
        seg = Segment(rng.normal(size=d) * 2, rng.normal(size=d) * 2)
        x = rng.normal(size=d) * 3
        if dist_to_segment(x, seg) <= 1e-3:
            continue
        grad = dist_gradient(x, seg)
        fd = np.array([
            (dist_to_segment(x + h * e, seg) - dist_to_segment(x - h * e, seg)) / (2 * h)
            for e in np.eye(d)])
        worst = max(worst, float(np.max(np.abs(grad - fd))))
        if worst > 1e-5:
            grad_ok = False
            break
        checked += 1
    ok = jensen_ok and grad_ok
    report(5, ok, (f"Jensen holds on 10^4 tuples (tol 1e-9): {jensen_ok}; "
                   f"gradient vs central differences worst {worst:.2e} <= 1e-5"))


# ---------------------------------------------------------------------------
# criterion 6: oracle equivalences
# ---------------------------------------------------------------------------

def test_criterion_6_oracles():
    # a) lazy A* == eager Dijkstra on 100 pruned roadmaps
    model = point_robot_model()
    base = World(model)
    grid = Grid(np.array([-5.0, -5.0]), 0.25, (40, 40))
    astar_matches = 0
    astar_cases = 0
    for drm_seed in range(10):
        drm = build_drm(model, base.checker(), model.lower, model.upper,
                        150, 8, 10.0, 10.0, grid, seed=drm_seed)
        for case in range(10):
            world, scene = forest_disc_world(4000 + 10 * drm_seed + case)
            rng = np.random.default_rng(case)
            occ = frozenset((int(rng.integers(0, 40)), int(rng.integers(0, 40)))
                            for _ in range(25))
            cs = collision_set(drm, VoxelMap(grid.origin, grid.side, occ))
            ck = world.checker()
            start, goal = np.array([-4.2, -4.2]), np.array([4.2, 4.2])
            try:
                path = astar_lazy(drm, cs, start, goal, ck, 0.1, d_cs=10.0, d_ts=10.0)
            except NoPath:
                continue
            oracle = eager_dijkstra_cost(drm, cs.blocked, start, goal,
                                         world.checker(), 0.1, 10.0, 10.0)
            astar_cases += 1
            astar_matches += (oracle is not None and path.length == oracle)
    astar_ok = astar_cases >= 90 and astar_matches == astar_cases

    # b) collision_set == brute force on 20 voxel activations
    drm = build_drm(model, base.checker(), model.lower, model.upper,
                    150, 8, 10.0, 10.0, grid, seed=123)
    from test_drm import brute_force_blocked

    cs_ok = True
    rng = np.random.default_rng(6)
    for _ in range(20):
        occ = frozenset((int(rng.integers(0, 40)), int(rng.integers(0, 40)))
                        for _ in range(rng.integers(1, 40)))
        vm = VoxelMap(grid.origin, grid.side, occ)
        if collision_set(drm, vm).blocked != brute_force_blocked(drm, vm):
            cs_ok = False
            break

    # c) SCS optimizer within 1% of a grid-search oracle on 20 two-set instances
    rng = np.random.default_rng(60)
    opt_ok = True
    worst_ratio = 1.0
    for _ in range(20):
        lo1 = rng.uniform(-2, 0, 2)
        hi1 = lo1 + rng.uniform(1.2, 2.5, 2)
        lo2 = rng.uniform(lo1, hi1 - 0.4)
        hi2 = lo2 + rng.uniform(1.2, 2.5, 2)
        b1, b2 = HPolytope.from_bounds(lo1, hi1), HPolytope.from_bounds(lo2, hi2)
        s, g = rng.uniform(lo1, hi1), rng.uniform(lo2, hi2)
        mid = project_polytope(np.vstack([b1.A, b2.A]),
                               np.concatenate([b1.b, b2.b]), (s + g) / 2)
        path = PwlPath(np.vstack([s, mid, g]))
        scs = Scs([b1, b2], [0, 1],
                  [Segment(s, mid), Segment(mid, g)], path)
        got = scs_shortest_path(scs, s, g).cost
        ilo, ihi = np.maximum(lo1, lo2), np.minimum(hi1, hi2)
        xs = np.arange(ilo[0], ihi[0] + 5e-4, 1e-3)
        ys = np.arange(ilo[1], ihi[1] + 5e-4, 1e-3)
        X, Y = np.meshgrid(xs, ys)
        P = np.stack([X.ravel(), Y.ravel()], axis=1)
        oracle = float((np.linalg.norm(P - s, axis=1)
                        + np.linalg.norm(P - g, axis=1)).min())
        ratio = got / oracle
        worst_ratio = max(worst_ratio, ratio)
        if not (ratio <= 1.01):
            opt_ok = False
    ok = astar_ok and cs_ok and opt_ok
    report(6, ok, (f"A*==Dijkstra {astar_matches}/{astar_cases} exact; "
                   f"collision_set brute-force exact: {cs_ok}; "
                   f"SCS optimizer worst ratio {worst_ratio:.5f} <= 1.01"))


# ---------------------------------------------------------------------------
# criterion 7: step-back identity
# ---------------------------------------------------------------------------

def test_criterion_7_step_back_identity():
    rng = np.random.default_rng(70)
    worst = -np.inf
    for _ in range(10_000):
        d = int(rng.integers(2, 6))
        a = rng.normal(size=d)
        a /= np.linalg.norm(a)
        seg = Segment(rng.normal(size=d) * 5, rng.normal(size=d) * 5)
        c = rng.normal(size=d) * 5
        delta_max = rng.uniform(1e-4, 1.0)
        b_raw = float(a @ c)
        delta = compute_step_back(a, b_raw, seg, delta_max)
        rhs = b_raw - delta
        worst = max(worst, float(a @ seg.v1 - rhs), float(a @ seg.v2 - rhs))
    ok = worst <= 1e-12
    report(7, ok, f"worst vertex violation of the shifted halfspace {worst:.2e} <= 1e-12")


# ---------------------------------------------------------------------------
# criterion 8: recovery loop on sliver scenes
# ---------------------------------------------------------------------------

def test_criterion_8_recovery_loop():
    model = point_robot_model()
    base = World(model)
    grid = Grid(np.array([-5.0, -5.0]), 0.25, (40, 40))
    drm = build_drm(model, base.checker(), model.lower, model.upper,
                    300, 10, 10.0, 10.0, grid, seed=17)
    all_ok = True
    triggered = 0
    max_rounds = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        centers = np.stack([np.array([-2.0, 0.0, 2.0]),
                            rng.uniform(-0.15, 0.15, 3)], axis=1)
        world = disc_world(centers, radius=0.12)
        req = PlanRequest(drm=drm, start=np.array([-4.0, 0.0]),
                          goal_config=np.array([4.0, 0.0]),
                          params=InflationParams(n_it=1, n_p=1),
                          seed=900 + seed, seed_margin=0.01)
        res = plan(req, world)
        triggered += res.stats.recovery_rounds > 0
        max_rounds = max(max_rounds, res.stats.recovery_rounds)
        if res.status != STATUS_OK or res.stats.recovery_rounds > 20:
            all_ok = False
            continue
        ck = world.checker()
        fine = all(ck.check_segment(res.path.knots[i], res.path.knots[i + 1], 0.01)
                   for i in range(res.path.knots.shape[0] - 1))
        all_ok &= fine
    ok = all_ok and triggered == 20
    report(8, ok, (f"20/20 sliver plans ok with 10x-finer recheck, recovery "
                   f"triggered in {triggered}/20, max rounds {max_rounds} <= 20"))


# ---------------------------------------------------------------------------
# criterion 9: planar three-link arm smoke test
# ---------------------------------------------------------------------------

def test_criterion_9_arm_smoke():
    base = arm_base_world()
    drm = build_drm(base.model, base.checker(), base.model.lower, base.model.upper,
                    800, 10, 4.0, 2.0, arm_grid(), seed=77)
    ok_count = 0
    fine_all = True
    for seed in range(10):
        world, start, goal_pose = arm_smoke_scene(seed)
        req = PlanRequest(drm=drm, start=start, goal_pose=goal_pose,
                          seed=500 + seed, seed_margin=0.03, check_step=0.1)
        res = plan(req, world)
        if res.status != STATUS_OK:
            continue
        ck = world.checker()
        fine = all(ck.check_segment(res.path.knots[i], res.path.knots[i + 1], 0.01)
                   for i in range(res.path.knots.shape[0] - 1))
        fine_all &= fine
        ok_count += 1
    ok = ok_count >= 9 and fine_all
    report(9, ok, f"{ok_count}/10 arm plans ok (need >= 9), fine recheck clean: {fine_all}")
