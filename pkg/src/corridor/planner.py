"""End-to-end pipeline: prune, search, inflate, optimize, repair.

A plan request runs through: collision-set pruning of the roadmap, IK if
the goal is a pose, lazy A* plus shortcutting for a seed path, sequential
inflation of the path into a corridor of convex sets, and then an
optimize/check/repair loop that excludes any collisions the optimized
path reveals until the path is clean or the round cap is hit. Failures
are reported through the result status, not exceptions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .cpoly import HPolytope
from .drm import CollisionSet, Drm, PwlPath, astar_lazy, collision_set, shortcut, solve_ik
from .inflation import InflationParams, InflationReport, Segment, _bisection_batch, \
    _place_hyperplanes, default_bisection_steps, inflate_edge, project_batch
from .errors import (AlreadyAtGoal, IkFailed, NoPath, SegmentInCollision)
from .scsopt import Scs, ScsPath, scs_shortest_path
from .seeding import child_seed
from .world import World, segment_samples

STATUS_OK = "ok"
STATUS_DRM_FAILED = "drm_failed"
STATUS_IK_FAILED = "ik_failed"
STATUS_RECOVERY_EXHAUSTED = "recovery_exhausted"


@dataclass
class PlanRequest:
    drm: Drm
    start: np.ndarray
    goal_config: np.ndarray | None = None
    goal_pose: np.ndarray | None = None
    params: InflationParams = field(default_factory=InflationParams)
    check_step: float = 0.1
    max_recovery_rounds: int = 20
    n_extra_paths: int = 0
    seed: int = 0
    ik_weights: tuple = (1.0, 0.5)
    # clearance margin used only when validating seed-path segments; choose it
    # above the depth the check step can hide so inflation never sees a seed
    # closer to an obstacle than t_col
    seed_margin: float = 0.0

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float)
        if (self.goal_config is None) == (self.goal_pose is None):
            raise ValueError("specify exactly one of goal_config / goal_pose")
        if self.max_recovery_rounds < 1:
            raise ValueError("max_recovery_rounds must be >= 1")


@dataclass
class PlanStats:
    timings_ms: dict = field(default_factory=dict)
    recovery_rounds: int = 0
    sets_built: int = 0
    hyperplanes: int = 0
    collision_checks: int = 0
    opt_converged: bool = True


@dataclass
class PlanResult:
    status: str
    path: ScsPath | None
    scs: Scs | None
    seed_path: PwlPath | None
    stats: PlanStats
    goal: np.ndarray | None = None
    extra_scs: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "goal": None if self.goal is None else [float(v) for v in self.goal],
            "path": None if self.path is None else
                [[float(v) for v in k] for k in self.path.knots],
            "cost": None if self.path is None else self.path.cost,
            "seed_path": None if self.seed_path is None else
                [[float(v) for v in k] for k in self.seed_path.knots],
            "sets": None if self.scs is None else [p.to_json() for p in self.scs.sets],
            "coverage": None if self.scs is None else list(self.scs.coverage),
            "stats": {
                "timings_ms": self.stats.timings_ms,
                "recovery_rounds": self.stats.recovery_rounds,
                "sets_built": self.stats.sets_built,
                "hyperplanes": self.stats.hyperplanes,
                "collision_checks": self.stats.collision_checks,
            },
        }


# ---------------------------------------------------------------------------
# corridor construction and repair
# ---------------------------------------------------------------------------

def inflate_path(path: PwlPath, domain: HPolytope, params: InflationParams, checker,
                 seed: int = 0) -> Scs:
    """Inflate path segments in sequence, skipping ones already covered.

    Segment k is skipped when any previously built set contains it; the
    coverage list records which set covers each segment either way.
    """
    sets: list[HPolytope] = []
    seeds: list[Segment] = []
    coverage: list[int] = []
    reports: list[InflationReport] = []
    for k in range(path.n_segments):
        v1, v2 = path.knots[k], path.knots[k + 1]
        covered = None
        for j, poly in enumerate(sets):
            if poly.contains_segment(v1, v2):
                covered = j
                break
        if covered is None:
            seg = Segment(v1, v2)
            report = inflate_edge(seg, domain, params, checker,
                                  seed=child_seed(seed, 0x5E7, len(sets)))
            sets.append(report.polytope)
            seeds.append(seg)
            reports.append(report)
            covered = len(sets) - 1
        coverage.append(covered)
    return Scs(sets, coverage, seeds, path, domain=domain, reports=reports)


def find_path_collisions(scs: Scs, path: ScsPath, checker, fine_step: float):
    """Colliding samples along the optimized path, attributed to every containing set."""
    if fine_step <= 0.0:
        raise ValueError("fine_step must be positive")
    out = []
    seen = set()
    for i in range(path.knots.shape[0] - 1):
        samples = segment_samples(path.knots[i], path.knots[i + 1], fine_step)
        free = checker.check_batch(samples)
        for c in samples[~free]:
            key = tuple(np.round(c, 12))
            if key in seen:
                continue  # shared segment endpoints would otherwise repeat
            seen.add(key)
            hit_any = False
            for j, poly in enumerate(scs.sets):
                if poly.contains(c):
                    out.append((j, c))
                    hit_any = True
            if not hit_any:
                # numerical edge: attribute to the nearest set
                slacks = [poly.slack(c) for poly in scs.sets]
                out.append((int(np.argmin(slacks)), c))
    return out


def refine_sets(scs: Scs, collisions, seed_path: PwlPath, params: InflationParams,
                checker, seed: int = 0) -> Scs:
    """Exclude reported collisions from their sets and restore path coverage.

    Per affected set this reruns the tail of the inflation loop (project
    onto that set's seed segment, bisect, place ordered step-back
    hyperplanes) against the aggregated collisions. Unlike inflation, the
    face budget is not capped and candidates are discarded only when
    their *original* collision point leaves the set, so every reported
    collision is excluded. Any path segment evicted from its set by the
    repair is re-covered, inflating a new set when necessary.
    """
    if not collisions:
        raise ValueError("refine_sets needs at least one collision")
    by_set: dict[int, list[np.ndarray]] = {}
    for j, c in collisions:
        by_set.setdefault(int(j), []).append(np.asarray(c, dtype=float))

    sets = list(scs.sets)
    seeds = list(scs.seeds)
    domain = scs.domain if scs.domain is not None else sets[0]
    n_b = params.n_b if params.n_b is not None else default_bisection_steps(domain, params.delta_max)
    for j, cols in by_set.items():
        seg = seeds[j]
        col = np.array(cols)
        proj, _, _ = project_batch(col, seg)
        if not np.all(checker.check_batch(proj)):
            raise SegmentInCollision("seed segment projection in collision during repair")
        _, star = _bisection_batch(proj, col, n_b, checker)
        _, _, dist_star = project_batch(star, seg)
        if np.any(dist_star <= params.t_col):
            raise SegmentInCollision("collision within t_col of a seed segment during repair")
        sets[j], _ = _place_hyperplanes(sets[j], seg, star, col, dist_star,
                                        params.delta_max, max_faces=None)

    # re-cover: every original segment must sit in at least one set
    coverage = list(scs.coverage)
    for k in range(seed_path.n_segments):
        v1, v2 = seed_path.knots[k], seed_path.knots[k + 1]
        if sets[coverage[k]].contains_segment(v1, v2):
            continue
        found = None
        for j, poly in enumerate(sets):
            if poly.contains_segment(v1, v2):
                found = j
                break
        if found is None:
            seg = Segment(v1, v2)
            report = inflate_edge(seg, domain, params, checker,
                                  seed=child_seed(seed, 0x2EF, k))
            sets.append(report.polytope)
            seeds.append(seg)
            found = len(sets) - 1
        coverage[k] = found

    # keep the set list ordered by first appearance along the path
    order = []
    for c in coverage:
        if c not in order:
            order.append(c)
    for j in range(len(sets)):
        if j not in order:
            order.append(j)  # sets covering nothing stay at the tail
    remap = {old: new for new, old in enumerate(order)}
    return Scs([sets[i] for i in order], [remap[c] for c in coverage],
               [seeds[i] for i in order], seed_path, domain=scs.domain)


# ---------------------------------------------------------------------------
# the full pipeline
# ---------------------------------------------------------------------------

def plan(req: PlanRequest, world: World) -> PlanResult:
    """Run the pipeline; phase failures are encoded in the result status."""
    checker = world.checker()
    seed_checker = world.checker(margin=req.seed_margin) if req.seed_margin > 0.0 else checker
    stats = PlanStats()
    timings = stats.timings_ms
    domain = HPolytope.from_bounds(world.lower, world.upper)

    t0 = time.perf_counter()
    cs = collision_set(req.drm, world.vmap) if world.vmap is not None else CollisionSet(frozenset())
    timings["collision_set"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    if req.goal_pose is not None:
        try:
            goal = solve_ik(req.drm, cs, req.goal_pose, req.ik_weights, world.model, checker)
        except IkFailed:
            timings["ik"] = (time.perf_counter() - t0) * 1e3
            stats.collision_checks = checker.calls
            return PlanResult(STATUS_IK_FAILED, None, None, None, stats)
    else:
        goal = np.asarray(req.goal_config, dtype=float)
    timings["ik"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    try:
        raw = astar_lazy(req.drm, cs, req.start, goal, seed_checker, req.check_step)
        seed_path = shortcut(raw, seed_checker, req.check_step)
    except (NoPath, AlreadyAtGoal):
        timings["astar"] = (time.perf_counter() - t0) * 1e3
        stats.collision_checks = checker.calls + _extra_calls(seed_checker, checker)
        return PlanResult(STATUS_DRM_FAILED, None, None, None, stats, goal=goal)
    timings["astar"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    try:
        scs = inflate_path(seed_path, domain, req.params, checker,
                           seed=child_seed(req.seed, 0x1F7A))
    except SegmentInCollision:
        # the discretized check certified the path but sampling found the
        # segment effectively touching an obstacle: treat the seed as bad
        timings["inflate"] = (time.perf_counter() - t0) * 1e3
        stats.collision_checks = checker.calls + _extra_calls(seed_checker, checker)
        return PlanResult(STATUS_DRM_FAILED, None, None, seed_path, stats, goal=goal)
    timings["inflate"] = (time.perf_counter() - t0) * 1e3

    fine_step = req.check_step / 10.0
    timings["opt"] = 0.0
    timings["recovery"] = 0.0
    status = STATUS_RECOVERY_EXHAUSTED
    path = None
    for round_idx in range(req.max_recovery_rounds + 1):
        t0 = time.perf_counter()
        path = scs_shortest_path(scs, req.start, goal)
        stats.opt_converged &= path.converged
        timings["opt"] += (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        cols = find_path_collisions(scs, path, checker, fine_step)
        if not cols:
            # belt and braces: confirm at the coarser configured step too
            coarse = _collisions_at(scs, path, checker, req.check_step)
            cols = coarse
        if not cols:
            status = STATUS_OK
            timings["recovery"] += (time.perf_counter() - t0) * 1e3
            break
        if round_idx == req.max_recovery_rounds:
            timings["recovery"] += (time.perf_counter() - t0) * 1e3
            break
        stats.recovery_rounds += 1
        try:
            scs = refine_sets(scs, cols, seed_path, req.params, checker,
                              seed=child_seed(req.seed, 0x0EC, round_idx))
        except SegmentInCollision:
            timings["recovery"] += (time.perf_counter() - t0) * 1e3
            status = STATUS_DRM_FAILED
            break
        timings["recovery"] += (time.perf_counter() - t0) * 1e3

    stats.sets_built = len(scs.sets)
    stats.hyperplanes = scs.hyperplanes
    stats.collision_checks = checker.calls + _extra_calls(seed_checker, checker)
    result = PlanResult(status, path, scs, seed_path, stats, goal=goal)
    if status == STATUS_OK and req.n_extra_paths > 0:
        result.extra_scs = inflate_extra_paths(
            req.drm, cs, scs, req.start, goal, req.n_extra_paths,
            child_seed(req.seed, 0xE87A), domain, req.params, checker, req.check_step)
    return result


def _extra_calls(seed_checker, checker):
    return seed_checker.calls if seed_checker is not checker else 0


def _collisions_at(scs, path, checker, step):
    out = []
    for i in range(path.knots.shape[0] - 1):
        samples = segment_samples(path.knots[i], path.knots[i + 1], step)
        free = checker.check_batch(samples)
        for c in samples[~free]:
            for j, poly in enumerate(scs.sets):
                if poly.contains(c):
                    out.append((j, c))
    return out


def inflate_extra_paths(drm: Drm, cs: CollisionSet, scs: Scs, start: np.ndarray,
                        goal: np.ndarray, n_extra: int, seed: int,
                        domain: HPolytope, params: InflationParams, checker,
                        step: float) -> list[Scs]:
    """Heuristic for extra corridors: block a previous set's nodes and replan.

    Eligible sets contain neither start nor goal. Each round picks one
    uniformly at random among those not yet selected, adds every roadmap
    node inside it to the collision set, and reruns search + shortcut +
    inflation. The first failure stops the procedure; sets from newly
    built corridors join the eligible pool.
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)

    def eligible(sets):
        return [p for p in sets if not (p.contains(start) or p.contains(goal))]

    pool = eligible(scs.sets)
    if not pool:
        return []
    rng = np.random.default_rng(seed)
    blocked = set(cs.blocked)
    out: list[Scs] = []
    for round_idx in range(n_extra):
        if not pool:
            break
        pick = pool.pop(int(rng.integers(len(pool))))
        inside = np.flatnonzero(pick.contains_many(drm.nodes))
        blocked.update(int(i) for i in inside)
        try:
            raw = astar_lazy(drm, CollisionSet(frozenset(blocked)), start, goal, checker, step)
            path = shortcut(raw, checker, step)
            new_scs = inflate_path(path, domain, params, checker,
                                   seed=child_seed(seed, 0xE87A, round_idx))
        except (NoPath, AlreadyAtGoal, SegmentInCollision):
            break
        out.append(new_scs)
        pool.extend(eligible(new_scs.sets))
    return out
