"""Forest benchmark: scene generation, the randomized harness, and SVG output.

The environment is a side-10 square with 15 discs of radius 0.35 scattered
uniformly in the centered side-7 square. Queries run from the bottom-left
corner region to the top-right one. The harness executes the full
(env seed x drm seed x roadmap size) cross product, re-verifies every
successful path at a 10x finer step, and reports per-column statistics
with success rates.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import parallel
from .cpoly import HPolytope
from .drm import Drm, Grid, build_drm
from .inflation import InflationParams
from .planner import PlanRequest, STATUS_OK, plan
from .seeding import child_seed
from .world import (BOX, PRISMATIC, REVOLUTE, SPHERE, Geometry, Joint, Link,
                    RigidTransform, RobotModel, World, forward_kinematics,
                    pose_vector, voxelize_point_cloud)

DOMAIN_HALF = 5.0
CENTER_HALF = 3.5
N_OBSTACLES = 15
OBSTACLE_RADIUS = 0.35
# corner queries: far enough out that no obstacle (obstacle centers are
# confined to the center square) can reach them even through the voxel
# blow-up plus the seed-path clearance margin
START = np.array([-3.82, -3.82])
GOAL = np.array([3.82, 3.82])

DRM_GRID_SIDE = 0.06       # offline voxel length
ONLINE_BIN = 0.02          # perception voxel length (re-binned for pruning)
SEED_MARGIN = 0.04         # seed-path clearance margin, > hidden depth at step 0.1
CLOUD_SPACING = 0.01       # synthetic point-cloud sample spacing inside discs


@dataclass(frozen=True)
class ForestScene:
    seed: int
    centers: np.ndarray  # (15, 2)
    radius: float = OBSTACLE_RADIUS
    lower: np.ndarray = field(default_factory=lambda: np.array([-DOMAIN_HALF, -DOMAIN_HALF]))
    upper: np.ndarray = field(default_factory=lambda: np.array([DOMAIN_HALF, DOMAIN_HALF]))
    start: np.ndarray = field(default_factory=lambda: START.copy())
    goal: np.ndarray = field(default_factory=lambda: GOAL.copy())

    def obstacles(self) -> tuple[Geometry, ...]:
        return tuple(Geometry(SPHERE, RigidTransform.planar(c[0], c[1]), radius=self.radius)
                     for c in self.centers)


def gen_forest(seed: int) -> ForestScene:
    """Deterministic scene: 15 disc centers uniform in the side-7 center square."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-CENTER_HALF, CENTER_HALF, size=(N_OBSTACLES, 2))
    return ForestScene(seed=int(seed), centers=centers)


def point_robot_model(lower=(-DOMAIN_HALF, -DOMAIN_HALF),
                      upper=(DOMAIN_HALF, DOMAIN_HALF)) -> RobotModel:
    """Planar point robot: two prismatic joints carrying a radius-zero sphere."""
    joints = (
        Joint(PRISMATIC, -1, RigidTransform.identity(2), axis=np.array([1.0, 0.0])),
        Joint(PRISMATIC, 0, RigidTransform.identity(2), axis=np.array([0.0, 1.0])),
    )
    links = (Link(), Link((Geometry(SPHERE, RigidTransform.identity(2), radius=0.0),)))
    return RobotModel(2, joints, links, np.asarray(lower, float), np.asarray(upper, float))


def base_world(scene: ForestScene) -> World:
    """Obstacle-free base scene used for roadmap construction."""
    return World(point_robot_model(scene.lower, scene.upper),
                 lower=scene.lower, upper=scene.upper)


def disc_point_cloud(scene: ForestScene, spacing: float = CLOUD_SPACING) -> np.ndarray:
    """Synthetic perception: a grid of points covering each disc interior."""
    pts = []
    g = np.arange(-scene.radius, scene.radius + spacing / 2, spacing)
    xx, yy = np.meshgrid(g, g)
    mask = xx**2 + yy**2 <= scene.radius**2
    disc = np.stack([xx[mask], yy[mask]], axis=1)
    for c in scene.centers:
        pts.append(disc + c)
    return np.concatenate(pts)


def scene_world(scene: ForestScene, bin_side: float = ONLINE_BIN) -> World:
    """Planning world: exact discs plus their voxelized perception."""
    vmap = voxelize_point_cloud(disc_point_cloud(scene), bin_side, scene.lower)
    return World(point_robot_model(scene.lower, scene.upper),
                 static=scene.obstacles(), vmap=vmap,
                 lower=scene.lower, upper=scene.upper)


def forest_grid(scene: ForestScene, side: float = DRM_GRID_SIDE) -> Grid:
    n = int(math.ceil((scene.upper[0] - scene.lower[0]) / side))
    return Grid(scene.lower.copy(), side, (n, n))


# ---------------------------------------------------------------------------
# planar-arm smoke scenes
# ---------------------------------------------------------------------------

ARM_LINKS = (0.9, 0.7, 0.5)
ARM_SPHERE_RADIUS = 0.07


def three_link_arm_model() -> RobotModel:
    """Table-top planar arm: three revolute joints, sphere-chain geometry.

    A trailing fixed joint carries the tool frame so the end-effector pose
    is the tip, not the last joint. Self-collision pairs connect the base
    link's spheres with the distal link's (adjacent links always overlap
    near their shared joint and are excluded, as usual).
    """
    l0, l1, l2 = ARM_LINKS
    r = ARM_SPHERE_RADIUS

    def chain(length):
        return tuple(Geometry(SPHERE, RigidTransform.planar(f * length, 0.0), radius=r)
                     for f in (1 / 6, 3 / 6, 5 / 6))

    joints = (
        Joint(REVOLUTE, -1, RigidTransform.identity(2)),
        Joint(REVOLUTE, 0, RigidTransform.planar(l0, 0.0)),
        Joint(REVOLUTE, 1, RigidTransform.planar(l1, 0.0)),
        Joint("fixed", 2, RigidTransform.planar(l2, 0.0)),
    )
    links = (Link(chain(l0)), Link(chain(l1)), Link(chain(l2)), Link())
    self_pairs = tuple((i, j) for i in range(3) for j in range(6, 9))
    return RobotModel(2, joints, links,
                      lower=np.array([0.2, -2.2, -2.2]),
                      upper=np.array([np.pi - 0.2, 2.2, 2.2]),
                      self_pairs=self_pairs)


ARM_TABLE = Geometry(BOX, RigidTransform.planar(0.0, -0.2),
                     half_extents=np.array([2.5, 0.1]))
ARM_GRID_LOWER = np.array([-2.3, -0.4])
ARM_GRID_SIDE = 0.08
ARM_START = np.array([0.35, 0.55, 0.4])


def arm_base_world() -> World:
    """Arm over the table with no movable obstacles; used for roadmap building."""
    return World(three_link_arm_model(), static=(ARM_TABLE,))


def arm_grid(side: float = ARM_GRID_SIDE) -> Grid:
    n_x = int(math.ceil(4.6 / side))
    n_y = int(math.ceil(3.0 / side))
    return Grid(ARM_GRID_LOWER, side, (n_x, n_y))


def arm_smoke_scene(seed: int):
    """Seeded table-top scene: two voxel blobs overhead, start right, goal left.

    Returns (world, start configuration, goal pose). The goal pose is the
    mirrored start tip pose, so it is always reachable.
    """
    rng = np.random.default_rng(seed)
    model = three_link_arm_model()
    pts = []
    g = np.arange(-0.1, 0.101, 0.02)
    xx, yy = np.meshgrid(g, g)
    mask = xx**2 + yy**2 <= 0.1**2
    blob = np.stack([xx[mask], yy[mask]], axis=1)
    for _ in range(2):
        # outside the base link's sweep circle so folding under stays possible
        radius = rng.uniform(1.2, 1.6)
        angle = rng.uniform(np.radians(60), np.radians(120))
        center = radius * np.array([np.cos(angle), np.sin(angle)])
        pts.append(blob + center)
    vmap = voxelize_point_cloud(np.concatenate(pts), ARM_GRID_SIDE, ARM_GRID_LOWER)
    world = World(model, static=(ARM_TABLE,), vmap=vmap)
    start = ARM_START.copy()
    mirror = np.array([np.pi - start[0], -start[1], -start[2]])
    goal_pose = pose_vector(forward_kinematics(model, mirror)[1])
    return world, start, goal_pose


# ---------------------------------------------------------------------------
# benchmark harness
# ---------------------------------------------------------------------------

@dataclass
class BenchConfig:
    env_seeds: list = field(default_factory=lambda: list(range(10)))
    drm_seeds: list = field(default_factory=lambda: list(range(5)))
    sizes: list = field(default_factory=lambda: [400])
    params: InflationParams = field(default_factory=InflationParams)
    master_seed: int = 2024
    k: int = 10
    d_cs: float = 10.0
    d_ts: float = 10.0
    grid_side: float = DRM_GRID_SIDE
    online_bin: float = ONLINE_BIN
    check_step: float = 0.1
    seed_margin: float = SEED_MARGIN
    max_recovery_rounds: int = 20

    @staticmethod
    def from_dict(obj: dict) -> "BenchConfig":
        cfg = BenchConfig()
        inflation = obj.pop("inflation", None)
        drm = obj.pop("drm", None)
        for key, val in obj.items():
            if hasattr(cfg, key):
                setattr(cfg, key, val)
        if inflation:
            cfg.params = InflationParams.from_dict(inflation)
        if drm:
            cfg.k = int(drm.get("k", cfg.k))
            cfg.d_cs = float(drm.get("d_cs", cfg.d_cs))
            cfg.d_ts = float(drm.get("d_ts", cfg.d_ts))
            cfg.grid_side = float(drm.get("side", cfg.grid_side))
        return cfg


def load_bench_config(path) -> BenchConfig:
    text = open(path, "rb").read()
    if str(path).endswith(".json"):
        return BenchConfig.from_dict(json.loads(text))
    if sys.version_info >= (3, 11):
        import tomllib as toml
    else:
        import tomli as toml
    return BenchConfig.from_dict(toml.loads(text.decode()))


CSV_COLUMNS = [
    "env_seed", "drm_seed", "drm_size", "drm_success", "drm_path_len", "scs_cost",
    "n_sets", "n_segments", "recovery_rounds", "collision_free", "status",
    "t_collision_set_ms", "t_ik_ms", "t_astar_ms", "t_inflate_ms", "t_opt_ms",
    "t_recovery_ms", "t_total_ms",
]


def _run_instance(cfg: BenchConfig, scene: ForestScene, drm: Drm,
                  env_seed: int, drm_seed: int, size: int,
                  keep_result: bool = False) -> dict:
    instance_seed = child_seed(cfg.master_seed, env_seed, drm_seed, size)
    world = scene_world(scene, cfg.online_bin)
    req = PlanRequest(drm=drm, start=scene.start, goal_config=scene.goal,
                      params=cfg.params, check_step=cfg.check_step,
                      max_recovery_rounds=cfg.max_recovery_rounds,
                      seed=instance_seed, seed_margin=cfg.seed_margin)
    res = plan(req, world)
    t = res.stats.timings_ms
    drm_success = res.seed_path is not None
    row = {
        "env_seed": env_seed, "drm_seed": drm_seed, "drm_size": size,
        "drm_success": drm_success,
        "drm_path_len": res.seed_path.length if drm_success else float("nan"),
        "scs_cost": res.path.cost if res.path is not None else float("nan"),
        "n_sets": res.stats.sets_built if res.scs is not None else 0,
        "n_segments": res.seed_path.n_segments if drm_success else 0,
        "recovery_rounds": res.stats.recovery_rounds,
        "collision_free": False,
        "status": res.status,
        "t_collision_set_ms": t.get("collision_set", 0.0),
        "t_ik_ms": t.get("ik", 0.0),
        "t_astar_ms": t.get("astar", 0.0),
        "t_inflate_ms": t.get("inflate", 0.0),
        "t_opt_ms": t.get("opt", 0.0),
        "t_recovery_ms": t.get("recovery", 0.0),
    }
    row["t_total_ms"] = sum(v for k, v in row.items() if k.startswith("t_"))
    if res.status == STATUS_OK:
        checker = world.checker()
        fine = cfg.check_step / 10.0
        row["collision_free"] = all(
            checker.check_segment(res.path.knots[i], res.path.knots[i + 1], fine)
            for i in range(res.path.knots.shape[0] - 1))
    if keep_result:
        row["_result"] = res
    return row


def run_benchmark(cfg: BenchConfig, progress=None, keep_results: bool = False):
    """Execute the full cross product; returns (records, summary).

    Instance results are independent of worker count: every instance owns
    a child seed derived from (master, env seed, drm seed, size), and the
    records are sorted before any statistics are taken. With
    ``keep_results`` each row also carries its PlanResult under "_result"
    (never serialized; used by audits that need the actual sets).
    """
    scenes = {e: gen_forest(e) for e in cfg.env_seeds}
    roadmaps: dict[tuple, Drm] = {}
    base = World(point_robot_model())  # the base scene is obstacle-free
    grid = forest_grid(gen_forest(0), cfg.grid_side)
    for drm_seed in cfg.drm_seeds:
        for size in cfg.sizes:
            roadmaps[(drm_seed, size)] = build_drm(
                base.model, base.checker(), base.lower, base.upper, size,
                cfg.k, cfg.d_cs, cfg.d_ts, grid,
                seed=child_seed(cfg.master_seed, 0xD2A, drm_seed, size))

    tasks = [(e, d, s) for e in cfg.env_seeds for d in cfg.drm_seeds for s in cfg.sizes]

    def run_one(task):
        e, d, s = task
        row = _run_instance(cfg, scenes[e], roadmaps[(d, s)], e, d, s,
                            keep_result=keep_results)
        if progress:
            progress(row)
        return row

    workers = parallel.worker_count()
    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_one, tasks))
    else:
        records = [run_one(t) for t in tasks]
    records.sort(key=lambda r: (r["env_seed"], r["drm_seed"], r["drm_size"]))
    return records, summarize(records)


def summarize(records: list) -> dict:
    n = len(records)
    drm_ok = [r for r in records if r["drm_success"]]
    ok = [r for r in records if r["status"] == STATUS_OK]
    out = {
        "instances": n,
        "drm_success_rate": len(drm_ok) / n if n else 0.0,
        "opt_success_rate": len(ok) / len(drm_ok) if drm_ok else 0.0,
        "collision_free_rate": (sum(r["collision_free"] for r in ok) / len(ok)) if ok else 0.0,
        "recovery_triggered_rate": (sum(r["recovery_rounds"] > 0 for r in ok) / len(ok)) if ok else 0.0,
    }
    for col in ("drm_path_len", "scs_cost", "n_sets", "n_segments",
                "recovery_rounds", "t_total_ms"):
        vals = np.array([float(r[col]) for r in ok])
        if vals.size:
            out[f"{col}_mean"] = float(np.mean(vals))
            out[f"{col}_std"] = float(np.std(vals))
    return out


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def write_csv(records: list, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([_fmt(r[c]) for c in CSV_COLUMNS])


def write_summary(summary: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# SVG rendering
# ---------------------------------------------------------------------------

def polytope_vertices_2d(poly: HPolytope, tol: float = 1e-6) -> np.ndarray:
    """Vertices of a bounded 2-D H-polytope by pairwise face intersection."""
    if poly.dim != 2:
        raise ValueError("2-D polytopes only")
    A, b = poly.A, poly.b
    pts = []
    m = A.shape[0]
    for i in range(m):
        for j in range(i + 1, m):
            M = np.array([A[i], A[j]])
            det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
            if abs(det) < 1e-12:
                continue
            p = np.linalg.solve(M, np.array([b[i], b[j]]))
            if np.max(A @ p - b) <= tol:
                pts.append(p)
    if not pts:
        return np.zeros((0, 2))
    pts = np.unique(np.round(np.array(pts), 9), axis=0)
    center = pts.mean(axis=0)
    angles = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
    return pts[np.argsort(angles)]


def render_svg(scene: ForestScene, out, opt_path=None, scs=None, seed_path=None,
               size: int = 640) -> None:
    """Write an SVG of the scene: domain, obstacles, sets, and paths."""
    lo, hi = scene.lower, scene.upper
    span = float(hi[0] - lo[0])
    scale = size / span

    def sx(x):
        return (x - lo[0]) * scale

    def sy(y):
        return (hi[1] - y) * scale  # flip: svg y grows downward

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<polygon id="domain" points="0,0 {size},0 {size},{size} 0,{size}" '
        'fill="#fafafa" stroke="#333" stroke-width="1.5"/>',
    ]
    if scs is not None:
        lines.append('<g id="sets">')
        for poly in scs.sets:
            verts = polytope_vertices_2d(poly)
            if verts.shape[0] < 3:
                continue
            pts = " ".join(f"{sx(p[0]):.2f},{sy(p[1]):.2f}" for p in verts)
            lines.append(f'<polygon points="{pts}" fill="#4a90d9" fill-opacity="0.15" '
                         'stroke="#4a90d9" stroke-width="1"/>')
        lines.append("</g>")
    lines.append('<g id="obstacles">')
    for c in scene.centers:
        lines.append(f'<circle cx="{sx(c[0]):.2f}" cy="{sy(c[1]):.2f}" '
                     f'r="{scene.radius * scale:.2f}" fill="#b33" fill-opacity="0.8"/>')
    lines.append("</g>")
    if seed_path is not None:
        pts = " ".join(f"{sx(k[0]):.2f},{sy(k[1]):.2f}" for k in seed_path.knots)
        lines.append(f'<polyline id="seed-path" points="{pts}" fill="none" '
                     'stroke="#888" stroke-width="1.5" stroke-dasharray="6 4"/>')
    if opt_path is not None:
        knots = opt_path.knots if hasattr(opt_path, "knots") else np.asarray(opt_path)
        pts = " ".join(f"{sx(k[0]):.2f},{sy(k[1]):.2f}" for k in knots)
        lines.append(f'<polyline id="opt-path" points="{pts}" fill="none" '
                     'stroke="#2a7a2a" stroke-width="2.5"/>')
    lines.append("</svg>")
    with open(out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
