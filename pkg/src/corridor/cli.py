"""Command-line entry points.

Subcommands: build-drm, plan, inflate, bench. Exit codes: 0 on success,
2 when planning fails, 3 on bad input. CORRIDOR_THREADS caps the worker
pool used by batch operations and the benchmark.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bench import (BenchConfig, ForestScene, load_bench_config, render_svg,
                    run_benchmark, write_csv, write_summary)
from .cpoly import HPolytope
from .drm import Grid, PwlPath, build_drm, load_drm, save_drm
from .inflation import InflationParams
from .errors import CorridorError
from .planner import PlanRequest, STATUS_OK, inflate_path, plan
from .world import load_point_cloud, load_scene, voxelize_point_cloud

EXIT_OK = 0
EXIT_PLAN_FAILED = 2
EXIT_BAD_INPUT = 3


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a vector: {text!r}") from exc


def _add_build_drm(sub):
    p = sub.add_parser("build-drm", help="construct a roadmap for a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--d-cs", type=float, default=10.0)
    p.add_argument("--d-ts", type=float, default=10.0)
    p.add_argument("--grid-side", type=float, default=0.06)
    p.add_argument("--grid-lower", type=_vector, default=None,
                   help="task-space grid origin (defaults to the domain box)")
    p.add_argument("--grid-upper", type=_vector, default=None)


def _cmd_build_drm(args) -> int:
    world = load_scene(args.scene)
    lo = args.grid_lower if args.grid_lower is not None else world.lower[:world.model.dim]
    hi = args.grid_upper if args.grid_upper is not None else world.upper[:world.model.dim]
    extents = tuple(int(np.ceil((hi[a] - lo[a]) / args.grid_side)) for a in range(len(lo)))
    grid = Grid(lo, args.grid_side, extents)
    drm = build_drm(world.model, world.checker(), world.lower, world.upper,
                    args.nodes, args.k, args.d_cs, args.d_ts, grid, seed=args.seed)
    save_drm(drm, args.out)
    print(f"built roadmap: {drm.n_nodes} nodes, {drm.adj_ids.shape[0] // 2} edges, "
          f"{drm.grid.n_voxels} voxels -> {args.out}")
    return EXIT_OK


def _add_plan(sub):
    p = sub.add_parser("plan", help="plan a path in a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--drm", required=True)
    p.add_argument("--start", type=_vector, required=True)
    goal = p.add_mutually_exclusive_group(required=True)
    goal.add_argument("--goal-pose", type=_vector)
    goal.add_argument("--goal-config", type=_vector)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default=None)
    p.add_argument("--cloud", default=None, help="point cloud file for online obstacles")
    p.add_argument("--bin", type=float, default=0.06, help="voxel side for the cloud")
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seed-margin", type=float, default=0.0)
    p.add_argument("--params", default=None, help="JSON file with inflation parameters")


def _cmd_plan(args) -> int:
    world = load_scene(args.scene)
    drm = load_drm(args.drm)
    if args.cloud:
        pts = load_point_cloud(args.cloud)[:, :world.model.dim]
        world = world.with_vmap(voxelize_point_cloud(pts, args.bin, world.lower[:world.model.dim]))
    params = InflationParams()
    if args.params:
        with open(args.params) as fh:
            params = InflationParams.from_dict(json.load(fh))
    req = PlanRequest(drm=drm, start=args.start, goal_config=args.goal_config,
                      goal_pose=args.goal_pose, params=params, check_step=args.step,
                      seed=args.seed, seed_margin=args.seed_margin)
    result = plan(req, world)
    with open(args.out, "w") as fh:
        json.dump(result.to_json(), fh, indent=2)
        fh.write("\n")
    print(f"status: {result.status}" + (
        f", cost {result.path.cost:.4f}" if result.path is not None else ""))
    if args.svg and world.model.dim == 2:
        centers = np.array([g.local_pose.trans for g in world.static
                            if g.kind == "sphere"]).reshape(-1, 2)
        radius = max((g.radius for g in world.static if g.kind == "sphere"), default=0.0)
        scene = ForestScene(seed=0, centers=centers, radius=radius,
                            lower=world.lower, upper=world.upper)
        render_svg(scene, args.svg, opt_path=result.path, scs=result.scs,
                   seed_path=result.seed_path)
    return EXIT_OK if result.status == STATUS_OK else EXIT_PLAN_FAILED


def _add_inflate(sub):
    p = sub.add_parser("inflate", help="inflate a piecewise-linear path into convex sets")
    p.add_argument("--scene", required=True)
    p.add_argument("--path", required=True, help="JSON file: list of knot configurations")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", default=None)


def _cmd_inflate(args) -> int:
    world = load_scene(args.scene)
    with open(args.path) as fh:
        knots = np.asarray(json.load(fh), dtype=float)
    params = InflationParams()
    if args.params:
        with open(args.params) as fh:
            params = InflationParams.from_dict(json.load(fh))
    domain = HPolytope.from_bounds(world.lower, world.upper)
    scs = inflate_path(PwlPath(knots), domain, params, world.checker(), seed=args.seed)
    with open(args.out, "w") as fh:
        json.dump({"sets": [p.to_json() for p in scs.sets],
                   "coverage": list(scs.coverage)}, fh, indent=2)
        fh.write("\n")
    print(f"inflated {knots.shape[0] - 1} segments into {len(scs.sets)} sets")
    return EXIT_OK


def _add_bench(sub):
    p = sub.add_parser("bench", help="run the randomized benchmark")
    p.add_argument("--config", default=None, help="TOML or JSON benchmark config")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--summary", default=None, help="JSON summary path")
    p.add_argument("--quiet", action="store_true")


def _cmd_bench(args) -> int:
    cfg = load_bench_config(args.config) if args.config else BenchConfig()

    def progress(row):
        if not args.quiet:
            print(f"env {row['env_seed']} drm {row['drm_seed']} size {row['drm_size']}: "
                  f"{row['status']} cost {row['scs_cost']:.4g}")

    records, summary = run_benchmark(cfg, progress=progress)
    write_csv(records, args.out)
    if args.summary:
        write_summary(summary, args.summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="corridor")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_build_drm(sub)
    _add_plan(sub)
    _add_inflate(sub)
    _add_bench(sub)
    args = parser.parse_args(argv)
    handlers = {
        "build-drm": _cmd_build_drm,
        "plan": _cmd_plan,
        "inflate": _cmd_inflate,
        "bench": _cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except (OSError, ValueError, KeyError, json.JSONDecodeError, CorridorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
