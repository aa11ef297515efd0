"""Convex-corridor motion planning toolkit.

Inflates collision-free piecewise-linear paths in robot configuration
space into sequences of probabilistically collision-free polytopes, finds
the seed paths with dynamic roadmaps, and optimizes shortest paths
through the resulting corridors, repairing sets when sampled paths
reveal residual collisions.
"""

from .cpoly import HPolytope, SampleBatch, hit_and_run_sample
from .drm import (CollisionSet, Drm, Grid, PwlPath, astar_lazy, build_drm,
                  collision_set, load_drm, save_drm, shortcut, solve_ik)
from .inflation import (InflationParams, InflationReport, Segment, bisection_update,
                   compute_step_back, dist_gradient, dist_to_segment,
                   inflate_edge, project_to_segment, unadaptive_test)
from .planner import (PlanRequest, PlanResult, find_path_collisions,
                      inflate_extra_paths, inflate_path, plan, refine_sets)
from .scsopt import Scs, ScsPath, scs_shortest_path
from .world import (CollisionChecker, Geometry, Joint, Link, RigidTransform,
                    RobotModel, VoxelMap, World, forward_kinematics,
                    load_point_cloud, load_scene, save_point_cloud, save_scene,
                    voxelize_point_cloud)

__version__ = "0.1.0"
