import numpy as np
import pytest

from corridor.bench import point_robot_model, three_link_arm_model
from corridor.errors import DimensionMismatch
from corridor.world import (BOX, REVOLUTE, SPHERE, Geometry, Joint, Link,
                            RigidTransform, RobotModel, World,
                            forward_kinematics, load_point_cloud, save_point_cloud,
                            save_scene, load_scene, segment_samples,
                            voxelize_point_cloud)
from conftest import disc_world, forest_disc_world


def two_link_arm(lengths=(1.0, 1.0)):
    l1, l2 = lengths
    joints = (
        Joint(REVOLUTE, -1, RigidTransform.identity(2)),
        Joint(REVOLUTE, 0, RigidTransform.planar(l1, 0.0)),
        Joint("fixed", 1, RigidTransform.planar(l2, 0.0)),
    )
    links = (Link(), Link(), Link())
    return RobotModel(2, joints, links, [-np.pi] * 2, [np.pi] * 2)


# ---------------------------------------------------------------------------
# forward kinematics
# ---------------------------------------------------------------------------

def test_fk_point_robot_identity(point_robot):
    poses, ee = forward_kinematics(point_robot, [1.0, 2.0])
    assert np.array_equal(ee.trans, [1.0, 2.0])
    assert np.array_equal(poses[0].trans, [1.0, 2.0])


def test_fk_one_link_zero_rotation():
    joints = (Joint(REVOLUTE, -1, RigidTransform.identity(2)),
              Joint("fixed", 0, RigidTransform.planar(1.0, 0.0)))
    model = RobotModel(2, joints, (Link(), Link()), [-np.pi], [np.pi])
    _, ee = forward_kinematics(model, [0.0])
    assert np.allclose(ee.trans, [1.0, 0.0])


def test_fk_two_link_matches_symbolic_oracle():
    # independent oracle: trigonometric FK composed symbolically
    import sympy as sp

    q1, q2 = sp.symbols("q1 q2")
    tip = sp.Matrix([sp.cos(q1) + sp.cos(q1 + q2), sp.sin(q1) + sp.sin(q1 + q2)])
    expected = np.array(tip.subs({q1: sp.pi / 2, q2: -sp.pi / 2}).evalf(), dtype=float).ravel()
    _, ee = forward_kinematics(two_link_arm(), [np.pi / 2, -np.pi / 2])
    assert np.allclose(ee.trans, expected, atol=1e-12)
    assert np.allclose(expected, [1.0, 1.0], atol=1e-12)


def test_fk_deterministic_bitwise():
    model = three_link_arm_model()
    q = np.array([0.7, -0.4, 1.1])
    p1, e1 = forward_kinematics(model, q)
    p2, e2 = forward_kinematics(model, q)
    assert all(np.array_equal(a.trans, b.trans) and np.array_equal(a.rot, b.rot)
               for a, b in zip(p1, p2))
    assert np.array_equal(e1.trans, e2.trans) and np.array_equal(e1.rot, e2.rot)


def test_fk_dimension_mismatch(point_robot):
    with pytest.raises(DimensionMismatch):
        forward_kinematics(point_robot, [1.0, 2.0, 3.0])


# ---------------------------------------------------------------------------
# collision checking
# ---------------------------------------------------------------------------

def test_check_empty_world_free(empty_world):
    assert empty_world.checker().check([0.0, 0.0])


def test_point_robot_inside_obstacle():
    world = disc_world([[0.0, 3.0]], radius=1.0)
    assert not world.checker().check([0.0, 3.0])


def test_boundary_contact_counts_as_collision():
    world = disc_world([[0.0, 0.0]], radius=1.0)
    assert not world.checker().check([1.0, 0.0])
    assert world.checker().check([1.0 + 1e-9, 0.0])


def test_box_boundary_contact():
    model = point_robot_model()
    box = Geometry(BOX, RigidTransform.planar(2.0, 0.0), half_extents=np.array([1.0, 1.0]))
    world = World(model, static=(box,))
    ck = world.checker()
    assert not ck.check([1.0, 0.0])  # touching the face
    assert ck.check([1.0 - 1e-9, 0.0])


def test_self_collision_pair():
    # two spheres on different links that overlap when the elbow folds back
    joints = (
        Joint(REVOLUTE, -1, RigidTransform.identity(2)),
        Joint(REVOLUTE, 0, RigidTransform.planar(1.0, 0.0)),
    )
    links = (
        Link((Geometry(SPHERE, RigidTransform.planar(0.25, 0.0), radius=0.1),)),
        Link((Geometry(SPHERE, RigidTransform.planar(0.75, 0.0), radius=0.1),)),
    )
    model = RobotModel(2, joints, links, [-np.pi] * 2, [np.pi] * 2, self_pairs=((0, 1),))
    ck = World(model).checker()
    assert ck.check([0.0, 0.0])            # stretched out: clear
    assert not ck.check([0.0, np.pi])      # folded back onto the first link


def test_self_pair_same_link_rejected():
    joints = (Joint(REVOLUTE, -1, RigidTransform.identity(2)),)
    links = (Link((Geometry(SPHERE, RigidTransform.identity(2), radius=0.1),
                   Geometry(SPHERE, RigidTransform.planar(0.5, 0), radius=0.1))),)
    with pytest.raises(ValueError):
        RobotModel(2, joints, links, [-1.0], [1.0], self_pairs=((0, 1),))


def test_batch_empty_and_singleton(empty_world):
    ck = empty_world.checker()
    assert ck.check_batch(np.zeros((0, 2))).shape == (0,)
    q = np.array([0.3, -0.4])
    assert ck.check_batch(q[None, :])[0] == ck.check(q)


def test_batch_matches_sequential_oracle():
    world, _ = forest_disc_world(7)
    rng = np.random.default_rng(42)
    Q = rng.uniform(-5, 5, size=(10_000, 2))
    batch_ck = world.checker()
    mask = batch_ck.check_batch(Q)
    seq_ck = world.checker()
    oracle = np.array([seq_ck.check(q) for q in Q])
    assert np.array_equal(mask, oracle)
    assert batch_ck.calls == 10_000


def test_check_segment_trivials():
    world = disc_world([[0.0, 2.0]], radius=0.5)
    ck = world.checker()
    assert ck.check_segment([1.0, 0.0], [1.0, 0.0], 0.1)  # degenerate free point
    assert not ck.check_segment([-2.0, 2.0], [2.0, 2.0], 0.01)  # through the center


def test_segment_samples_spacing():
    S = segment_samples(np.zeros(2), np.array([1.0, 0.0]), 0.3)
    assert np.allclose(S[0], [0, 0]) and np.allclose(S[-1], [1, 0])
    gaps = np.linalg.norm(np.diff(S, axis=0), axis=1)
    assert np.all(gaps <= 0.3 + 1e-12)


def test_check_segment_matches_finer_oracle():
    # mismatches may only be the documented kind: the coarse step missing a sliver
    for seed in range(100):
        world, scene = forest_disc_world(1000 + seed)
        ck = world.checker()
        rng = np.random.default_rng(seed)
        v1, v2 = rng.uniform(-4.5, 4.5, size=(2, 2))
        coarse = ck.check_segment(v1, v2, 0.1)
        fine = ck.check_segment(v1, v2, 0.01)
        if coarse != fine:
            assert coarse and not fine


# ---------------------------------------------------------------------------
# voxel maps
# ---------------------------------------------------------------------------

def test_voxelize_empty():
    vm = voxelize_point_cloud(np.zeros((0, 2)), 0.5, np.zeros(2))
    assert len(vm.occupied) == 0
    assert vm.centers().shape == (0, 2)


def test_voxelize_single_point_and_idempotence():
    pts = np.array([[0.25, 0.25], [0.26, 0.24]])
    vm = voxelize_point_cloud(pts, 0.5, np.zeros(2))
    assert vm.occupied == frozenset({(0, 0)})


def test_voxelize_boundary_goes_to_higher_bin():
    vm = voxelize_point_cloud(np.array([[1.0, 0.2]]), 0.5, np.zeros(2))
    assert vm.occupied == frozenset({(2, 0)})


def test_voxel_sphere_circumscribes_cube():
    for dim, factor in ((2, np.sqrt(2) / 2), (3, np.sqrt(3) / 2)):
        side = 0.37
        vm = voxelize_point_cloud(np.full((1, dim), 0.1), side, np.zeros(dim))
        assert np.isclose(vm.sphere_radius, factor * side)
        # every cube corner is exactly half a diagonal from the center
        corner_dist = np.linalg.norm(np.full(dim, side / 2))
        assert corner_dist <= vm.sphere_radius + 1e-12
        rng = np.random.default_rng(dim)
        inside = rng.uniform(-side / 2, side / 2, size=(1000, dim))
        assert np.all(np.linalg.norm(inside, axis=1) <= vm.sphere_radius + 1e-12)


def test_voxel_map_obstacle_checked():
    model = point_robot_model()
    vm = voxelize_point_cloud(np.array([[1.0, 1.0]]), 0.5, np.zeros(2))
    world = World(model, vmap=vm)
    ck = world.checker()
    assert not ck.check([1.25, 1.25])  # at the occupied bin center
    assert ck.check([4.0, 4.0])


def test_margin_inflates_all_tests():
    world = disc_world([[0.0, 0.0]], radius=1.0)
    assert world.checker().check([1.2, 0.0])
    assert not world.checker(margin=0.3).check([1.2, 0.0])


# ---------------------------------------------------------------------------
# point cloud files and scenes
# ---------------------------------------------------------------------------

def test_point_cloud_text_roundtrip(tmp_path):
    pts = np.array([[0.0, 1.0, 2.0], [3.5, -1.25, 0.125]])
    p = tmp_path / "cloud.xyz"
    save_point_cloud(p, pts)
    assert np.allclose(load_point_cloud(p), pts)


def test_point_cloud_binary_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(257, 3))
    p = tmp_path / "cloud.pcb"
    save_point_cloud(p, pts, binary=True)
    out = load_point_cloud(p)
    assert np.array_equal(out, pts.astype(np.float32).astype(np.float64))
    raw = p.read_bytes()
    assert raw[:4] == b"PCB1"
    assert int.from_bytes(raw[4:12], "little") == 257
    assert len(raw) == 16 + 257 * 12


def test_scene_roundtrip(tmp_path):
    world, _ = forest_disc_world(5)
    p = tmp_path / "scene.json"
    save_scene(p, world)
    loaded = load_scene(p)
    assert loaded.model.dof == world.model.dof
    assert len(loaded.static) == len(world.static)
    q = np.array([0.2, -0.7])
    _, e1 = forward_kinematics(world.model, q)
    _, e2 = forward_kinematics(loaded.model, q)
    assert np.allclose(e1.trans, e2.trans)
    rng = np.random.default_rng(1)
    Q = rng.uniform(-5, 5, size=(500, 2))
    assert np.array_equal(world.checker().check_batch(Q), loaded.checker().check_batch(Q))


def test_arm_scene_roundtrip(tmp_path):
    world = World(three_link_arm_model())
    p = tmp_path / "arm.json"
    save_scene(p, world)
    loaded = load_scene(p)
    assert loaded.model.self_pairs == world.model.self_pairs
    q = np.array([0.5, 0.5, -0.5])
    _, e1 = forward_kinematics(world.model, q)
    _, e2 = forward_kinematics(loaded.model, q)
    assert np.allclose(e1.trans, e2.trans) and np.allclose(e1.rot, e2.rot)
