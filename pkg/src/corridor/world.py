"""Robots, scenes, and batch collision checking.

Everything downstream treats this module as the collision oracle. Robots
are serial chains (optionally branching through the ``parent`` field)
with sphere and box collision geometries attached to links. Obstacles
are either static geometries posed in the world or voxel maps derived
from point clouds; an occupied voxel is checked as the sphere that
circumscribes its cube, which keeps the checker conservative.

All checks use the closed-obstacle convention: touching counts as
colliding, so a configuration is never mislabelled as safe because of a
boundary tie.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import parallel
from .errors import DimensionMismatch

SPHERE = "sphere"
BOX = "box"
REVOLUTE = "revolute"
PRISMATIC = "prismatic"
FIXED = "fixed"


# ---------------------------------------------------------------------------
# rigid transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation in task space (2-D or 3-D)."""

    rot: np.ndarray
    trans: np.ndarray

    @staticmethod
    def identity(dim: int) -> "RigidTransform":
        return RigidTransform(np.eye(dim), np.zeros(dim))

    @staticmethod
    def planar(x: float = 0.0, y: float = 0.0, angle: float = 0.0) -> "RigidTransform":
        c, s = np.cos(angle), np.sin(angle)
        return RigidTransform(np.array([[c, -s], [s, c]]), np.array([float(x), float(y)]))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(self.rot @ other.rot, self.rot @ other.trans + self.trans)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rot.T + self.trans

    @property
    def dim(self) -> int:
        return self.trans.shape[0]


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a (unit) 3-D axis."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


# ---------------------------------------------------------------------------
# geometry and robot model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Geometry:
    """Sphere or box collision geometry posed relative to its owner.

    For static scene geometry the local pose is the world pose. A radius
    of exactly zero is allowed so a point robot can be modelled as a
    degenerate sphere.
    """

    kind: str
    local_pose: RigidTransform
    radius: float = 0.0
    half_extents: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (SPHERE, BOX):
            raise ValueError(f"unknown geometry kind {self.kind!r}")
        if self.kind == SPHERE and self.radius < 0.0:
            raise ValueError("sphere radius must be >= 0")
        if self.kind == BOX:
            he = np.asarray(self.half_extents, dtype=float)
            if np.any(he <= 0.0):
                raise ValueError("box half extents must be positive")
            object.__setattr__(self, "half_extents", he)


@dataclass(frozen=True)
class Joint:
    kind: str  # revolute | prismatic | fixed
    parent: int  # parent link index, -1 for the world frame
    origin: RigidTransform
    axis: np.ndarray | None = None  # prismatic direction / 3-D revolute axis

    def __post_init__(self):
        if self.kind not in (REVOLUTE, PRISMATIC, FIXED):
            raise ValueError(f"unknown joint kind {self.kind!r}")
        if self.axis is not None:
            object.__setattr__(self, "axis", np.asarray(self.axis, dtype=float))


@dataclass(frozen=True)
class Link:
    geometries: tuple[Geometry, ...] = ()


@dataclass(frozen=True)
class RobotModel:
    """Kinematic chain with collision geometries and self-collision pairs.

    Link i is the child of joint i; joints come in chain order, so a
    joint's parent link index is always smaller than its own. Geometry
    indices in ``self_pairs`` are global, counting geometries link by
    link in order.
    """

    dim: int
    joints: tuple[Joint, ...]
    links: tuple[Link, ...]
    lower: np.ndarray
    upper: np.ndarray
    self_pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if len(self.joints) != len(self.links):
            raise ValueError("need one link per joint")
        if self.lower.shape != self.upper.shape or self.lower.shape[0] != self.dof:
            raise DimensionMismatch("joint limits must match the number of actuated joints")
        if np.any(self.lower >= self.upper):
            raise ValueError("joint limits must satisfy lower < upper componentwise")
        owners = self.geometry_links()
        for gi, gj in self.self_pairs:
            if owners[gi] == owners[gj]:
                raise ValueError("self-collision pair on a single link")

    @property
    def dof(self) -> int:
        return sum(1 for j in self.joints if j.kind != FIXED)

    def geometry_links(self) -> list[int]:
        """Owning link index for each global geometry index."""
        out = []
        for li, link in enumerate(self.links):
            out.extend([li] * len(link.geometries))
        return out

    def geometries(self) -> list[Geometry]:
        out = []
        for link in self.links:
            out.extend(link.geometries)
        return out


# ---------------------------------------------------------------------------
# forward kinematics
# ---------------------------------------------------------------------------

def _motion(joint: Joint, q: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Batched joint motion: rotations (B,d,d) and translations (B,d)."""
    n = q.shape[0]
    eye = np.broadcast_to(np.eye(dim), (n, dim, dim))
    zero = np.zeros((n, dim))
    if joint.kind == FIXED:
        return eye, zero
    if joint.kind == PRISMATIC:
        return eye, q[:, None] * joint.axis[None, :]
    if dim == 2:
        c, s = np.cos(q), np.sin(q)
        rot = np.empty((n, 2, 2))
        rot[:, 0, 0] = c
        rot[:, 0, 1] = -s
        rot[:, 1, 0] = s
        rot[:, 1, 1] = c
        return rot, zero
    rot = np.stack([rotation_about_axis(joint.axis, a) for a in q])
    return rot, zero


def fk_batch(model: RobotModel, Q: np.ndarray):
    """Link frames for a batch of configurations.

    Returns (link_rots, link_trans) with shapes (L, B, d, d) and (L, B, d).
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[1] != model.dof:
        raise DimensionMismatch(
            f"configuration has {Q.shape[1]} values, robot has {model.dof} dof")
    n, d = Q.shape[0], model.dim
    rots, trans = [], []
    qi = 0
    for j, joint in enumerate(model.joints):
        if joint.parent < 0:
            pr = np.broadcast_to(np.eye(d), (n, d, d))
            pt = np.zeros((n, d))
        else:
            pr, pt = rots[joint.parent], trans[joint.parent]
        base_r = pr @ joint.origin.rot
        base_t = pt + np.einsum("bij,j->bi", pr, joint.origin.trans)
        if joint.kind == FIXED:
            rots.append(base_r)
            trans.append(base_t)
            continue
        mr, mt = _motion(joint, Q[:, qi], d)
        qi += 1
        rots.append(base_r @ mr)
        trans.append(base_t + np.einsum("bij,bj->bi", base_r, mt))
    return rots, trans


def forward_kinematics(model: RobotModel, q: np.ndarray):
    """World pose of every collision geometry plus the end-effector pose.

    The end effector is the last link's frame. Deterministic: identical
    inputs give bit-identical poses.
    """
    q = np.asarray(q, dtype=float)
    rots, trans = fk_batch(model, q[None, :])
    poses = []
    for li, link in enumerate(model.links):
        R, t = rots[li][0], trans[li][0]
        for g in link.geometries:
            poses.append(RigidTransform(R @ g.local_pose.rot, R @ g.local_pose.trans + t))
    ee = RigidTransform(rots[-1][0], trans[-1][0])
    return poses, ee


def pose_vector(tf: RigidTransform) -> np.ndarray:
    """Flat pose encoding: (x, y, theta) in 2-D, (x, y, z, qw, qx, qy, qz) in 3-D."""
    if tf.dim == 2:
        return np.array([tf.trans[0], tf.trans[1], np.arctan2(tf.rot[1, 0], tf.rot[0, 0])])
    R = tf.rot
    qw = 0.5 * np.sqrt(max(0.0, 1.0 + np.trace(R)))
    if qw > 1e-9:
        qx = (R[2, 1] - R[1, 2]) / (4 * qw)
        qy = (R[0, 2] - R[2, 0]) / (4 * qw)
        qz = (R[1, 0] - R[0, 1]) / (4 * qw)
    else:  # near pi rotation; fall back to the dominant diagonal term
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(1e-18, 1.0 + R[i, i] - R[j, j] - R[k, k]))
        q = np.zeros(4)
        q[1 + i] = 0.5 * s
        q[0] = (R[k, j] - R[j, k]) / (2 * s)
        q[1 + j] = (R[j, i] + R[i, j]) / (2 * s)
        q[1 + k] = (R[k, i] + R[i, k]) / (2 * s)
        qw, qx, qy, qz = q
    return np.concatenate([tf.trans, [qw, qx, qy, qz]])


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - a, 2.0 * np.pi)


def pose_errors(pose_vecs: np.ndarray, goal_vec: np.ndarray, dim: int):
    """Translation distances and geodesic rotation angles to a goal pose."""
    P = np.atleast_2d(pose_vecs)
    t_err = np.linalg.norm(P[:, :dim] - goal_vec[:dim], axis=1)
    if dim == 2:
        r_err = np.abs(wrap_angle(P[:, 2] - goal_vec[2]))
    else:
        dots = np.abs(P[:, 3:7] @ goal_vec[3:7])
        r_err = 2.0 * np.arccos(np.clip(dots, -1.0, 1.0))
    return t_err, r_err


# ---------------------------------------------------------------------------
# voxel maps and point clouds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VoxelMap:
    """Occupied bins of a regular grid; each bin collides as its circumscribing sphere."""

    origin: np.ndarray
    side: float
    occupied: frozenset

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        object.__setattr__(self, "occupied", frozenset(tuple(int(i) for i in v) for v in self.occupied))

    @property
    def dim(self) -> int:
        return self.origin.shape[0]

    @property
    def sphere_radius(self) -> float:
        # half the cube diagonal: (sqrt(3)/2)s in 3-D, (sqrt(2)/2)s in 2-D
        return 0.5 * self.side * np.sqrt(self.dim)

    def centers(self) -> np.ndarray:
        if not self.occupied:
            return np.zeros((0, self.dim))
        idx = np.array(sorted(self.occupied), dtype=float)
        return self.origin + (idx + 0.5) * self.side


def voxelize_point_cloud(points: np.ndarray, bin_side: float, origin: np.ndarray) -> VoxelMap:
    """Bin points on a regular grid; a bin is occupied iff it holds >= 1 point.

    Indexing is floor((p - origin) / side) per axis, so a point exactly on
    a bin boundary lands in the higher-index bin.
    """
    if bin_side <= 0.0:
        raise ValueError("bin side must be positive")
    origin = np.asarray(origin, dtype=float)
    points = np.asarray(points, dtype=float).reshape(-1, origin.shape[0])
    if points.shape[0] == 0:
        return VoxelMap(origin, bin_side, frozenset())
    idx = np.floor((points - origin) / bin_side).astype(np.int64)
    return VoxelMap(origin, bin_side, frozenset(map(tuple, idx)))


_PCB_MAGIC = b"PCB1"


def load_point_cloud(path) -> np.ndarray:
    """Read XYZ triples from whitespace text or the PCB1 binary format."""
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head == _PCB_MAGIC:
            count = struct.unpack("<Q", fh.read(8))[0]
            fh.read(4)  # pad
            data = np.frombuffer(fh.read(count * 12), dtype="<f4")
            if data.shape[0] != count * 3:
                raise ValueError("truncated point cloud file")
            return data.reshape(count, 3).astype(np.float64)
        text = head + fh.read()
    values = np.array(text.split(), dtype=np.float64)
    if values.size % 3 != 0:
        raise ValueError("text point cloud must contain XYZ triples")
    return values.reshape(-1, 3)


def save_point_cloud(path, points: np.ndarray, binary: bool = False) -> None:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if binary:
        with open(path, "wb") as fh:
            fh.write(_PCB_MAGIC)
            fh.write(struct.pack("<Q", pts.shape[0]))
            fh.write(b"\x00" * 4)
            fh.write(pts.astype("<f4").tobytes())
    else:
        np.savetxt(path, pts, fmt="%.9g")


# ---------------------------------------------------------------------------
# world + collision checking
# ---------------------------------------------------------------------------

@dataclass
class World:
    """A robot in a scene: static geometry, optional voxel map, domain box."""

    model: RobotModel
    static: tuple[Geometry, ...] = ()
    vmap: VoxelMap | None = None
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        self.static = tuple(self.static)
        if self.lower is None:
            self.lower = self.model.lower.copy()
        if self.upper is None:
            self.upper = self.model.upper.copy()
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)

    def with_vmap(self, vmap: VoxelMap | None) -> "World":
        return World(self.model, self.static, vmap, self.lower, self.upper)

    def checker(self, margin: float = 0.0) -> "CollisionChecker":
        return CollisionChecker(self, margin=margin)


def _point_box_dist2(pts: np.ndarray, rot: np.ndarray, trans: np.ndarray, he: np.ndarray) -> np.ndarray:
    """Squared distance from points (...,d) to an oriented box."""
    local = np.einsum("ji,...j->...i", rot, pts - trans)
    clamped = np.clip(local, -he, he)
    return np.sum((local - clamped) ** 2, axis=-1)


def _boxes_collide_batch(r1, t1, he1, r2, t2, he2, margin: float = 0.0) -> np.ndarray:
    """Separating-axis test for batches of box pairs; touching counts as colliding.

    r1/t1 can be batched (B,d,d)/(B,d); r2/t2 either batched or single.
    Returns a boolean collision mask of shape (B,).
    """
    d = he1.shape[0]
    B = t1.shape[0]
    if r2.ndim == 2:
        r2 = np.broadcast_to(r2, (B, d, d))
        t2 = np.broadcast_to(t2, (B, d))
    diff = t2 - t1
    axes = [r1[:, :, i] for i in range(d)] + [r2[:, :, i] for i in range(d)]
    if d == 3:
        for i in range(3):
            for j in range(3):
                axes.append(np.cross(r1[:, :, i], r2[:, :, j]))
    sep = np.zeros(B, dtype=bool)
    for ax in axes:
        norm = np.linalg.norm(ax, axis=1)
        ok = norm > 1e-12  # degenerate cross products give no separation evidence
        u = np.where(ok[:, None], ax / np.maximum(norm, 1e-300)[:, None], 0.0)
        dist = np.abs(np.einsum("bi,bi->b", u, diff))
        ra = np.abs(np.einsum("bi,bij->bj", u, r1)) @ he1
        rb = np.abs(np.einsum("bi,bij->bj", u, r2)) @ he2
        sep |= ok & (dist > ra + rb + margin)
    return ~sep


class CollisionChecker:
    """Vectorized, conservative collision oracle for one world.

    A positive ``margin`` inflates every pair test by that distance, which
    turns the checker into a clearance test: useful for validating seed
    paths so that a finite discretization step cannot hide a graze deeper
    than the margin. Stateless apart from the ``calls`` counter (one count
    per checked configuration); use one instance per planning query if
    you care about the counter.
    """

    def __init__(self, world: World, margin: float = 0.0):
        self.world = world
        self.model = world.model
        self.margin = float(margin)
        self.calls = 0
        self._geoms = self.model.geometries()
        self._geom_links = self.model.geometry_links()
        # static spheres as (center, radius) arrays; boxes kept individually
        sph = [(g.local_pose.trans, g.radius) for g in world.static if g.kind == SPHERE]
        self._static_sph_c = np.array([c for c, _ in sph]).reshape(-1, self.model.dim)
        self._static_sph_r = np.array([r for _, r in sph])
        self._static_boxes = [g for g in world.static if g.kind == BOX]
        if world.vmap is not None and len(world.vmap.occupied):
            from scipy.spatial import cKDTree

            self._vox_c = world.vmap.centers()
            self._vox_r = world.vmap.sphere_radius
            self._vox_tree = cKDTree(self._vox_c)
        else:
            self._vox_c = np.zeros((0, self.model.dim))
            self._vox_r = 0.0
            self._vox_tree = None
        self._static_norm2 = np.sum(self._static_sph_c**2, axis=1)

    # -- geometry pose helpers ------------------------------------------------

    def _geom_poses(self, Q: np.ndarray):
        """World rotations/translations per geometry: lists of (B,d,d), (B,d)."""
        rots, trans = fk_batch(self.model, Q)
        g_rot, g_tr = [], []
        for li, link in enumerate(self.model.links):
            for g in link.geometries:
                g_rot.append(rots[li] @ g.local_pose.rot)
                g_tr.append(trans[li] + np.einsum("bij,j->bi", rots[li], g.local_pose.trans))
        return g_rot, g_tr

    # -- public API -------------------------------------------------------------

    def check(self, q: np.ndarray) -> bool:
        """True iff the configuration is collision-free."""
        return bool(self.check_batch(np.asarray(q, dtype=float)[None, :])[0])

    def check_batch(self, Q: np.ndarray) -> np.ndarray:
        """Free mask for a batch of configurations; order-independent."""
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2:
            Q = np.atleast_2d(Q)
        if Q.shape[0] == 0:
            return np.zeros(0, dtype=bool)
        if Q.shape[1] != self.model.dof:
            raise DimensionMismatch(
                f"batch has {Q.shape[1]} columns, robot has {self.model.dof} dof")
        self.calls += Q.shape[0]
        chunks = parallel.map_chunks(lambda lo, hi: self._check_chunk(Q[lo:hi]), Q.shape[0])
        return np.concatenate(chunks)

    def check_segment(self, v1: np.ndarray, v2: np.ndarray, step: float) -> bool:
        """True iff every sample at arc-length spacing <= step (endpoints included) is free."""
        if step <= 0.0:
            raise ValueError("step must be positive")
        return bool(np.all(self.check_batch(segment_samples(v1, v2, step))))

    # -- internals ---------------------------------------------------------------

    def _check_chunk(self, Q: np.ndarray) -> np.ndarray:
        B = Q.shape[0]
        colliding = np.zeros(B, dtype=bool)
        g_rot, g_tr = self._geom_poses(Q)
        for gi, g in enumerate(self._geoms):
            if g.kind == SPHERE:
                colliding |= self._sphere_vs_obstacles(g_tr[gi], g.radius)
            else:
                colliding |= self._box_vs_obstacles(g_rot[gi], g_tr[gi], g.half_extents)
        for gi, gj in self.model.self_pairs:
            colliding |= self._pair(
                self._geoms[gi], g_rot[gi], g_tr[gi], self._geoms[gj], g_rot[gj], g_tr[gj])
        return ~colliding

    def _sphere_vs_obstacles(self, centers: np.ndarray, radius: float) -> np.ndarray:
        B = centers.shape[0]
        hit = np.zeros(B, dtype=bool)
        if self._static_sph_c.shape[0]:
            # ||a-b||^2 via the Gram trick keeps the B x K temporaries flat
            d2 = (np.sum(centers**2, axis=1)[:, None]
                  + self._static_norm2[None, :]
                  - 2.0 * centers @ self._static_sph_c.T)
            rr = (self._static_sph_r + radius + self.margin) ** 2
            hit |= np.any(d2 <= rr[None, :], axis=1)
        if self._vox_tree is not None:
            # all voxel spheres share one radius: nearest center decides
            d, _ = self._vox_tree.query(centers, k=1)
            hit |= d <= radius + self._vox_r + self.margin
        for box in self._static_boxes:
            d2 = _point_box_dist2(centers, box.local_pose.rot, box.local_pose.trans, box.half_extents)
            hit |= d2 <= (radius + self.margin) ** 2
        return hit

    def _box_vs_obstacles(self, rot: np.ndarray, trans: np.ndarray, he: np.ndarray) -> np.ndarray:
        B = trans.shape[0]
        hit = np.zeros(B, dtype=bool)
        pt_c = np.concatenate([self._static_sph_c, self._vox_c])
        pt_r = np.concatenate([self._static_sph_r, np.full(self._vox_c.shape[0], self._vox_r)])
        if pt_c.shape[0]:
            local = np.einsum("bji,kbj->kbi", rot, pt_c[:, None, :] - trans[None, :, :])
            clamped = np.clip(local, -he, he)
            d2 = np.sum((local - clamped) ** 2, axis=2)  # (K, B)
            hit |= np.any(d2 <= ((pt_r[:, None] + self.margin) ** 2), axis=0)
        for box in self._static_boxes:
            hit |= _boxes_collide_batch(rot, trans, he,
                                        box.local_pose.rot, box.local_pose.trans,
                                        box.half_extents, self.margin)
        return hit

    def _pair(self, ga, ra, ta, gb, rb, tb) -> np.ndarray:
        if ga.kind == SPHERE and gb.kind == SPHERE:
            d2 = np.sum((ta - tb) ** 2, axis=1)
            return d2 <= (ga.radius + gb.radius + self.margin) ** 2
        if ga.kind == SPHERE:  # sphere vs moving box
            local = np.einsum("bji,bj->bi", rb, ta - tb)
            clamped = np.clip(local, -gb.half_extents, gb.half_extents)
            return np.sum((local - clamped) ** 2, axis=1) <= (ga.radius + self.margin) ** 2
        if gb.kind == SPHERE:
            return self._pair(gb, rb, tb, ga, ra, ta)
        return _boxes_collide_batch(ra, ta, ga.half_extents, rb, tb, gb.half_extents,
                                    self.margin)


def segment_samples(v1: np.ndarray, v2: np.ndarray, step: float) -> np.ndarray:
    """Configurations along conv{v1, v2} at L2 arc-length spacing <= step.

    Includes both endpoints; a degenerate segment yields a single sample.
    """
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if v1.shape != v2.shape:
        raise DimensionMismatch("segment endpoints differ in dimension")
    length = float(np.linalg.norm(v2 - v1))
    if length == 0.0:
        return v1[None, :]
    n = int(np.ceil(length / step))
    ts = np.linspace(0.0, 1.0, n + 1)
    return v1[None, :] + ts[:, None] * (v2 - v1)[None, :]


class FunctionChecker:
    """Adapter turning a batch predicate (True = free) into a checker.

    Handy for analytic obstacle fields in tests and for the set-inflation
    oracle audits.
    """

    def __init__(self, free_fn, dim: int):
        self.free_fn = free_fn
        self.dim = dim
        self.calls = 0

    def check(self, q) -> bool:
        return bool(self.check_batch(np.asarray(q, dtype=float)[None, :])[0])

    def check_batch(self, Q) -> np.ndarray:
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[0] == 0:
            return np.zeros(0, dtype=bool)
        if Q.shape[1] != self.dim:
            raise DimensionMismatch("bad configuration dimension")
        self.calls += Q.shape[0]
        return np.asarray(self.free_fn(Q), dtype=bool)

    def check_segment(self, v1, v2, step: float) -> bool:
        if step <= 0.0:
            raise ValueError("step must be positive")
        return bool(np.all(self.check_batch(segment_samples(v1, v2, step))))


# ---------------------------------------------------------------------------
# scene files
# ---------------------------------------------------------------------------

def _tf_to_json(tf: RigidTransform) -> dict:
    if tf.dim == 2:
        return {"translation": list(map(float, tf.trans)),
                "angle": float(np.arctan2(tf.rot[1, 0], tf.rot[0, 0]))}
    return {"translation": list(map(float, tf.trans)),
            "matrix": [list(map(float, row)) for row in tf.rot]}


def _tf_from_json(obj: dict, dim: int) -> RigidTransform:
    trans = np.asarray(obj.get("translation", np.zeros(dim)), dtype=float)
    if dim == 2:
        c, s = np.cos(obj.get("angle", 0.0)), np.sin(obj.get("angle", 0.0))
        return RigidTransform(np.array([[c, -s], [s, c]]), trans)
    if "matrix" in obj:
        return RigidTransform(np.asarray(obj["matrix"], dtype=float), trans)
    rot = np.eye(3)
    if "rpy" in obj:
        r, p, y = obj["rpy"]
        rot = (rotation_about_axis([0, 0, 1], y)
               @ rotation_about_axis([0, 1, 0], p)
               @ rotation_about_axis([1, 0, 0], r))
    return RigidTransform(rot, trans)


def _geom_to_json(g: Geometry) -> dict:
    out = {"kind": g.kind, "pose": _tf_to_json(g.local_pose)}
    if g.kind == SPHERE:
        out["radius"] = float(g.radius)
    else:
        out["half_extents"] = list(map(float, g.half_extents))
    return out


def _geom_from_json(obj: dict, dim: int) -> Geometry:
    pose = _tf_from_json(obj.get("pose", {}), dim)
    if obj["kind"] == SPHERE:
        return Geometry(SPHERE, pose, radius=float(obj["radius"]))
    return Geometry(BOX, pose, half_extents=np.asarray(obj["half_extents"], dtype=float))


def world_to_json(world: World) -> dict:
    model = world.model
    return {
        "robot": {
            "dim": model.dim,
            "joints": [
                {"type": j.kind, "parent": j.parent, "offset": _tf_to_json(j.origin),
                 **({"axis": list(map(float, j.axis))} if j.axis is not None else {})}
                for j in model.joints
            ],
            "links": [{"geometries": [_geom_to_json(g) for g in l.geometries]}
                      for l in model.links],
            "limits": {"lower": list(map(float, model.lower)),
                       "upper": list(map(float, model.upper))},
            "self_pairs": [list(p) for p in model.self_pairs],
        },
        "static": [_geom_to_json(g) for g in world.static],
        "domain": {"lower": list(map(float, world.lower)),
                   "upper": list(map(float, world.upper))},
    }


def world_from_json(obj: dict) -> World:
    robot = obj["robot"]
    dim = int(robot.get("dim", len(obj["domain"]["lower"])))
    joints = tuple(
        Joint(j["type"], int(j.get("parent", i - 1)), _tf_from_json(j.get("offset", {}), dim),
              axis=np.asarray(j["axis"], dtype=float) if "axis" in j else None)
        for i, j in enumerate(robot["joints"])
    )
    links = tuple(Link(tuple(_geom_from_json(g, dim) for g in l.get("geometries", [])))
                  for l in robot["links"])
    model = RobotModel(
        dim=dim, joints=joints, links=links,
        lower=np.asarray(robot["limits"]["lower"], dtype=float),
        upper=np.asarray(robot["limits"]["upper"], dtype=float),
        self_pairs=tuple(tuple(p) for p in robot.get("self_pairs", [])),
    )
    static = tuple(_geom_from_json(g, dim) for g in obj.get("static", []))
    return World(model, static,
                 lower=np.asarray(obj["domain"]["lower"], dtype=float),
                 upper=np.asarray(obj["domain"]["upper"], dtype=float))


def load_scene(path) -> World:
    with open(path) as fh:
        return world_from_json(json.load(fh))


def save_scene(path, world: World) -> None:
    with open(path, "w") as fh:
        json.dump(world_to_json(world), fh, indent=2)
        fh.write("\n")
