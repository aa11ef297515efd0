"""Dynamic roadmaps: offline lookup tables, online pruning and search.

A roadmap is four structures: node configurations, a symmetric adjacency
map, a voxel-to-node collision map over a fixed task-space grid, and the
end-effector pose of every node. Construction happens in the obstacle-free
base scene; obstacles arrive online as occupied voxels, which the
collision map converts into a set of blocked nodes in one lookup. Search
is A* with lazy edge validation and a greedy shortcut pass.
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import parallel
from .errors import (AlreadyAtGoal, DimensionMismatch, GridMismatch, IkFailed,
                     NoPath, SamplingExhausted)
from .world import (RobotModel, VoxelMap, fk_batch, forward_kinematics,
                    pose_errors, pose_vector, wrap_angle)


@dataclass(frozen=True)
class Grid:
    """Fixed voxel grid over task space; ids are row-major with x fastest."""

    origin: np.ndarray
    side: float
    extents: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        object.__setattr__(self, "extents", tuple(int(e) for e in self.extents))
        if len(self.extents) != self.origin.shape[0]:
            raise DimensionMismatch("grid extents/origin dimension mismatch")

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.extents))

    @property
    def sphere_radius(self) -> float:
        return 0.5 * self.side * np.sqrt(self.dim)

    def voxel_id(self, idx) -> int:
        vid = 0
        for axis in reversed(range(self.dim)):
            vid = vid * self.extents[axis] + int(idx[axis])
        return vid

    def ids_of(self, indices: np.ndarray) -> np.ndarray:
        indices = np.atleast_2d(np.asarray(indices, dtype=np.int64))
        vid = np.zeros(indices.shape[0], dtype=np.int64)
        for axis in reversed(range(self.dim)):
            vid = vid * self.extents[axis] + indices[:, axis]
        return vid

    def in_bounds(self, indices: np.ndarray) -> np.ndarray:
        indices = np.atleast_2d(np.asarray(indices, dtype=np.int64))
        ok = np.ones(indices.shape[0], dtype=bool)
        for axis in range(self.dim):
            ok &= (indices[:, axis] >= 0) & (indices[:, axis] < self.extents[axis])
        return ok

    def all_centers(self) -> np.ndarray:
        axes = [self.origin[a] + (np.arange(self.extents[a]) + 0.5) * self.side
                for a in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        # Fortran ravel varies the first (x) axis fastest, matching the id layout
        return np.stack([m.ravel(order="F") for m in mesh], axis=1)


@dataclass(frozen=True)
class CollisionSet:
    blocked: frozenset

    def __post_init__(self):
        object.__setattr__(self, "blocked", frozenset(int(i) for i in self.blocked))


@dataclass
class PwlPath:
    """Piecewise-linear path as an ordered knot list (>= 2 knots)."""

    knots: np.ndarray

    def __post_init__(self):
        self.knots = np.atleast_2d(np.asarray(self.knots, dtype=float))

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.knots, axis=0), axis=1)))

    @property
    def n_segments(self) -> int:
        return self.knots.shape[0] - 1


@dataclass
class Drm:
    nodes: np.ndarray          # (n, dof)
    adj_offsets: np.ndarray    # (n+1,) int64
    adj_ids: np.ndarray        # (nnz,) int32, sorted per node
    cmap_offsets: np.ndarray   # (n_voxels+1,) int64
    cmap_ids: np.ndarray       # (nnz,) int32, sorted per voxel
    poses: np.ndarray          # (n, pose_size)
    grid: Grid
    d_cs: float | None = None  # build thresholds; not persisted
    d_ts: float | None = None

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def dof(self) -> int:
        return self.nodes.shape[1]

    def neighbors(self, i: int) -> np.ndarray:
        return self.adj_ids[self.adj_offsets[i]:self.adj_offsets[i + 1]]

    def colliding_nodes(self, voxel_id: int) -> np.ndarray:
        return self.cmap_ids[self.cmap_offsets[voxel_id]:self.cmap_offsets[voxel_id + 1]]


# ---------------------------------------------------------------------------
# offline construction
# ---------------------------------------------------------------------------

def _csr_from_pairs(rows: np.ndarray, cols: np.ndarray, n_rows: int):
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    counts = np.bincount(rows, minlength=n_rows)
    offsets = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets, cols.astype(np.int32)


def sample_free_configurations(checker, lower, upper, count: int, rng,
                               budget_factor: int = 1000) -> np.ndarray:
    """Uniform rejection sampling of collision-free configurations in a box."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    out = []
    have = 0
    drawn = 0
    budget = budget_factor * count
    while have < count:
        chunk = min(max(count - have, 256) * 2, budget - drawn)
        if chunk <= 0:
            raise SamplingExhausted(
                f"rejection budget {budget} exhausted with {have}/{count} samples")
        Q = rng.uniform(lower, upper, size=(chunk, lower.shape[0]))
        drawn += chunk
        free = checker.check_batch(Q)
        good = Q[free]
        out.append(good)
        have += good.shape[0]
    return np.concatenate(out)[:count]


def _node_voxel_pairs(model: RobotModel, nodes: np.ndarray, grid: Grid):
    """(node, voxel) collision pairs: node geometry vs circumscribing voxel spheres."""
    centers = grid.all_centers()
    r_vox = grid.sphere_radius
    geoms = model.geometries()

    def sweep(lo, hi):
        rows_l, cols_l = [], []
        rots, trans = fk_batch(model, nodes[lo:hi])
        for li, link in enumerate(model.links):
            for g in link.geometries:
                R = rots[li] @ g.local_pose.rot
                t = trans[li] + np.einsum("bij,j->bi", rots[li], g.local_pose.trans)
                if g.kind == "sphere":
                    d2 = np.sum((t[:, None, :] - centers[None, :, :]) ** 2, axis=2)
                    mask = d2 <= (g.radius + r_vox) ** 2
                else:
                    local = np.einsum("bji,kbj->kbi", R, centers[:, None, :] - t[None, :, :])
                    clamped = np.clip(local, -g.half_extents, g.half_extents)
                    mask = (np.sum((local - clamped) ** 2, axis=2) <= r_vox**2).T
                b_idx, v_idx = np.nonzero(mask)
                rows_l.append(b_idx + lo)
                cols_l.append(v_idx)
        return (np.concatenate(rows_l) if rows_l else np.zeros(0, dtype=np.int64),
                np.concatenate(cols_l) if cols_l else np.zeros(0, dtype=np.int64))

    chunk = max(1, int(2_000_000 // max(1, centers.shape[0])))
    results = parallel.map_chunks(sweep, nodes.shape[0], min_chunk=chunk)
    rows = np.concatenate([r for r, _ in results])
    cols = np.concatenate([c for _, c in results])
    # a node may hit the same voxel through several geometries
    if rows.size:
        pairs = np.unique(np.stack([rows, cols], axis=1), axis=0)
        rows, cols = pairs[:, 0], pairs[:, 1]
    return rows, cols


def build_drm(model: RobotModel, base_checker, lower, upper, n_nodes: int, k: int,
              d_cs: float, d_ts: float, grid: Grid, seed: int = 0) -> Drm:
    """Build the four roadmap structures in the obstacle-free base scene.

    Nodes are uniform collision-free samples (self collisions and static
    base geometry respected). An edge (i, j) needs both configuration
    distance <= d_cs and end-effector distance <= d_ts; each node keeps at
    most k nearest-first outgoing edges and the result is symmetrized.
    """
    if n_nodes < 2:
        raise ValueError("need at least two nodes")
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    nodes = sample_free_configurations(base_checker, lower, upper, n_nodes, rng)

    pose_rows = np.array([pose_vector(forward_kinematics(model, q)[1]) for q in nodes])
    ee_pos = pose_rows[:, :model.dim]

    tree = cKDTree(nodes)
    k_query = min(n_nodes, 4 * k + 1)
    dists, idx = tree.query(nodes, k=k_query)
    rows, cols = [], []
    for i in range(n_nodes):
        picked = 0
        for j_pos in range(1, k_query):
            j = int(idx[i, j_pos])
            if dists[i, j_pos] > d_cs:
                break  # ascending distances: nothing further qualifies
            if np.linalg.norm(ee_pos[i] - ee_pos[j]) > d_ts:
                continue
            rows.append(i)
            cols.append(j)
            picked += 1
            if picked >= k:
                break
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    # symmetrize: add missing reverse edges
    und = np.unique(np.stack([np.concatenate([rows, cols]),
                              np.concatenate([cols, rows])], axis=1), axis=0)
    adj_off, adj_ids = _csr_from_pairs(und[:, 0], und[:, 1], n_nodes)

    v_rows, v_cols = _node_voxel_pairs(model, nodes, grid)
    cmap_off, cmap_ids = _csr_from_pairs(v_cols, v_rows, grid.n_voxels)

    return Drm(nodes=nodes, adj_offsets=adj_off, adj_ids=adj_ids,
               cmap_offsets=cmap_off, cmap_ids=cmap_ids, poses=pose_rows,
               grid=grid, d_cs=d_cs, d_ts=d_ts)


# ---------------------------------------------------------------------------
# online: pruning, IK, search
# ---------------------------------------------------------------------------

def collision_set(drm: Drm, vmap: VoxelMap) -> CollisionSet:
    """Union of collision-map entries over the occupied voxels.

    The voxel map must share the roadmap grid's origin and side; occupied
    voxels of a finer or offset map are re-binned conservatively (every
    roadmap voxel their cube overlaps is activated).
    """
    if vmap.dim != drm.grid.dim:
        raise GridMismatch("voxel map dimension differs from roadmap grid")
    if not vmap.occupied:
        return CollisionSet(frozenset())
    same = (np.allclose(vmap.origin, drm.grid.origin) and
            np.isclose(vmap.side, drm.grid.side))
    if same:
        idx = np.array(sorted(vmap.occupied), dtype=np.int64)
    else:
        cubes_lo = np.array(sorted(vmap.occupied), dtype=np.float64) * vmap.side + vmap.origin
        cubes_hi = cubes_lo + vmap.side
        eps = 1e-12
        lo_idx = np.floor((cubes_lo - drm.grid.origin) / drm.grid.side + eps).astype(np.int64)
        hi_idx = np.floor((cubes_hi - drm.grid.origin) / drm.grid.side - eps).astype(np.int64)
        cells = []
        for lo, hi in zip(lo_idx, hi_idx):
            ranges = [np.arange(lo[a], hi[a] + 1) for a in range(drm.grid.dim)]
            mesh = np.meshgrid(*ranges, indexing="ij")
            cells.append(np.stack([m.ravel() for m in mesh], axis=1))
        idx = np.unique(np.concatenate(cells), axis=0)
    idx = idx[drm.grid.in_bounds(idx)]
    if idx.shape[0] == 0:
        return CollisionSet(frozenset())
    vids = drm.grid.ids_of(idx)
    blocked = set()
    for vid in vids:
        blocked.update(int(n) for n in drm.colliding_nodes(int(vid)))
    return CollisionSet(frozenset(blocked))


def solve_ik(drm: Drm, cs: CollisionSet, goal_pose: np.ndarray, weights, model: RobotModel,
             checker, n_candidates: int = 5, damping: float = 1e-2,
             max_iters: int = 100, tol: float = 1e-3) -> np.ndarray:
    """Roadmap-warmstarted inverse kinematics.

    Unblocked nodes are ranked by w_t * translation error + w_r * rotation
    error against the stored pose map; the best candidates are refined by
    damped least squares and the first collision-free refinement within
    joint limits wins, preferring the lowest final pose error.
    """
    if drm.n_nodes == 0:
        raise IkFailed("empty roadmap")
    w_t, w_r = weights
    goal_pose = np.asarray(goal_pose, dtype=float)
    free_ids = np.array([i for i in range(drm.n_nodes) if i not in cs.blocked], dtype=np.int64)
    if free_ids.size == 0:
        raise IkFailed("all roadmap nodes blocked")
    t_err, r_err = pose_errors(drm.poses[free_ids], goal_pose, model.dim)
    score = w_t * t_err + w_r * r_err
    order = free_ids[np.argsort(score, kind="stable")][:n_candidates]

    lo = model.lower + 1e-9
    hi = model.upper - 1e-9
    best_q, best_err = None, np.inf

    def dls_step(q, lam):
        e = _pose_error_vec(model, q, goal_pose)
        J = _pose_jacobian(model, q, goal_pose)
        JJt = J @ J.T + (lam**2) * np.eye(J.shape[0])
        dq = J.T @ np.linalg.solve(JJt, e)
        return np.clip(q + dq, lo, hi)

    def weighted_err(q):
        e = _pose_error_vec(model, q, goal_pose)
        return w_t * np.linalg.norm(e[:model.dim]) + w_r * np.linalg.norm(e[model.dim:])

    for nid in order:
        q = drm.nodes[nid].copy()
        err_norm = weighted_err(q)
        for _ in range(max_iters):
            if err_norm < tol:
                break
            q = dls_step(q, damping)
            err_norm = weighted_err(q)
        if err_norm < tol:
            # polish with near-zero damping: exact where the problem allows it
            for _ in range(2):
                q_new = dls_step(q, 1e-9)
                if weighted_err(q_new) <= err_norm:
                    q = q_new
                    err_norm = weighted_err(q)
            if checker.check(q) and err_norm < best_err:
                best_q, best_err = q, err_norm
    if best_q is None:
        raise IkFailed("no collision-free configuration reached the goal pose")
    return best_q


def _pose_error_vec(model: RobotModel, q: np.ndarray, goal: np.ndarray) -> np.ndarray:
    cur = pose_vector(forward_kinematics(model, q)[1])
    if model.dim == 2:
        return np.array([goal[0] - cur[0], goal[1] - cur[1], wrap_angle(goal[2] - cur[2])])
    # 3-D: translation residual plus a quaternion-difference surrogate
    sign = 1.0 if float(cur[3:7] @ goal[3:7]) >= 0.0 else -1.0
    return np.concatenate([goal[:3] - cur[:3], sign * goal[3:7] - cur[3:7]])


def _pose_jacobian(model: RobotModel, q: np.ndarray, goal: np.ndarray,
                   h: float = 1e-6) -> np.ndarray:
    e0 = _pose_error_vec(model, q, goal)
    J = np.zeros((e0.shape[0], q.shape[0]))
    for i in range(q.shape[0]):
        dq = np.zeros_like(q)
        dq[i] = h
        J[:, i] = (_pose_error_vec(model, q - dq, goal) - _pose_error_vec(model, q + dq, goal)) / (2 * h)
    return J


def _connect(drm: Drm, blocked, q: np.ndarray, checker, step: float,
             d_cs: float, d_ts: float, k_connect: int, model: RobotModel):
    """First unblocked node reachable by a validated straight segment.

    Nearest-first among nodes passing the d_cs/d_ts build rules, then a
    nearest-first fallback ignoring the thresholds.
    """
    dists = np.linalg.norm(drm.nodes - q, axis=1)
    order = np.argsort(dists, kind="stable")
    ee = pose_vector(forward_kinematics(model, q)[1])[:model.dim]
    ee_dist = np.linalg.norm(drm.poses[:, :model.dim] - ee, axis=1)
    phase1 = [i for i in order
              if i not in blocked and dists[i] <= d_cs and ee_dist[i] <= d_ts][:k_connect]
    first = set(phase1)
    phase2 = [i for i in order if i not in blocked and i not in first][:k_connect]
    tried = 0
    for nid in phase1 + phase2:
        if checker.check_segment(q, drm.nodes[nid], step):
            return int(nid)
        tried += 1
    raise NoPath(f"could not connect configuration to the roadmap ({tried} tried)")


def astar_lazy(drm: Drm, cs: CollisionSet, start: np.ndarray, goal: np.ndarray,
               checker, step: float, d_cs: float | None = None,
               d_ts: float | None = None, k_connect: int = 10,
               model: RobotModel | None = None) -> PwlPath:
    """Shortest roadmap path with lazy edge validation.

    A* runs on the pruned graph; when a candidate solution pops, its edges
    are segment-checked, colliding ones are removed, and the search
    resumes, so the result matches an eager search on the fully validated
    graph. All returned segments pass check_segment at ``step``.
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if np.array_equal(start, goal):
        raise AlreadyAtGoal("start equals goal")
    model = model if model is not None else checker.model
    d_cs = d_cs if d_cs is not None else (drm.d_cs if drm.d_cs is not None else np.inf)
    d_ts = d_ts if d_ts is not None else (drm.d_ts if drm.d_ts is not None else np.inf)
    blocked = cs.blocked
    s_node = _connect(drm, blocked, start, checker, step, d_cs, d_ts, k_connect, model)
    g_node = _connect(drm, blocked, goal, checker, step, d_cs, d_ts, k_connect, model)

    heuristic = np.linalg.norm(drm.nodes - drm.nodes[g_node], axis=1)
    invalid: set[tuple[int, int]] = set()
    validated: dict[tuple[int, int], bool] = {}

    def edge_key(a, b):
        return (a, b) if a < b else (b, a)

    while True:
        node_path = _astar_once(drm, blocked, invalid, s_node, g_node, heuristic)
        if node_path is None:
            raise NoPath("roadmap disconnected between start and goal")
        bad = []
        for a, b in zip(node_path[:-1], node_path[1:]):
            key = edge_key(a, b)
            ok = validated.get(key)
            if ok is None:
                ok = checker.check_segment(drm.nodes[a], drm.nodes[b], step)
                validated[key] = ok
            if not ok:
                bad.append(key)
        if not bad:
            knots = np.vstack([start, drm.nodes[node_path], goal])
            return PwlPath(knots)
        invalid.update(bad)


def _astar_once(drm, blocked, invalid, s_node, g_node, heuristic):
    dist = {s_node: 0.0}
    parent = {s_node: -1}
    done = set()
    heap = [(heuristic[s_node], s_node)]
    while heap:
        f, u = heapq.heappop(heap)
        if u in done:
            continue
        if u == g_node:
            path = [u]
            while parent[path[-1]] != -1:
                path.append(parent[path[-1]])
            return path[::-1]
        done.add(u)
        base = dist[u]
        qu = drm.nodes[u]
        for v in drm.neighbors(u):
            v = int(v)
            if v in blocked or v in done:
                continue
            key = (u, v) if u < v else (v, u)
            if key in invalid:
                continue
            nd = base + float(np.linalg.norm(drm.nodes[v] - qu))
            if nd < dist.get(v, np.inf):
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd + heuristic[v], v))
    return None


def shortcut(path: PwlPath, checker, step: float) -> PwlPath:
    """Greedy pass: from each kept knot jump to the farthest visible knot."""
    knots = path.knots
    out = [knots[0]]
    i = 0
    last = knots.shape[0] - 1
    while i < last:
        j = last
        while j > i + 1:
            if checker.check_segment(knots[i], knots[j], step):
                break
            j -= 1
        out.append(knots[j])
        i = j
    return PwlPath(np.vstack(out))


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

_DRM_MAGIC = b"DRM1"
_DRM_VERSION = 1


def save_drm(drm: Drm, path) -> None:
    """Little-endian binary roadmap: header, configs, CSR adjacency, CSR collision map, poses."""
    g = drm.grid
    origin3 = np.zeros(3)
    origin3[:g.dim] = g.origin
    ext3 = np.ones(3, dtype=np.uint32)
    ext3[:g.dim] = g.extents
    with open(path, "wb") as fh:
        fh.write(_DRM_MAGIC)
        fh.write(struct.pack("<II", _DRM_VERSION, drm.dof))
        fh.write(struct.pack("<QQ", drm.n_nodes, g.n_voxels))
        fh.write(origin3.astype("<f8").tobytes())
        fh.write(struct.pack("<d", g.side))
        fh.write(ext3.astype("<u4").tobytes())
        fh.write(drm.nodes.astype("<f8").tobytes())
        fh.write(drm.adj_offsets.astype("<u8").tobytes())
        fh.write(drm.adj_ids.astype("<u4").tobytes())
        fh.write(drm.cmap_offsets.astype("<u8").tobytes())
        fh.write(drm.cmap_ids.astype("<u4").tobytes())
        fh.write(drm.poses.astype("<f8").tobytes())


def load_drm(path) -> Drm:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _DRM_MAGIC:
        raise ValueError("not a roadmap file")
    version, dof = struct.unpack_from("<II", data, 4)
    if version != _DRM_VERSION:
        raise ValueError(f"unsupported roadmap version {version}")
    n_nodes, n_voxels = struct.unpack_from("<QQ", data, 12)
    off = 28
    origin3 = np.frombuffer(data, "<f8", 3, off); off += 24
    side = struct.unpack_from("<d", data, off)[0]; off += 8
    ext3 = np.frombuffer(data, "<u4", 3, off); off += 12
    nodes = np.frombuffer(data, "<f8", n_nodes * dof, off).reshape(n_nodes, dof).copy(); off += n_nodes * dof * 8
    adj_off = np.frombuffer(data, "<u8", n_nodes + 1, off).astype(np.int64); off += (n_nodes + 1) * 8
    nnz = int(adj_off[-1])
    adj_ids = np.frombuffer(data, "<u4", nnz, off).astype(np.int32); off += nnz * 4
    cmap_off = np.frombuffer(data, "<u8", n_voxels + 1, off).astype(np.int64); off += (n_voxels + 1) * 8
    cnnz = int(cmap_off[-1])
    cmap_ids = np.frombuffer(data, "<u4", cnnz, off).astype(np.int32); off += cnnz * 4
    remaining = len(data) - off
    pose_size = remaining // (8 * n_nodes) if n_nodes else 0
    poses = np.frombuffer(data, "<f8", n_nodes * pose_size, off).reshape(n_nodes, pose_size).copy()
    # pose size disambiguates the task dimension: (x, y, theta) vs position+quaternion
    dim = 2 if pose_size == 3 else 3
    grid = Grid(origin3[:dim].copy(), side, tuple(int(e) for e in ext3[:dim]))
    if grid.n_voxels != n_voxels:
        raise ValueError("grid extents disagree with the stored voxel count")
    return Drm(nodes=nodes, adj_offsets=adj_off, adj_ids=adj_ids,
               cmap_offsets=cmap_off, cmap_ids=cmap_ids, poses=poses, grid=grid)
