"""Inflate a collision-free segment into a probabilistically collision-free polytope.

The loop alternates uniform sampling inside the current polytope with a
statistical acceptance test. While the test rejects, the colliding
samples are walked toward the seed segment by bisection and the closest
survivors become separating hyperplanes, tangent to sub-level sets of
the distance-to-segment function and shifted inward by a step back that
is relaxed whenever it would cut the seed segment. On acceptance the
returned set is, with probability at least 1 - delta, in collision on at
most an eps fraction of its volume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cpoly import HPolytope, hit_and_run_sample
from .errors import (DimensionMismatch, GradientUndefined, SegmentInCollision,
                     SeedOutsideDomain)
from .seeding import SEED_STEP, counter_uniforms

TERMINATED_ACCEPTED = "test_accepted"
TERMINATED_MAX_ITER = "max_iterations"


@dataclass(frozen=True)
class Segment:
    v1: np.ndarray
    v2: np.ndarray

    def __post_init__(self):
        v1 = np.asarray(self.v1, dtype=float)
        v2 = np.asarray(self.v2, dtype=float)
        if v1.shape != v2.shape:
            raise DimensionMismatch("segment endpoints differ in dimension")
        object.__setattr__(self, "v1", v1)
        object.__setattr__(self, "v2", v2)

    @property
    def dim(self) -> int:
        return self.v1.shape[0]

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.v2 - self.v1))

    def point(self, alpha) -> np.ndarray:
        return self.v1 + np.multiply.outer(np.asarray(alpha), self.v2 - self.v1)


@dataclass(frozen=True)
class InflationParams:
    """Test parameters (delta, eps, tau), step back, and optimizer counts.

    Defaults are the planar benchmark values; ``n_b=None`` selects the
    bisection count from ceil(log2(domain diagonal / delta_max)) at
    inflation time.
    """

    delta: float = 0.05
    eps: float = 0.01
    tau: float = 0.5
    delta_max: float = 0.01
    n_p: int = 1000
    n_f: int = 10
    n_b: int | None = None
    n_ms: int = 30
    t_col: float = 1e-4
    n_it: int | None = None

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0 and 0.0 < self.eps < 1.0 and 0.0 < self.tau < 1.0):
            raise ValueError("delta, eps, tau must lie in (0, 1)")
        if self.delta_max <= 0.0:
            raise ValueError("delta_max must be positive")
        if not (0.0 <= self.t_col < self.delta_max):
            raise ValueError("need 0 <= t_col < delta_max")
        for name in ("n_p", "n_f", "n_ms"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_b is not None and self.n_b < 1:
            raise ValueError("n_b must be >= 1")
        if self.n_it is not None and self.n_it < 1:
            raise ValueError("n_it must be >= 1")

    @staticmethod
    def from_dict(obj: dict) -> "InflationParams":
        known = InflationParams.__dataclass_fields__
        return InflationParams(**{k: obj[k] for k in obj if k in known})

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class InflationReport:
    polytope: HPolytope
    iterations: int
    hyperplanes_added: int
    collision_checks: int
    terminated_by: str

    @property
    def guarantee_holds(self) -> bool:
        return self.terminated_by == TERMINATED_ACCEPTED


# ---------------------------------------------------------------------------
# distance-to-segment primitives
# ---------------------------------------------------------------------------

def project_to_segment(c: np.ndarray, seg: Segment):
    """Closest point on the segment: returns (c_proj, alpha, dist)."""
    c = np.asarray(c, dtype=float)
    if c.shape[0] != seg.dim:
        raise DimensionMismatch("point/segment dimension mismatch")
    proj, alpha, dist = project_batch(c[None, :], seg)
    return proj[0], float(alpha[0]), float(dist[0])


def project_batch(C: np.ndarray, seg: Segment):
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape[1] != seg.dim:
        raise DimensionMismatch("point/segment dimension mismatch")
    e = seg.v2 - seg.v1
    ee = float(e @ e)
    if ee == 0.0:
        proj = np.broadcast_to(seg.v1, C.shape).copy()
        alpha = np.zeros(C.shape[0])
    else:
        alpha = np.clip((C - seg.v1) @ e / ee, 0.0, 1.0)
        proj = seg.v1 + alpha[:, None] * e
    dist = np.linalg.norm(C - proj, axis=1)
    return proj, alpha, dist


def dist_to_segment(c: np.ndarray, seg: Segment) -> float:
    return project_to_segment(c, seg)[2]


def dist_gradient(c: np.ndarray, seg: Segment) -> np.ndarray:
    """Unit gradient (c - c_proj)/||c - c_proj||; undefined on the segment."""
    proj, _, dist = project_to_segment(c, seg)
    if dist <= 1e-12:
        raise GradientUndefined("gradient undefined at distance <= 1e-12")
    return (np.asarray(c, dtype=float) - proj) / dist


# ---------------------------------------------------------------------------
# statistical acceptance test
# ---------------------------------------------------------------------------

def required_batch_size(k: int, params: InflationParams) -> int:
    """Samples the k-th acceptance test must inspect: M = ceil(2 ln(1/delta_k)/(eps tau^2))."""
    if k < 1:
        raise ValueError("iterations count from 1")
    delta_k = 6.0 * params.delta / (math.pi**2 * k**2)
    return int(math.ceil(2.0 * math.log(1.0 / delta_k) / (params.eps * params.tau**2)))


def unadaptive_test(n_col_first_m: int, k: int, params: InflationParams):
    """Accept iff collisions among the first M samples stay below M (1 - tau) eps.

    The per-iteration confidence delta_k = 6 delta / (pi^2 k^2) keeps the
    union over all iterations below delta. Returns (accept, M).
    """
    m = required_batch_size(k, params)
    accept = n_col_first_m <= m * (1.0 - params.tau) * params.eps
    return accept, m


# ---------------------------------------------------------------------------
# candidate updates
# ---------------------------------------------------------------------------

def bisection_update(c_col: np.ndarray, seg: Segment, n_b: int, checker) -> np.ndarray:
    """Walk a colliding point toward its projection, keeping it in collision.

    Exactly n_b midpoint checks on the chord [c_proj, c_col]; returns the
    colliding point closest to the projection found.
    """
    c = np.asarray(c_col, dtype=float)
    proj, _, _ = project_to_segment(c, seg)
    lo, hi = _bisection_batch(proj[None, :], c[None, :], n_b, checker)
    return hi[0]


def _bisection_batch(proj: np.ndarray, col: np.ndarray, n_b: int, checker):
    """Vectorized bisection: lo stays free-side, hi stays colliding."""
    lo = proj.copy()
    hi = col.copy()
    for _ in range(n_b):
        mid = 0.5 * (lo + hi)
        free = checker.check_batch(mid)
        hi = np.where(free[:, None], hi, mid)
        lo = np.where(free[:, None], mid, lo)
    return lo, hi


def compute_step_back(a: np.ndarray, b_raw: float, seg: Segment, delta_max: float) -> float:
    """Inward face shift, relaxed so the shifted face never cuts the segment.

    With r = max(a.v1, a.v2) - b_raw + delta_max, the shift is delta_max - r
    when r > 0 and delta_max otherwise; either way both vertices satisfy
    a.x <= b_raw - delta (an algebraic identity, exact to rounding).
    """
    a = np.asarray(a, dtype=float)
    r = max(float(a @ seg.v1), float(a @ seg.v2)) - b_raw + delta_max
    return delta_max - r if r > 0.0 else delta_max


# ---------------------------------------------------------------------------
# the inflation loop
# ---------------------------------------------------------------------------

def default_bisection_steps(domain: HPolytope, delta_max: float) -> int:
    """Rule of thumb: ceil(log2(L / delta_max)) with L the domain box diagonal."""
    spans = []
    for i in range(domain.dim):
        e = np.zeros(domain.dim)
        e[i] = 1.0
        hi = np.min(np.where(domain.A @ e > 1e-12, domain.b / np.maximum(domain.A @ e, 1e-12), np.inf))
        lo = np.max(np.where(domain.A @ e < -1e-12, domain.b / np.minimum(domain.A @ e, -1e-12), -np.inf))
        spans.append(hi - lo if np.isfinite(hi) and np.isfinite(lo) else 1.0)
    diag = float(np.linalg.norm(spans))
    return max(1, int(math.ceil(math.log2(max(diag, delta_max * 2.0) / delta_max))))


def _place_hyperplanes(poly: HPolytope, seg: Segment, cand_star: np.ndarray,
                       discard_points: np.ndarray, dists: np.ndarray,
                       delta_max: float, max_faces: int | None):
    """Sort candidates by distance and intersect separating halfspaces.

    ``cand_star`` are the bisected collision points (hyperplane anchors);
    ``discard_points`` are the points whose exclusion ends the loop early
    (the anchors themselves during inflation, the original collisions
    during set repair). Stable ascending sort, ties by candidate index.
    """
    order = np.argsort(dists, kind="stable")
    anchors = cand_star[order]
    targets = discard_points[order]
    proj_all, _, dist_all = project_batch(anchors, seg)
    alive = np.ones(anchors.shape[0], dtype=bool)
    faces = 0
    while np.any(alive) and (max_faces is None or faces < max_faces):
        i = int(np.argmax(alive))  # closest remaining candidate
        if dist_all[i] <= 1e-12:
            raise GradientUndefined("candidate collapsed onto the segment")
        a = (anchors[i] - proj_all[i]) / dist_all[i]
        b_raw = float(a @ anchors[i])
        delta = compute_step_back(a, b_raw, seg, delta_max)
        rhs = b_raw - delta
        poly = poly.intersect_halfspace(a, rhs)
        faces += 1
        alive &= targets @ a <= rhs
    return poly, faces


def inflate_edge(seg: Segment, domain: HPolytope, params: InflationParams, checker,
                 seed: int = 0) -> InflationReport:
    """Grow a polytope around a collision-free segment inside the domain.

    The seed segment is contained in the result by construction. If the
    loop ends through the acceptance test, the (eps, delta) volume bound
    applies; hitting the optional iteration cap voids it (the report says
    so via ``terminated_by``).

    Raises SegmentInCollision when sampling produces evidence that the
    segment itself is in collision or within ``t_col`` of an obstacle.
    """
    if seg.dim != domain.dim:
        raise DimensionMismatch("segment/domain dimension mismatch")
    if domain.slack(seg.v1) >= 0.0 or domain.slack(seg.v2) >= 0.0:
        raise SeedOutsideDomain("seed segment must be strictly inside the domain")

    n_b = params.n_b if params.n_b is not None else default_bisection_steps(domain, params.delta_max)
    poly = domain
    walk_offset = 0
    k = 1
    hyperplanes = 0
    calls0 = checker.calls
    while True:
        m = required_batch_size(k, params)
        n_samples = max(params.n_p, m)
        walks = np.uint64(walk_offset) + np.arange(n_samples, dtype=np.uint64)
        alphas = counter_uniforms(seed, walks, SEED_STEP, 0)
        seeds = seg.point(alphas)
        batch = hit_and_run_sample(poly, seeds, n_samples, params.n_ms, seed, walk_offset)
        walk_offset = batch.rng_state[1]
        free = checker.check_batch(batch.points)
        n_col_m = int(np.count_nonzero(~free[:m]))
        accept, _ = unadaptive_test(n_col_m, k, params)
        if accept:
            terminated = TERMINATED_ACCEPTED
            break

        col_idx = np.flatnonzero(~free)[: params.n_p]
        col = batch.points[col_idx]
        proj, _, dist = project_batch(col, seg)
        # fail fast: the projections lie on the segment and must be free
        if not np.all(checker.check_batch(proj)):
            raise SegmentInCollision("a projection onto the seed segment is in collision")
        _, star = _bisection_batch(proj, col, n_b, checker)
        _, _, dist_star = project_batch(star, seg)
        if np.any(dist_star <= params.t_col):
            raise SegmentInCollision(
                f"collision within t_col={params.t_col} of the seed segment")
        poly, placed = _place_hyperplanes(
            poly, seg, star, star, dist_star, params.delta_max, params.n_f)
        hyperplanes += placed
        if params.n_it is not None and k >= params.n_it:
            terminated = TERMINATED_MAX_ITER
            break
        k += 1

    return InflationReport(
        polytope=poly,
        iterations=k,
        hyperplanes_added=hyperplanes,
        collision_checks=checker.calls - calls0,
        terminated_by=terminated,
    )
