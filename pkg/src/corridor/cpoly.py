"""H-representation polytopes and uniform sampling inside them.

Polytopes are stored as {x | Ax <= b} with every face normal unit-length,
so right-hand sides and face shifts read directly as Euclidean distances.
Instances are immutable; intersecting a halfspace returns a new polytope
and never prunes rows (an optional prune pass exists for serialization).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyChord, SeedOutside
from .seeding import SEED_STEP, counter_normals, counter_uniforms

MEMBER_TOL = 1e-9


@dataclass(frozen=True)
class HPolytope:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if A.shape[0] != b.shape[0]:
            raise DimensionMismatch("A and b row counts differ")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms <= 0.0):
            raise ValueError("zero face normal")
        off = np.abs(norms - 1.0) > 1e-12
        if np.any(off):
            A = A / norms[:, None]
            b = b / norms
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @staticmethod
    def from_bounds(lower, upper) -> "HPolytope":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        d = lower.shape[0]
        eye = np.eye(d)
        return HPolytope(np.vstack([eye, -eye]), np.concatenate([upper, -lower]))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_faces(self) -> int:
        return self.A.shape[0]

    def slack(self, x: np.ndarray) -> float:
        """max(A x - b); <= 0 inside, > 0 outside."""
        return float(np.max(self.A @ np.asarray(x, dtype=float) - self.b))

    def contains(self, x: np.ndarray, tol: float = MEMBER_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dim:
            raise DimensionMismatch("point dimension mismatch")
        return self.slack(x) <= tol

    def contains_many(self, X: np.ndarray, tol: float = MEMBER_TOL) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise DimensionMismatch("point dimension mismatch")
        return np.max(X @ self.A.T - self.b, axis=1) <= tol

    def contains_segment(self, v1: np.ndarray, v2: np.ndarray, tol: float = MEMBER_TOL) -> bool:
        """Both vertices inside suffices by convexity."""
        return self.contains(v1, tol) and self.contains(v2, tol)

    def intersect_halfspace(self, a: np.ndarray, rhs: float) -> "HPolytope":
        a = np.asarray(a, dtype=float)
        if a.shape[0] != self.dim:
            raise DimensionMismatch("normal dimension mismatch")
        return HPolytope(np.vstack([self.A, a]), np.concatenate([self.b, [rhs]]))

    def to_json(self) -> dict:
        return {"dim": self.dim, "A": [float(v) for v in self.A.ravel()],
                "b": [float(v) for v in self.b]}

    @staticmethod
    def from_json(obj: dict) -> "HPolytope":
        d = int(obj["dim"])
        A = np.asarray(obj["A"], dtype=float).reshape(-1, d)
        return HPolytope(A, np.asarray(obj["b"], dtype=float))

    def pruned(self, tol: float = 1e-9) -> "HPolytope":
        """Drop redundant faces (LP per face); intended for serialization only."""
        from scipy.optimize import linprog

        keep = []
        for i in range(self.n_faces):
            others = np.ones(self.n_faces, dtype=bool)
            others[i] = False
            res = linprog(-self.A[i], A_ub=self.A[others], b_ub=self.b[others],
                          bounds=[(None, None)] * self.dim, method="highs")
            if not res.success or -res.fun > self.b[i] + tol:
                keep.append(i)
        return HPolytope(self.A[keep], self.b[keep])


def dumps_polytopes(polys) -> str:
    return json.dumps([p.to_json() for p in polys])


def loads_polytopes(text: str) -> list[HPolytope]:
    return [HPolytope.from_json(o) for o in json.loads(text)]


@dataclass
class SampleBatch:
    """Uniform-ish samples plus the stream state needed to continue the walk sequence."""

    points: np.ndarray
    rng_state: tuple  # (seed, next walk index)


def _chords(poly: HPolytope, X: np.ndarray, D: np.ndarray):
    """Feasible interval [t_lo, t_hi] of X + t*D inside the polytope, per row."""
    G = X @ poly.A.T
    H = D @ poly.A.T
    slack = poly.b[None, :] - G
    with np.errstate(divide="ignore", invalid="ignore"):
        t = slack / H
    pos = H > 1e-14
    neg = H < -1e-14
    t_hi = np.where(pos, t, np.inf).min(axis=1)
    t_lo = np.where(neg, t, -np.inf).max(axis=1)
    return t_lo, t_hi


def hit_and_run_sample(poly: HPolytope, seeds: np.ndarray, count: int, n_ms: int,
                       seed: int, walk_offset: int = 0) -> SampleBatch:
    """Hit-and-run samples: ``count`` independent walks of exactly ``n_ms`` steps.

    Walk i starts at ``seeds[i % len(seeds)]`` and draws all its randomness
    from the counter stream keyed by (seed, walk_offset + i): a Gaussian
    direction (normalized) and a uniform position on the feasible chord
    per mixing step. Only the final point of each walk is returned, so the
    batch is identical however the walks are partitioned across workers.
    """
    if count == 0:
        return SampleBatch(np.zeros((0, poly.dim)), (seed, walk_offset))
    if n_ms < 1:
        raise ValueError("need at least one mixing step")
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.shape[1] != poly.dim:
        raise DimensionMismatch("seed dimension mismatch")
    if not np.all(poly.contains_many(seeds, MEMBER_TOL)):
        raise SeedOutside("walk seed outside the polytope")
    d = poly.dim
    walks = (np.uint64(walk_offset) + np.arange(count, dtype=np.uint64))
    X = seeds[np.arange(count) % seeds.shape[0]].copy()
    for step in range(n_ms):
        dirs = np.stack([counter_normals(seed, walks, step, slot) for slot in range(d)], axis=1)
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        t_lo, t_hi = _chords(poly, X, dirs)
        if np.any(t_hi < t_lo - 1e-12):
            raise EmptyChord("no feasible chord; polytope numerically degenerate")
        t_lo = np.minimum(t_lo, 0.0)
        t_hi = np.maximum(t_hi, 0.0)
        u = counter_uniforms(seed, walks, step, d)
        X = X + dirs * (t_lo + u * (t_hi - t_lo))[:, None]
    return SampleBatch(X, (seed, walk_offset + count))
