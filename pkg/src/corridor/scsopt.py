"""Shortest piecewise-linear path through a sequence of convex sets.

The program: knots v_1..v_{M+1} with v_1 = s, v_{M+1} = g, v_i in P_i and
v_i in P_{i-1}, minimizing the total L2 length. It is solved by
alternating minimization: sweep over the interior knots, pulling each
toward the weighted midpoint of its neighbours (the two-anchor Weiszfeld
step, which equals a gradient step with an automatic step size) and
projecting back onto the intersection of its two sets. A backtracking
acceptance rule keeps the sweep monotone, so the warm start's cost is an
upper bound on the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cpoly import HPolytope
from .drm import PwlPath
from .inflation import Segment
from .errors import InfeasibleEndpoint, NonConvergence

FEAS_TOL = 1e-7


@dataclass
class Scs:
    """Ordered convex sets covering a seed path, with per-segment coverage.

    ``coverage[k]`` is the index (into ``sets``) of the set containing
    path segment k; ``seeds[j]`` is the segment set j was inflated from,
    kept so later repairs can reuse the inflation machinery. Consecutive
    sets of the run-collapsed coverage intersect, witnessed by the shared
    path knot at every coverage transition.
    """

    sets: list[HPolytope]
    coverage: list[int]
    seeds: list[Segment]
    path: PwlPath
    domain: HPolytope | None = None
    reports: list = field(default_factory=list)

    @property
    def hyperplanes(self) -> int:
        """Separating faces across all sets, excluding the shared domain faces."""
        if self.domain is None:
            return sum(p.n_faces for p in self.sets)
        return sum(p.n_faces - self.domain.n_faces for p in self.sets)

    def sequence(self) -> list[int]:
        """Coverage run-collapsed into the set sequence the optimizer visits."""
        seq = []
        for c in self.coverage:
            if not seq or seq[-1] != c:
                seq.append(c)
        return seq

    def transition_knots(self) -> np.ndarray:
        """Seed-path knots at coverage transitions (feasible warm start)."""
        knots = []
        for k in range(1, len(self.coverage)):
            if self.coverage[k] != self.coverage[k - 1]:
                knots.append(self.path.knots[k])
        return np.array(knots).reshape(len(knots), self.path.knots.shape[1])


@dataclass
class ScsPath:
    """Optimized knots; knot i+1 lies in sequence sets i and i+1."""

    knots: np.ndarray
    cost: float
    converged: bool = True
    sweeps: int = 0

    def __post_init__(self):
        self.knots = np.atleast_2d(np.asarray(self.knots, dtype=float))


def _path_cost(knots: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(np.diff(knots, axis=0), axis=1)))


def project_polytope(A: np.ndarray, b: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x | Ax <= b}.

    Solved as a small QP; falls back to Dykstra's cyclic halfspace
    projections if the QP solver declines.
    """
    if np.max(A @ y - b) <= 0.0:
        return y.copy()
    x = _project_qp(A, b, y)
    if x is not None and np.max(A @ x - b) <= FEAS_TOL:
        return x
    return _project_dykstra(A, b, y)


def _project_qp(A, b, y):
    from cvxopt import matrix, solvers

    d = y.shape[0]
    try:
        sol = solvers.qp(matrix(np.eye(d)), matrix(-y.astype(float)),
                         matrix(A.astype(float)), matrix(b.astype(float)),
                         options={"show_progress": False})
    except (ValueError, ArithmeticError):
        return None
    if sol["status"] not in ("optimal", "unknown"):
        return None
    return np.asarray(sol["x"]).ravel()


def _project_dykstra(A, b, y, max_cycles: int = 5000, tol: float = 1e-12):
    m = A.shape[0]
    x = y.copy()
    corr = np.zeros((m, y.shape[0]))
    for _ in range(max_cycles):
        moved = 0.0
        for i in range(m):
            z = x + corr[i]
            viol = float(A[i] @ z - b[i])
            if viol > 0.0:
                x_new = z - viol * A[i]
            else:
                x_new = z
            corr[i] = z - x_new
            moved = max(moved, float(np.max(np.abs(x_new - x))))
            x = x_new
        if moved < tol and np.max(A @ x - b) <= FEAS_TOL:
            return x
    if np.max(A @ x - b) > FEAS_TOL:
        raise NonConvergence("projection failed; sets may not intersect", best=x)
    return x


def _pull_target(v: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Two-anchor Weiszfeld point; a coincident anchor contributes no pull."""
    da = float(np.linalg.norm(v - a))
    db = float(np.linalg.norm(v - b))
    wa = 0.0 if da < 1e-12 else 1.0 / da
    wb = 0.0 if db < 1e-12 else 1.0 / db
    if wa + wb == 0.0:
        return v.copy()
    return (wa * a + wb * b) / (wa + wb)


def scs_shortest_path(scs: Scs, s: np.ndarray, g: np.ndarray, tol: float = 1e-8,
                       max_sweeps: int = 5000) -> ScsPath:
    """Minimize total L2 length of the knot chain through the set sequence.

    The warm start comes from the seed path's coverage-transition knots,
    so the returned cost never exceeds the seed path length. Hitting the
    sweep cap before the per-sweep improvement drops below ``tol``
    returns the best iterate with ``converged=False``.
    """
    s = np.asarray(s, dtype=float)
    g = np.asarray(g, dtype=float)
    seq = scs.sequence()
    polys = [scs.sets[i] for i in seq]
    if not polys[0].contains(s, FEAS_TOL):
        raise InfeasibleEndpoint("start outside the first set")
    if not polys[-1].contains(g, FEAS_TOL):
        raise InfeasibleEndpoint("goal outside the last set")
    m = len(polys)
    if m == 1:
        return ScsPath(np.vstack([s, g]), float(np.linalg.norm(g - s)), True, 0)

    warm = scs.transition_knots()
    knots = np.vstack([s, warm, g])
    # stacked intersection constraints per interior knot
    stacks = []
    for i in range(1, m):
        A = np.vstack([polys[i - 1].A, polys[i].A])
        b = np.concatenate([polys[i - 1].b, polys[i].b])
        stacks.append((A, b))
        knots[i] = project_polytope(A, b, knots[i])  # numerical safety; warm start is feasible

    cost = _path_cost(knots)
    sweeps = 0
    converged = False
    for sweeps in range(1, max_sweeps + 1):
        prev_cost = cost
        for i in range(1, m):
            v = knots[i]
            target = _pull_target(v, knots[i - 1], knots[i + 1])
            A, b = stacks[i - 1]
            local = (np.linalg.norm(v - knots[i - 1]) + np.linalg.norm(v - knots[i + 1]))
            theta = 1.0
            for _ in range(6):
                cand = project_polytope(A, b, v + theta * (target - v))
                new_local = (np.linalg.norm(cand - knots[i - 1])
                             + np.linalg.norm(cand - knots[i + 1]))
                if new_local <= local + 1e-15:
                    knots[i] = cand
                    break
                theta *= 0.5
        cost = _path_cost(knots)
        if prev_cost - cost < tol:
            converged = True
            break
    return ScsPath(knots, cost, converged, sweeps)
