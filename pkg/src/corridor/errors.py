"""Exception types shared across the toolkit."""


class CorridorError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(CorridorError):
    """Input vector or matrix dimensions do not agree."""


class EmptyChord(CorridorError):
    """Hit-and-run found no feasible chord; the polytope is numerically degenerate."""


class SeedOutside(CorridorError):
    """A sampling walk was seeded outside the polytope."""


class GradientUndefined(CorridorError):
    """Distance gradient requested at (or numerically on) the segment."""


class SegmentInCollision(CorridorError):
    """The seed segment is in collision or closer to an obstacle than the tolerance."""


class SeedOutsideDomain(CorridorError):
    """Inflation seed segment is not strictly inside the domain polytope."""


class SamplingExhausted(CorridorError):
    """Rejection sampling exceeded its budget without finding enough free configurations."""


class GridMismatch(CorridorError):
    """Voxel map grid is incompatible with the roadmap grid."""


class IkFailed(CorridorError):
    """No collision-free configuration reaching the goal pose was found."""


class NoPath(CorridorError):
    """Roadmap graph is disconnected between start and goal after pruning."""


class AlreadyAtGoal(CorridorError):
    """Start and goal configurations are identical."""


class InfeasibleEndpoint(CorridorError):
    """Path endpoint lies outside its corresponding convex set."""


class NonConvergence(CorridorError):
    """Optimizer hit its sweep cap before reaching the tolerance.

    The best feasible iterate found so far is attached as ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
