"""Counter-based random streams.

Sampling walks must produce identical output no matter how they are
partitioned across worker threads, so ordinary stateful generators are
out. Instead every random draw is a pure function of
``(master seed, walk index, step, slot)``, hashed through the splitmix64
finalizer. Uniforms come straight from the hash; normals go through the
inverse normal CDF so each normal consumes exactly one counter slot.

The same mix is used as the documented splittable hash for deriving
child seeds, e.g. one stream per benchmark instance.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# step tag reserved for draws made before the mixing steps (walk seeds)
SEED_STEP = 1 << 32


def _mix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + _GAMMA
        z ^= z >> np.uint64(30)
        z *= _M1
        z ^= z >> np.uint64(27)
        z *= _M2
        z ^= z >> np.uint64(31)
    return z


def hash_u64(*words) -> np.ndarray:
    """Fold integers (scalars or uint64 arrays) into one uint64 hash."""
    h = np.uint64(0)
    for w in words:
        w = np.asarray(w).astype(np.uint64, casting="unsafe")
        h = _mix(h ^ w)
    return h


def child_seed(master: int, *words) -> int:
    """Derive a reproducible child seed from a master seed and context words."""
    return int(hash_u64(np.uint64(master & 0xFFFFFFFFFFFFFFFF), *words))


def counter_uniforms(seed: int, walks: np.ndarray, step: int, slot: int) -> np.ndarray:
    """Uniform draws in (0, 1), one per walk index, at counter (step, slot)."""
    h = hash_u64(seed, walks.astype(np.uint64), np.uint64(step) * np.uint64(64) + np.uint64(slot))
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def counter_normals(seed: int, walks: np.ndarray, step: int, slot: int) -> np.ndarray:
    """Standard normal draws via the inverse CDF; one counter slot each."""
    return ndtri(counter_uniforms(seed, walks, step, slot))
