"""Seed derivation and stream splitting.

Every random draw in the package comes from ``stream(seed, stream_id)``, a
PCG64 generator seeded by ``SeedSequence(seed, spawn_key=(stream_id,))``.
Distinct stream ids give statistically independent generators, so a trial
can draw its model, its trajectory and its row index without the three
consuming each other's randomness. Per-trial seeds for sweeps come from
``derive_seed(base_seed, group_id, trial_id)``, where a group is
a set of grid cells that share one trajectory per trial.
"""

import numpy as np

MODEL_STREAM = 0
PATH_STREAM = 1
ROW_STREAM = 2


def derive_seed(base_seed: int, *keys: int) -> int:
    """Deterministic 64-bit seed from a base seed and integer keys."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),)))
    )
