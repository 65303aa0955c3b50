"""Counter-based random substreams keyed by (seed, purpose, indices)."""

import numpy as np

CHANNEL, DATA, NOISE = 0, 1, 2


def substream(seed, *key: int) -> np.random.Generator:
    """Philox generator for one ``(seed, *key)`` cell.

    Draws depend only on the key, never on the order in which cells are
    generated, so trials can run in any order or in parallel.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
