"""Counter-based random-number substreams.

Every stochastic routine in this package derives its generator from a root
seed and an integer path, so results are reproducible under any execution
order and any number of worker processes.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream"]


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return an independent generator keyed by ``(seed, *path)``.

    The same ``(seed, path)`` pair always yields the same stream, and
    distinct paths yield statistically independent streams.  Path entries
    must be nonnegative integers.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
