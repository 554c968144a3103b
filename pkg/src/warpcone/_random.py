import numpy as np


def make_rng(random_state=None):
    """Turn ``None``, an int seed or a Generator into a ``numpy.random.Generator``."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    if isinstance(random_state, np.random.RandomState):
        return np.random.default_rng(random_state.randint(2**63 - 1))
    return np.random.default_rng(random_state)


def substream(seed, *index):
    """Independent generator keyed by ``(seed, index...)``.

    Streams for different indices never overlap, so work split across
    workers reproduces the sequential result.
    """
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, index)])
