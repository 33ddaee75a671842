"""Counter-derived random streams.

Every random draw of a filter run comes from a generator keyed by the run seed
and a tuple of small integers (purpose, step, ...).  The draws therefore do not
depend on evaluation order or on how many worker threads are used.
"""

import numpy as np

INIT = 0
STEP = 1
REPLICATE = 2
DATA = 3
MCMC = 4
CALIBRATE = 5


def stream(seed, *key):
    """Return a PCG64 generator for ``(seed, key)``.

    >>> a = stream(7, 1, 3).random()
    >>> b = stream(7, 1, 3).random()
    >>> a == b
    True
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(seed, *key):
    """Derive an unsigned 64-bit integer seed for a sub-experiment."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
