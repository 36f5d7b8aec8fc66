"""Counter-based random streams keyed by ``(seed, index)``.

Every unobserved record owns a Philox stream whose 128-bit key packs the
64-bit run seed and the 64-bit trajectory index, so a record depends only
on that pair and never on scheduling or worker count.
"""

import numpy as np

from .errors import ConfigError

MAX_U64 = (1 << 64) - 1
# index reserved for the observed-record innovations
RECORD_STREAM = MAX_U64
# evaluation-ensemble indices start here; assembly indices stay below it
EVAL_INDEX_BASE = 1 << 32


def _check_u64(value, name):
    value = int(value)
    if not 0 <= value <= MAX_U64:
        raise ConfigError(f"{name} must be an unsigned 64-bit integer, got {value}")
    return value


def stream(seed, index):
    seed = _check_u64(seed, "seed")
    index = _check_u64(index, "index")
    return np.random.Generator(np.random.Philox(key=seed | (index << 64)))


def innovations(seed, n_steps, dt):
    """Gaussian increments with mean 0 and variance dt for the observed record."""
    return stream(seed, RECORD_STREAM).normal(0.0, np.sqrt(dt), size=n_steps)


def jump_flags(seed, indices, n_steps, probability):
    """Bernoulli(probability) flags, one row per stream index, dtype uint8."""
    indices = np.asarray(indices, dtype=np.uint64)
    out = np.empty((indices.size, n_steps), dtype=np.uint8)
    for row, index in enumerate(indices):
        if int(index) == RECORD_STREAM:
            raise ConfigError("stream index 2**64-1 is reserved for the observed record")
        out[row] = stream(seed, int(index)).random(n_steps) < probability
    return out
