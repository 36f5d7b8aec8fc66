import numpy as np
import pytest

from qsmooth import rng
from qsmooth.errors import ConfigError


def test_streams_are_reproducible_and_distinct():
    a = rng.stream(1, 5).random(4)
    np.testing.assert_array_equal(a, rng.stream(1, 5).random(4))
    assert not np.array_equal(a, rng.stream(1, 6).random(4))
    assert not np.array_equal(a, rng.stream(2, 5).random(4))


def test_flags_depend_only_on_seed_and_index():
    both = rng.jump_flags(7, [3, 9], 500, 0.3)
    np.testing.assert_array_equal(both[1], rng.jump_flags(7, [9], 500, 0.3)[0])
    assert both.dtype == np.uint8


def test_flag_frequency():
    flags = rng.jump_flags(0, range(200), 1000, 0.25)
    # binomial mean over 2e5 draws; 5 sigma is about 0.005
    assert abs(flags.mean() - 0.25) < 0.005


def test_innovation_variance():
    dW = rng.innovations(3, 200_000, 1e-3)
    assert abs(dW.mean()) < 5 * np.sqrt(1e-3 / 2e5)
    assert dW.var() == pytest.approx(1e-3, rel=0.02)


def test_u64_range_and_reserved_stream():
    rng.stream(2**64 - 1, 0)
    with pytest.raises(ConfigError):
        rng.stream(2**64, 0)
    with pytest.raises(ConfigError):
        rng.stream(-1, 0)
    with pytest.raises(ConfigError):
        rng.jump_flags(0, [rng.RECORD_STREAM], 3, 0.5)
    assert rng.EVAL_INDEX_BASE == 2**32
