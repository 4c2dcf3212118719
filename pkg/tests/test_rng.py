import numpy as np
import pytest

from convfilter.rng import Rng


def test_raw_is_philox_keyed_by_seed():
    ref = np.random.Philox(key=42).random_raw(4)
    assert list(Rng(42).raw(4)) == list(ref)


def test_uniform_uses_top_53_bits():
    x = int(np.random.Philox(key=3).random_raw())
    assert Rng(3).uniform() == (x >> 11) * 2.0 ** -53


def test_below_uses_multiply_shift():
    x = int(np.random.Philox(key=5).random_raw())
    assert Rng(5).below(10) == (x * 10) >> 64


def test_below_range():
    r = Rng(1)
    vals = [r.below(7) for _ in range(2000)]
    assert min(vals) == 0 and max(vals) == 6


def test_shuffle_is_permutation_and_seeded():
    a = Rng(9).shuffle(list(range(50)))
    assert sorted(a) == list(range(50))
    assert a == Rng(9).shuffle(list(range(50)))
    assert a != list(range(50))


def test_spawn_streams_differ():
    r = Rng(1)
    assert r.spawn(1).raw() != r.spawn(2).raw()
    assert r.spawn(1).raw() == Rng(1).spawn(1).raw()


def test_normal_moments():
    r = Rng(2)
    xs = np.array([r.normal() for _ in range(20000)])
    assert abs(xs.mean()) < 0.03 and abs(xs.std() - 1) < 0.03


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        Rng(-1)
