import numpy as np
import pytest

from opstat.errors import ValidationError
from opstat.parallel import pmap
from opstat.rng import MAX_SEED, check_seed, make_rng


def test_seed_range():
    assert check_seed(0) == 0 and check_seed(MAX_SEED) == MAX_SEED
    assert check_seed(np.uint64(7)) == 7
    for bad in (-1, MAX_SEED + 1, 1.5, "3", True):
        with pytest.raises(ValidationError):
            check_seed(bad)


def test_streams_reproducible_and_distinct():
    a = make_rng(5, 1, 2).random(4)
    assert np.array_equal(a, make_rng(5, 1, 2).random(4))
    assert not np.array_equal(a, make_rng(5, 2, 1).random(4))
    assert not np.array_equal(a, make_rng(6, 1, 2).random(4))
    assert isinstance(make_rng(0).bit_generator, np.random.Philox)


def test_pmap_order_independent_of_threads():
    items = list(range(30))
    f = lambda i: make_rng(1, i).random()  # noqa: E731
    assert pmap(f, items, 1) == pmap(f, items, 4)
