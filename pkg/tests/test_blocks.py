import numpy as np
import pytest
from numpy.testing import assert_array_equal

from icbpg.blocks import BlockPartition


def test_near_equal_sizes_sum_and_balance():
    for n, p in [(10, 3), (2000, 10), (7, 7), (5, 1), (12, 5)]:
        part = BlockPartition.near_equal(n, p)
        assert part.p == p
        assert sum(part.sizes) == n
        assert max(part.sizes) - min(part.sizes) <= 1
        # larger blocks come first
        assert list(part.sizes) == sorted(part.sizes, reverse=True)


def test_ranges_and_slices_cover_without_overlap():
    part = BlockPartition.near_equal(11, 4)
    covered = []
    for i in range(part.p):
        start, stop = part.range_of(i)
        assert part.slice_of(i) == slice(start, stop)
        covered.extend(range(start, stop))
    assert covered == list(range(11))


def test_split_round_trip():
    rng = np.random.Generator(np.random.PCG64(3))
    x = rng.standard_normal(13)
    part = BlockPartition.near_equal(13, 5)
    pieces = part.split(x)
    assert len(pieces) == 5
    assert_array_equal(np.concatenate(pieces), x)


def test_explicit_sizes_validated():
    part = BlockPartition(6, [4, 2])
    assert part.range_of(1) == (4, 6)
    with pytest.raises(ValueError):
        BlockPartition(6, [4, 3])
    with pytest.raises(ValueError):
        BlockPartition(6, [6, 0])


def test_near_equal_rejects_bad_counts():
    with pytest.raises(ValueError):
        BlockPartition.near_equal(3, 4)
    with pytest.raises(ValueError):
        BlockPartition.near_equal(3, 0)
