"""Contiguous block partitions of coordinate indices."""

import numpy as np


class BlockPartition:
    """Partition of n coordinates into p contiguous, nonempty blocks.

    Parameters
    ----------
    n : int
        Total number of coordinates.
    sizes : sequence of int
        Number of coordinates in each block; must sum to n.
    """

    def __init__(self, n, sizes):
        sizes = [int(s) for s in sizes]
        if len(sizes) == 0:
            raise ValueError("partition needs at least one block")
        if any(s <= 0 for s in sizes):
            raise ValueError("block sizes must be positive")
        if sum(sizes) != int(n):
            raise ValueError(
                "block sizes sum to %d, expected n = %d" % (sum(sizes), int(n))
            )
        self.n = int(n)
        self.p = len(sizes)
        self.sizes = sizes
        self.offsets = np.concatenate(([0], np.cumsum(sizes))).astype(int)

    @classmethod
    def near_equal(cls, n, p):
        """Split n coordinates into p blocks of near-equal size.

        Each block receives n // p coordinates; the remainder is spread
        over the leading blocks, one extra coordinate each.
        """
        n, p = int(n), int(p)
        if n <= 0 or p <= 0:
            raise ValueError("n and p must be positive")
        if p > n:
            raise ValueError("cannot split %d coordinates into %d nonempty blocks" % (n, p))
        base, rem = divmod(n, p)
        sizes = [base + 1] * rem + [base] * (p - rem)
        return cls(n, sizes)

    def range_of(self, i):
        """Half-open coordinate range (start, stop) of block i (0-based)."""
        if not 0 <= i < self.p:
            raise IndexError("block index %d out of range [0, %d)" % (i, self.p))
        return int(self.offsets[i]), int(self.offsets[i + 1])

    def slice_of(self, i):
        start, stop = self.range_of(i)
        return slice(start, stop)

    def split(self, x):
        """List of per-block views of a length-n vector."""
        x = np.asarray(x)
        if x.shape[0] != self.n:
            raise ValueError("vector length %d does not match n = %d" % (x.shape[0], self.n))
        return [x[self.slice_of(i)] for i in range(self.p)]

    def __repr__(self):
        return "BlockPartition(n=%d, p=%d, sizes=%r)" % (self.n, self.p, self.sizes)
