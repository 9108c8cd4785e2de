"""Count-Min Sketch (3 rows) and a 3-bitmap Bloom filter.

Both index their rows with seeded XXH64, masked down to a power-of-two
width, so a given (seed, key) lands on the same cell on every platform.
"""

from __future__ import annotations

from array import array
from typing import Sequence

import xxhash

DEPTH = 3
COUNTER_MAX = 2**32 - 1

DEFAULT_CMS_WIDTH = 4096
DEFAULT_BLOOM_BITS = 65536
DEFAULT_EXT_SEEDS = (0x9E3779B97F4A7C15, 0xC2B2AE3D27D4EB4F, 0x165667B19E3779F9)
DEFAULT_INT_SEEDS = (0x27D4EB2F165667C5, 0x85EBCA77C2B2AE63, 0xFF51AFD7ED558CCD)
DEFAULT_BLOOM_SEEDS = (0xC4CEB9FE1A85EC53, 0x94D049BB133111EB, 0xBF58476D1CE4E5B9)


def hash_row(seed: int, key: bytes) -> int:
    """Seeded 64-bit XXH64 of ``key``."""
    return xxhash.xxh64_intdigest(key, seed)


def _check_layout(width: int, seeds: Sequence[int], what: str) -> None:
    if width <= 0 or width & (width - 1):
        raise ValueError(f"{what} width must be a positive power of two, got {width}")
    if len(seeds) != DEPTH:
        raise ValueError(f"{what} needs exactly {DEPTH} seeds, got {len(seeds)}")
    if len(set(seeds)) != DEPTH:
        raise ValueError(f"{what} seeds must be distinct")
    for s in seeds:
        if not 0 <= s < 2**64:
            raise ValueError(f"seed {s} is not a 64-bit value")


class CountMinSketch:
    """d=3 Count-Min Sketch with saturating 32-bit counters.

    ``generation`` counts resets; ``total_increments`` counts every
    increment over the sketch's lifetime and is never reset (audit aid).
    """

    def __init__(self, width: int = DEFAULT_CMS_WIDTH, seeds: Sequence[int] = DEFAULT_EXT_SEEDS):
        _check_layout(width, seeds, "CMS")
        self.width = width
        self.seeds = tuple(seeds)
        self._mask = width - 1
        self.rows = [array("I", bytes(4 * width)) for _ in range(DEPTH)]
        self.generation = 0
        self.total_increments = 0

    def _cells(self, key: bytes):
        m = self._mask
        return [xxhash.xxh64_intdigest(key, s) & m for s in self.seeds]

    def increment(self, key: bytes) -> None:
        for row, i in zip(self.rows, self._cells(key)):
            if row[i] < COUNTER_MAX:
                row[i] += 1
        self.total_increments += 1

    def estimate(self, key: bytes) -> int:
        return min(row[i] for row, i in zip(self.rows, self._cells(key)))

    def reset(self) -> None:
        self.rows = [array("I", bytes(4 * self.width)) for _ in range(DEPTH)]
        self.generation += 1

    def counter_sum(self) -> int:
        """Sum of row 0; equals increments since the last reset (barring saturation)."""
        return sum(self.rows[0])


class BloomFilter:
    """Three independent bitmaps, one seeded hash each."""

    def __init__(self, bits: int = DEFAULT_BLOOM_BITS, seeds: Sequence[int] = DEFAULT_BLOOM_SEEDS):
        _check_layout(bits, seeds, "Bloom filter")
        self.bits = bits
        self.seeds = tuple(seeds)
        self._mask = bits - 1
        self.bitmaps = [bytearray(bits // 8 or 1) for _ in range(DEPTH)]

    def _positions(self, key: bytes):
        m = self._mask
        return [xxhash.xxh64_intdigest(key, s) & m for s in self.seeds]

    def insert(self, key: bytes) -> None:
        for bm, pos in zip(self.bitmaps, self._positions(key)):
            bm[pos >> 3] |= 1 << (pos & 7)

    def check(self, key: bytes) -> bool:
        return all(bm[pos >> 3] >> (pos & 7) & 1 for bm, pos in zip(self.bitmaps, self._positions(key)))

    def __contains__(self, key: bytes) -> bool:
        return self.check(key)
