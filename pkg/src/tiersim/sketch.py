"""Counting Bloom filter for page-access frequency tracking.

The filter maps an unbounded page-id space onto a fixed array of small
saturating counters.  Each page hashes to ``num_hashes`` counter positions;
an estimate reads the minimum over those positions, an update raises only
the counters that equal the current minimum (conservative update).  This
keeps estimates one-sided: the filter can overcount a page (hash collisions)
but never undercount it below the saturation cap.

Hashing is double hashing over two 64-bit values derived from the page id
with a splitmix64 finalizer, so the probe sequence is a pure function of
``(page, hash_seed)`` and runs are reproducible bit for bit.  Two layouts
are supported:

* ``plain``   -- position i is ``(h1 + i*h2) mod num_counters``.
* ``blocked`` -- high bits of h1 pick one 64-byte block; all probes stay
  inside that block so an update touches a single cache line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_BLOCK_BYTES = 64  # one cache line per block


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer over a uint64 array."""
    z = (x + _GOLDEN).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def size_for(n_items: int, target_fp_rate: float, num_hashes: int) -> int:
    """Smallest power-of-two counter count meeting the false-positive target.

    Uses the standard Bloom bound (1 - e^(-k*n/m))^k <= p for n inserted
    items, m counters and k hashes.
    """
    if n_items < 0:
        raise ValueError("n_items must be non-negative")
    if not (0.0 < target_fp_rate < 1.0):
        raise ValueError("target_fp_rate must be in (0, 1)")
    if num_hashes < 1:
        raise ValueError("num_hashes must be >= 1")
    m = 2
    while True:
        fp = (1.0 - math.exp(-num_hashes * n_items / m)) ** num_hashes
        if fp <= target_fp_rate:
            return m
        m *= 2


@dataclass
class SketchConfig:
    """Shape of the counter array and probe scheme.

    num_counters must be a power of two.  In the blocked layout the array is
    carved into 64-byte blocks of ``512 // counter_bits`` counters, which
    requires counter_bits to be one of {2, 4, 8} so that blocks tile the
    power-of-two array evenly.
    """

    num_counters: int
    counter_bits: int = 4
    num_hashes: int = 3
    layout: str = "plain"
    hash_seed: int = 0

    def __post_init__(self) -> None:
        if self.num_counters < 2 or self.num_counters & (self.num_counters - 1):
            raise ValueError("num_counters must be a power of two >= 2")
        if not 2 <= self.counter_bits <= 8:
            raise ValueError("counter_bits must lie in [2, 8]")
        if self.num_hashes < 1:
            raise ValueError("num_hashes must be >= 1")
        if self.layout not in ("plain", "blocked"):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.layout == "blocked":
            bc = self.block_counters
            if bc & (bc - 1):
                raise ValueError(
                    "blocked layout needs counter_bits in {2, 4, 8} so a "
                    "64-byte block holds a power-of-two counter count"
                )
            if self.num_counters % bc:
                raise ValueError(
                    f"num_counters must be a multiple of {bc} for the blocked layout"
                )
            if self.num_hashes >= bc:
                raise ValueError("num_hashes must be smaller than block_counters")

    @property
    def max_count(self) -> int:
        return (1 << self.counter_bits) - 1

    @property
    def block_counters(self) -> int:
        return (_BLOCK_BYTES * 8) // self.counter_bits


class CountingBloomFilter:
    """Conservative-update counting Bloom filter with saturating counters.

    Counters saturate at ``2**counter_bits - 1`` and halve on :meth:`age`.
    The in-memory array keeps one byte per counter for speed;
    :meth:`memory_bytes` reports the packed footprint the structure is
    modeling (``num_counters * counter_bits / 8``).
    """

    def __init__(self, config: SketchConfig) -> None:
        self.config = config
        self.max_count = config.max_count
        self.counters = np.zeros(config.num_counters, dtype=np.uint8)
        self._mask = np.uint64(config.num_counters - 1)
        self._seed = np.uint64(config.hash_seed & 0xFFFFFFFFFFFFFFFF)
        self._ii = np.arange(config.num_hashes, dtype=np.uint64)
        if config.layout == "blocked":
            bc = config.block_counters
            self._block_mask = np.uint64(bc - 1)
            self._nblocks_mask = np.uint64(config.num_counters // bc - 1)
            self._bc = np.uint64(bc)

    # -- hashing ---------------------------------------------------------

    def _hash_pair(self, pages: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        h1 = _mix64(pages.astype(np.uint64) ^ self._seed)
        h2 = _mix64(h1 ^ _GOLDEN) | np.uint64(1)  # odd: probe step is invertible
        return h1, h2

    def _indices(self, pages: np.ndarray) -> np.ndarray:
        """Counter positions for each page, shape (len(pages), num_hashes)."""
        h1, h2 = self._hash_pair(pages)
        steps = self._ii[None, :]
        if self.config.layout == "plain":
            idx = (h1[:, None] + h2[:, None] * steps) & self._mask
        else:
            block = (h1 >> np.uint64(32)) & self._nblocks_mask
            base = (h2 >> np.uint64(32)) & self._block_mask
            step = (h2 & self._block_mask) | np.uint64(1)
            inblock = (base[:, None] + step[:, None] * steps) & self._block_mask
            idx = block[:, None] * self._bc + inblock
        return idx.astype(np.int64)

    def counter_indices(self, page: int) -> list[int]:
        """The probe positions for one page, in probe order."""
        return self._indices(np.asarray([page], dtype=np.uint64))[0].tolist()

    # -- reads -----------------------------------------------------------

    def get(self, page: int) -> int:
        return int(self.get_many(np.asarray([page], dtype=np.uint64))[0])

    def get_many(self, pages: np.ndarray) -> np.ndarray:
        """Estimates for an array of pages (min over each probe set)."""
        if len(pages) == 0:
            return np.zeros(0, dtype=np.int64)
        idx = self._indices(np.asarray(pages, dtype=np.uint64))
        return self.counters[idx].min(axis=1).astype(np.int64)

    # -- updates ---------------------------------------------------------

    def increment(self, page: int) -> int:
        """Count one access; returns the new estimate."""
        return self.increase_by(page, 1)

    def increase_by(self, page: int, amount: int) -> int:
        """Count ``amount`` accesses at once.

        Raises every counter below ``min(estimate + amount, max_count)`` up
        to that target, which lands the filter in exactly the state that
        ``amount`` single increments would have produced.
        """
        if amount < 0:
            raise ValueError("amount must be non-negative")
        if amount == 0:
            return self.get(page)
        idx = self._indices(np.asarray([page], dtype=np.uint64))[0]
        cur = self.counters[idx]
        target = min(int(cur.min()) + amount, self.max_count)
        self.counters[idx] = np.maximum(cur, target)
        return target

    def update_many(self, pages: np.ndarray, amounts: np.ndarray) -> np.ndarray:
        """Apply one ``increase_by`` per page simultaneously; returns new estimates.

        Each page's target is computed from the pre-update array, and a
        counter shared by several pages takes the largest target, so the
        result matches sequential application exactly whenever the pages'
        probe sets are disjoint and never undercounts otherwise.
        """
        if len(pages) == 0:
            return np.zeros(0, dtype=np.int64)
        idx = self._indices(np.asarray(pages, dtype=np.uint64))
        mins = self.counters[idx].min(axis=1).astype(np.int64)
        targets = np.minimum(mins + np.asarray(amounts, dtype=np.int64), self.max_count)
        flat = idx.ravel()
        tgt = np.repeat(targets, self.config.num_hashes)
        # group-max per counter position, then one gather/compare/scatter
        order = np.argsort(flat, kind="stable")
        flat_s = flat[order]
        tgt_s = tgt[order]
        starts = np.empty(len(flat_s), dtype=bool)
        starts[0] = True
        np.not_equal(flat_s[1:], flat_s[:-1], out=starts[1:])
        pos = np.flatnonzero(starts)
        grp_max = np.maximum.reduceat(tgt_s, pos)
        upos = flat_s[pos]
        self.counters[upos] = np.maximum(self.counters[upos], grp_max.astype(np.uint8))
        return self.counters[idx].min(axis=1).astype(np.int64)

    def age(self) -> None:
        """Halve every counter (floor), decaying stale history."""
        self.counters >>= 1

    # -- introspection ---------------------------------------------------

    def memory_bytes(self) -> int:
        return self.config.num_counters * self.config.counter_bits // 8

    def histogram(self) -> np.ndarray:
        """Count of array cells holding each value 0..max_count."""
        return np.bincount(self.counters, minlength=self.max_count + 1)


def coalesce(batch) -> dict[int, int]:
    """Fold a page batch into {page: multiplicity}, preserving total count."""
    pages, counts = coalesce_arrays(np.asarray(batch, dtype=np.uint64))
    return {int(p): int(c) for p, c in zip(pages, counts)}


def coalesce_arrays(batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct pages (ascending) and their multiplicities."""
    if len(batch) == 0:
        return np.zeros(0, dtype=np.uint64), np.zeros(0, dtype=np.int64)
    return np.unique(batch, return_counts=True)
