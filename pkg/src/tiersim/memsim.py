"""Two-tier memory model: a fast local tier backed by a larger far tier.

Pages start unallocated and are placed on first touch: local while free
frames remain, far tier afterwards.  Placement then changes only through
explicit promote/demote calls.  The model keeps running tallies (accesses
served per tier, pages migrated) from which hit ratio, traffic, and a
latency estimate are derived; it has no opinions about *when* to migrate,
that belongs to the policies layered on top.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNALLOCATED = 0
LOCAL = 1
CXL = 2

ACCESS_BYTES = 64  # one cache line per counted access
PAGE_BYTES = 4096  # migration moves whole pages

DEFAULT_PROMO_FRACTION = 0.01
DEFAULT_DEMOTE_FRACTION = 0.03


@dataclass(frozen=True)
class Watermarks:
    """Free-frame thresholds steering demotion.

    Demotion starts when free local frames drop below ``promo_pages`` and
    runs until they exceed ``demote_pages``, so the band between them is
    the breathing room reclaimed per episode.
    """

    promo_pages: int
    demote_pages: int

    def __post_init__(self):
        if self.promo_pages < 0:
            raise ValueError("promo_pages must be >= 0")
        if self.demote_pages <= self.promo_pages:
            raise ValueError("demote_pages must exceed promo_pages")

    @classmethod
    def from_fractions(
        cls,
        capacity: int,
        promo_fraction: float = DEFAULT_PROMO_FRACTION,
        demote_fraction: float = DEFAULT_DEMOTE_FRACTION,
    ) -> "Watermarks":
        promo = int(capacity * promo_fraction)
        demote = max(int(capacity * demote_fraction), promo + 1)
        if demote >= capacity:
            raise ValueError("demote watermark must stay below capacity")
        return cls(promo, demote)


@dataclass(frozen=True)
class LatencyModel:
    """Per-access costs in nanoseconds plus a per-migration page-copy cost.

    Far-tier accesses pay the local latency plus an interconnect premium,
    scaled up by the reciprocal of the available bandwidth fraction.
    """

    local_ns: float = 100.0
    cxl_extra_ns: float = 75.0
    cxl_bandwidth_fraction: float = 1.0
    page_copy_ns: float = 1000.0

    def __post_init__(self):
        if self.local_ns < 0 or self.cxl_extra_ns < 0 or self.page_copy_ns < 0:
            raise ValueError("latencies must be non-negative")
        if not 0 < self.cxl_bandwidth_fraction <= 1:
            raise ValueError("cxl_bandwidth_fraction must be in (0, 1]")

    @classmethod
    def cxl1(cls) -> "LatencyModel":
        return cls(cxl_bandwidth_fraction=1.0)

    @classmethod
    def cxl2(cls) -> "LatencyModel":
        return cls(cxl_bandwidth_fraction=0.25)


class TierState:
    def __init__(self, n_pages: int, local_capacity_pages: int):
        if n_pages < 1:
            raise ValueError("n_pages must be >= 1")
        if not 1 <= local_capacity_pages <= n_pages:
            raise ValueError("local capacity must lie in [1, n_pages]")
        self.n_pages = n_pages
        self.local_capacity_pages = local_capacity_pages
        self.residency = np.zeros(n_pages, dtype=np.uint8)
        self.local_count = 0
        self.tick = 0
        self.local_accesses = 0
        self.cxl_accesses = 0
        self.promoted_pages = 0
        self.demoted_pages = 0

    # -- placement -------------------------------------------------------

    @property
    def free_local(self) -> int:
        return self.local_capacity_pages - self.local_count

    def access(self, page: int) -> int:
        """Serve one access; returns the residency that served it."""
        r = self.residency[page]
        if r == UNALLOCATED:
            r = LOCAL if self.free_local > 0 else CXL
            self.residency[page] = r
            if r == LOCAL:
                self.local_count += 1
        if r == LOCAL:
            self.local_accesses += 1
        else:
            self.cxl_accesses += 1
        self.tick += 1
        return int(r)

    def access_block(self, pages: np.ndarray) -> tuple[int, int]:
        """Serve a run of accesses during which no migrations occur.

        Equivalent to calling :meth:`access` per element; first touches are
        allocated in order of first appearance.
        """
        if len(pages) == 0:
            return 0, 0
        res = self.residency[pages]
        if np.any(res == UNALLOCATED):
            fresh = pages[res == UNALLOCATED]
            uniq, first_pos = np.unique(fresh, return_index=True)
            ordered = uniq[np.argsort(first_pos, kind="stable")]
            n_local = min(self.free_local, len(ordered))
            self.residency[ordered[:n_local]] = LOCAL
            self.residency[ordered[n_local:]] = CXL
            self.local_count += n_local
            res = self.residency[pages]
        n_local_acc = int(np.count_nonzero(res == LOCAL))
        n_cxl_acc = len(pages) - n_local_acc
        self.local_accesses += n_local_acc
        self.cxl_accesses += n_cxl_acc
        self.tick += len(pages)
        return n_local_acc, n_cxl_acc

    # -- migration -------------------------------------------------------

    def promote(self, pages: np.ndarray) -> tuple[int, int]:
        """Move far-tier pages local, in the order given.

        Callers encode priority by ordering the array; when frames run
        out the tail is skipped and reported.  Already-local pages are
        skipped silently.  Returns (promoted, skipped).
        """
        pages = np.asarray(pages, dtype=np.int64)
        if len(pages) == 0:
            return 0, 0
        # dedup keeping the first occurrence so priority survives
        _, first = np.unique(pages, return_index=True)
        pages = pages[np.sort(first)]
        self._reject_unallocated(pages)
        candidates = pages[self.residency[pages] == CXL]
        n = min(self.free_local, len(candidates))
        self.residency[candidates[:n]] = LOCAL
        self.local_count += n
        self.promoted_pages += n
        return n, len(candidates) - n

    def demote(self, pages: np.ndarray) -> int:
        """Move local pages to the far tier; non-local ones are skipped."""
        pages = np.unique(np.asarray(pages, dtype=np.int64))
        if len(pages) == 0:
            return 0
        self._reject_unallocated(pages)
        candidates = pages[self.residency[pages] == LOCAL]
        self.residency[candidates] = CXL
        self.local_count -= len(candidates)
        self.demoted_pages += len(candidates)
        return len(candidates)

    def _reject_unallocated(self, pages: np.ndarray) -> None:
        bad = np.flatnonzero(self.residency[pages] == UNALLOCATED)
        if len(bad):
            raise ValueError(f"page {int(pages[bad[0]])} has never been touched")

    # -- watermarks ------------------------------------------------------

    def below_promo_watermark(self, wm: Watermarks) -> bool:
        return self.free_local < wm.promo_pages

    def above_demote_watermark(self, wm: Watermarks) -> bool:
        return self.free_local > wm.demote_pages

    # -- derived metrics -------------------------------------------------

    def hit_ratio(self) -> float:
        total = self.local_accesses + self.cxl_accesses
        return self.local_accesses / total if total else 0.0

    def traffic_bytes(self) -> dict[str, int]:
        return {
            "local_bytes": self.local_accesses * ACCESS_BYTES,
            "cxl_bytes": self.cxl_accesses * ACCESS_BYTES,
            "migration_bytes": (self.promoted_pages + self.demoted_pages) * PAGE_BYTES,
        }

    def estimate_time_ns(self, model: LatencyModel) -> float:
        cxl_ns = (model.local_ns + model.cxl_extra_ns) / model.cxl_bandwidth_fraction
        migrations = self.promoted_pages + self.demoted_pages
        return (
            self.local_accesses * model.local_ns
            + self.cxl_accesses * cxl_ns
            + migrations * model.page_copy_ns
        )
