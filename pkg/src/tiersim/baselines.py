"""Reference policies the sketch-driven engine is measured against.

* :func:`offline_ideal` knows the whole trace in advance and pins the
  most-accessed pages locally; nothing online can beat it.
* :class:`ExactFrequencyTable` swaps the sketch for one exact saturating
  counter per page, isolating the cost of sketch collisions while reusing
  the policy engine unchanged.
* :class:`RecencyPolicy` models hint-fault tiering: a scan pointer
  periodically unmaps a window of pages, and a page touched soon after
  unmapping is promoted on that evidence alone, with LRU demotion making
  room.  The inner loop is JIT-compiled since every access can move LRU
  state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .memsim import CXL, LOCAL, TierState, Watermarks

EXACT_METADATA_BYTES_PER_PAGE = 168  # modeled per-page tracking cost


class ExactFrequencyTable:
    """Per-page counters with the same saturation and aging as the sketch.

    Implements the frequency-sketch protocol; pages passed to
    :meth:`update_many` must be distinct (coalesced batches are).
    """

    def __init__(self, n_pages: int, counter_bits: int = 4):
        self.max_count = (1 << counter_bits) - 1
        self.table = np.zeros(n_pages, dtype=np.uint8)

    def get(self, page: int) -> int:
        return int(self.table[page])

    def get_many(self, pages: np.ndarray) -> np.ndarray:
        return self.table[pages.astype(np.int64)].astype(np.int64)

    def update_many(self, pages: np.ndarray, amounts: np.ndarray) -> np.ndarray:
        idx = pages.astype(np.int64)
        new = np.minimum(
            self.table[idx].astype(np.int64) + np.asarray(amounts, np.int64),
            self.max_count,
        )
        self.table[idx] = new.astype(np.uint8)
        return new

    def age(self) -> None:
        self.table >>= 1

    def memory_bytes(self) -> int:
        return len(self.table)

    def histogram(self) -> np.ndarray:
        return np.bincount(self.table, minlength=self.max_count + 1)


def exact_metadata_bytes(n_pages: int) -> int:
    return EXACT_METADATA_BYTES_PER_PAGE * n_pages


# -- offline ideal --------------------------------------------------------


@dataclass
class IdealResult:
    state: TierState
    window_hit_ratios: list[float]
    counts: np.ndarray


def offline_ideal(
    chunk_source, n_pages: int, capacity: int, window_accesses: int
) -> IdealResult:
    """Best static placement: top ``capacity`` pages by whole-trace count,
    ties broken toward the lower page id.

    ``chunk_source`` is a zero-argument callable returning a fresh chunk
    iterator; the trace is walked twice (count, then score).
    """
    counts = np.zeros(n_pages, dtype=np.int64)
    for chunk in chunk_source():
        counts += np.bincount(chunk.astype(np.int64), minlength=n_pages)
    order = np.lexsort((np.arange(n_pages), -counts))
    resident = np.zeros(n_pages, dtype=bool)
    resident[order[:capacity]] = True

    state = TierState(n_pages, capacity)
    window_hits: list[float] = []
    filled = 0
    win_local = 0
    for chunk in chunk_source():
        pos = 0
        while pos < len(chunk):
            take = min(len(chunk) - pos, window_accesses - filled)
            seg = chunk[pos : pos + take].astype(np.int64)
            win_local += int(np.count_nonzero(resident[seg]))
            filled += take
            pos += take
            if filled == window_accesses:
                window_hits.append(win_local / window_accesses)
                filled = 0
                win_local = 0

    touched = counts > 0
    state.residency[touched & resident] = LOCAL
    state.residency[touched & ~resident] = CXL
    state.local_count = int(np.count_nonzero(touched & resident))
    state.local_accesses = int(counts[resident].sum())
    state.cxl_accesses = int(counts.sum() - state.local_accesses)
    state.tick = int(counts.sum())
    return IdealResult(state, window_hits, counts)


# -- recency / hint-fault tiering -----------------------------------------


@dataclass
class RecencyConfig:
    """Scan cadence and promotion hint window.

    Defaults mirror a page-table scanner walking 65,536 pages (256 MiB of
    4 KiB pages) per period, promoting on the first post-unmap touch that
    lands within one period, and demoting 2% of capacity per LRU sweep.
    ``require_second_access`` withholds promotion until a second touch
    inside the hint window.
    """

    scan_window_pages: int = 65_536
    scan_period_accesses: int = 1_000_000
    hot_latency_ticks: int = 1_000_000
    lru_demote_fraction: float = 0.02
    require_second_access: bool = False

    def __post_init__(self):
        if self.scan_window_pages < 1:
            raise ValueError("scan_window_pages must be >= 1")
        if self.scan_period_accesses < 1:
            raise ValueError("scan_period_accesses must be >= 1")
        if self.hot_latency_ticks < 1:
            raise ValueError("hot_latency_ticks must be >= 1")
        if not 0 < self.lru_demote_fraction <= 1:
            raise ValueError("lru_demote_fraction must be in (0, 1]")


# scalar-state slots for the kernel
_TICK, _FREE, _HEAD, _TAIL, _SCAN_PTR, _LOCAL_ACC, _CXL_ACC, _PROMOTED, _DEMOTED = range(9)


@njit(cache=True)
def _recency_kernel(
    trace,
    residency,
    marked,
    cand,
    unmap_tick,
    prv,
    nxt,
    scal,
    n_pages,
    promo_wmark,
    scan_window,
    scan_period,
    hot_latency,
    demote_batch,
    require_second,
    window_accesses,
    win_local,
    win_promos,
    win_demos,
):
    tick = scal[_TICK]
    free = scal[_FREE]
    head = scal[_HEAD]
    tail = scal[_TAIL]
    scan_ptr = scal[_SCAN_PTR]
    local_acc = scal[_LOCAL_ACC]
    cxl_acc = scal[_CXL_ACC]
    promoted = scal[_PROMOTED]
    demoted = scal[_DEMOTED]

    for i in range(trace.shape[0]):
        # periodic unmap pass over the next stripe of allocated pages
        if tick > 0 and tick % scan_period == 0:
            for j in range(scan_window):
                page = (scan_ptr + j) % n_pages
                if residency[page] != 0:
                    marked[page] = 1
                    cand[page] = 0
                    unmap_tick[page] = tick
            scan_ptr = (scan_ptr + scan_window) % n_pages

        p = np.int64(trace[i])
        w = tick // window_accesses
        r = residency[p]
        if r == 0:  # first touch allocates, never a hint fault
            if free > 0:
                residency[p] = 1
                free -= 1
                # LRU push front
                nxt[p] = head
                prv[p] = -1
                if head >= 0:
                    prv[head] = p
                head = p
                if tail < 0:
                    tail = p
                r = 1
            else:
                residency[p] = 2
                r = 2

        if r == 1:
            local_acc += 1
            if w < win_local.shape[0]:
                win_local[w] += 1
            if marked[p]:
                marked[p] = 0  # touch re-maps it; already local
            if head != p:  # LRU move to front
                pn = prv[p]
                nx = nxt[p]
                if pn >= 0:
                    nxt[pn] = nx
                if nx >= 0:
                    prv[nx] = pn
                if tail == p:
                    tail = pn
                nxt[p] = head
                prv[p] = -1
                if head >= 0:
                    prv[head] = p
                head = p
        else:
            cxl_acc += 1
            want_promo = False
            if marked[p]:
                marked[p] = 0
                if tick - unmap_tick[p] < hot_latency:
                    if require_second:
                        cand[p] = 1  # armed; the next timely touch promotes
                    else:
                        want_promo = True
            elif cand[p]:
                cand[p] = 0
                if tick - unmap_tick[p] < hot_latency:
                    want_promo = True

            if want_promo:
                if free < promo_wmark or free == 0:
                    k = 0
                    while k < demote_batch and tail >= 0:
                        victim = tail
                        tail = prv[victim]
                        if tail >= 0:
                            nxt[tail] = -1
                        else:
                            head = -1
                        prv[victim] = -1
                        nxt[victim] = -1
                        residency[victim] = 2
                        free += 1
                        demoted += 1
                        if w < win_demos.shape[0]:
                            win_demos[w] += 1
                        k += 1
                if free > 0:
                    residency[p] = 1
                    free -= 1
                    promoted += 1
                    if w < win_promos.shape[0]:
                        win_promos[w] += 1
                    nxt[p] = head
                    prv[p] = -1
                    if head >= 0:
                        prv[head] = p
                    head = p
                    if tail < 0:
                        tail = p
        tick += 1

    scal[_TICK] = tick
    scal[_FREE] = free
    scal[_HEAD] = head
    scal[_TAIL] = tail
    scal[_SCAN_PTR] = scan_ptr
    scal[_LOCAL_ACC] = local_acc
    scal[_CXL_ACC] = cxl_acc
    scal[_PROMOTED] = promoted
    scal[_DEMOTED] = demoted


class RecencyPolicy:
    """Hint-fault tiering driver; see module docstring for the model."""

    def __init__(
        self,
        n_pages: int,
        capacity: int,
        watermarks: Watermarks,
        config: RecencyConfig | None = None,
        n_accesses_hint: int = 0,
        window_accesses: int = 1_000_000,
    ):
        self.cfg = config or RecencyConfig()
        self.n_pages = n_pages
        self.capacity = capacity
        self.wm = watermarks
        self.window_accesses = window_accesses
        self.demote_batch = max(1, int(capacity * self.cfg.lru_demote_fraction))

        self.residency = np.zeros(n_pages, dtype=np.uint8)
        self.marked = np.zeros(n_pages, dtype=np.uint8)
        self.cand = np.zeros(n_pages, dtype=np.uint8)
        self.unmap_tick = np.zeros(n_pages, dtype=np.int64)
        self.prv = np.full(n_pages, -1, dtype=np.int64)
        self.nxt = np.full(n_pages, -1, dtype=np.int64)
        self.scal = np.zeros(16, dtype=np.int64)
        self.scal[_FREE] = capacity
        self.scal[_HEAD] = -1
        self.scal[_TAIL] = -1

        n_windows = (n_accesses_hint // window_accesses + 2) if n_accesses_hint else 4096
        self.win_local = np.zeros(n_windows, dtype=np.int64)
        self.win_promos = np.zeros(n_windows, dtype=np.int64)
        self.win_demos = np.zeros(n_windows, dtype=np.int64)

    def run(self, chunks) -> None:
        for chunk in chunks:
            arr = np.ascontiguousarray(chunk, dtype=np.uint32)
            _recency_kernel(
                arr,
                self.residency,
                self.marked,
                self.cand,
                self.unmap_tick,
                self.prv,
                self.nxt,
                self.scal,
                self.n_pages,
                self.wm.promo_pages,
                self.cfg.scan_window_pages,
                self.cfg.scan_period_accesses,
                self.cfg.hot_latency_ticks,
                self.demote_batch,
                1 if self.cfg.require_second_access else 0,
                self.window_accesses,
                self.win_local,
                self.win_promos,
                self.win_demos,
            )

    def as_tier_state(self) -> TierState:
        """Fold the kernel's tallies into the standard results container."""
        state = TierState(self.n_pages, self.capacity)
        state.residency = self.residency
        state.local_count = self.capacity - int(self.scal[_FREE])
        state.tick = int(self.scal[_TICK])
        state.local_accesses = int(self.scal[_LOCAL_ACC])
        state.cxl_accesses = int(self.scal[_CXL_ACC])
        state.promoted_pages = int(self.scal[_PROMOTED])
        state.demoted_pages = int(self.scal[_DEMOTED])
        return state

    def window_stats(self) -> tuple[list[float], list[int], list[int]]:
        n_windows = int(self.scal[_TICK]) // self.window_accesses
        hits = [
            self.win_local[w] / self.window_accesses for w in range(n_windows)
        ]
        return (
            hits,
            self.win_promos[:n_windows].tolist(),
            self.win_demos[:n_windows].tolist(),
        )
