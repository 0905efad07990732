"""Frequency-driven tiering policy.

The engine watches a Bernoulli sample of the access stream, folds sampled
pages into a frequency sketch in batches, and promotes far-tier pages whose
estimate crosses a hot threshold.  Demotion is a checkpointed scan over the
page space that evicts cold local pages whenever free frames fall below the
promotion watermark, resuming where the previous scan stopped.

Three mechanisms keep the policy cheap at steady state:

* the hot threshold tracks local capacity, stepping up when the observed
  hot set outgrows local memory and down when it shrinks;
* the sampling level steps down (10x cheaper per level) each time the
  windowed hit ratio holds stable, and snaps back to the highest rate on
  instability;
* once the hit ratio is stable at the lowest level, or promotions cease,
  the engine stops sampling entirely (monitoring) until the hit ratio
  moves again.

State transitions follow a fixed three-state machine (promoting, demoting,
monitoring) and every edge taken is logged with its tick and reason.

Batch cadence is sized against the window: at the highest sampling level
one window of accesses yields about one batch, mirroring the regime the
mechanism was designed for (sampling period well below the evaluation
window).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .memsim import CXL, LOCAL, TierState, Watermarks
from .sketch import coalesce_arrays

PROMOTING = "promoting"
DEMOTING = "demoting"
MONITORING = "monitoring"

# machine edges that may ever be taken, audit target for the transition log
ALLOWED_EDGES = {
    (PROMOTING, DEMOTING),
    (DEMOTING, PROMOTING),
    (PROMOTING, MONITORING),
    (MONITORING, PROMOTING),
}


@dataclass
class PolicyConfig:
    """Tunables for the sampling/promotion machinery.

    sampling_probs descend by decades; index 0 is the most expensive and
    most responsive level.  At level 0 a window of 10^6 accesses fills
    about ten batches, so frames freed by a demotion scan are still
    available when the next batch promotes.
    """

    batch_size: int = 100_000
    sampling_probs: tuple[float, ...] = (1.0, 1e-1, 1e-2)
    window_accesses: int = 1_000_000
    initial_hot_threshold: int = 5
    hot_set_tolerance: float = 0.10
    aging_interval_batches: int = 10
    stability_delta: float = 0.005
    stable_windows: int = 3
    max_scan_pages_per_trigger: int | None = None  # None: one full lap
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.sampling_probs or any(not 0 < p <= 1 for p in self.sampling_probs):
            raise ValueError("sampling_probs must be probabilities in (0, 1]")
        if any(
            nxt >= prev
            for prev, nxt in zip(self.sampling_probs, self.sampling_probs[1:])
        ):
            raise ValueError("sampling_probs must strictly descend")
        if self.window_accesses < 1:
            raise ValueError("window_accesses must be >= 1")
        if self.initial_hot_threshold < 1:
            raise ValueError("initial_hot_threshold must be >= 1")
        if not 0 <= self.hot_set_tolerance < 1:
            raise ValueError("hot_set_tolerance must lie in [0, 1)")
        if self.aging_interval_batches < 1:
            raise ValueError("aging_interval_batches must be >= 1")
        if self.stability_delta <= 0:
            raise ValueError("stability_delta must be > 0")
        if self.stable_windows < 2:
            raise ValueError("stable_windows must be >= 2")


@dataclass
class WindowRow:
    """One line of the per-window report: counts for the finished window,
    sampling level and machine state as configured for the next one."""

    index: int
    hit_ratio: float
    promotions: int
    demotions: int
    sampling_level: int
    machine_state: str


class PolicyEngine:
    """Drives a TierState from a sampled access stream.

    ``sketch`` may be any object with the frequency-sketch protocol
    (get_many / update_many / age / max_count / memory_bytes / histogram);
    swapping in an exact table yields the upper-bound variant of the same
    policy.
    """

    def __init__(
        self,
        state: TierState,
        sketch,
        config: PolicyConfig,
        watermarks: Watermarks,
        record_decisions: bool = False,
    ):
        self.state = state
        self.sketch = sketch
        self.cfg = config
        self.wm = watermarks
        self.rng = np.random.default_rng(config.seed)
        self._u_buf = np.zeros(0, dtype=np.float64)

        self.machine_state = PROMOTING
        self.sampling_level = 0
        self.hot_threshold = config.initial_hot_threshold
        self.hot_mask = np.zeros(state.n_pages, dtype=bool)
        self.hot_count = 0
        self.observed = np.zeros(state.n_pages, dtype=bool)
        self.scan_checkpoint = 0
        self.batches_processed = 0

        self._staged: list[np.ndarray] = []
        self._staged_count = 0

        self.transitions: list[tuple[int, str, str, str]] = []
        self.window_rows: list[WindowRow] = []
        self.window_hits: list[float] = []
        self._win_local0 = 0
        self._win_promoted = 0
        self._win_skipped = 0
        self._win_demoted = 0
        self._win_batches = 0

        self.update_samples = 0  # batch entries before coalescing
        self.update_entries = 0  # sketch updates actually issued
        self.skipped_promotions = 0  # hot pages that found no free frame

        self.record_decisions = record_decisions
        self.promotion_log: list[tuple[int, int, int]] = []  # (page, get, threshold)
        self.demotion_log: list[tuple[int, int, int]] = []

    # -- randomness ------------------------------------------------------

    def _uniforms(self, n: int) -> np.ndarray:
        """Next n sampling draws; buffered so chunked and per-access
        execution consume the stream identically."""
        if len(self._u_buf) >= n:
            out, self._u_buf = self._u_buf[:n], self._u_buf[n:]
            return out
        need = n - len(self._u_buf)
        out = np.concatenate([self._u_buf, self.rng.random(need)])
        self._u_buf = np.zeros(0, dtype=np.float64)
        return out

    # -- per-access reference path ---------------------------------------

    def step(self, page: int) -> None:
        self.state.access(page)
        self.on_access(page)

    def on_access(self, page: int) -> None:
        """Bookkeeping after one access has been served."""
        if self.machine_state != MONITORING:
            if self._uniforms(1)[0] < self.cfg.sampling_probs[self.sampling_level]:
                self._staged.append(np.asarray([page], dtype=np.uint64))
                self._staged_count += 1
                if self._staged_count >= self.cfg.batch_size:
                    self.process_batch()
        if self.state.tick % self.cfg.window_accesses == 0:
            self.window_tick()

    # -- chunked fast path -----------------------------------------------

    def run(self, chunks) -> None:
        """Consume an entire trace given as an iterable of page arrays."""
        cfg = self.cfg
        window = cfg.window_accesses
        for chunk in chunks:
            pos = 0
            n = len(chunk)
            while pos < n:
                win_left = window - (self.state.tick % window)
                take = min(n - pos, win_left)
                seg = chunk[pos : pos + take]
                advanced = self._advance(seg)
                pos += advanced
                if self.state.tick % window == 0:
                    self.window_tick()

    def _advance(self, seg: np.ndarray) -> int:
        """Serve seg (or a prefix, when a batch fills mid-way); returns
        how many accesses were consumed."""
        if self.machine_state == MONITORING:
            self.state.access_block(seg)
            return len(seg)
        u = self._uniforms(len(seg))
        mask = u < self.cfg.sampling_probs[self.sampling_level]
        room = self.cfg.batch_size - self._staged_count
        hits = np.flatnonzero(mask)
        if len(hits) >= room:
            cut = int(hits[room - 1]) + 1  # the access that fills the batch
            self._u_buf = np.concatenate([u[cut:], self._u_buf])
            seg = seg[:cut]
            mask = mask[:cut]
            self.state.access_block(seg)
            self._stage(seg[mask])
            self.process_batch()
            return cut
        self.state.access_block(seg)
        self._stage(seg[mask])
        return len(seg)

    def _stage(self, pages: np.ndarray) -> None:
        if len(pages):
            self._staged.append(pages.astype(np.uint64, copy=False))
            self._staged_count += len(pages)

    # -- batch processing ------------------------------------------------

    def process_batch(self) -> None:
        batch = (
            np.concatenate(self._staged) if self._staged else np.zeros(0, np.uint64)
        )
        self._staged = []
        self._staged_count = 0
        self._win_batches += 1

        pages, counts = coalesce_arrays(batch)
        self.update_samples += len(batch)
        self.update_entries += len(pages)
        self.observed[pages] = True
        gets = self.sketch.update_many(pages, counts)

        crossed = gets >= self.hot_threshold
        hot = pages[crossed].astype(np.int64)
        if len(hot):
            fresh = hot[~self.hot_mask[hot]]
            self.hot_mask[fresh] = True
            self.hot_count += len(fresh)
            cxl = self.state.residency[hot] == CXL
            promo = hot[cxl]
            promo_gets = gets[crossed][cxl]
            # hottest first: frames are scarce, so the biggest estimates
            # win them; page id breaks ties deterministically
            rank = np.lexsort((promo, -promo_gets))
            promo, promo_gets = promo[rank], promo_gets[rank]
            promoted, skipped = self.state.promote(promo)
            self._win_promoted += promoted
            self._win_skipped += skipped
            self.skipped_promotions += skipped
            if self.record_decisions and promoted:
                for p, g in zip(promo[:promoted], promo_gets[:promoted]):
                    self.promotion_log.append((int(p), int(g), self.hot_threshold))

        if self.state.below_promo_watermark(self.wm):
            self.demotion_scan()

        self.batches_processed += 1
        if self.batches_processed % self.cfg.aging_interval_batches == 0:
            self.sketch.age()
            self.hot_mask[:] = False
            self.hot_count = 0
        self.update_hot_threshold()

    def demotion_scan(self) -> None:
        """Evict cold local pages until free frames clear the demote
        watermark, walking the page space from the saved checkpoint."""
        state, cfg = self.state, self.cfg
        self._transition(DEMOTING, "below_promo_watermark")
        lap = state.n_pages
        if cfg.max_scan_pages_per_trigger is not None:
            lap = min(lap, cfg.max_scan_pages_per_trigger)
        order = (np.arange(lap, dtype=np.int64) + self.scan_checkpoint) % state.n_pages
        local_pos = np.flatnonzero(state.residency[order] == LOCAL)
        need = self.wm.demote_pages + 1 - state.free_local
        if len(local_pos):
            gets = self.sketch.get_many(order[local_pos].astype(np.uint64))
            cold_pos = local_pos[gets < self.hot_threshold]
        else:
            gets = np.zeros(0, dtype=np.int64)
            cold_pos = local_pos
        take = cold_pos[:need]
        scanned = lap if len(take) < need else int(take[-1]) + 1
        victims = order[take]
        if self.record_decisions and len(take):
            cold_gets = gets[np.isin(local_pos, take)]
            for p, g in zip(victims, cold_gets):
                self.demotion_log.append((int(p), int(g), self.hot_threshold))
        demoted = state.demote(victims)
        self._win_demoted += demoted
        self.scan_checkpoint = (self.scan_checkpoint + scanned) % state.n_pages
        self._transition(
            PROMOTING,
            "above_demote_watermark"
            if state.above_demote_watermark(self.wm)
            else "scan_lap_complete",
        )
        if scanned == lap and demoted == 0:
            self._transition(MONITORING, "empty_demotion_scan")

    def update_hot_threshold(self) -> None:
        """Track local capacity: more hot pages than fit pushes the
        threshold up, far fewer lets it relax."""
        cap = self.state.local_capacity_pages
        tol = self.cfg.hot_set_tolerance
        if self.hot_count > cap * (1 + tol) and self.hot_threshold < self.sketch.max_count:
            self.hot_threshold += 1
            members = np.flatnonzero(self.hot_mask)
            keep = self.sketch.get_many(members.astype(np.uint64)) >= self.hot_threshold
            self.hot_mask[members[~keep]] = False
            self.hot_count = int(np.count_nonzero(keep))
        elif self.hot_count < cap * (1 - tol) and self.hot_threshold > 1:
            self.hot_threshold -= 1

    # -- window machinery ------------------------------------------------

    def window_tick(self) -> None:
        cfg = self.cfg
        ratio = (self.state.local_accesses - self._win_local0) / cfg.window_accesses
        self.window_hits.append(ratio)

        # promotion plateau first: an active window whose batches found
        # nothing to move.  Windows where candidates existed but every
        # frame was taken are starvation, not convergence, and stay hot.
        if (
            self.machine_state == PROMOTING
            and self._win_batches > 0
            and self._win_promoted == 0
            and self._win_skipped == 0
        ):
            self._transition(MONITORING, "promotion_plateau")

        # then stability of the last few windows.  A starved window (every
        # candidate skipped for lack of frames) pins the hit ratio without
        # the workload being settled, so it does not count as stable.
        starved = self._win_skipped > 0 and self._win_promoted == 0
        if len(self.window_hits) >= cfg.stable_windows:
            recent = self.window_hits[-cfg.stable_windows :]
            stable = (
                max(recent) - min(recent) <= 2 * cfg.stability_delta
                and not starved
            )
            if stable:
                if self.machine_state == PROMOTING:
                    if self.sampling_level < len(cfg.sampling_probs) - 1:
                        self.sampling_level += 1
                    else:
                        self._transition(MONITORING, "stable_at_lowest_level")
            else:
                if self.machine_state == MONITORING:
                    self._transition(PROMOTING, "hit_ratio_unstable")
                    self.sampling_level = 0
                elif self.machine_state == PROMOTING and self.sampling_level > 0:
                    self.sampling_level -= 1

        self.window_rows.append(
            WindowRow(
                index=len(self.window_rows),
                hit_ratio=ratio,
                promotions=self._win_promoted,
                demotions=self._win_demoted,
                sampling_level=self.sampling_level,
                machine_state=self.machine_state,
            )
        )
        self._win_local0 = self.state.local_accesses
        self._win_promoted = 0
        self._win_skipped = 0
        self._win_demoted = 0
        self._win_batches = 0

    # -- transitions -----------------------------------------------------

    def _transition(self, to: str, reason: str) -> None:
        edge = (self.machine_state, to)
        if edge not in ALLOWED_EDGES:
            raise RuntimeError(f"illegal machine transition {edge}")
        self.transitions.append((self.state.tick, self.machine_state, to, reason))
        self.machine_state = to

    # -- end-of-run stats -------------------------------------------------

    def observed_get_histogram(self) -> np.ndarray:
        """Histogram of current estimates over every page ever sampled."""
        pages = np.flatnonzero(self.observed)
        hist = np.zeros(self.sketch.max_count + 1, dtype=np.int64)
        if len(pages):
            gets = self.sketch.get_many(pages.astype(np.uint64))
            hist += np.bincount(gets, minlength=self.sketch.max_count + 1)
        return hist
