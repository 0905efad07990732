"""Access-trace generation and the FQTR on-disk format.

A trace is a sequence of page ids drawn from a synthetic access
distribution.  On disk the format is:

    bytes 0..3    magic ``FQTR``
    bytes 4..7    format version, unsigned 32-bit little-endian (currently 1)
    bytes 8..15   n_pages, unsigned 64-bit little-endian
    bytes 16..23  n_accesses, unsigned 64-bit little-endian
    bytes 24..    one unsigned 64-bit little-endian page id per access

so a well-formed file is exactly ``24 + 8 * n_accesses`` bytes.  Readers
validate the header, the body length, and that every record is below
n_pages; each failure mode raises a distinct error naming where in the
file (or record stream) it was detected.

Generation is fully seeded: the same spec always yields the same byte
stream, whether materialized in one array or streamed chunk by chunk.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"FQTR"
VERSION = 1
HEADER_BYTES = 24
_HEADER = struct.Struct("<4sIQQ")
_CHUNK = 1 << 20  # records per generated/streamed chunk


class TraceFormatError(Exception):
    """Malformed container: bad magic, bad version, or wrong length."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (file offset {offset})")
        self.offset = offset


class CorruptTraceError(Exception):
    """Structurally valid file whose records are out of range."""

    def __init__(self, message: str, record_index: int):
        super().__init__(f"{message} (record {record_index})")
        self.record_index = record_index


# -- distributions --------------------------------------------------------


@dataclass(frozen=True)
class Zipf:
    """Rank r gets probability proportional to r**-alpha; rank-to-page
    assignment is a seeded permutation so hot pages scatter over the space."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")


@dataclass(frozen=True)
class Uniform:
    pass


@dataclass(frozen=True)
class Hotset:
    """hot_fraction of pages receive hot_share of accesses, uniformly
    within each group."""

    hot_fraction: float
    hot_share: float

    def __post_init__(self):
        if not 0 < self.hot_fraction < 1:
            raise ValueError("hot_fraction must be in (0, 1)")
        if not 0 < self.hot_share < 1:
            raise ValueError("hot_share must be in (0, 1)")


@dataclass(frozen=True)
class PhaseShift:
    """Accesses before shift_at follow ``inner`` over the first half of the
    page space, accesses at/after it follow ``inner`` over the second half."""

    inner: "Distribution"
    shift_at: int

    def __post_init__(self):
        if isinstance(self.inner, PhaseShift):
            raise ValueError("phase-shift traces do not nest")
        if self.shift_at < 0:
            raise ValueError("shift_at must be non-negative")


Distribution = Zipf | Uniform | Hotset | PhaseShift


@dataclass(frozen=True)
class TraceSpec:
    n_pages: int
    n_accesses: int
    dist: Distribution
    seed: int = 0

    def __post_init__(self):
        if self.n_pages < 1:
            raise ValueError("n_pages must be >= 1")
        if self.n_accesses < 0:
            raise ValueError("n_accesses must be >= 0")
        if isinstance(self.dist, PhaseShift):
            if self.n_pages < 2:
                raise ValueError("phase-shift needs at least 2 pages")
            if self.dist.shift_at > self.n_accesses:
                raise ValueError("shift_at lies beyond the trace")


# -- generation -----------------------------------------------------------


def _sampler(dist: Distribution, n_pages: int, seq: np.random.SeedSequence):
    """Return draw(size) -> uint32 page array for a non-composite dist."""
    if isinstance(dist, Zipf):
        perm_rng, u_rng = (np.random.default_rng(s) for s in seq.spawn(2))
        weights = np.arange(1, n_pages + 1, dtype=np.float64) ** -dist.alpha
        cdf = np.cumsum(weights)
        cdf /= cdf[-1]
        cdf[-1] = 1.0  # guard against rounding below the last u
        perm = perm_rng.permutation(n_pages).astype(np.uint32)

        def draw(size: int) -> np.ndarray:
            ranks = np.searchsorted(cdf, u_rng.random(size), side="right")
            return perm[ranks]

        return draw

    if isinstance(dist, Uniform):
        rng = np.random.default_rng(seq)

        def draw(size: int) -> np.ndarray:
            return rng.integers(0, n_pages, size=size, dtype=np.uint32)

        return draw

    if isinstance(dist, Hotset):
        perm_rng, pick_rng = (np.random.default_rng(s) for s in seq.spawn(2))
        n_hot = min(max(1, round(dist.hot_fraction * n_pages)), n_pages - 1)
        perm = perm_rng.permutation(n_pages).astype(np.uint32)
        hot, cold = perm[:n_hot], perm[n_hot:]

        def draw(size: int) -> np.ndarray:
            to_hot = pick_rng.random(size) < dist.hot_share
            hot_picks = hot[pick_rng.integers(0, len(hot), size=size)]
            cold_picks = cold[pick_rng.integers(0, len(cold), size=size)]
            return np.where(to_hot, hot_picks, cold_picks)

        return draw

    raise TypeError(f"no sampler for {dist!r}")


def generate(spec: TraceSpec):
    """Yield the trace as uint32 chunks; deterministic for a given spec."""
    seq = np.random.SeedSequence(spec.seed)
    if isinstance(spec.dist, PhaseShift):
        half = spec.n_pages // 2
        seq_a, seq_b = seq.spawn(2)
        phases = [
            (spec.dist.shift_at, 0, _sampler(spec.dist.inner, half, seq_a)),
            (
                spec.n_accesses - spec.dist.shift_at,
                half,
                _sampler(spec.dist.inner, spec.n_pages - half, seq_b),
            ),
        ]
    else:
        phases = [(spec.n_accesses, 0, _sampler(spec.dist, spec.n_pages, seq))]

    for remaining, offset, draw in phases:
        while remaining > 0:
            size = min(_CHUNK, remaining)
            chunk = draw(size)
            if offset:
                chunk = chunk + np.uint32(offset)
            yield chunk
            remaining -= size


def materialize(spec: TraceSpec) -> np.ndarray:
    """The whole trace as one uint32 array."""
    parts = list(generate(spec))
    if not parts:
        return np.zeros(0, dtype=np.uint32)
    return np.concatenate(parts)


def chunks_of(trace: np.ndarray, chunk: int = _CHUNK):
    """View an in-memory trace as a chunk stream."""
    for i in range(0, len(trace), chunk):
        yield trace[i : i + chunk]


# -- serialization --------------------------------------------------------


def header_bytes(n_pages: int, n_accesses: int) -> bytes:
    return _HEADER.pack(MAGIC, VERSION, n_pages, n_accesses)


def record_bytes(chunk: np.ndarray) -> bytes:
    return np.ascontiguousarray(chunk, dtype="<u8").tobytes()


def write_trace(path, n_pages: int, n_accesses: int, chunks) -> str:
    """Serialize a chunk stream to ``path``; returns the hex digest."""
    h = hashlib.blake2b(digest_size=8)
    written = 0
    with open(path, "wb") as f:
        head = header_bytes(n_pages, n_accesses)
        f.write(head)
        h.update(head)
        for chunk in chunks:
            buf = record_bytes(chunk)
            f.write(buf)
            h.update(buf)
            written += len(chunk)
    if written != n_accesses:
        raise ValueError(f"chunk stream held {written} records, header says {n_accesses}")
    return h.hexdigest()


def read_header(path) -> tuple[int, int]:
    """Validate the header; returns (n_pages, n_accesses)."""
    with open(path, "rb") as f:
        head = f.read(HEADER_BYTES)
    if len(head) < HEADER_BYTES:
        raise TraceFormatError("truncated header", offset=len(head))
    magic, version, n_pages, n_accesses = _HEADER.unpack(head)
    if magic != MAGIC:
        raise TraceFormatError(f"bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise TraceFormatError(f"unsupported version {version}", offset=4)
    return n_pages, n_accesses


def read_trace(path, chunk: int = _CHUNK):
    """Yield uint64 record chunks after validating header and body length.

    Bounds are checked as each chunk is decoded, so corrupt records fail
    with the index of the first offending record.
    """
    n_pages, n_accesses = read_header(path)

    def body():
        seen = 0
        with open(path, "rb") as f:
            f.seek(HEADER_BYTES)
            while seen < n_accesses:
                want = min(chunk, n_accesses - seen)
                buf = f.read(want * 8)
                if len(buf) < want * 8:
                    raise TraceFormatError(
                        "truncated record body", offset=HEADER_BYTES + seen * 8 + len(buf)
                    )
                records = np.frombuffer(buf, dtype="<u8")
                bad = np.flatnonzero(records >= n_pages)
                if len(bad):
                    raise CorruptTraceError(
                        f"page id {records[bad[0]]} >= n_pages {n_pages}",
                        record_index=seen + int(bad[0]),
                    )
                yield records
                seen += want
            if f.read(1):
                raise TraceFormatError(
                    "trailing bytes after last record", offset=HEADER_BYTES + n_accesses * 8
                )

    return n_pages, n_accesses, body()


def digest_trace(n_pages: int, n_accesses: int, chunks) -> str:
    """64-bit content digest over the serialized form of a chunk stream."""
    h = hashlib.blake2b(digest_size=8)
    h.update(header_bytes(n_pages, n_accesses))
    for chunk in chunks:
        h.update(record_bytes(chunk))
    return h.hexdigest()


def digest_file(path) -> str:
    """Digest of an existing trace file's raw bytes (validates nothing)."""
    h = hashlib.blake2b(digest_size=8)
    with open(path, "rb") as f:
        while True:
            buf = f.read(1 << 22)
            if not buf:
                return h.hexdigest()
            h.update(buf)
