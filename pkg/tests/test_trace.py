from __future__ import annotations

import numpy as np
import pytest

from tiersim.trace import (
    CorruptTraceError,
    Hotset,
    PhaseShift,
    TraceFormatError,
    TraceSpec,
    Uniform,
    Zipf,
    chunks_of,
    digest_file,
    digest_trace,
    generate,
    materialize,
    read_header,
    read_trace,
    write_trace,
)


def spec(n_pages=1000, n_accesses=10_000, dist=None, seed=1):
    return TraceSpec(n_pages, n_accesses, dist or Zipf(1.0), seed)


def drain(path, chunk=1 << 20):
    n_pages, n_accesses, body = read_trace(path, chunk=chunk)
    return n_pages, n_accesses, np.concatenate(list(body) or [np.zeros(0, np.uint64)])


# -- spec validation ------------------------------------------------------


def test_spec_validation():
    with pytest.raises(ValueError):
        TraceSpec(0, 10, Uniform())
    with pytest.raises(ValueError):
        TraceSpec(10, -1, Uniform())
    with pytest.raises(ValueError):
        Zipf(0.0)
    with pytest.raises(ValueError):
        Hotset(0.0, 0.9)
    with pytest.raises(ValueError):
        Hotset(0.1, 1.0)
    with pytest.raises(ValueError):
        PhaseShift(PhaseShift(Uniform(), 1), 2)
    with pytest.raises(ValueError):
        TraceSpec(10, 5, PhaseShift(Uniform(), 6))  # shift beyond trace
    with pytest.raises(ValueError):
        TraceSpec(1, 5, PhaseShift(Uniform(), 2))


# -- determinism ----------------------------------------------------------


def test_same_spec_same_stream():
    s = spec(seed=42)
    assert np.array_equal(materialize(s), materialize(s))


def test_seed_changes_stream():
    a = materialize(spec(seed=1))
    b = materialize(spec(seed=2))
    assert not np.array_equal(a, b)


def test_streamed_equals_materialized():
    s = spec(n_accesses=5000)
    assert np.array_equal(np.concatenate(list(generate(s))), materialize(s))


def test_all_records_in_range():
    for dist in (Zipf(1.2), Uniform(), Hotset(0.2, 0.8), PhaseShift(Uniform(), 400)):
        t = materialize(spec(n_pages=64, n_accesses=1000, dist=dist))
        assert len(t) == 1000
        assert t.min() >= 0 and t.max() < 64


# -- distribution shape ---------------------------------------------------


def test_zipf_rank_probabilities_are_exact():
    # n=8, alpha=1: p = [.3679, .1840, .1226, .0920, .0736, .0613, .0526, .0460]
    t = materialize(spec(n_pages=8, n_accesses=400_000, dist=Zipf(1.0), seed=3))
    counts = np.sort(np.bincount(t, minlength=8) / len(t))[::-1]
    expect = np.array([0.3679, 0.1840, 0.1226, 0.0920, 0.0736, 0.0613, 0.0526, 0.0460])
    assert np.all(np.abs(counts - expect) < 0.01)


def test_zipf_top_decile_share():
    # sum of the top 100 of 1000 rank weights / total = 0.6930 at alpha=1
    t = materialize(spec(n_pages=1000, n_accesses=300_000, dist=Zipf(1.0), seed=5))
    counts = np.bincount(t, minlength=1000)
    share = np.sort(counts)[::-1][:100].sum() / counts.sum()
    assert abs(share - 0.6930) < 0.02


def test_zipf_scatters_hot_pages():
    t = materialize(spec(n_pages=1000, n_accesses=50_000, dist=Zipf(1.0), seed=5))
    hottest = int(np.argmax(np.bincount(t, minlength=1000)))
    others = [
        int(np.argmax(np.bincount(materialize(spec(1000, 50_000, Zipf(1.0), seed=s)), minlength=1000)))
        for s in (6, 7)
    ]
    assert len({hottest, *others}) > 1  # permutation moves the head around


def test_uniform_is_flat():
    t = materialize(spec(n_pages=50, n_accesses=200_000, dist=Uniform(), seed=2))
    freq = np.bincount(t, minlength=50) / len(t)
    assert np.all(np.abs(freq - 0.02) < 0.004)


def test_hotset_concentrates_accesses():
    t = materialize(
        spec(n_pages=1000, n_accesses=1_000_000, dist=Hotset(0.1, 0.9), seed=4)
    )
    counts = np.bincount(t, minlength=1000)
    share = np.sort(counts)[::-1][:100].sum() / counts.sum()
    assert abs(share - 0.9) < 0.02


def test_phase_shift_switches_halves():
    s = spec(n_pages=10, n_accesses=10, dist=PhaseShift(Uniform(), 5), seed=9)
    t = materialize(s)
    assert np.all(t[:5] < 5)
    assert np.all(t[5:] >= 5)


def test_phase_shift_rescales_inner():
    s = spec(n_pages=100, n_accesses=40_000, dist=PhaseShift(Zipf(1.0), 20_000), seed=8)
    t = materialize(s)
    first, second = t[:20_000], t[20_000:]
    assert first.max() < 50 <= second.min()
    # each phase is a full Zipf over its half, not a sliver of one
    assert len(np.unique(first)) == 50
    assert len(np.unique(second)) == 50


# -- file format ----------------------------------------------------------


def test_file_size_arithmetic(tmp_path):
    p = tmp_path / "t.fqtr"
    write_trace(p, 1000, 500, chunks_of(materialize(spec(n_accesses=500))))
    assert p.stat().st_size == 24 + 8 * 500


def test_round_trip_identity(tmp_path):
    p = tmp_path / "t.fqtr"
    t = materialize(spec(n_pages=777, n_accesses=3000, seed=6))
    d = write_trace(p, 777, 3000, chunks_of(t))
    n_pages, n_accesses, got = drain(p)
    assert (n_pages, n_accesses) == (777, 3000)
    assert np.array_equal(got, t.astype(np.uint64))
    assert digest_file(p) == d == digest_trace(777, 3000, chunks_of(t))


def test_round_trip_is_chunk_size_invariant(tmp_path):
    p = tmp_path / "t.fqtr"
    t = materialize(spec(n_accesses=1000))
    write_trace(p, 1000, 1000, chunks_of(t, 17))
    _, _, a = drain(p, chunk=7)
    _, _, b = drain(p, chunk=100_000)
    assert np.array_equal(a, b)


def test_empty_trace_round_trips(tmp_path):
    p = tmp_path / "e.fqtr"
    write_trace(p, 10, 0, iter([]))
    n_pages, n_accesses, body = read_trace(p)
    assert (n_pages, n_accesses) == (10, 0)
    assert list(body) == []


def test_write_rejects_count_mismatch(tmp_path):
    with pytest.raises(ValueError):
        write_trace(tmp_path / "bad.fqtr", 10, 99, chunks_of(np.arange(5, dtype=np.uint32)))


def test_bad_magic_names_offset_zero(tmp_path):
    p = tmp_path / "t.fqtr"
    write_trace(p, 10, 2, chunks_of(np.array([1, 2], dtype=np.uint32)))
    raw = bytearray(p.read_bytes())
    raw[0] = ord("X")
    p.write_bytes(raw)
    with pytest.raises(TraceFormatError) as e:
        read_header(p)
    assert e.value.offset == 0


def test_bad_version_names_offset_four(tmp_path):
    p = tmp_path / "t.fqtr"
    write_trace(p, 10, 1, chunks_of(np.array([1], dtype=np.uint32)))
    raw = bytearray(p.read_bytes())
    raw[4] = 9
    p.write_bytes(raw)
    with pytest.raises(TraceFormatError) as e:
        read_header(p)
    assert e.value.offset == 4


def test_truncated_header(tmp_path):
    p = tmp_path / "t.fqtr"
    p.write_bytes(b"FQTR\x01\x00\x00")
    with pytest.raises(TraceFormatError) as e:
        read_header(p)
    assert e.value.offset == 7


def test_truncated_body_names_end_offset(tmp_path):
    p = tmp_path / "t.fqtr"
    write_trace(p, 10, 10, chunks_of(np.arange(10, dtype=np.uint32)))
    p.write_bytes(p.read_bytes()[:-5])
    with pytest.raises(TraceFormatError) as e:
        drain(p)
    assert e.value.offset == 24 + 8 * 10 - 5


def test_out_of_range_record_names_index(tmp_path):
    p = tmp_path / "t.fqtr"
    write_trace(p, 10, 6, chunks_of(np.arange(6, dtype=np.uint32)))
    raw = bytearray(p.read_bytes())
    raw[24 + 8 * 4 : 24 + 8 * 5] = (10).to_bytes(8, "little")  # record 4 -> n_pages
    p.write_bytes(raw)
    with pytest.raises(CorruptTraceError) as e:
        drain(p)
    assert e.value.record_index == 4


def test_trailing_bytes_rejected(tmp_path):
    p = tmp_path / "t.fqtr"
    write_trace(p, 10, 2, chunks_of(np.array([0, 1], dtype=np.uint32)))
    p.write_bytes(p.read_bytes() + b"\x00")
    with pytest.raises(TraceFormatError):
        drain(p)


def test_digest_tracks_content(tmp_path):
    t1 = materialize(spec(seed=1, n_accesses=100))
    t2 = materialize(spec(seed=2, n_accesses=100))
    assert digest_trace(1000, 100, chunks_of(t1)) != digest_trace(1000, 100, chunks_of(t2))
    assert digest_trace(1000, 100, chunks_of(t1)) == digest_trace(1000, 100, chunks_of(t1))
