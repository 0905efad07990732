from __future__ import annotations

import json
import struct
import subprocess
import sys

import pytest

from tiersim.cli import capacity_from_ratio, main

PAGES, ACCESSES = 4096, 200_000


@pytest.fixture(scope="module")
def trace(tmp_path_factory):
    path = tmp_path_factory.mktemp("traces") / "t.fqtr"
    rc = main(["gen", "--out", str(path), "--pages", str(PAGES),
               "--accesses", str(ACCESSES), "--dist", "zipf", "--alpha", "1.0",
               "--seed", "7"])
    assert rc == 0
    return path


def run_cli(*argv):
    return main([str(a) for a in argv])


# -- ratio ----------------------------------------------------------------


def test_ratio_arithmetic():
    assert capacity_from_ratio(4096, "1:7") == 512
    assert capacity_from_ratio(4096, "1:16") == 240  # floor(4096/17)
    assert capacity_from_ratio(17, "1:16") == 1
    assert capacity_from_ratio(1_048_576, "1:16") == 61_680


def test_bad_ratio_is_usage_error(trace, tmp_path):
    assert run_cli("run", "--trace", trace, "--ratio", "2:5") == 1
    assert run_cli("run", "--trace", trace, "--ratio", "1:0") == 1
    assert run_cli("run", "--trace", trace, "--ratio", "junk") == 1


# -- gen ------------------------------------------------------------------


def test_gen_is_deterministic(tmp_path):
    a, b, c = (tmp_path / n for n in ("a.fqtr", "b.fqtr", "c.fqtr"))
    for path, seed in ((a, "3"), (b, "3"), (c, "4")):
        assert run_cli("gen", "--out", path, "--pages", "512", "--accesses",
                       "5000", "--seed", seed) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_gen_variants(tmp_path):
    out = tmp_path / "v.fqtr"
    assert run_cli("gen", "--out", out, "--pages", "512", "--accesses", "5000",
                   "--dist", "uniform") == 0
    assert run_cli("gen", "--out", out, "--pages", "512", "--accesses", "5000",
                   "--dist", "hotset", "--hot-fraction", "0.2",
                   "--hot-share", "0.8") == 0
    assert run_cli("gen", "--out", out, "--pages", "512", "--accesses", "5000",
                   "--shift-at", "2500") == 0
    assert out.stat().st_size == 24 + 8 * 5000


def test_gen_rejects_bad_parameters(tmp_path):
    out = tmp_path / "x.fqtr"
    assert run_cli("gen", "--out", out, "--pages", "512", "--accesses", "100",
                   "--alpha", "-1") == 1
    assert run_cli("gen", "--out", out, "--pages", "512", "--accesses", "100",
                   "--shift-at", "500") == 1


# -- inspect --------------------------------------------------------------


def test_inspect_reports_header_and_digest(trace, capsys):
    assert run_cli("inspect", trace) == 0
    out = capsys.readouterr().out
    assert f"pages={PAGES}" in out
    assert f"accesses={ACCESSES}" in out
    assert f"bytes={24 + 8 * ACCESSES}" in out
    assert "digest=" in out


# -- run ------------------------------------------------------------------

FAST = ("--window", "50000", "--batch-size", "5000")


@pytest.mark.parametrize("policy", ["freqtier", "exact-lfu", "recency", "ideal"])
def test_run_each_policy(policy, trace, tmp_path, capsys):
    out = tmp_path / "r.json"
    csv = tmp_path / "r.csv"
    rc = run_cli("run", "--trace", trace, "--policy", policy, "--ratio", "1:7",
                 *FAST, "--scan-window", "1024", "--scan-period", "50000",
                 "--json", out, "--csv", csv)
    assert rc == 0
    rep = json.loads(out.read_text())
    assert rep["policy"] == policy
    assert rep["config"]["capacity"] == 512
    assert len(rep["windows"]) == 4
    assert csv.read_text().startswith("window_index,")
    assert "hit_ratio=" in capsys.readouterr().out


def test_run_prints_json_without_out_path(trace, capsys):
    assert run_cli("run", "--trace", trace, "--policy", "ideal",
                   "--ratio", "1:7", *FAST) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["policy"] == "ideal"


def test_run_repeats_byte_identically(trace, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert run_cli("run", "--trace", trace, "--ratio", "1:7", *FAST,
                       "--json", out) == 0
    assert a.read_bytes() == b.read_bytes()


def test_capacity_flag_overrides_ratio(trace, tmp_path):
    out = tmp_path / "r.json"
    assert run_cli("run", "--trace", trace, "--ratio", "1:7",
                   "--capacity", "100", *FAST, "--json", out) == 0
    assert json.loads(out.read_text())["config"]["capacity"] == 100


def test_run_usage_errors(trace):
    assert run_cli("run", "--trace", trace, *FAST) == 1  # no ratio/capacity
    assert run_cli("run", "--trace", trace, "--ratio", "1:7",
                   "--sampling-probs", "0.5,abc") == 1
    assert run_cli("run", "--trace", trace, "--ratio", "1:7",
                   "--sampling-probs", "0.5,0.9") == 1  # not descending
    assert run_cli("run", "--trace", trace, "--ratio", "1:7",
                   "--capacity", "999999") == 1
    assert run_cli("run", "--trace", trace, "--policy", "nonsense",
                   "--ratio", "1:7") == 1


def test_run_data_errors(tmp_path, trace):
    assert run_cli("run", "--trace", tmp_path / "nope.fqtr",
                   "--ratio", "1:7") == 2
    raw = bytearray(trace.read_bytes())
    bad = tmp_path / "bad.fqtr"
    bad.write_bytes(b"JUNK" + raw[4:])
    assert run_cli("run", "--trace", bad, "--ratio", "1:7") == 2
    struct.pack_into("<Q", raw, 24, 10**9)  # first record out of range
    oor = tmp_path / "oor.fqtr"
    oor.write_bytes(bytes(raw))
    assert run_cli("run", "--trace", oor, "--ratio", "1:7", *FAST) == 2


# -- config files ---------------------------------------------------------


def test_config_file_seeds_flags(trace, tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("ratio = 1:7\nwindow = 50000\nbatch-size = 5000\n"
                    "# comment\npolicy = recency\nscan-window = 1024\n"
                    "scan-period = 50000\n")
    out = tmp_path / "r.json"
    assert run_cli("run", "--trace", trace, "--config", conf,
                   "--json", out) == 0
    assert json.loads(out.read_text())["policy"] == "recency"


def test_flags_beat_config_file(trace, tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("ratio = 1:7\nwindow = 50000\nbatch-size = 5000\n"
                    "policy = recency\n")
    out = tmp_path / "r.json"
    assert run_cli("run", "--trace", trace, "--config", conf,
                   "--policy", "ideal", "--json", out) == 0
    assert json.loads(out.read_text())["policy"] == "ideal"


def test_config_file_errors_are_usage_errors(trace, tmp_path):
    bad = tmp_path / "bad.conf"
    bad.write_text("no-such-key = 5\n")
    assert run_cli("run", "--trace", trace, "--config", bad,
                   "--ratio", "1:7") == 1
    bad.write_text("window\n")
    assert run_cli("run", "--trace", trace, "--config", bad,
                   "--ratio", "1:7") == 1
    bad.write_text("window = lots\n")
    assert run_cli("run", "--trace", trace, "--config", bad,
                   "--ratio", "1:7") == 1
    assert run_cli("run", "--trace", trace, "--config", tmp_path / "ghost.conf",
                   "--ratio", "1:7") == 1


# -- compare --------------------------------------------------------------


@pytest.fixture(scope="module")
def two_reports(trace, tmp_path_factory):
    d = tmp_path_factory.mktemp("reports")
    fq, rc = d / "fq.json", d / "rc.json"
    assert run_cli("run", "--trace", trace, "--ratio", "1:7", *FAST,
                   "--json", fq) == 0
    assert run_cli("run", "--trace", trace, "--policy", "recency",
                   "--ratio", "1:7", "--window", "50000",
                   "--scan-window", "1024", "--scan-period", "50000",
                   "--json", rc) == 0
    return fq, rc


def test_compare_table(two_reports, tmp_path, capsys):
    fq, rc = two_reports
    assert run_cli("compare", fq, rc) == 0
    out = capsys.readouterr().out
    lines = out.strip().split("\n")
    assert lines[0].startswith("policy,hit_ratio,")
    assert len(lines) == 3
    assert lines[1].split(",")[0] == "freqtier"
    csv = tmp_path / "cmp.csv"
    js = tmp_path / "cmp.json"
    assert run_cli("compare", fq, rc, "--csv", csv, "--json", js) == 0
    assert csv.read_text().startswith("policy,")
    assert json.loads(js.read_text())["baseline_policy"] == "freqtier"


def test_compare_single_report_is_its_own_baseline(two_reports, capsys):
    fq, _ = two_reports
    assert run_cli("compare", fq) == 0
    row = capsys.readouterr().out.strip().split("\n")[1].split(",")
    assert float(row[2]) == 1.0 and float(row[4]) == 1.0


def test_compare_refuses_mismatched_traces(two_reports, tmp_path):
    fq, _ = two_reports
    other = tmp_path / "other.fqtr"
    assert run_cli("gen", "--out", other, "--pages", "4096",
                   "--accesses", "200000", "--seed", "8") == 0
    rep = tmp_path / "other.json"
    assert run_cli("run", "--trace", other, "--ratio", "1:7", *FAST,
                   "--json", rep) == 0
    assert run_cli("compare", fq, rep) == 2


def test_compare_rejects_non_reports(tmp_path, two_reports):
    fq, _ = two_reports
    garbage = tmp_path / "g.json"
    garbage.write_text("{not json")
    assert run_cli("compare", fq, garbage) == 2
    foreign = tmp_path / "f.json"
    foreign.write_text('{"schema_version": 99}')
    assert run_cli("compare", fq, foreign) == 2


# -- figures --------------------------------------------------------------


def test_run_figures_are_written(trace, tmp_path):
    figs = tmp_path / "figs"
    assert run_cli("run", "--trace", trace, "--ratio", "1:7", *FAST,
                   "--json", tmp_path / "r.json",
                   "--figures", "--fig-dir", figs) == 0
    made = sorted(p.name for p in figs.glob("*.png"))
    assert made == ["freqtier_cdf.png", "freqtier_traffic.png",
                    "freqtier_windows.png"]
    for p in figs.glob("*.png"):
        assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_compare_figures(two_reports, tmp_path, capsys):
    fq, rc = two_reports
    figs = tmp_path / "figs"
    assert run_cli("compare", fq, rc, "--csv", tmp_path / "c.csv",
                   "--figures", "--fig-dir", figs) == 0
    assert sorted(p.name for p in figs.glob("*.png")) == [
        "comparison.png", "windows.png"]


# -- top level ------------------------------------------------------------


def test_top_level_dispatch(capsys):
    assert main([]) == 1
    assert main(["-h"]) == 0
    assert "subcommands" in capsys.readouterr().out
    assert main(["frobnicate"]) == 1


def test_console_script_is_wired():
    out = subprocess.run([sys.executable, "-m", "tiersim.cli", "--help"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "tiersim" in out.stdout
