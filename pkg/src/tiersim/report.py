"""Run results as plain data: a report dict, its JSON and CSV forms, and
cross-run comparison.

Reports are built once at the end of a run and never mutated.  Key order
is fixed at construction and no timestamps or environment details are
recorded, so serializing the same run twice yields identical bytes.
"""

from __future__ import annotations

import json

import numpy as np

from .baselines import IdealResult, RecencyPolicy, exact_metadata_bytes
from .memsim import LatencyModel, TierState
from .policy import PolicyEngine

SCHEMA_VERSION = 1

WINDOW_COLUMNS = (
    "window_index",
    "hit_ratio",
    "promotions",
    "demotions",
    "sampling_level",
    "machine_state",
)


class ReportMismatchError(Exception):
    """Comparison refused: the reports describe different inputs."""


# -- construction ---------------------------------------------------------


def _totals(state: TierState, model: LatencyModel) -> dict:
    traffic = state.traffic_bytes()
    return {
        "accesses": state.tick,
        "hit_ratio": float(state.hit_ratio()),
        "local_accesses": state.local_accesses,
        "cxl_accesses": state.cxl_accesses,
        "promoted_pages": state.promoted_pages,
        "demoted_pages": state.demoted_pages,
        "final_local_pages": state.local_count,
        "estimated_time_ns": float(state.estimate_time_ns(model)),
        "traffic": {k: int(v) for k, v in traffic.items()},
    }


def _shell(policy: str, trace_info: dict, config_echo: dict, state, model, windows):
    return {
        "schema_version": SCHEMA_VERSION,
        "policy": policy,
        "trace": dict(trace_info),
        "config": dict(config_echo),
        "totals": _totals(state, model),
        "windows": windows,
        "frequency": None,
        "machine": None,
        "tracking_bytes": None,
    }


def _window_dicts(rows) -> list[dict]:
    return [
        {
            "window_index": r.index,
            "hit_ratio": float(r.hit_ratio),
            "promotions": r.promotions,
            "demotions": r.demotions,
            "sampling_level": r.sampling_level,
            "machine_state": r.machine_state,
        }
        for r in rows
    ]


def _plain_windows(hit_ratios, promotions=None, demotions=None) -> list[dict]:
    """Window rows for policies without sampling levels or machine states."""
    out = []
    for i, h in enumerate(hit_ratios):
        out.append(
            {
                "window_index": i,
                "hit_ratio": float(h),
                "promotions": int(promotions[i]) if promotions is not None else 0,
                "demotions": int(demotions[i]) if demotions is not None else 0,
                "sampling_level": -1,
                "machine_state": "n/a",
            }
        )
    return out


def report_from_engine(
    engine: PolicyEngine,
    policy: str,
    trace_info: dict,
    config_echo: dict,
    model: LatencyModel,
) -> dict:
    """Report for the sketch-driven engine (or its exact-table variant)."""
    rep = _shell(
        policy, trace_info, config_echo, engine.state, model,
        _window_dicts(engine.window_rows),
    )
    sketch = engine.sketch
    hist = sketch.histogram()
    observed_hist = engine.observed_get_histogram()
    observed = int(observed_hist.sum())
    cum = np.cumsum(observed_hist)
    cdf = (cum / observed).tolist() if observed else []
    rep["frequency"] = {
        "final_hot_threshold": engine.hot_threshold,
        "batches": engine.batches_processed,
        "update_samples": engine.update_samples,
        "update_entries": engine.update_entries,
        "skipped_promotions": engine.skipped_promotions,
        "counter_histogram": hist.tolist(),
        "counters_at_max_fraction": float(hist[-1] / hist.sum()),
        "observed_pages": observed,
        "observed_get_histogram": observed_hist.tolist(),
        "frequency_cdf": [float(x) for x in cdf],
    }
    rep["machine"] = {
        "final_state": engine.machine_state,
        "final_sampling_level": engine.sampling_level,
        "transitions": [
            {"tick": t, "from": a, "to": b, "reason": r}
            for t, a, b, r in engine.transitions
        ],
    }
    if policy == "exact-lfu":
        rep["tracking_bytes"] = exact_metadata_bytes(engine.state.n_pages)
    else:
        rep["tracking_bytes"] = int(sketch.memory_bytes())
    return rep


def report_from_recency(
    pol: RecencyPolicy, trace_info: dict, config_echo: dict, model: LatencyModel
) -> dict:
    hits, promos, demos = pol.window_stats()
    return _shell(
        "recency", trace_info, config_echo, pol.as_tier_state(), model,
        _plain_windows(hits, promos, demos),
    )


def report_from_ideal(
    res: IdealResult, trace_info: dict, config_echo: dict, model: LatencyModel
) -> dict:
    return _shell(
        "ideal", trace_info, config_echo, res.state, model,
        _plain_windows(res.window_hit_ratios),
    )


# -- serialization --------------------------------------------------------


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def windows_csv(report: dict) -> str:
    lines = [",".join(WINDOW_COLUMNS)]
    for w in report["windows"]:
        lines.append(
            "%d,%.6f,%d,%d,%d,%s"
            % (
                w["window_index"],
                w["hit_ratio"],
                w["promotions"],
                w["demotions"],
                w["sampling_level"],
                w["machine_state"],
            )
        )
    return "\n".join(lines) + "\n"


def load_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        rep = json.load(f)
    if not isinstance(rep, dict) or rep.get("schema_version") != SCHEMA_VERSION:
        raise ReportMismatchError(f"{path}: not a schema v{SCHEMA_VERSION} report")
    return rep


# -- comparison -----------------------------------------------------------

COMPARE_COLUMNS = (
    "policy",
    "hit_ratio",
    "hit_vs_baseline",
    "estimated_time_ns",
    "time_vs_baseline",
    "promoted_pages",
    "demoted_pages",
    "migration_bytes",
    "tracking_bytes",
)


def compare_reports(reports: list[dict]) -> dict:
    """Side-by-side totals, everything relative to the first report.

    All reports must describe the same trace; a digest mismatch is an
    input error, not a comparison result.
    """
    if not reports:
        raise ValueError("nothing to compare")
    digests = {r["trace"].get("digest") for r in reports}
    if len(digests) != 1:
        raise ReportMismatchError(
            "trace digest mismatch: " + ", ".join(sorted(str(d) for d in digests))
        )
    base = reports[0]["totals"]
    base_time = base["estimated_time_ns"]
    base_hit = base["hit_ratio"]
    rows = []
    for rep in reports:
        tot = rep["totals"]
        rows.append(
            {
                "policy": rep["policy"],
                "hit_ratio": tot["hit_ratio"],
                "hit_vs_baseline": tot["hit_ratio"] / base_hit if base_hit else 0.0,
                "estimated_time_ns": tot["estimated_time_ns"],
                "time_vs_baseline": tot["estimated_time_ns"] / base_time
                if base_time
                else 0.0,
                "promoted_pages": tot["promoted_pages"],
                "demoted_pages": tot["demoted_pages"],
                "migration_bytes": tot["traffic"]["migration_bytes"],
                "tracking_bytes": rep["tracking_bytes"],
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "trace": dict(reports[0]["trace"]),
        "baseline_policy": reports[0]["policy"],
        "rows": rows,
    }


def compare_csv(cmp: dict) -> str:
    lines = [",".join(COMPARE_COLUMNS)]
    for row in cmp["rows"]:
        lines.append(
            "%s,%.6f,%.4f,%.1f,%.4f,%d,%d,%d,%s"
            % (
                row["policy"],
                row["hit_ratio"],
                row["hit_vs_baseline"],
                row["estimated_time_ns"],
                row["time_vs_baseline"],
                row["promoted_pages"],
                row["demoted_pages"],
                row["migration_bytes"],
                "" if row["tracking_bytes"] is None else row["tracking_bytes"],
            )
        )
    return "\n".join(lines) + "\n"
