"""Matplotlib renderings of report data, written straight to image files.

Everything here consumes the plain report/comparison dicts, so figures can
be regenerated from saved JSON without rerunning a simulation.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_hit_ratio_curve(reports: list[dict], path) -> str:
    """Per-window hit ratio, one line per report."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for rep in reports:
        ws = rep["windows"]
        ax.plot(
            [w["window_index"] for w in ws],
            [w["hit_ratio"] for w in ws],
            label=rep["policy"],
            linewidth=1.4,
        )
    ax.set_xlabel("window")
    ax.set_ylabel("local hit ratio")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_traffic_breakdown(reports: list[dict], path) -> str:
    """Stacked local/far/migration byte totals per policy."""
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = [r["policy"] for r in reports]
    local = [r["totals"]["traffic"]["local_bytes"] for r in reports]
    far = [r["totals"]["traffic"]["cxl_bytes"] for r in reports]
    migration = [r["totals"]["traffic"]["migration_bytes"] for r in reports]
    xs = range(len(reports))
    ax.bar(xs, local, label="local accesses", color="#4878cf")
    ax.bar(xs, far, bottom=local, label="far accesses", color="#ee854a")
    both = [a + b for a, b in zip(local, far)]
    ax.bar(xs, migration, bottom=both, label="migrations", color="#d65f5f")
    ax.set_xticks(list(xs), labels)
    ax.set_ylabel("bytes")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_frequency_cdf(report: dict, path) -> str | None:
    """CDF of estimated access counts over observed pages; None when the
    report has no frequency data (recency/ideal runs)."""
    freq = report.get("frequency")
    if not freq or not freq["frequency_cdf"]:
        return None
    cdf = freq["frequency_cdf"]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(range(len(cdf)), cdf, where="post")
    thr = freq["final_hot_threshold"]
    ax.axvline(thr, color="#d65f5f", linestyle="--", linewidth=1.0,
               label=f"hot threshold = {thr}")
    ax.set_xlabel("estimated count")
    ax.set_ylabel("fraction of observed pages")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_comparison(cmp: dict, path) -> str:
    """Hit ratio and relative estimated time, side by side per policy."""
    rows = cmp["rows"]
    labels = [r["policy"] for r in rows]
    xs = range(len(rows))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.bar(xs, [r["hit_ratio"] for r in rows], color="#4878cf")
    ax1.set_xticks(list(xs), labels, rotation=20)
    ax1.set_ylabel("hit ratio")
    ax1.set_ylim(0.0, 1.0)
    ax2.bar(xs, [r["time_vs_baseline"] for r in rows], color="#6acc65")
    ax2.axhline(1.0, color="black", linewidth=0.8, linestyle=":")
    ax2.set_xticks(list(xs), labels, rotation=20)
    ax2.set_ylabel(f"time vs {cmp['baseline_policy']}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)
