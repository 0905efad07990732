"""Command line front end: generate traces, run policies, compare runs.

Exit codes: 0 on success, 1 for usage problems (bad flags, bad config
keys, invalid parameter values), 2 for data problems (unreadable or
malformed traces and reports, mismatched comparisons).

A flat ``key = value`` config file can seed any flag of a subcommand via
``--config``; values given on the command line win over the file.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import re
import sys
from pathlib import Path

from .baselines import (
    ExactFrequencyTable,
    RecencyConfig,
    RecencyPolicy,
    offline_ideal,
)
from .memsim import LatencyModel, TierState, Watermarks
from .policy import PolicyConfig, PolicyEngine
from .report import (
    ReportMismatchError,
    compare_csv,
    compare_reports,
    load_report,
    report_from_engine,
    report_from_ideal,
    report_from_recency,
    to_json,
    windows_csv,
)
from .sketch import CountingBloomFilter, SketchConfig, size_for
from .trace import (
    CorruptTraceError,
    Hotset,
    PhaseShift,
    TraceFormatError,
    TraceSpec,
    Uniform,
    Zipf,
    digest_file,
    generate,
    read_header,
    read_trace,
    write_trace,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

POLICIES = ("freqtier", "exact-lfu", "recency", "ideal")


class CliError(Exception):
    """Usage-level problem discovered after argument parsing."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; here 2 is reserved for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- config files ---------------------------------------------------------


def _read_config_file(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise CliError(f"{path}:{lineno}: empty key")
            out[key.replace("-", "_")] = value
    return out


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _apply_config(parser: argparse.ArgumentParser, path) -> None:
    """Load a config file into the parser's defaults; flags still win."""
    try:
        values = _read_config_file(path)
    except OSError as e:
        raise CliError(f"cannot read config file: {e}")
    actions = {a.dest: a for a in parser._actions if a.dest != "help"}
    converted = {}
    for key, text in values.items():
        action = actions.get(key)
        if action is None:
            raise CliError(f"{path}: unknown config key '{key}'")
        if isinstance(action, argparse._StoreTrueAction):
            low = text.lower()
            if low in _TRUE:
                converted[key] = True
            elif low in _FALSE:
                converted[key] = False
            else:
                raise CliError(f"{path}: '{key}' expects a boolean, got '{text}'")
        elif action.type is not None:
            try:
                converted[key] = action.type(text)
            except ValueError:
                raise CliError(f"{path}: bad value for '{key}': '{text}'")
        else:
            converted[key] = text
        if action.choices and converted[key] not in action.choices:
            raise CliError(f"{path}: '{key}' must be one of {list(action.choices)}")
    parser.set_defaults(**converted)


# -- shared argument helpers ----------------------------------------------


def _parse_ratio(text: str) -> int:
    m = re.fullmatch(r"1:(\d+)", text.strip())
    if not m or int(m.group(1)) < 1:
        raise CliError(f"ratio must look like '1:16', got '{text}'")
    return int(m.group(1))


def capacity_from_ratio(n_pages: int, ratio: str) -> int:
    """'1:R' keeps 1 of every R+1 pages local."""
    r = _parse_ratio(ratio)
    return n_pages // (r + 1)


def _parse_probs(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError:
        raise CliError(f"sampling-probs must be comma-separated floats: '{text}'")


# -- subcommand parsers ---------------------------------------------------


def _gen_parser() -> _Parser:
    p = _Parser(prog="tiersim gen", description="Generate a synthetic trace file.")
    p.add_argument("--config", help="key = value file seeding these flags")
    p.add_argument("--out", required=True, help="output trace path")
    p.add_argument("--pages", type=int, required=True, help="page space size")
    p.add_argument("--accesses", type=int, required=True, help="trace length")
    p.add_argument("--dist", choices=("zipf", "uniform", "hotset"), default="zipf")
    p.add_argument("--alpha", type=float, default=1.0, help="zipf skew")
    p.add_argument("--hot-fraction", type=float, default=0.1)
    p.add_argument("--hot-share", type=float, default=0.9)
    p.add_argument(
        "--shift-at",
        type=int,
        default=None,
        help="move the working set to the other half of the page space "
        "after this many accesses",
    )
    p.add_argument("--seed", type=int, default=0)
    return p


def _run_parser() -> _Parser:
    p = _Parser(prog="tiersim run", description="Run one policy over a trace.")
    p.add_argument("--config", help="key = value file seeding these flags")
    p.add_argument("--trace", required=True, help="trace file to replay")
    p.add_argument("--policy", choices=POLICIES, default="freqtier")
    p.add_argument("--ratio", help="local:far page ratio, e.g. 1:16")
    p.add_argument("--capacity", type=int, help="local pages (overrides --ratio)")
    p.add_argument("--window", type=int, default=1_000_000,
                   help="accesses per reporting window")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="write the full report here (else stdout)")
    p.add_argument("--csv", help="write per-window rows here")
    p.add_argument("--figures", action="store_true", help="render figures")
    p.add_argument("--fig-dir", default=".", help="directory for figures")

    lat = p.add_argument_group("latency model")
    lat.add_argument("--latency-preset", choices=("cxl1", "cxl2"), default="cxl1")
    lat.add_argument("--local-ns", type=float, default=None)
    lat.add_argument("--cxl-extra-ns", type=float, default=None)
    lat.add_argument("--bw-frac", type=float, default=None)
    lat.add_argument("--page-copy-ns", type=float, default=None)

    fq = p.add_argument_group("freqtier / exact-lfu")
    fq.add_argument("--batch-size", type=int, default=100_000)
    fq.add_argument("--sampling-probs", default="1.0,0.1,0.01")
    fq.add_argument("--threshold", type=int, default=5, help="initial hot threshold")
    fq.add_argument("--tolerance", type=float, default=0.10)
    fq.add_argument("--aging-batches", type=int, default=10)
    fq.add_argument("--stability-delta", type=float, default=0.005)
    fq.add_argument("--stable-windows", type=int, default=3)
    fq.add_argument("--max-scan", type=int, default=None,
                    help="cap pages examined per demotion trigger")

    sk = p.add_argument_group("sketch (freqtier only)")
    sk.add_argument("--sketch-counters", type=int, default=None,
                    help="power-of-two counter count (default: sized to capacity)")
    sk.add_argument("--sketch-bits", type=int, default=4)
    sk.add_argument("--sketch-hashes", type=int, default=3)
    sk.add_argument("--sketch-layout", choices=("plain", "blocked"), default="plain")
    sk.add_argument("--hash-seed", type=int, default=0)

    rc = p.add_argument_group("recency")
    rc.add_argument("--scan-window", type=int, default=65_536)
    rc.add_argument("--scan-period", type=int, default=1_000_000)
    rc.add_argument("--hot-latency", type=int, default=1_000_000)
    rc.add_argument("--demote-fraction", type=float, default=0.02)
    rc.add_argument("--require-second-access", action="store_true")
    return p


def _compare_parser() -> _Parser:
    p = _Parser(
        prog="tiersim compare",
        description="Compare saved reports; the first is the baseline.",
    )
    p.add_argument("--config", help="key = value file seeding these flags")
    p.add_argument("reports", nargs="+", help="report JSON files")
    p.add_argument("--csv", help="write the comparison table here (else stdout)")
    p.add_argument("--json", help="write the comparison as JSON here")
    p.add_argument("--figures", action="store_true")
    p.add_argument("--fig-dir", default=".")
    return p


def _inspect_parser() -> _Parser:
    p = _Parser(prog="tiersim inspect", description="Describe a trace file.")
    p.add_argument("--config", help="key = value file seeding these flags")
    p.add_argument("trace", help="trace file")
    return p


# -- subcommand implementations -------------------------------------------


def _cmd_gen(args) -> int:
    dist = {
        "zipf": lambda: Zipf(args.alpha),
        "uniform": Uniform,
        "hotset": lambda: Hotset(args.hot_fraction, args.hot_share),
    }[args.dist]()
    if args.shift_at is not None:
        dist = PhaseShift(dist, args.shift_at)
    spec = TraceSpec(args.pages, args.accesses, dist, args.seed)
    digest = write_trace(args.out, spec.n_pages, spec.n_accesses, generate(spec))
    print(f"wrote {args.out}: pages={spec.n_pages} accesses={spec.n_accesses} "
          f"digest={digest}")
    return EXIT_OK


def _latency_model(args) -> LatencyModel:
    model = LatencyModel.cxl2() if args.latency_preset == "cxl2" else LatencyModel.cxl1()
    overrides = {
        "local_ns": args.local_ns,
        "cxl_extra_ns": args.cxl_extra_ns,
        "cxl_bandwidth_fraction": args.bw_frac,
        "page_copy_ns": args.page_copy_ns,
    }
    return dataclasses.replace(
        model, **{k: v for k, v in overrides.items() if v is not None}
    )


def _resolve_capacity(args, n_pages: int) -> int:
    if args.capacity is not None:
        if not 1 <= args.capacity <= n_pages:
            raise CliError(f"capacity must lie in [1, {n_pages}]")
        return args.capacity
    if args.ratio:
        cap = capacity_from_ratio(n_pages, args.ratio)
        if cap < 1:
            raise CliError(f"ratio {args.ratio} leaves no local pages")
        return cap
    raise CliError("one of --ratio or --capacity is required")


def _cmd_run(args) -> int:
    n_pages, n_accesses = read_header(args.trace)
    capacity = _resolve_capacity(args, n_pages)
    model = _latency_model(args)
    wm = Watermarks.from_fractions(capacity)
    probs = _parse_probs(args.sampling_probs)

    trace_info = {
        "path": str(args.trace),
        "digest": digest_file(args.trace),
        "n_pages": n_pages,
        "n_accesses": n_accesses,
    }
    echo = {
        "policy": args.policy,
        "capacity": capacity,
        "ratio": args.ratio or "",
        "window_accesses": args.window,
        "seed": args.seed,
        "promo_watermark_pages": wm.promo_pages,
        "demote_watermark_pages": wm.demote_pages,
        "latency_preset": args.latency_preset,
        "local_ns": model.local_ns,
        "cxl_extra_ns": model.cxl_extra_ns,
        "cxl_bandwidth_fraction": model.cxl_bandwidth_fraction,
        "page_copy_ns": model.page_copy_ns,
    }

    if args.policy in ("freqtier", "exact-lfu"):
        cfg = PolicyConfig(
            batch_size=args.batch_size,
            sampling_probs=probs,
            window_accesses=args.window,
            initial_hot_threshold=args.threshold,
            hot_set_tolerance=args.tolerance,
            aging_interval_batches=args.aging_batches,
            stability_delta=args.stability_delta,
            stable_windows=args.stable_windows,
            max_scan_pages_per_trigger=args.max_scan,
            seed=args.seed,
        )
        echo.update(
            batch_size=cfg.batch_size,
            sampling_probs=",".join(repr(p) for p in probs),
            initial_hot_threshold=cfg.initial_hot_threshold,
            hot_set_tolerance=cfg.hot_set_tolerance,
            aging_interval_batches=cfg.aging_interval_batches,
            stability_delta=cfg.stability_delta,
            stable_windows=cfg.stable_windows,
        )
        if args.policy == "freqtier":
            counters = args.sketch_counters or size_for(
                capacity, 1e-3, args.sketch_hashes
            )
            sketch = CountingBloomFilter(
                SketchConfig(
                    num_counters=counters,
                    counter_bits=args.sketch_bits,
                    num_hashes=args.sketch_hashes,
                    layout=args.sketch_layout,
                    hash_seed=args.hash_seed,
                )
            )
            echo.update(
                sketch_counters=counters,
                sketch_bits=args.sketch_bits,
                sketch_hashes=args.sketch_hashes,
                sketch_layout=args.sketch_layout,
                hash_seed=args.hash_seed,
            )
        else:
            sketch = ExactFrequencyTable(n_pages)
        engine = PolicyEngine(
            TierState(n_pages, capacity), sketch, cfg, wm, record_decisions=False
        )
        _, _, body = read_trace(args.trace)
        engine.run(body)
        rep = report_from_engine(engine, args.policy, trace_info, echo, model)
    elif args.policy == "recency":
        rcfg = RecencyConfig(
            scan_window_pages=args.scan_window,
            scan_period_accesses=args.scan_period,
            hot_latency_ticks=args.hot_latency,
            lru_demote_fraction=args.demote_fraction,
            require_second_access=args.require_second_access,
        )
        echo.update(
            scan_window_pages=rcfg.scan_window_pages,
            scan_period_accesses=rcfg.scan_period_accesses,
            hot_latency_ticks=rcfg.hot_latency_ticks,
            lru_demote_fraction=rcfg.lru_demote_fraction,
            require_second_access=rcfg.require_second_access,
        )
        pol = RecencyPolicy(
            n_pages, capacity, wm, rcfg,
            n_accesses_hint=n_accesses, window_accesses=args.window,
        )
        _, _, body = read_trace(args.trace)
        pol.run(body)
        rep = report_from_recency(pol, trace_info, echo, model)
    else:  # ideal
        res = offline_ideal(
            lambda: read_trace(args.trace)[2], n_pages, capacity, args.window
        )
        rep = report_from_ideal(res, trace_info, echo, model)

    payload = to_json(rep)
    if args.json:
        Path(args.json).write_text(payload, encoding="utf-8")
        tot = rep["totals"]
        print(f"{args.policy}: hit_ratio={tot['hit_ratio']:.4f} "
              f"time={tot['estimated_time_ns']:.3e}ns -> {args.json}")
    else:
        sys.stdout.write(payload)
    if args.csv:
        Path(args.csv).write_text(windows_csv(rep), encoding="utf-8")
    if args.figures:
        from . import figures

        out = Path(args.fig_dir)
        out.mkdir(parents=True, exist_ok=True)
        made = [
            figures.save_hit_ratio_curve([rep], out / f"{args.policy}_windows.png"),
            figures.save_traffic_breakdown([rep], out / f"{args.policy}_traffic.png"),
        ]
        cdf = figures.save_frequency_cdf(rep, out / f"{args.policy}_cdf.png")
        if cdf:
            made.append(cdf)
        for path in made:
            print(f"figure: {path}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    reports = [load_report(p) for p in args.reports]
    cmp = compare_reports(reports)
    table = compare_csv(cmp)
    if args.csv:
        Path(args.csv).write_text(table, encoding="utf-8")
        print(f"comparison -> {args.csv}")
    else:
        sys.stdout.write(table)
    if args.json:
        Path(args.json).write_text(json.dumps(cmp, indent=2) + "\n", encoding="utf-8")
    if args.figures:
        from . import figures

        out = Path(args.fig_dir)
        out.mkdir(parents=True, exist_ok=True)
        print(f"figure: {figures.save_comparison(cmp, out / 'comparison.png')}")
        print(f"figure: {figures.save_hit_ratio_curve(reports, out / 'windows.png')}")
    return EXIT_OK


def _cmd_inspect(args) -> int:
    n_pages, n_accesses = read_header(args.trace)
    digest = digest_file(args.trace)
    size = Path(args.trace).stat().st_size
    print(f"pages={n_pages} accesses={n_accesses} bytes={size} digest={digest}")
    return EXIT_OK


# -- dispatch -------------------------------------------------------------

_COMMANDS = {
    "gen": (_gen_parser, _cmd_gen),
    "run": (_run_parser, _cmd_run),
    "compare": (_compare_parser, _cmd_compare),
    "inspect": (_inspect_parser, _cmd_inspect),
}

_TOP_USAGE = """usage: tiersim {gen,run,compare,inspect} ...

subcommands:
  gen       generate a synthetic trace file
  run       run one policy over a trace, emit a report
  compare   compare saved reports against the first one
  inspect   describe a trace file
"""


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        sys.stdout.write(_TOP_USAGE)
        return EXIT_OK if argv else EXIT_USAGE
    name, rest = argv[0], argv[1:]
    if name not in _COMMANDS:
        sys.stderr.write(f"tiersim: unknown subcommand '{name}'\n{_TOP_USAGE}")
        return EXIT_USAGE
    build, run_cmd = _COMMANDS[name]
    parser = build()
    try:
        pre = _Parser(add_help=False)
        pre.add_argument("--config")
        pre_args, _ = pre.parse_known_args(rest)
        if pre_args.config:
            _apply_config(parser, pre_args.config)
        args = parser.parse_args(rest)
        return run_cmd(args)
    except SystemExit as e:
        return int(e.code or 0)
    except CliError as e:
        sys.stderr.write(f"tiersim {name}: error: {e}\n")
        return EXIT_USAGE
    except (TraceFormatError, CorruptTraceError, ReportMismatchError) as e:
        sys.stderr.write(f"tiersim {name}: data error: {e}\n")
        return EXIT_DATA
    except json.JSONDecodeError as e:
        sys.stderr.write(f"tiersim {name}: data error: {e}\n")
        return EXIT_DATA
    except (OSError, KeyError) as e:
        sys.stderr.write(f"tiersim {name}: data error: {e}\n")
        return EXIT_DATA
    except ValueError as e:
        sys.stderr.write(f"tiersim {name}: error: {e}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
