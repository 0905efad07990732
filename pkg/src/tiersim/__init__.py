"""Two-tier memory simulation with sketch-based frequency tracking.

The package splits into small layers: ``sketch`` (counting filters),
``trace`` (synthetic workloads and the on-disk format), ``memsim`` (the
two-tier state machine), ``policy`` (the sampled frequency policy),
``baselines`` (exact, recency and offline-ideal references), ``report``
(run results as data) and ``cli`` (the ``tiersim`` command).
"""

from .baselines import (
    ExactFrequencyTable,
    IdealResult,
    RecencyConfig,
    RecencyPolicy,
    exact_metadata_bytes,
    offline_ideal,
)
from .memsim import (
    CXL,
    LOCAL,
    UNALLOCATED,
    LatencyModel,
    TierState,
    Watermarks,
)
from .policy import PolicyConfig, PolicyEngine, WindowRow
from .report import (
    ReportMismatchError,
    compare_reports,
    load_report,
    report_from_engine,
    report_from_ideal,
    report_from_recency,
    to_json,
    windows_csv,
)
from .sketch import CountingBloomFilter, SketchConfig, coalesce, size_for
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
    materialize,
    read_header,
    read_trace,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [
    "CXL",
    "LOCAL",
    "UNALLOCATED",
    "CorruptTraceError",
    "CountingBloomFilter",
    "ExactFrequencyTable",
    "Hotset",
    "IdealResult",
    "LatencyModel",
    "PhaseShift",
    "PolicyConfig",
    "PolicyEngine",
    "RecencyConfig",
    "RecencyPolicy",
    "ReportMismatchError",
    "SketchConfig",
    "TierState",
    "TraceFormatError",
    "TraceSpec",
    "Uniform",
    "Watermarks",
    "WindowRow",
    "Zipf",
    "coalesce",
    "compare_reports",
    "digest_file",
    "exact_metadata_bytes",
    "generate",
    "load_report",
    "materialize",
    "offline_ideal",
    "read_header",
    "read_trace",
    "report_from_engine",
    "report_from_ideal",
    "report_from_recency",
    "size_for",
    "to_json",
    "windows_csv",
    "write_trace",
]
