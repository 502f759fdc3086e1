"""Online multiple hypothesis testing with streaming error control.

Assigns per-test significance levels one hypothesis at a time -- spending,
investing, adaptive, and discarding rules -- controls FDR-family error
rates, and ships a Monte Carlo lab plus a checkpointable stream runner.
"""

from .core import (
    DecisionEngine,
    DecisionRecord,
    ProcedureConfig,
    ProtocolError,
    PValueRecord,
    SequencingError,
    StreamSummary,
)
from .gamma import GammaSequence, gamma_at, make_gamma
from .metrics import (
    GroundTruth,
    MetricsReport,
    aggregate,
    bh_offline,
    score_stream,
    write_report_csv,
)
from .procedures import (
    PROCEDURES,
    PayoutCapError,
    WealthLedger,
    WealthOverdraftError,
    gai_step,
    make_procedure,
)
from .simlab import (
    SimConfig,
    StreamSample,
    gaussian_stream,
    ordering_scenario,
    run_experiment,
    run_procedure,
)
from .streamio import (
    SnapshotError,
    calibrate_w0,
    emit_report,
    ingest_csv,
    load_snapshot,
    load_stampede,
    next_level_preview,
    run_case_study,
    run_stream,
    save_snapshot,
)

__version__ = "0.1.0"

__all__ = [
    "DecisionEngine", "DecisionRecord", "PValueRecord", "ProcedureConfig",
    "ProtocolError", "SequencingError", "StreamSummary",
    "GammaSequence", "make_gamma", "gamma_at",
    "GroundTruth", "MetricsReport", "score_stream", "aggregate", "bh_offline",
    "write_report_csv",
    "PROCEDURES", "WealthLedger", "WealthOverdraftError", "PayoutCapError",
    "gai_step", "make_procedure",
    "SimConfig", "StreamSample", "gaussian_stream", "ordering_scenario",
    "run_experiment", "run_procedure",
    "SnapshotError", "run_stream", "save_snapshot", "load_snapshot",
    "next_level_preview", "ingest_csv", "emit_report", "load_stampede",
    "run_case_study", "calibrate_w0",
    "__version__",
]
