"""Command-line interface.

Subcommands: ``run`` (process a stream with checkpointing), ``preview``
(next level from a snapshot), ``simulate`` (replicated experiment grids),
``casestudy stampede`` (bundled platform-trial reproduction) and
``calibrate-w0`` (grid-search the initial wealth against the published
case-study results).

Exit codes: 0 success, 2 input error, 3 state/integrity error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .core import ProcedureConfig, ProtocolError, SequencingError
from .procedures import PROCEDURES, make_procedure
from .simlab import PI1_GRID_DEFAULT, SimConfig, run_experiment
from .streamio import (
    SnapshotError,
    StateLock,
    calibrate_w0,
    emit_report,
    ingest_csv,
    load_snapshot,
    next_level_preview,
    parse_stream_lines,
    run_case_study,
    run_stream,
)


def _add_procedure_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--procedure", choices=sorted(PROCEDURES), help="level-assignment rule")
    p.add_argument("--alpha", type=float, default=0.05, help="target error level (default 0.05)")
    p.add_argument("--w0", default="auto",
                   help='initial wealth, a number or "auto" for the procedure default')
    p.add_argument("--lambda", dest="lambda_", type=float, default=None,
                   help="candidate threshold (saffron/addis)")
    p.add_argument("--eta", type=float, default=None, help="discarding threshold (addis)")
    p.add_argument("--gamma", default=None,
                   help='spending sequence: "lord-default" | "power:1.6" | '
                        '"bounded:20" | "file:<path>" (optional ":M" horizon suffix)')


def _build_engine(args) -> object:
    if args.procedure is None:
        raise ValueError("--procedure is required when not resuming from --state")
    w0 = None if str(args.w0).lower() == "auto" else float(args.w0)
    cfg = ProcedureConfig(alpha=args.alpha, w0=w0, lambda_=args.lambda_,
                          eta=args.eta, gamma=args.gamma)
    return make_procedure(args.procedure, cfg)


def _open_records(args, start_index: int):
    if args.input in (None, "-"):
        return parse_stream_lines(sys.stdin)
    fmt = args.format
    if fmt == "auto":
        fmt = "csv" if args.input.lower().endswith(".csv") else "jsonl"
    if fmt == "csv":
        colmap = {"p": args.p_col, "label": args.label_col, "batch": args.batch_col}
        return ingest_csv(args.input, colmap=colmap, start_index=start_index)
    with open(args.input, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    return parse_stream_lines(lines)


def _cmd_run(args) -> int:
    resuming = args.state is not None and os.path.exists(args.state)
    if resuming:
        engine = load_snapshot(args.state)
        if args.procedure is not None and args.procedure != engine.name:
            raise ValueError(
                f"state file holds a {engine.name!r} run; --procedure {args.procedure!r} conflicts"
            )
    else:
        engine = _build_engine(args)

    records = _open_records(args, start_index=engine.t)
    out_fh = sys.stdout if args.out in (None, "-") else open(args.out, "w", encoding="utf-8")
    try:
        if args.state is not None:
            with StateLock(args.state):
                run_stream(records, engine, snapshot_path=args.state, out=out_fh)
        else:
            run_stream(records, engine, out=out_fh)
    finally:
        if out_fh is not sys.stdout:
            out_fh.close()
    return 0


def _cmd_preview(args) -> int:
    level = next_level_preview(args.state)
    print(repr(level))
    return 0


def _load_sim_config(path: str) -> dict:
    if path.lower().endswith(".toml"):
        try:
            import tomllib
        except ImportError:
            raise ValueError(
                "TOML configs need Python >= 3.11 (tomllib); use JSON here"
            ) from None
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _cmd_simulate(args) -> int:
    doc = _load_sim_config(args.config) if args.config else {}
    pi1_grid = doc.pop("pi1_grid", None)
    if pi1_grid is None and "pi1" not in doc:
        pi1_grid = PI1_GRID_DEFAULT
    eps = doc.pop("eps", 0.1)
    known = {f.name for f in dataclasses.fields(SimConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown simulation config keys: {sorted(unknown)}")
    if "f0" in doc:
        doc["f0"] = tuple(doc["f0"])
    if "f1" in doc:
        doc["f1"] = tuple(doc["f1"])
    if "procedures" in doc:
        doc["procedures"] = tuple(doc["procedures"])
    cfg = SimConfig(**doc)
    if args.replicates is not None:
        cfg = dataclasses.replace(cfg, replicates=args.replicates)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    result = run_experiment(cfg, pi1_grid=pi1_grid, eps=eps)
    if args.out in (None, "-"):
        result.write_csv(sys.stdout)
    else:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            result.write_csv(fh)
    return 0


def _cmd_casestudy(args) -> int:
    if args.name != "stampede":
        raise ValueError(f"unknown case study {args.name!r} (available: stampede)")
    result = run_case_study(alpha=args.alpha, horizon=args.horizon)
    text = emit_report(result, fmt=args.format)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def _cmd_calibrate(args) -> int:
    manifest = calibrate_w0(alpha=args.alpha, horizon=args.horizon)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    for name, info in manifest["procedures"].items():
        status = "matched" if info.get("matched") else "NO MATCH"
        rule = info.get("w0_rule")
        extra = f" (w0 = {rule})" if rule else ""
        print(f"{name}: {status}{extra}")
    print(("all procedures matched" if manifest["all_matched"]
           else "calibration incomplete; see the search section of the manifest"))
    print(f"manifest written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alphastream",
        description="Online multiple hypothesis testing with streaming error control",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="process a p-value stream")
    _add_procedure_flags(p_run)
    p_run.add_argument("--input", default=None,
                       help="input path (.jsonl protocol lines or .csv); '-' or absent = stdin")
    p_run.add_argument("--format", choices=("auto", "jsonl", "csv"), default="auto")
    p_run.add_argument("--p-col", default="p", help="CSV column holding p-values")
    p_run.add_argument("--label-col", default="label")
    p_run.add_argument("--batch-col", default="batch")
    p_run.add_argument("--state", default=None,
                       help="snapshot file; resumes if it exists, updated after every step")
    p_run.add_argument("--out", default=None, help="decision log path (default stdout)")
    p_run.set_defaults(func=_cmd_run)

    p_prev = sub.add_parser("preview", help="show the level for the next hypothesis")
    p_prev.add_argument("--state", required=True, help="snapshot file")
    p_prev.set_defaults(func=_cmd_preview)

    p_sim = sub.add_parser("simulate", help="run a replicated experiment grid")
    p_sim.add_argument("--config", default=None, help="JSON (or TOML on 3.11+) experiment config")
    p_sim.add_argument("--replicates", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--out", default=None, help="CSV output path (default stdout)")
    p_sim.set_defaults(func=_cmd_simulate)

    p_case = sub.add_parser("casestudy", help="reproduce a bundled case study")
    p_case.add_argument("name", help="case study name (stampede)")
    p_case.add_argument("--alpha", type=float, default=0.05)
    p_case.add_argument("--horizon", type=int, default=20, help="a-priori bound M")
    p_case.add_argument("--format", choices=("text", "csv"), default="text")
    p_case.add_argument("--out", default=None)
    p_case.set_defaults(func=_cmd_casestudy)

    p_cal = sub.add_parser("calibrate-w0", help="grid-search w0 against the case-study targets")
    p_cal.add_argument("--alpha", type=float, default=0.05)
    p_cal.add_argument("--horizon", type=int, default=20)
    p_cal.add_argument("--out", default="stampede_manifest.json")
    p_cal.set_defaults(func=_cmd_calibrate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args) or 0
    except BrokenPipeError:
        return 0
    except (SequencingError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SnapshotError, ProtocolError) as exc:
        print(f"state error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
