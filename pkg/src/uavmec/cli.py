"""``uavmec`` command line: one pipeline per invocation.

Exit codes: 0 success, 1 configuration or contract error, 2 usage error.
The output directory is ``$AMEC_OUT`` if set, else ``--out``, else the run
config's ``output_dir``.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from . import pipelines as pl
from .env import ConfigError
from .geo import CleanReport, SyntheticTraceParams, format_points, gen_synthetic_traces, parse_and_clean, traces_to_csv
from .io import CheckpointIntegrityError, CheckpointVersionError
from .tensorcore import ContractError


class CLIError(Exception):
    """Invalid invocation detected after argument parsing (exit 1)."""


def _out_dir(args, run: pl.RunConfig | None = None) -> Path:
    env = os.environ.get("AMEC_OUT")
    if env:
        out = Path(env)
    elif args.out:
        out = Path(args.out)
    elif run is not None:
        out = Path(run.output_dir)
        if not out.is_absolute():
            out = run.base_dir / out
    else:
        out = Path("out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _need(args, flag: str) -> str:
    value = getattr(args, flag.replace("-", "_"))
    if value is None:
        raise CLIError(f"{args.command}: missing required flag --{flag}")
    return value


def _run(args) -> pl.RunConfig:
    run = pl.load_run_config(_need(args, "config"))
    if getattr(args, "seed", None) is not None:
        run.seed = args.seed
    return run


def _fmt(d: dict) -> str:
    parts = []
    for k, v in d.items():
        if isinstance(v, float):
            v = "nan" if math.isnan(v) else f"{v:.6g}"
        parts.append(f"{k}={v}")
    return " ".join(parts)


def cmd_ingest(args) -> str:
    src = Path(_need(args, "input"))
    if not src.exists():
        raise ConfigError(f"--input {src} does not exist")
    report = CleanReport()
    with open(src, encoding="utf-8") as fh:
        cleaned = parse_and_clean(fh, args.max_gap, report)
    out = _out_dir(args) / "traces_clean.csv"
    out.write_text(format_points(cleaned), encoding="utf-8")
    return _fmt({"users": len(cleaned), "segments": report.segments,
                 "malformed": report.malformed_rows, "duplicates": report.duplicates_dropped,
                 "interpolated": report.interpolated_points, "path": str(out)})


def cmd_synth(args) -> str:
    if args.users < 1 or args.length < 1:
        raise ConfigError("--users and --length must be positive")
    params = SyntheticTraceParams() if args.extent is None else SyntheticTraceParams(extent=args.extent)
    traces = gen_synthetic_traces(args.users, args.length, args.seed, params)
    out = _out_dir(args) / "traces.csv"
    out.write_text(traces_to_csv(traces), encoding="utf-8")
    return _fmt({"users": args.users, "length": args.length, "seed": args.seed, "path": str(out)})


def cmd_train_predictor(args) -> str:
    run = _run(args)
    return _fmt(pl.run_train_predictor(run, _out_dir(args, run), kind=args.kind))


def cmd_eval_predictor(args) -> str:
    ckpt = Path(_need(args, "checkpoint"))
    run = _run(args)
    return _fmt(pl.run_eval_predictor(run, ckpt, _out_dir(args, run)))


def cmd_train_agent(args) -> str:
    run = _run(args)
    pred = Path(args.predictor) if args.predictor else None
    return _fmt(pl.run_train_agent(run, _out_dir(args, run), predictor_ckpt=pred))


def cmd_eval_agent(args) -> str:
    ckpt = Path(_need(args, "checkpoint"))
    run = _run(args)
    return _fmt(pl.run_eval_agent(run, ckpt, _out_dir(args, run)))


def cmd_baseline(args) -> str:
    run = _run(args)
    return _fmt(pl.run_baseline(run, args.method, _out_dir(args, run)))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavmec", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, config=True, seed=True):
        sp = sub.add_parser(name)
        sp.set_defaults(fn=fn)
        sp.add_argument("--out", help="output directory (overridden by $AMEC_OUT)")
        if config:
            sp.add_argument("--config", help="run config JSON")
        if seed:
            sp.add_argument("--seed", type=int, help="override the config seed")
        return sp

    sp = add("ingest", cmd_ingest, config=False, seed=False)
    sp.add_argument("--input", help="raw user_id,timestamp,lat,lon CSV")
    sp.add_argument("--max-gap", type=int, default=10, help="longest gap (s) to interpolate")

    sp = add("synth", cmd_synth, config=False, seed=False)
    sp.add_argument("--users", type=int, required=True)
    sp.add_argument("--length", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--extent", type=float)

    sp = add("train-predictor", cmd_train_predictor)
    sp.add_argument("--kind", choices=sorted(pl.MODEL_KINDS))
    sp = add("eval-predictor", cmd_eval_predictor)
    sp.add_argument("--checkpoint")
    sp = add("train-agent", cmd_train_agent)
    sp.add_argument("--predictor", help="predictor checkpoint for the augmented state")
    sp = add("eval-agent", cmd_eval_agent)
    sp.add_argument("--checkpoint")
    sp = add("baseline", cmd_baseline)
    sp.add_argument("--method", required=True, choices=sorted(pl.BASELINE_KINDS))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        print(f"{args.command}: {args.fn(args)}")
    except (CLIError, ConfigError, ContractError, CheckpointIntegrityError,
            CheckpointVersionError, OSError, KeyError, ValueError) as exc:
        print(f"uavmec {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
