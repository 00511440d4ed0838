"""Command line front end: ``linrecon run|score|tradeoff``.

Exit codes: 0 success, 1 configuration or input error, 2 some games or
cells failed.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path

from .experiment import (ConfigError, ExperimentConfig, ExperimentReport, TradeoffRow, load_config,
                         run_experiment, score_records, tradeoff_table)

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linrecon", description="Attribute inference games against synthetic data.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="play every cell of an experiment config")
    run.add_argument("config", help="experiment config (JSON)")
    run.add_argument("--seed", type=int, help="override master_seed")
    run.add_argument("--workers", type=int, help="override the worker count")
    run.add_argument("--out", help="override the output directory")
    run.add_argument("--quiet", action="store_true", help="no per-cell progress on stderr")

    sc = sub.add_parser("score", help="recompute score summaries from records.jsonl")
    sc.add_argument("records")
    sc.add_argument("--out", help="write the JSON here instead of stdout")

    tr = sub.add_parser("tradeoff", help="privacy/utility table from report.json")
    tr.add_argument("report")
    tr.add_argument("--utility-threshold", type=float, help="errors must stay below this (default from report)")
    tr.add_argument("--privacy-threshold", type=float, help="best attack must stay below this (default from report)")
    tr.add_argument("--out", help="write CSV here instead of stdout")
    return p


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["out"] = str(Path(args.out).resolve())
    if overrides:
        cfg = ExperimentConfig.from_json({**cfg.to_json(), **overrides}, base_dir=cfg.base_dir)

    def progress(cell):
        if not args.quiet:
            eps = "" if cell["epsilon"] is None else f" eps={cell['epsilon']:g}"
            accs = " ".join(f"{k}={v['accuracy']:.3f}" for k, v in cell["scores"].items())
            print(f"{cell['generator']} m={cell['m']}{eps}: {accs} failed={cell['failed']}", file=sys.stderr)

    report = run_experiment(cfg, progress)
    return EXIT_PARTIAL if report.failures else EXIT_OK


def _cmd_score(args) -> int:
    try:
        cells = score_records(args.records)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"cannot read records: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(json.dumps(cells, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_PARTIAL if any(c["failed"] for c in cells) else EXIT_OK


def _cmd_tradeoff(args) -> int:
    try:
        obj = json.loads(Path(args.report).read_text(encoding="utf-8"))
        report = ExperimentReport.from_json(obj)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"cannot read report: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    thr = report.config.get("thresholds", {})
    u = args.utility_threshold if args.utility_threshold is not None else thr.get("utility", 0.20)
    p = args.privacy_threshold if args.privacy_threshold is not None else thr.get("privacy", 0.60)
    rows = tradeoff_table(report, utility_threshold=u, privacy_threshold=p)
    buf = io.StringIO()
    fields = [f.name for f in dataclasses.fields(TradeoffRow)]
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    _emit(buf.getvalue(), args.out)
    return EXIT_PARTIAL if report.failures else EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return {"run": _cmd_run, "score": _cmd_score, "tradeoff": _cmd_tradeoff}[args.command](args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
