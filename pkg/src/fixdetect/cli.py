"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 malformed input, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from typing import Optional, Sequence

from .causal import FailureGrouping, group_failures, split_by_version
from .core import MethodId, PatchIntervention, read_runs_jsonl, write_runs_jsonl
from .cpd import ChangeEvent, detect_all, detect_changepoint
from .errors import FixDetectError
from .evaluate import (
    bench_detect,
    score_detection,
    score_grouping,
    truth_events_from_dict,
    truth_grouping_from_dict,
)
from .pipeline import PipelineConfig, dumps_report, run_pipeline
from .series import DegreeSeries
from .sim import Scenario, simulate, truth_document

log = logging.getLogger("fixdetect")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_json(path: str, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FixDetectError(f"{what} {path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


@contextmanager
def _output(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _write_json(doc, path: Optional[str]) -> None:
    with _output(path) as fh:
        fh.write(json.dumps(doc, indent=2))
        fh.write("\n")


def _overrides(args) -> dict:
    keys = ("measure", "threshold", "min_runs_per_version", "identity_mode", "alpha", "min_segment", "test",
            "stride", "correction", "bucket_width_ms", "min_runs_per_bucket", "fixed_mean_ceiling")
    return {k: getattr(args, k, None) for k in keys}


def _pipeline_config(args) -> PipelineConfig:
    doc = _load_json(args.config, "config") if getattr(args, "config", None) else {}
    return PipelineConfig.from_dict(doc, _overrides(args))


def _load_patch(path: str, strict: bool) -> PatchIntervention:
    return PatchIntervention.from_dict(_load_json(path, "patch"), strict)


# -- subcommands ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    doc = _load_json(args.scenario, "scenario")
    if args.seed is not None and isinstance(doc, dict):
        doc = {**doc, "seed": args.seed}
    scenario = Scenario.from_dict(doc, strict=not args.lenient)
    runs, _ = simulate(scenario)
    with open(args.out_runs, "w", encoding="utf-8", newline="\n") as fh:
        write_runs_jsonl(runs, fh)
    _write_json(truth_document(scenario), args.out_truth)
    log.info("wrote %d runs to %s", len(runs), args.out_runs)
    return EXIT_OK


def cmd_group(args) -> int:
    strict = not args.lenient
    cfg = _pipeline_config(args).grouping
    runs = read_runs_jsonl(args.runs, strict)
    patch = _load_patch(args.patch, strict)
    base, upd = split_by_version(runs, patch)
    grouping = group_failures(base, upd, patch, cfg)
    _write_json(grouping.to_dict(), args.out)
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _pipeline_config(args).cpd
    series = DegreeSeries.from_dict(_load_json(args.series, "series"), strict=not args.lenient)
    if args.single:
        event = detect_changepoint(series, cfg)
        events = [] if event is None else [event]
    else:
        events = detect_all(series, cfg)
    _write_json({"events": [e.to_dict() for e in events]}, args.out)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    strict = not args.lenient
    cfg = _pipeline_config(args)
    runs = read_runs_jsonl(args.runs, strict)
    patch = _load_patch(args.patch, strict)
    report = run_pipeline(runs, patch, cfg)
    with _output(args.out) as fh:
        fh.write(dumps_report(report))
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = _load_json(args.pred, "prediction")
    truth = _load_json(args.truth, "truth")
    if not isinstance(pred, dict):
        raise FixDetectError("prediction: expected a JSON object")
    if "entries" in pred:
        candidates = None
        if args.candidates:
            candidates = {MethodId(m) for m in args.candidates.split(",") if m}
        scores = score_grouping(FailureGrouping.from_dict(pred), truth_grouping_from_dict(truth), candidates)
        doc = {"kind": "grouping", "scores": scores.to_dict()}
    elif "events" in pred:
        events = sorted((ChangeEvent.from_dict(e) for e in pred["events"]), key=lambda e: e.index)
        gt = truth_events_from_dict(truth)
        if args.test:
            gt = [e for e in gt if e.affected_test == args.test]
        doc = {"kind": "detection", "tolerance": args.tolerance, **score_detection(events, gt, args.tolerance).to_dict()}
    else:
        raise FixDetectError("prediction: expected an 'entries' (grouping) or 'events' (detection) document")
    _write_json(doc, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _pipeline_config(args).cpd
    result = bench_detect(args.n, cfg, args.seed)
    _write_json(result.to_dict(), args.out)
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def _add_common(p, *, grouping=False, cpd=False, series=False):
    p.add_argument("--config", help="PipelineConfig JSON file; flags override its values")
    p.add_argument("--lenient", action="store_true", help="ignore unknown fields in input records")
    p.add_argument("--out", default="-", help="output path (default: stdout)")
    if grouping:
        p.add_argument("--measure", choices=["pearl_predicate", "difference", "ratio"])
        p.add_argument("--threshold", type=float)
        p.add_argument("--min-runs-per-version", dest="min_runs_per_version", type=int)
        p.add_argument("--identity", dest="identity_mode", choices=["trace", "test_method"])
    if cpd:
        p.add_argument("--alpha", type=float)
        p.add_argument("--min-segment", dest="min_segment", type=int)
        p.add_argument("--test", choices=["mann_whitney_u", "kolmogorov_smirnov"])
        p.add_argument("--stride", type=int)
        p.add_argument("--correction", choices=["bonferroni", "none"])
    if series:
        p.add_argument("--bucket-width-ms", dest="bucket_width_ms", type=int)
        p.add_argument("--min-runs-per-bucket", dest="min_runs_per_bucket", type=int)
        p.add_argument("--fixed-mean-ceiling", dest="fixed_mean_ceiling", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fixdetect", description="Fix detection over flaky test streams.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate runs JSONL and truth JSON from a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out-runs", required=True)
    p.add_argument("--out-truth", required=True)
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("group", help="group failures to causing methods")
    p.add_argument("--runs", required=True)
    p.add_argument("--patch", required=True)
    _add_common(p, grouping=True)
    p.set_defaults(func=cmd_group)

    p = sub.add_parser("detect", help="detect changepoints in a degree series")
    p.add_argument("--series", required=True)
    p.add_argument("--single", action="store_true", help="report only the best single split")
    _add_common(p, cpd=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("pipeline", help="grouping, series, detection and verdicts in one pass")
    p.add_argument("--runs", required=True)
    p.add_argument("--patch", required=True)
    _add_common(p, grouping=True, cpd=True, series=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("eval", help="score a grouping or detection against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--tolerance", type=int, default=2)
    p.add_argument("--candidates", help="comma-separated candidate methods (enables accuracy)")
    p.add_argument("--test", help="restrict truth events to one test id")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time detect_all on a synthetic series")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p, cpd=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (FixDetectError, OSError) as exc:
        print(f"fixdetect {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"fixdetect {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
