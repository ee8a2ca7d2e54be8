"""Command-line entry point: run, sweep, render, selftest."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import selftest
from .render import SNAPSHOT_DIR, RenderError, render_trace, snapshot_name
from .sim import CSV_HEADER, ConfigError, load_config, run_experiment, run_sweep, write_results_csv

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
TRACE_FILE = "trace.log"
RESULTS_FILE = "results.csv"
SUMMARY_FILE = "summary.csv"
SUMMARY_HEADER = "Number of Robots,Mean Number of Iterations,Mean Map Completion Percentage"


def _number_list(text: str, kind):
    try:
        values = [kind(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _write_log(lines, path: Path) -> None:
    path.write_text("".join(line + "\n" for line in lines))


def summary_rows(records) -> list[str]:
    """Per-robot-count means over the rows as written (percentages already at two decimals)."""
    groups: dict[int, list] = {}
    for rec in records:
        groups.setdefault(rec.num_robots, []).append(rec)
    rows = []
    for n, recs in groups.items():
        iters = sum(r.iterations for r in recs) / len(recs)
        pct = sum(float(f"{r.completion_pct:.2f}") for r in recs) / len(recs)
        rows.append(f"{n},{iters:.4f},{pct:.4f}")
    return rows


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    out = Path(args.out)
    result = run_experiment(config, render=args.render)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv([result.record], out / RESULTS_FILE)
    _write_log(result.log, out / TRACE_FILE)
    if args.render:
        snaps = out / SNAPSHOT_DIR
        snaps.mkdir(exist_ok=True)
        for i, data in enumerate(result.snapshots, 1):
            (snaps / snapshot_name(i)).write_bytes(data)
    rec = result.record
    print(f"{rec.num_robots} robots, {rec.wifi_range:g} m: {rec.completion_pct:.2f}% in {rec.iterations} iterations")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    results = run_sweep(config, args.robots, args.ranges, workers=args.workers)
    out = Path(args.out)
    traces = out / "traces"
    traces.mkdir(parents=True, exist_ok=True)
    records = [r.record for r in results]
    write_results_csv(records, out / RESULTS_FILE)
    for r in results:
        _write_log(r.log, traces / f"robots{r.record.num_robots}_range{r.record.wifi_range:g}.log")
    summary = summary_rows(records)
    (out / SUMMARY_FILE).write_text(SUMMARY_HEADER + "\n" + "".join(s + "\n" for s in summary))
    print(CSV_HEADER)
    for rec in records:
        print(rec.csv_row())
    print(SUMMARY_HEADER)
    for s in summary:
        print(s)
    return EXIT_OK


def cmd_render(args) -> int:
    written = render_trace(args.trace, args.out)
    print(f"wrote {len(written)} images to {args.out}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    return selftest.main(args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fireline", description="Relay-constrained multi-robot exploration simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="fireline-out")
    p.add_argument("--render", action="store_true", help="also write per-iteration map snapshots")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="robot count x WiFi range sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--robots", type=lambda s: _number_list(s, int), default=[1, 2, 3, 4])
    p.add_argument("--ranges", type=lambda s: _number_list(s, float), default=[2.0, 3.0, 4.0, 5.0])
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="fireline-out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("render", help="draw per-iteration images from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", default="fireline-render")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("selftest", help="run the oracle suites")
    p.add_argument("--out")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, RenderError) as exc:
        print(f"fireline: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"fireline: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
