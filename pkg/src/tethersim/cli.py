"""Command-line entry point: validate, run, batch and plot-data."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, load_config, validate_config
from .eventlog import SERIES, LogFormatError, emit_plot_data, read_event_log
from .runner import run_scenario

EXIT_OK = 0
EXIT_MISSION = 1
EXIT_CONFIG = 2
EXIT_IO = 3

OUT_ENV = "TETHERSIM_OUT"

log = logging.getLogger("tethersim")


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "runs"))


def _load(path: Path):
    """Config plus violations; raises OSError / ConfigError for the caller to map to exit codes."""
    cfg = load_config(path)
    return cfg, validate_config(cfg)


def _summary(report) -> dict:
    keys = ("name", "seed", "outcome", "final_phase", "attempt_count", "sim_time", "diagnostic", "report_path")
    d = report.to_json()
    return {k: d[k] for k in keys}


def cmd_validate(args) -> int:
    try:
        _, problems = _load(args.config)
    except OSError as e:
        print(f"error: cannot read {args.config}: {e.strerror or e}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as e:
        print(f"error: {args.config}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if problems:
        for p in problems:
            print(f"violation: {p}")
        return EXIT_CONFIG
    print(f"{args.config}: ok")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg, problems = _load(args.config)
    except OSError as e:
        print(f"error: cannot read {args.config}: {e.strerror or e}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as e:
        print(f"error: {args.config}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if problems:
        for p in problems:
            print(f"violation: {p}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = args.out if args.out is not None else default_out_dir() / cfg.name
    try:
        report = run_scenario(cfg, out, base_dir=args.config.parent, check=False)
    except OSError as e:
        print(f"error: cannot write results to {out}: {e.strerror or e}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(_summary(report), default=float))
    return EXIT_OK if report.outcome == "success" else EXIT_MISSION


def _batch_job(job: tuple[str, int, int, str]) -> dict:
    path, index, seed, out = job
    cfg = load_config(path)
    cfg = replace(cfg, seed=seed)
    report = run_scenario(cfg, Path(out) / f"{index:03d}_{cfg.name}", base_dir=Path(path).parent, check=False)
    return _summary(report)


def cmd_batch(args) -> int:
    if not args.config_dir.is_dir():
        print(f"error: {args.config_dir} is not a directory", file=sys.stderr)
        return EXIT_IO
    paths = sorted(args.config_dir.glob("*.json"))
    if not paths:
        print(f"error: no *.json scenarios in {args.config_dir}", file=sys.stderr)
        return EXIT_IO
    jobs = []
    bad = False
    for i, p in enumerate(paths):
        try:
            cfg, problems = _load(p)
        except OSError as e:
            print(f"error: cannot read {p}: {e.strerror or e}", file=sys.stderr)
            return EXIT_IO
        except ConfigError as e:
            print(f"error: {p}: {e}", file=sys.stderr)
            bad = True
            continue
        for msg in problems:
            print(f"violation: {p.name}: {msg}", file=sys.stderr)
        bad |= bool(problems)
        base = args.seed if args.seed is not None else cfg.seed
        jobs.append((str(p), i, base + i, str(args.out if args.out is not None else default_out_dir())))
    if bad:
        return EXIT_CONFIG
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_batch_job, jobs))
        else:
            results = [_batch_job(j) for j in jobs]
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    for r in results:
        print(json.dumps(r, default=float))
    ok = sum(r["outcome"] == "success" for r in results)
    print(f"{ok}/{len(results)} missions succeeded", file=sys.stderr)
    return EXIT_OK if ok == len(results) else EXIT_MISSION


def cmd_plot_data(args) -> int:
    names = [s for part in args.series for s in part.split(",") if s]
    try:
        if args.report.suffix == ".jsonl":
            log_path = args.report
        else:
            meta = json.loads(args.report.read_text())
            log_path = Path(meta["log_path"]) if meta.get("log_path") else args.report.parent / "events.jsonl"
        entries = read_event_log(log_path)
    except (OSError, KeyError, json.JSONDecodeError, LogFormatError) as e:
        print(f"error: cannot read event log for {args.report}: {e}", file=sys.stderr)
        return EXIT_IO
    out = args.out if args.out is not None else args.report.parent / "plot"
    written = emit_plot_data(entries, names, out)
    for name, path in written.items():
        print(f"{name}: {path}")
    return EXIT_OK if written else EXIT_MISSION


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tethersim", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file and list every violation")
    p.add_argument("config", type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run one mission and write its logs")
    p.add_argument("config", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV}/<name> or runs/<name>)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="run every *.json scenario in a directory; seeds are seed + index")
    p.add_argument("config_dir", type=Path)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, help="base seed (default: each file's own seed)")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("plot-data", help="write time series CSVs from a run report")
    p.add_argument("report", type=Path, help="report.json (or events.jsonl)")
    p.add_argument("--series", nargs="+", required=True, help=f"any of: {', '.join(SERIES)}")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_plot_data)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
