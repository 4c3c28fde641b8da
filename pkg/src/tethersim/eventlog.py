"""JSON Lines event logs, trajectory CSVs and plot-ready series."""

from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from .mission import EventLogEntry

log = logging.getLogger(__name__)

SCHEMA_NAME = "tethersim.events"
SCHEMA_VERSION = 1
HEADER = {"schema": SCHEMA_NAME, "version": SCHEMA_VERSION, "fields": ["time", "phase", "kind", "payload"]}
TRAJECTORY_HEADER = ("time", "x", "y", "z", "yaw")
SERIES = ("clearance", "separation", "tracking_error", "tether_length", "head_error")


class LogFormatError(ValueError):
    pass


def clean(value, digits: int = 6):
    """JSON-safe copy with rounded floats and NaN/inf mapped to null."""
    if isinstance(value, dict):
        return {str(k): clean(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [clean(v, digits) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return round(v, digits) if math.isfinite(v) else None
    return value


def entry_line(e: EventLogEntry) -> str:
    rec = {"time": round(float(e.time), 9), "phase": e.phase, "kind": e.kind, "payload": clean(e.payload)}
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


def log_lines(entries) -> list[str]:
    return [json.dumps(HEADER, sort_keys=True, separators=(",", ":"))] + [entry_line(e) for e in entries]


def write_event_log(path: str | Path, entries) -> Path:
    path = Path(path)
    path.write_text("\n".join(log_lines(entries)) + "\n")
    return path


def read_event_log(path: str | Path) -> list[EventLogEntry]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        return []
    head = json.loads(lines[0])
    if head.get("schema") != SCHEMA_NAME:
        raise LogFormatError(f"{path}: not an event log (header {head!r})")
    if head.get("version") != SCHEMA_VERSION:
        raise LogFormatError(f"{path}: unsupported log version {head.get('version')}")
    out = []
    for n, line in enumerate(lines[1:], start=2):
        try:
            r = json.loads(line)
            out.append(EventLogEntry(r["time"], r["phase"], r["kind"], r["payload"]))
        except (json.JSONDecodeError, KeyError) as exc:
            raise LogFormatError(f"{path}: line {n}: {exc}") from exc
    return out


def write_trajectory(path: str | Path, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for r in rows:
            w.writerow([repr(round(float(v), 9)) for v in r])
    return path


def read_trajectory(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def series_from_log(entries, name: str) -> np.ndarray:
    """(n, 2) array of time and value for every tick that reported ``name``."""
    rows = [(e.time, e.payload[name]) for e in entries
            if e.kind == "tick" and e.payload.get(name) is not None and math.isfinite(e.payload[name])]
    return np.array(rows, dtype=float).reshape(-1, 2)


def emit_plot_data(entries, which, out_dir: str | Path) -> dict[str, Path]:
    """Two-column ``time,<name>`` CSV per requested series; unknown or empty series only warn."""
    out_dir = Path(out_dir)
    entries = list(entries)
    written: dict[str, Path] = {}
    if not entries:
        log.warning("empty event log; no plot data written")
        return written
    for name in which:
        if name not in SERIES:
            log.warning("unknown series %r (known: %s)", name, ", ".join(SERIES))
            continue
        data = series_from_log(entries, name)
        if len(data) == 0:
            log.warning("series %r has no samples", name)
            continue
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{name}.csv"
        np.savetxt(path, data, delimiter=",", header=f"time,{name}", comments="", fmt="%.9g")
        written[name] = path
    return written
