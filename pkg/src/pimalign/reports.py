"""JSON and CSV output. Both are byte-stable for identical inputs."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

RUN_COLUMNS = ("config_hash", "placement", "factor", "time_s", "gcups", "bytes_internal",
               "bytes_external", "energy_j", "global_max_score", "winner_id")
SWEEP_COLUMNS = ("factor", "speedup", "gcups_mem", "gcups_proc", "energy_mem_j", "energy_proc_j")


def _clean(value):
    if isinstance(value, float) and (math.isinf(value) or math.isnan(value)):
        return str(value)
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def to_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(to_json(obj), encoding="utf-8")
    return path


def run_row(report, factor=1) -> dict:
    gm = report.global_max
    return {
        "config_hash": report.config_digest,
        "placement": report.placement,
        "factor": factor,
        "time_s": report.total_time_s,
        "gcups": report.gcups,
        "bytes_internal": report.bytes_internal,
        "bytes_external": report.bytes_external,
        "energy_j": report.energy.total_energy_j,
        "global_max_score": gm[0] if gm else "",
        "winner_id": gm[1] if gm else "",
    }


def sweep_row(row: dict) -> dict:
    return {k: row[k] for k in SWEEP_COLUMNS}


def to_csv(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def write_csv(path, rows, columns) -> Path:
    path = Path(path)
    path.write_text(to_csv(rows, columns), encoding="utf-8")
    return path
