"""CSV and JSON serialisation of run records, traces and summaries.

Every file starts with the resolved configuration: CSV files carry it as a
leading ``# config: {...}`` comment line, JSON files as a ``config`` key.
Column order is fixed by :data:`RECORD_COLUMNS` and
:data:`~noisysemo.diagnostics.TRACE_COLUMNS`.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict
from typing import Iterable, Sequence

from .diagnostics import TRACE_COLUMNS, RunRecord, Trace

SCHEMA_VERSION = 1

RECORD_COLUMNS = (
    "variant", "K", "n", "p_rule", "p", "trial", "seed", "budget",
    "T_total", "T_total_censored", "T_ex", "T_ex_censored", "iterations", "evaluations",
)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return repr(value)
    if value is None:
        return ""
    return str(value)


def _header(config: dict) -> str:
    return "# config: " + json.dumps(_clean(config), sort_keys=True, default=_json_default) + "\n"


def _clean(obj):
    """Replace infinite floats by the string ``"inf"``; ``json`` would emit non-standard ``Infinity``."""
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    if hasattr(obj, "__dataclass_fields__") and not isinstance(obj, type):
        obj = asdict(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _json_default(obj):
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    return str(obj)


def records_to_csv(rows: Iterable[tuple[str, int, RunRecord]], config: dict) -> str:
    """Render ``(p_rule, trial_index, record)`` rows as CSV text."""
    buf = io.StringIO()
    buf.write(_header(config))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for p_rule, trial, r in rows:
        w.writerow([
            _fmt(v) for v in (
                r.variant, r.K, r.n, p_rule, r.p, trial, r.seed, r.budget,
                r.T_total, r.T_total_censored, r.T_ex, r.T_ex_censored, r.iterations, r.evaluations,
            )
        ])
    return buf.getvalue()


def write_records_csv(path, rows, config: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(rows, config))


def read_records_csv(path) -> tuple[dict, list[dict]]:
    """Return ``(config, rows)``; numeric fields are converted back."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# config: "):
            raise ValueError(f"{path}: missing '# config:' header line")
        config = json.loads(first[len("# config: "):])
        rows = []
        for raw in csv.DictReader(fh):
            missing = set(RECORD_COLUMNS) - raw.keys()
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
            row = dict(raw)
            for key in ("n", "trial", "budget", "T_total", "T_ex", "iterations", "evaluations"):
                row[key] = int(row[key])
            for key in ("T_total_censored", "T_ex_censored"):
                row[key] = row[key] == "1"
            row["p"] = float(row["p"])
            row["K"] = float(row["K"])
            row["seed"] = int(row["seed"]) if row["seed"] else None
            rows.append(row)
    return config, rows


def record_from_row(row: dict) -> RunRecord:
    return RunRecord(
        variant=row["variant"], n=row["n"], p=row["p"], K=row["K"], seed=row["seed"],
        budget=row["budget"], T_total=row["T_total"], T_total_censored=row["T_total_censored"],
        T_ex=row["T_ex"], T_ex_censored=row["T_ex_censored"], iterations=row["iterations"],
        evaluations=row["evaluations"],
    )


def trace_to_csv(trace: Trace, config: dict) -> str:
    buf = io.StringIO()
    buf.write(_header(config))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    cols = [trace[c].tolist() for c in TRACE_COLUMNS]
    for row in zip(*cols):
        t, L, d, ell, j, cov, noisy, ext = row
        w.writerow([t, L, d, "" if ell < 0 else ell, "" if j < 0 else j, cov, "" if noisy < 0 else noisy, ext])
    return buf.getvalue()


def write_trace_csv(path, trace: Trace, config: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(trace_to_csv(trace, config))


def record_to_dict(record: RunRecord, include_trace: bool = False) -> dict:
    d = {k: getattr(record, k) for k in (
        "variant", "n", "p", "K", "seed", "budget", "T_total", "T_total_censored",
        "T_ex", "T_ex_censored", "iterations", "evaluations",
    )}
    if isinstance(d["K"], float) and math.isinf(d["K"]):
        d["K"] = "inf"
    d["population"] = list(record.population)
    if include_trace and record.trace is not None:
        d["trace"] = [
            {name: v for name, v in asdict(s).items()} for s in record.trace.samples()
        ]
    return d


def write_json(path, config: dict, **sections) -> None:
    payload = {"schema_version": SCHEMA_VERSION, "config": config}
    payload.update(sections)
    with open(path, "w") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=False, default=_json_default, allow_nan=False)
        fh.write("\n")


def summaries_to_json(summaries: Sequence) -> list[dict]:
    return [s.to_dict() for s in summaries]
