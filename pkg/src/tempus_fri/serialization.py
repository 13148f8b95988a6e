"""
Text formats for trigger sets, reconstructions and experiment records.

Floats are written with ``repr`` so every file round-trips exactly, and no
timestamps or host details are written, so equal inputs give equal bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .experiments import TrialRecord
from .tem import Machine, TriggerSet

__all__ = [
    "RECORD_COLUMNS",
    "config_hash",
    "emit_results",
    "load_results",
    "records_to_csv",
    "records_from_csv",
    "write_metadata",
    "emit_summary",
    "triggers_to_csv",
    "triggers_from_csv",
    "write_json",
]

RECORD_COLUMNS = ("trial", "sigma", "machine", "nmse", "residual", "converged", "runtime_ms", "true_shifts", "est_shifts")
TRIGGER_COLUMNS = ("machine", "channel", "type", "index", "time", "value")


def _f(x):
    return "" if x is None else repr(float(x))


def _floats(s):
    return tuple(float(v) for v in s.split(";")) if s else ()


def _open_for_write(path):
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def config_hash(raw: dict) -> str:
    """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def records_to_csv(records: Sequence[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in records:
        w.writerow(
            [
                r.trial,
                _f(r.sigma),
                r.machine,
                _f(r.nmse),
                _f(r.residual),
                int(r.converged),
                _f(r.runtime_ms),
                ";".join(repr(float(v)) for v in r.true_shifts),
                ";".join(repr(float(v)) for v in r.est_shifts),
            ]
        )
    return buf.getvalue()


def records_from_csv(text: str) -> List[TrialRecord]:
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        out.append(
            TrialRecord(
                trial=int(row["trial"]),
                sigma=float(row["sigma"]),
                machine=row["machine"],
                nmse=float(row["nmse"]),
                residual=float(row["residual"]),
                converged=bool(int(row["converged"])),
                true_shifts=_floats(row["true_shifts"]),
                est_shifts=_floats(row["est_shifts"]),
                runtime_ms=float(row["runtime_ms"]) if row["runtime_ms"] else None,
            )
        )
    return out


def _record_dict(r: TrialRecord):
    d = asdict(r)
    d["true_shifts"] = list(d["true_shifts"])
    d["est_shifts"] = list(d["est_shifts"])
    return d


def write_json(obj, path):
    with _open_for_write(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def emit_results(records: Sequence[TrialRecord], path, format: str = "csv") -> None:
    """Write records as CSV (one row per record) or a JSON list."""
    if format == "csv":
        with _open_for_write(path) as fh:
            fh.write(records_to_csv(records))
    elif format == "json":
        write_json([_record_dict(r) for r in records], path)
    else:
        raise ValueError(f"unknown format {format!r}")


def load_results(path, format: Optional[str] = None) -> List[TrialRecord]:
    path = Path(path)
    fmt = format or ("json" if path.suffix.lower() == ".json" else "csv")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if fmt == "csv":
        return records_from_csv(text)
    out = []
    for d in json.loads(text):
        d = dict(d)
        d["true_shifts"] = tuple(float(v) for v in d["true_shifts"])
        d["est_shifts"] = tuple(float(v) for v in d["est_shifts"])
        out.append(TrialRecord(**d))
    return out


def metadata_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_metadata(path, raw_config: dict, seed: int, resolved: dict, notes: Sequence[str] = ()) -> Path:
    """Sidecar ``<path>.meta.json`` holding everything needed to rerun."""
    from . import __version__

    meta = {
        "config_sha256": config_hash(raw_config),
        "master_seed": int(seed),
        "version": __version__,
        "config": raw_config,
        "resolved": resolved,
        "notes": list(notes),
    }
    out = metadata_path(path)
    write_json(meta, out)
    return out


def emit_summary(rows: Sequence[dict], path) -> None:
    cols = ("sigma", "machine", "trials", "failed", "converged", "nmse_mean", "nmse_std", "nmse_median")
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_f(r[c]) if isinstance(r[c], float) else r[c] for c in cols])


def triggers_to_csv(entries: Iterable[Tuple[str, int, TriggerSet, np.ndarray]]) -> str:
    """Rows of (machine, channel, type, index, time, value).

    ``value`` is the measurement tied to the trigger: r(t_n) for C-TEM, the
    local integral over [t_n, t_{n+1}] for IF-TEM (empty on the last one).
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIGGER_COLUMNS)
    for name, ch, trig, values in entries:
        vals = list(values)
        for n, t in enumerate(trig.times):
            v = _f(vals[n]) if n < len(vals) else ""
            w.writerow([name, ch, trig.machine.value, n, repr(float(t)), v])
    return buf.getvalue()


def triggers_from_csv(text: str, period_T: float = 1.0) -> Dict[Tuple[str, int], TriggerSet]:
    """Trigger sets keyed by (machine, channel), in file order."""
    groups: Dict[Tuple[str, int], list] = {}
    kinds: Dict[Tuple[str, int], str] = {}
    for row in csv.DictReader(io.StringIO(text)):
        key = (row["machine"], int(row["channel"]))
        groups.setdefault(key, []).append((int(row["index"]), float(row["time"])))
        kinds[key] = row["type"]
    out = {}
    for key, items in groups.items():
        items.sort()
        out[key] = TriggerSet([t for _, t in items], period_T, Machine(kinds[key]))
    return out
