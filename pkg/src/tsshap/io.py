"""File formats: series CSV in, long-format attribution / event / schedule tables out.

Floats are written with ``repr`` precision so that every file read back by
the functions here reproduces the in-memory arrays exactly.
"""
from __future__ import annotations

import contextlib
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import Attribution, Mode, PlayerIndexing, TSShapError, efficiency_gap
from .events import EventSeries, Normalization
from .time_consistent import ImputationSchedule


class ValidationError(TSShapError, ValueError):
    error_id = "E_VALIDATION"


ATTRIBUTION_COLUMNS = ("t", "output", "block", "feature_index", "feature", "lag", "n_lags", "phi",
                       "base_value", "fx", "efficiency_gap")
EVENT_COLUMNS = ("timestep", "feature", "event_importance", "count")
SCHEDULE_COLUMNS = ("table", "output", "k", "feature", "value")


@contextlib.contextmanager
def _sink(target):
    """Open ``target`` for writing; ``"-"``/``None`` mean stdout, file objects pass through."""
    if target in (None, "-"):
        yield sys.stdout
    elif hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="") as fh:
            yield fh


def read_series(path, columns: Optional[Sequence[str]] = None) -> tuple:
    """Read a headed CSV with one row per time step (ascending).

    Returns ``(header, data)`` with ``data`` shaped ``(n_columns, T)``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file, a header row is required") from None
        rows = [r for r in reader if r]
    if columns is not None:
        missing = [c for c in columns if c not in header]
        if missing:
            raise ValidationError(f"{path}: unknown columns {missing}; available: {header}")
    try:
        data = np.array([[float(v) for v in r] for r in rows], dtype=float).reshape(len(rows), len(header))
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric or ragged row ({exc})") from None
    if not np.all(np.isfinite(data)):
        raise ValidationError(f"{path}: series contains non-finite values")
    data = data.T
    if columns is not None:
        data = data[[header.index(c) for c in columns]]
        header = list(columns)
    return header, data


def write_series(path, names: Sequence[str], data: np.ndarray) -> None:
    data = np.atleast_2d(data)
    with _sink(path) as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in data.T:
            w.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# attributions


def _att_rows(t, att: Attribution, names, exog_names):
    idx = att.indexing
    fx = att.fx if att.fx is not None else att.base_value + att.total()
    gap = efficiency_gap(att, fx, att.base_value)
    for m in range(att.n_outputs):
        for p in range(idx.d):
            block, n, lag = idx.cell_of(p)
            label = (exog_names if block == "exog" else names)[n]
            n_lags = idx.exog_width if block == "exog" else idx.width
            yield (t, m, block, n, label, "" if lag is None else lag, n_lags, repr(float(att.phi[m, p])),
                   repr(float(att.base_value[m])), repr(float(fx[m])), repr(gap))


def write_attributions_csv(path, records, feature_names, exog_names=()) -> None:
    """``records`` is a sequence of ``(t, Attribution)``."""
    with _sink(path) as fh:
        w = csv.writer(fh)
        w.writerow(ATTRIBUTION_COLUMNS)
        for t, att in records:
            w.writerows(_att_rows(t, att, feature_names, exog_names))


def read_attributions_csv(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    by_t: dict = {}
    for r in rows:
        by_t.setdefault(int(r["t"]), []).append(r)
    out = []
    for t, rs in by_t.items():
        cell = rs[0]["lag"] != ""
        endog = [r for r in rs if r["block"] == "endog"]
        exog = [r for r in rs if r["block"] == "exog"]
        N = 1 + max(int(r["feature_index"]) for r in endog)
        J = 1 + max(int(r["feature_index"]) for r in exog) if exog else 0
        W = int(endog[0]["n_lags"])
        L = int(exog[0]["n_lags"]) if exog else 0
        idx = PlayerIndexing(Mode.CELL if cell else Mode.FEATURE, N, W, J, L)
        M = 1 + max(int(r["output"]) for r in rs)
        phi = np.zeros((M, idx.d))
        base = np.zeros(M)
        fx = np.zeros(M)
        for r in rs:
            m = int(r["output"])
            lag = int(r["lag"]) if cell else 1
            phi[m, idx.player_of(int(r["feature_index"]), lag, exog=r["block"] == "exog")] = float(r["phi"])
            base[m] = float(r["base_value"])
            fx[m] = float(r["fx"])
        out.append((t, Attribution(base, phi, idx, fx=fx)))
    return out


def attributions_to_json(records, feature_names, exog_names=(), meta: Optional[dict] = None) -> dict:
    records = list(records)
    idx = records[0][1].indexing if records else None
    doc = dict(meta or {})
    if idx is not None:
        doc.update({"mode": idx.mode.value, "n_features": idx.n_features, "width": idx.width,
                    "n_exog": idx.n_exog, "exog_width": idx.exog_width})
    doc["feature_names"] = list(feature_names)
    doc["exog_names"] = list(exog_names)
    windows = []
    for t, att in records:
        fx = att.fx if att.fx is not None else att.base_value + att.total()
        win = {"t": int(t), "base_value": att.base_value.tolist(), "fx": fx.tolist(),
               "efficiency_gap": efficiency_gap(att, fx, att.base_value), "endog": att.endog.tolist()}
        if att.exog is not None:
            win["exog"] = att.exog.tolist()
        windows.append(win)
    doc["windows"] = windows
    return doc


def attributions_from_json(doc: dict) -> list:
    if not doc["windows"]:
        return []
    idx = PlayerIndexing(Mode(doc["mode"]), doc["n_features"], doc["width"], doc["n_exog"], doc["exog_width"])
    out = []
    for win in doc["windows"]:
        endog = np.asarray(win["endog"], dtype=float)
        M = endog.shape[0]
        parts = [endog.reshape(M, -1)]
        if "exog" in win:
            parts.append(np.asarray(win["exog"], dtype=float).reshape(M, -1))
        out.append((win["t"], Attribution(win["base_value"], np.concatenate(parts, axis=1), idx, fx=win["fx"])))
    return out


def write_json(path, doc: dict) -> None:
    with _sink(path) as fh:
        fh.write(json.dumps(doc, indent=1) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# events and schedules


def write_events_csv(path, es: EventSeries, feature_names: Sequence[str]) -> None:
    with _sink(path) as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_COLUMNS)
        for s in range(es.values.shape[1]):
            for n, name in enumerate(feature_names):
                w.writerow((s, name, repr(float(es.values[n, s])), int(es.counts[s])))


def read_events_csv(path, norm: Normalization = Normalization.RAW_SUM) -> EventSeries:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    names = list(dict.fromkeys(r["feature"] for r in rows))
    T = 1 + max(int(r["timestep"]) for r in rows) if rows else 0
    values = np.zeros((len(names), T))
    counts = np.zeros(T, dtype=np.int64)
    for r in rows:
        s = int(r["timestep"])
        values[names.index(r["feature"]), s] = float(r["event_importance"])
        counts[s] = int(r["count"])
    return EventSeries(values, counts, Normalization(norm), tuple(names))


def write_schedule_csv(path, sched: ImputationSchedule, feature_names: Sequence[str]) -> None:
    resid = sched.telescoping_residual()
    with _sink(path) as fh:
        w = csv.writer(fh)
        w.writerow(SCHEDULE_COLUMNS)
        for table, arr in (("phi", sched.phi), ("beta", sched.beta)):
            M, K, N = arr.shape
            for m in range(M):
                for k in range(K):
                    for n in range(N):
                        w.writerow((table, m, k, feature_names[n], repr(float(arr[m, k, n]))))
        for m in range(resid.shape[0]):
            for n in range(resid.shape[1]):
                w.writerow(("residual", m, "", feature_names[n], repr(float(resid[m, n]))))


def read_schedule_csv(path) -> tuple:
    """Returns ``(schedule, residual)``; the evaluation count is not stored."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    names = list(dict.fromkeys(r["feature"] for r in rows))
    M = 1 + max(int(r["output"]) for r in rows)
    K = 1 + max(int(r["k"]) for r in rows if r["table"] == "phi")
    phi = np.zeros((M, K, len(names)))
    beta = np.zeros((M, K - 1, len(names)))
    resid = np.zeros((M, len(names)))
    for r in rows:
        m, n = int(r["output"]), names.index(r["feature"])
        if r["table"] == "residual":
            resid[m, n] = float(r["value"])
        else:
            (phi if r["table"] == "phi" else beta)[m, int(r["k"]), n] = float(r["value"])
    return ImputationSchedule(phi, beta), resid


BENCH_COLUMNS = ("method", "n_samples", "median_l2_error", "n_seeds", "d")


def write_bench_csv(path, rows) -> None:
    """Rows are :class:`tsshap.bench.BenchRow`; the full-enumeration row has ``n_samples="full"``."""
    with _sink(path) as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_COLUMNS)
        for r in rows:
            w.writerow((r.method, "full" if r.n_samples is None else r.n_samples,
                        repr(r.median_l2_error), r.n_seeds, r.d))


def read_bench_csv(path) -> list:
    from .bench import BenchRow

    with open(path, newline="") as fh:
        return [BenchRow(r["method"], None if r["n_samples"] == "full" else int(r["n_samples"]),
                         float(r["median_l2_error"]), int(r["n_seeds"]), int(r["d"]))
                for r in csv.DictReader(fh)]
