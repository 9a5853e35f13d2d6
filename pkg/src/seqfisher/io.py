"""Result serialization: CSV and JSON with full double-precision fidelity.

Floats are written with 17 significant digits so emitted values round-trip
exactly. Emitted bytes contain no timestamps or durations; identical runs
produce identical files.
"""

import json
from dataclasses import dataclass

import numpy as np

from .diagnostics import CurveSeries, WignerGrid
from .fisher import FisherSeries, GainReport, TimeBudgetReport

VERSION = "0.1.0"


@dataclass
class ResultEnvelope:
    """A run result: config echo, code version, payload, exclusion counts.

    `duration_s` is measured but never serialized, keeping output bytes a
    pure function of (config, seed)."""

    config: dict
    payload: object
    counts: dict
    duration_s: float = 0.0
    version: str = VERSION


def fmt_float(x):
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _csv_rows(payload):
    """(comment lines, header, row iterator) per payload type."""
    if isinstance(payload, FisherSeries):
        comments = [f"# lambda={fmt_float(payload.lam)} h={fmt_float(payload.h)} "
                    f"mu_max={payload.mu_max} aborted={payload.aborted}"]
        if payload.approximate:
            comments.append("# approximate: pruned mass above 1e-6")
        header = "n,delta_F,F_cum,std_err"
        rows = ((str(n + 1), fmt_float(payload.delta[n]), fmt_float(payload.cum[n]),
                 fmt_float(payload.std_err[n])) for n in range(payload.n_seq))
        return comments, header, rows
    if isinstance(payload, GainReport):
        comments = [f"# n_star={payload.n_star} n_ref={payload.n_ref} "
                    f"threshold={fmt_float(payload.threshold)}"]
        header = "n,gain"
        rows = ((str(n + 1), fmt_float(g)) for n, g in enumerate(payload.gain))
        return comments, header, rows
    if isinstance(payload, TimeBudgetReport):
        comments = [f"# total_time={fmt_float(payload.total_time)} "
                    f"t_reset={fmt_float(payload.t_reset)} "
                    f"t_meas={fmt_float(payload.t_meas)} tau={fmt_float(payload.tau)}"]
        header = "n,repetitions,inverse_fi"
        rows = ((str(int(n)), fmt_float(m), fmt_float(v))
                for n, m, v in zip(payload.n, payload.repetitions, payload.inverse_fi))
        return comments, header, rows
    if isinstance(payload, CurveSeries):
        comments = [f"# {json.dumps(_plain(payload.metadata), sort_keys=True)}"]
        header = "x,y,y_err"
        rows = ((fmt_float(x), fmt_float(y), fmt_float(e))
                for x, y, e in zip(payload.x, payload.y, payload.y_err))
        return comments, header, rows
    if isinstance(payload, WignerGrid):
        header = "q,p,W"
        rows = ((fmt_float(payload.q[i]), fmt_float(payload.p[j]),
                 fmt_float(payload.w[i, j]))
                for i in range(len(payload.q)) for j in range(len(payload.p)))
        return [], header, rows
    if isinstance(payload, (list, tuple)) and all(
            isinstance(s, CurveSeries) for s in payload):
        header = "checkpoint,m,probability"

        def rows():
            for series in payload:
                cp = series.metadata.get("checkpoint", 0)
                for m, y in zip(series.x, series.y):
                    yield (str(int(cp)), str(int(m)), fmt_float(y))
        return [], header, rows()
    raise TypeError(f"no CSV writer for payload type {type(payload).__name__}")


def to_csv_bytes(envelope):
    comments, header, rows = _csv_rows(envelope.payload)
    lines = [f"# seqfisher {envelope.version}",
             f"# config {json.dumps(envelope.config, separators=(',', ':'))}"]
    lines += comments
    lines.append(header)
    lines += [",".join(row) for row in rows]
    return ("\n".join(lines) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def _plain(value):
    """Recursively convert numpy scalars/arrays for json encoding."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def _payload_dict(payload):
    if isinstance(payload, FisherSeries):
        return {
            "type": "fisher_series",
            "lambda": payload.lam,
            "h": payload.h,
            "mu_max": payload.mu_max,
            "aborted": payload.aborted,
            "approximate": payload.approximate,
            "n": list(range(1, payload.n_seq + 1)),
            "delta_F": payload.delta.tolist(),
            "F_cum": payload.cum.tolist(),
            "std_err": payload.std_err.tolist(),
        }
    if isinstance(payload, GainReport):
        return {
            "type": "gain_report",
            "n_star": payload.n_star,
            "n_ref": payload.n_ref,
            "threshold": payload.threshold,
            "gain": payload.gain.tolist(),
        }
    if isinstance(payload, TimeBudgetReport):
        return {
            "type": "time_budget",
            "total_time": payload.total_time,
            "t_reset": payload.t_reset,
            "t_meas": payload.t_meas,
            "tau": payload.tau,
            "n": payload.n.tolist(),
            "repetitions": payload.repetitions.tolist(),
            "inverse_fi": payload.inverse_fi.tolist(),
        }
    if isinstance(payload, CurveSeries):
        return {
            "type": "curve",
            "metadata": _plain(payload.metadata),
            "x": payload.x.tolist(),
            "y": payload.y.tolist(),
            "y_err": payload.y_err.tolist(),
        }
    if isinstance(payload, WignerGrid):
        return {
            "type": "wigner_grid",
            "q": payload.q.tolist(),
            "p": payload.p.tolist(),
            "W": payload.w.tolist(),
        }
    if isinstance(payload, (list, tuple)) and all(
            isinstance(s, CurveSeries) for s in payload):
        return {
            "type": "curve_list",
            "series": [_payload_dict(s) for s in payload],
        }
    raise TypeError(f"no JSON writer for payload type {type(payload).__name__}")


def to_json_bytes(envelope):
    doc = {
        "version": envelope.version,
        "config": envelope.config,
        "counts": _plain(envelope.counts),
        "payload": _payload_dict(envelope.payload),
    }
    return (json.dumps(doc, indent=2, allow_nan=False) + "\n").encode("utf-8")


def emit(envelope, fmt, path):
    """Serialize the envelope to `path`; fmt is 'csv' or 'json'."""
    if fmt == "csv":
        data = to_csv_bytes(envelope)
    elif fmt == "json":
        data = to_json_bytes(envelope)
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    with open(path, "wb") as fh:
        fh.write(data)
