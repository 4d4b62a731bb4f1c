"""Plot-ready output files for a disaggregation report.

Everything is long-format CSV (plus one JSON summary) so any plotting tool
can consume it. Files are rendered in memory first and then moved into
place one by one with ``os.replace``, so a failure never leaves a
half-written file behind.
"""

from __future__ import annotations

import io
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DisaggregationError
from .rgvp import trajectory_csv

ESTIMATES_FILE = "estimates.csv"
SERIES_FILE = "series.csv"
WEIGHTS_FILE = "weights.csv"
HISTOGRAM_FILE = "error_histogram.csv"
MAPE_FILE = "mape.csv"
METRICS_FILE = "metrics.json"
TRANSITION_FILE = "transition.json"

_UMASK = os.umask(0)
os.umask(_UMASK)


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temp file in the same directory."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_files(out_dir, files):
    """Create ``out_dir`` and atomically write every ``{name: text}`` entry."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            atomic_write(out / name, text)
    except OSError as exc:
        raise DisaggregationError(f"cannot write to {out}: {exc.strerror or exc}") from None
    return [out / name for name in files]


def csv_text(frame):
    buf = io.StringIO()
    frame.to_csv(buf, index=False, lineterminator="\n")
    return buf.getvalue()


def _stamps(index):
    return list(index.strftime("%Y-%m-%dT%H:%M:%SZ"))


def estimates_frame(report):
    """Wide per-timestamp table; solar as positive generation."""
    return pd.DataFrame(
        {
            "timestamp": _stamps(report.index),
            "demand_hat_kw": report.demand_hat,
            "solar_hat_kw": -report.solar_hat + 0.0,
            "net_hat_kw": report.net_hat,
            "net_measured_kw": report.net_measured,
        }
    )


def series_frame(report):
    """Long table ``timestamp, quantity, source, value_kw``.

    Solar is reported as positive generation. Warm-up samples without an
    estimate are left empty.
    """
    stamps = _stamps(report.index)
    blocks = [
        ("demand", "estimate", report.demand_hat),
        ("solar", "estimate", -report.solar_hat + 0.0),
        ("net", "estimate", report.net_hat),
        ("net", "measured", report.net_measured),
    ]
    if report.truth_solar is not None:
        blocks += [
            ("demand", "truth", report.truth_demand),
            ("solar", "truth", -report.truth_solar + 0.0),
        ]
    parts = [
        pd.DataFrame({"timestamp": stamps, "quantity": q, "source": src, "value_kw": vals})
        for q, src, vals in blocks
    ]
    return pd.concat(parts, ignore_index=True)


def error_histograms(report, bins=50):
    """Histogram of per-sample estimation errors (estimate minus truth, in
    kW of demand and of generation) over the estimated samples."""
    if report.truth_solar is None:
        return None
    keep = report.valid
    rows = []
    for name, est, tru in (
        ("demand", report.demand_hat, report.truth_demand),
        ("solar", -report.solar_hat, -report.truth_solar),
    ):
        err = (est - tru)[keep]
        counts, edges = np.histogram(err, bins=bins)
        for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
            rows.append((name, float(lo), float(hi), int(c)))
    return pd.DataFrame(rows, columns=["quantity", "bin_left_kw", "bin_right_kw", "count"])


def mape_frame(report):
    rows = [
        (report.method, report.group, q, v)
        for q, v in (("solar", report.mape_solar), ("demand", report.mape_demand), ("net", report.mape_net))
        if v is not None
    ]
    return pd.DataFrame(rows, columns=["method", "group", "quantity", "mape_percent"])


def render_plot_data(report, bins=50, generated_at=None):
    """Map of file name to file content for :func:`emit_plot_data`."""
    if len(report.window_end) == 0 or np.all(np.isnan(report.net_hat)):
        raise DisaggregationError("report has no completed windows")
    files = {
        ESTIMATES_FILE: csv_text(estimates_frame(report)),
        SERIES_FILE: csv_text(series_frame(report)),
    }
    labels = _stamps(report.index[report.window_end])
    files[WEIGHTS_FILE] = trajectory_csv(labels, report.omega, report.theta, report.R_p, report.R_g)
    hist = error_histograms(report, bins)
    if hist is not None:
        files[HISTOGRAM_FILE] = csv_text(hist)
    files[MAPE_FILE] = csv_text(mape_frame(report))
    stamp = generated_at or datetime.now(timezone.utc).isoformat(timespec="seconds")
    summary = {
        "metadata": {"generated_at": stamp, "runtime_seconds": report.runtime_seconds},
        "metrics": report.metrics(),
        "membership": {kind: {str(c): m for c, m in g.items()} for kind, g in report.membership.items()},
    }
    files[METRICS_FILE] = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if report.events:
        transition = {
            "events": [
                {
                    "at": ev.at.isoformat(),
                    "kind": ev.kind,
                    "value": ev.fraction_or_capacity,
                    "duration_hours": None if ev.duration is None else ev.duration / pd.Timedelta(hours=1),
                }
                for ev in report.events
            ],
            "metrics": report.transition,
        }
        files[TRANSITION_FILE] = json.dumps(transition, indent=2, sort_keys=True) + "\n"
    return files


def emit_plot_data(report, out_dir, bins=50):
    """Write the report's plot data into ``out_dir``; returns the paths."""
    return write_files(out_dir, render_plot_data(report, bins))
