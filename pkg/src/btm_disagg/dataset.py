"""Power series containers, meter CSV ingestion/export and group aggregation.

Internally PV output is stored as a non-positive *injection* so that
``demand + injection == net`` holds literally. Files keep generation
positive; the sign flip happens only at the file boundary.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DisaggregationError, DuplicateError, GapError, GroupError, ParseError, SpanError

STEP = pd.Timedelta(hours=1)
ROLES = ("native_demand", "solar_injection", "net_demand")
KINDS = ("native_demand", "pv_generation", "net_demand")
DEFAULT_SCHEMA = {"timestamp": "timestamp", "meter_id": "meter_id", "kind": "kind", "value": "kw"}
TRUTH_TOL = 1e-9


def _utc(ts):
    ts = pd.Timestamp(ts)
    return ts.tz_localize("UTC") if ts.tzinfo is None else ts.tz_convert("UTC")


@dataclass(frozen=True, eq=False)
class PowerSeries:
    """Hourly kW readings starting at ``start``."""

    start: pd.Timestamp
    values: np.ndarray
    role: str = "net_demand"

    def __post_init__(self):
        if self.role not in ROLES:
            raise DisaggregationError(f"unknown role {self.role!r}")
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1:
            raise DisaggregationError("values must be one-dimensional")
        if not np.all(np.isfinite(vals)):
            raise DisaggregationError("power series contains non-finite values")
        if self.role == "solar_injection" and np.any(vals > 0):
            raise DisaggregationError("solar injection must be <= 0")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "start", _utc(self.start))

    def __len__(self):
        return len(self.values)

    @property
    def end(self):
        return self.start + (len(self.values) - 1) * STEP

    @property
    def index(self):
        return pd.date_range(self.start, periods=len(self.values), freq="h")

    def same_span(self, other):
        return self.start == other.start and len(self) == len(other)

    def offset_of(self, ts):
        """Sample index of instant ``ts``; raises if outside the span."""
        off = (_utc(ts) - self.start) / STEP
        if off != int(off) or not 0 <= off < len(self):
            raise SpanError(f"{ts} is not a sample instant of this series")
        return int(off)

    def window(self, start, stop):
        """Samples in the inclusive range ``[start, stop]``."""
        i, j = self.offset_of(start), self.offset_of(stop)
        return self.values[i : j + 1]

    def with_values(self, values, role=None):
        return PowerSeries(self.start, values, role or self.role)

    def __eq__(self, other):
        return (
            isinstance(other, PowerSeries)
            and self.role == other.role
            and self.start == other.start
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class FeederDataset:
    """Meters of one feeder split by observability.

    ``observed_demand`` holds customers without PV (native demand metered),
    ``observed_pairs`` customers whose demand and PV output are metered
    separately, ``net_only`` customers with only net metering.
    ``ground_truth`` optionally gives (demand, injection) for net-only meters.
    ``attributes`` carries optional per-meter metadata (azimuth, capacity...).
    """

    observed_demand: dict = field(default_factory=dict)
    observed_pairs: dict = field(default_factory=dict)
    net_only: dict = field(default_factory=dict)
    ground_truth: dict = field(default_factory=dict)
    groups: dict = field(default_factory=dict)
    attributes: dict = field(default_factory=dict)

    def __post_init__(self):
        for mid, (dem, inj) in self.observed_pairs.items():
            if not dem.same_span(inj):
                raise SpanError(f"meter {mid!r}: demand and PV series cover different spans")
        for mid, (dem, inj) in self.ground_truth.items():
            net = self.net_only.get(mid)
            if net is None:
                raise DisaggregationError(f"ground truth for unknown net meter {mid!r}")
            if not (dem.same_span(net) and inj.same_span(net)):
                raise SpanError(f"meter {mid!r}: truth span differs from net span")
            err = np.max(np.abs(dem.values + inj.values - net.values), initial=0.0)
            if err > TRUTH_TOL:
                raise DisaggregationError(f"meter {mid!r}: demand + injection != net (max err {err:.3g} kW)")

    @property
    def meter_ids(self):
        return list(self.observed_demand) + list(self.observed_pairs) + list(self.net_only)

    def member_net(self, mid):
        """Net demand and optional truth pair for any meter."""
        if mid in self.net_only:
            return self.net_only[mid], self.ground_truth.get(mid)
        if mid in self.observed_pairs:
            dem, inj = self.observed_pairs[mid]
            return dem.with_values(dem.values + inj.values, "net_demand"), (dem, inj)
        if mid in self.observed_demand:
            dem = self.observed_demand[mid]
            zero = PowerSeries(dem.start, np.zeros(len(dem)), "solar_injection")
            return dem.with_values(dem.values, "net_demand"), (dem, zero)
        raise GroupError(f"unknown meter {mid!r}")

    def replace(self, **changes):
        kw = {
            name: getattr(self, name)
            for name in (
                "observed_demand",
                "observed_pairs",
                "net_only",
                "ground_truth",
                "groups",
                "attributes",
            )
        }
        kw.update(changes)
        return FeederDataset(**kw)


def aggregate_group(dataset, group):
    """Element-wise sum of the members' net demand.

    Returns ``(net, truth)`` where ``truth`` is a (demand, injection) pair
    when every member has ground truth, else ``None``.
    """
    if group not in dataset.groups:
        raise GroupError(f"unknown group {group!r}")
    members = dataset.groups[group]
    if not members:
        raise GroupError(f"group {group!r} is empty")
    first, _ = dataset.member_net(members[0])
    net = np.zeros(len(first))
    dem = np.zeros(len(first))
    inj = np.zeros(len(first))
    have_truth = True
    for mid in members:
        series, truth = dataset.member_net(mid)
        if not series.same_span(first):
            raise SpanError(f"group {group!r}: meter {mid!r} spans a different period")
        net += series.values
        if truth is None:
            have_truth = False
        elif have_truth:
            dem += truth[0].values
            inj += truth[1].values
    total = PowerSeries(first.start, net, "net_demand")
    if not have_truth:
        return total, None
    return total, (
        PowerSeries(first.start, dem, "native_demand"),
        PowerSeries(first.start, inj, "solar_injection"),
    )


# --------------------------------------------------------------------------
# file formats
# --------------------------------------------------------------------------


def _series_from_frame(mid, kind, frame):
    times = frame["ts"].to_numpy()
    order = np.argsort(times, kind="stable")
    times = frame["ts"].iloc[order]
    values = frame["value"].to_numpy()[order]
    lines = frame["line"].to_numpy()[order]
    dup = times.duplicated().to_numpy()
    if dup.any():
        i = int(np.argmax(dup))
        raise DuplicateError(
            f"line {lines[i]}: duplicate reading for meter {mid!r} ({kind}) at {times.iloc[i].isoformat()}"
        )
    start = times.iloc[0]
    steps = ((times - start) / STEP).to_numpy().astype(np.int64)
    if steps[-1] != len(steps) - 1:
        full = pd.date_range(start, times.iloc[-1], freq="h")
        missing = full.difference(pd.DatetimeIndex(times))
        raise GapError(mid, list(missing))
    if kind == "pv_generation":
        return PowerSeries(start, -values, "solar_injection")
    return PowerSeries(start, values, kind)


def ingest_csv(path, schema=None, groups=None, attributes=None):
    """Read a long-format meter CSV into a :class:`FeederDataset`.

    Meters are classified by the kinds they report: native demand only
    (observed demand), native demand + PV generation (observed pair), net
    demand (net only). A net meter that also reports native demand and PV
    generation carries those as ground truth.
    """
    cols = dict(DEFAULT_SCHEMA)
    cols.update(schema or {})
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"no such file: {path}")
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    missing = [c for c in cols.values() if c not in raw.columns]
    if missing:
        raise ParseError(f"missing columns {missing} (header: {list(raw.columns)})", line=1)
    if raw.empty:
        raise ParseError("file has no data rows")
    lines = np.arange(len(raw)) + 2

    ts = pd.to_datetime(raw[cols["timestamp"]], utc=True, errors="coerce", format="ISO8601")
    bad = ts.isna().to_numpy()
    if bad.any():
        i = int(np.argmax(bad))
        raise ParseError(f"bad timestamp {raw[cols['timestamp']].iloc[i]!r}", line=lines[i])
    off_grid = (ts != ts.dt.floor("h")).to_numpy()
    if off_grid.any():
        i = int(np.argmax(off_grid))
        raise ParseError(f"timestamp {ts.iloc[i].isoformat()} is not hour-aligned", line=lines[i])
    kind = raw[cols["kind"]].str.strip()
    bad = (~kind.isin(KINDS)).to_numpy()
    if bad.any():
        i = int(np.argmax(bad))
        raise ParseError(f"unknown kind {kind.iloc[i]!r}", line=lines[i])
    value = pd.to_numeric(raw[cols["value"]], errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(value)
    if bad.any():
        i = int(np.argmax(bad))
        raise ParseError(f"bad value {raw[cols['value']].iloc[i]!r}", line=lines[i])
    # pandas' fast parser can be off by an ulp; reparse exactly so files round-trip
    value = raw[cols["value"]].to_numpy(dtype=object).astype(float)
    bad = (kind == "pv_generation").to_numpy() & (value < 0)
    if bad.any():
        i = int(np.argmax(bad))
        raise ParseError(f"negative pv_generation {value[i]}", line=lines[i])
    meter = raw[cols["meter_id"]].str.strip()
    bad = (meter == "").to_numpy()
    if bad.any():
        raise ParseError("empty meter_id", line=lines[int(np.argmax(bad))])

    frame = pd.DataFrame({"ts": ts, "meter": meter, "kind": kind, "value": value, "line": lines})
    by_meter = {}
    for (mid, k), sub in frame.groupby(["meter", "kind"], sort=False):
        by_meter.setdefault(mid, {})[k] = _series_from_frame(mid, k, sub)

    observed_demand, observed_pairs, net_only, truth = {}, {}, {}, {}
    for mid in sorted(by_meter):
        kinds = by_meter[mid]
        present = set(kinds)
        if present == {"native_demand"}:
            observed_demand[mid] = kinds["native_demand"]
        elif present == {"native_demand", "pv_generation"}:
            observed_pairs[mid] = (kinds["native_demand"], kinds["pv_generation"])
        elif present == {"net_demand"}:
            net_only[mid] = kinds["net_demand"]
        elif present == set(KINDS):
            net_only[mid] = kinds["net_demand"]
            truth[mid] = (kinds["native_demand"], kinds["pv_generation"])
        else:
            raise ParseError(f"meter {mid!r}: unsupported combination of kinds {sorted(present)}")
    grp = load_groups(groups) if isinstance(groups, (str, os.PathLike)) else dict(groups or {})
    attrs = attributes
    if isinstance(attributes, (str, os.PathLike)):
        attrs = json.loads(Path(attributes).read_text())
    ds = FeederDataset(observed_demand, observed_pairs, net_only, truth, grp, dict(attrs or {}))
    for name, members in grp.items():
        unknown = [m for m in members if m not in by_meter]
        if unknown:
            raise GroupError(f"group {name!r} references unknown meters {unknown[:5]}")
    return ds


def load_groups(path):
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict) or not all(
        isinstance(v, list) and all(isinstance(m, str) for m in v) for v in data.values()
    ):
        raise ParseError(f"{path}: groups file must map group names to lists of meter ids")
    return data


def _long_rows(mid, kind, series, sign=1.0):
    return pd.DataFrame(
        {
            "timestamp": series.index.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "meter_id": mid,
            "kind": kind,
            "kw": sign * series.values + 0.0,
        }
    )


def to_frame(dataset):
    """Long-format frame matching the meter CSV layout."""
    parts = []
    for mid, dem in dataset.observed_demand.items():
        parts.append(_long_rows(mid, "native_demand", dem))
    for mid, (dem, inj) in dataset.observed_pairs.items():
        parts.append(_long_rows(mid, "native_demand", dem))
        parts.append(_long_rows(mid, "pv_generation", inj, -1.0))
    for mid, net in dataset.net_only.items():
        parts.append(_long_rows(mid, "net_demand", net))
        if mid in dataset.ground_truth:
            dem, inj = dataset.ground_truth[mid]
            parts.append(_long_rows(mid, "native_demand", dem))
            parts.append(_long_rows(mid, "pv_generation", inj, -1.0))
    return pd.concat(parts, ignore_index=True)


def write_csv(dataset, path):
    """Write the meter CSV; floats use the shortest round-trip repr."""
    frame = to_frame(dataset)
    frame.to_csv(path, index=False, lineterminator="\n")
