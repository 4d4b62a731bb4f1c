"""Unobserved behind-the-meter events: PV failures and new PV installs."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .dataset import PowerSeries, _utc
from .errors import ConfigError, SpanError

EVENT_KINDS = ("pv_failure", "pv_install")


@dataclass(frozen=True)
class ScenarioEvent:
    at: pd.Timestamp
    kind: str
    fraction_or_capacity: float
    duration: pd.Timedelta | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ConfigError(f"unknown event kind {self.kind!r}")
        object.__setattr__(self, "at", _utc(self.at))
        if self.duration is not None:
            object.__setattr__(self, "duration", pd.Timedelta(self.duration))
        v = self.fraction_or_capacity
        if self.kind == "pv_failure" and not 0.0 <= v <= 1.0:
            raise ConfigError(f"failure fraction {v} outside [0, 1]")
        if self.kind == "pv_install" and v <= 0:
            raise ConfigError("installed capacity must be positive")


def load_events(path):
    """Read events from JSON: a list of ``{"at", "kind", "value", "duration_hours"}``."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise ConfigError(f"{path}: events file must hold a JSON list")
    events = []
    for n, item in enumerate(data):
        missing = [k for k in ("at", "kind", "value") if not isinstance(item, dict) or k not in item]
        if missing:
            raise ConfigError(f"{path}: event {n} lacks {', '.join(missing)}")
        hours = item.get("duration_hours")
        events.append(
            ScenarioEvent(
                at=item["at"],
                kind=item["kind"],
                fraction_or_capacity=float(item["value"]),
                duration=None if hours is None else pd.Timedelta(hours=hours),
            )
        )
    return events


def _active_mask(ref, event):
    i = ref.offset_of(event.at)
    mask = np.zeros(len(ref), dtype=bool)
    stop = len(ref)
    if event.duration is not None:
        stop = min(stop, i + int(event.duration / pd.Timedelta(hours=1)))
    mask[i:stop] = True
    return mask


def _failure_pools(pv_ids, groups):
    """Split PVs into per-group pools (first group wins on overlap) so a
    failure fraction holds inside every group, not just feeder-wide."""
    left = set(pv_ids)
    pools = []
    for name in sorted(groups):
        pool = sorted(m for m in groups[name] if m in left)
        left -= set(pool)
        if pool:
            pools.append(pool)
    if left:
        pools.append(sorted(left))
    return pools


def apply_scenario(dataset, events, seed=0):
    """Return a copy of ``dataset`` with the events applied to the
    unobservable (net-only) customers and their ground truth.

    A failure fraction is drawn separately within each group. Observed
    customers are never touched.
    """
    if list(events) != sorted(events, key=lambda e: e.at):
        raise ConfigError("scenario events must be sorted by time")
    truth = dict(dataset.ground_truth)
    net = dict(dataset.net_only)
    attrs = {k: dict(v) for k, v in dataset.attributes.items()}
    rng = np.random.default_rng(seed)
    for ev in events:
        if not truth:
            raise ConfigError("scenarios need ground truth for the net-only customers")
        ref = next(iter(net.values()))
        try:
            mask = _active_mask(ref, ev)
        except SpanError:
            raise SpanError(f"event at {ev.at.isoformat()} lies outside the dataset span") from None
        if ev.kind == "pv_failure":
            pv_ids = sorted(m for m, (_, inj) in truth.items() if np.any(inj.values < 0))
            failed = []
            for pool in _failure_pools(pv_ids, dataset.groups):
                n_fail = int(round(ev.fraction_or_capacity * len(pool)))
                if n_fail:
                    failed.extend(rng.choice(pool, size=n_fail, replace=False).tolist())
            for mid in sorted(failed):
                dem, inj = truth[mid]
                new_inj = np.where(mask, 0.0, inj.values)
                truth[mid] = (dem, inj.with_values(new_inj))
                net[mid] = net[mid].with_values(dem.values + new_inj)
                attrs.setdefault(mid, {})["failed_at"] = ev.at.isoformat()
        else:
            pv_ids = sorted(m for m, (_, inj) in truth.items() if np.any(inj.values < 0))
            if not pv_ids:
                raise ConfigError("pv_install needs an existing unobservable PV to copy a profile from")
            template = truth[pv_ids[int(rng.integers(len(pv_ids)))]][1].values
            shape = template / template.min()
            bare = sorted(m for m in truth if m not in pv_ids)
            host = bare[int(rng.integers(len(bare)))] if bare else pv_ids[int(rng.integers(len(pv_ids)))]
            dem, inj = truth[host]
            new_inj = np.round(inj.values - np.where(mask, ev.fraction_or_capacity * shape, 0.0), 6) + 0.0
            truth[host] = (dem, PowerSeries(inj.start, new_inj, "solar_injection"))
            net[host] = net[host].with_values(dem.values + new_inj)
            attrs.setdefault(host, {})["installed_at"] = ev.at.isoformat()
    return dataset.replace(net_only=net, ground_truth=truth, attributes=attrs)
