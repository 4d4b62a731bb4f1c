"""Candidate exemplar libraries and composite exemplars.

Cluster membership comes from whole-history profiles of the observable
customers; candidate values are the member-average series over each window.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .dataset import PowerSeries, _utc
from .errors import DisaggregationError, SpanError

SIMPLEX_TOL = 1e-9


def demand_profiles(dataset, ids=None):
    """Average daily (24-hour) load profile of each observed-demand customer."""
    ids = list(dataset.observed_demand) if ids is None else list(ids)
    rows = []
    for mid in ids:
        s = dataset.observed_demand[mid]
        hours = (s.start.hour + np.arange(len(s))) % 24
        sums = np.bincount(hours, weights=s.values, minlength=24)
        counts = np.bincount(hours, minlength=24)
        rows.append(sums / np.maximum(counts, 1))
    return ids, np.array(rows)


def solar_profiles(dataset, ids=None):
    """PV output of each observed PV scaled by its own observed maximum."""
    ids = list(dataset.observed_pairs) if ids is None else list(ids)
    rows = []
    for mid in ids:
        gen = -dataset.observed_pairs[mid][1].values
        peak = gen.max()
        rows.append(gen / peak if peak > 0 else gen)
    return ids, np.array(rows)


def _members(clustering, ids):
    if len(ids) != len(clustering.labels):
        raise DisaggregationError("clustering labels do not match the number of meters")
    members = clustering.members(ids)
    empty = [c for c, m in members.items() if not m]
    if empty:
        raise DisaggregationError(f"clusters {empty} have no members")
    return members


@dataclass(frozen=True)
class ExemplarLibrary:
    """Candidate windows: ``demand`` is ``(M, T)``, ``solar`` is ``(N, T)``
    (non-positive injection)."""

    start: pd.Timestamp
    demand: np.ndarray
    solar: np.ndarray
    membership: dict

    @property
    def M(self):
        return self.demand.shape[0]

    @property
    def N(self):
        return self.solar.shape[0]

    @property
    def T(self):
        return self.demand.shape[1]

    @property
    def demand_candidates(self):
        return [PowerSeries(self.start, row, "native_demand") for row in self.demand]

    @property
    def solar_candidates(self):
        return [PowerSeries(self.start, row, "solar_injection") for row in self.solar]


@dataclass(frozen=True)
class CompositeExemplar:
    demand: np.ndarray
    solar: np.ndarray


def build_candidate_library(dataset, clustering_demand, clustering_solar, window, demand_ids=None, solar_ids=None):
    """Average the members' raw series over ``window = (first, last)``
    (inclusive instants) for every demand and solar cluster."""
    first, last = (_utc(w) for w in window)
    if last < first:
        raise SpanError("window ends before it starts")
    d_ids = list(dataset.observed_demand) if demand_ids is None else list(demand_ids)
    s_ids = list(dataset.observed_pairs) if solar_ids is None else list(solar_ids)
    d_members = _members(clustering_demand, d_ids)
    s_members = _members(clustering_solar, s_ids)
    demand = np.array(
        [np.mean([dataset.observed_demand[m].window(first, last) for m in d_members[c]], axis=0) for c in sorted(d_members)]
    )
    solar = np.array(
        [np.mean([dataset.observed_pairs[m][1].window(first, last) for m in s_members[c]], axis=0) for c in sorted(s_members)]
    )
    return ExemplarLibrary(first, demand, solar + 0.0, {"demand": d_members, "solar": s_members})


def candidate_matrix(series_by_id, members):
    """Full-span candidate series, one row per cluster (member means)."""
    return np.array([np.mean([series_by_id[m].values for m in members[c]], axis=0) for c in sorted(members)])


def _check_simplex(w, n, name):
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise DisaggregationError(f"{name} has length {w.shape}, expected {n}")
    if np.any(w < -SIMPLEX_TOL) or abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise DisaggregationError(f"{name} is not on the probability simplex")
    return w


def compose(lib, omega, theta):
    """Weighted averages of the candidate windows."""
    omega = _check_simplex(omega, lib.M, "omega")
    theta = _check_simplex(theta, lib.N, "theta")
    return CompositeExemplar(demand=omega @ lib.demand, solar=theta @ lib.solar)


def library_to_json(lib):
    return json.dumps(
        {
            "start": lib.start.isoformat(),
            "demand": lib.demand.tolist(),
            "solar": lib.solar.tolist(),
            "membership": {
                kind: {str(c): list(m) for c, m in groups.items()} for kind, groups in lib.membership.items()
            },
        },
        indent=1,
    )


def library_from_json(text):
    data = json.loads(text)
    membership = {kind: {int(c): list(m) for c, m in groups.items()} for kind, groups in data["membership"].items()}
    return ExemplarLibrary(
        _utc(data["start"]),
        np.array(data["demand"], dtype=float),
        np.array(data["solar"], dtype=float),
        membership,
    )
