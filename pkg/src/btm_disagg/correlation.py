"""Correlation structure of a feeder: how aggregation smooths demand, how
PV output depends on orientation, and how weakly demand tracks solar."""

from __future__ import annotations

from itertools import combinations

import numpy as np
import pandas as pd

from .errors import DisaggregationError

COLUMNS = ["kind", "key", "correlation", "pairs"]


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise DisaggregationError("correlation needs two 1-D series of equal length >= 2")
    xc, yc = x - x.mean(), y - y.mean()
    denom = np.sqrt((xc @ xc) * (yc @ yc))
    if denom == 0:
        raise DisaggregationError("correlation undefined for a constant series")
    return float(np.clip((xc @ yc) / denom, -1.0, 1.0))


def _demand_matrix(dataset):
    rows = [s.values for s in dataset.observed_demand.values()]
    rows += [dem.values for dem, _ in dataset.observed_pairs.values()]
    return np.array(rows)


def correlation_study(dataset, group_sizes=(1, 5, 10, 30), seed=0, draws=20):
    """Pearson correlations as a long table with columns
    ``kind, key, correlation, pairs``.

    * ``demand_group``: mean correlation between two disjoint random groups
      of ``key`` demand customers (aggregated), over ``draws`` draws.
    * ``pv_azimuth``: mean correlation between observed PV pairs whose
      azimuths differ by ``key`` degrees (``None`` when azimuths are unknown).
    * ``demand_vs_solar``: aggregate observed demand against aggregate
      observed generation.
    """
    sizes = sorted({int(s) for s in group_sizes})
    if not sizes or sizes[0] < 1:
        raise DisaggregationError("group sizes must be positive integers")
    demand = _demand_matrix(dataset)
    if len(demand) < 2 * sizes[-1]:
        raise DisaggregationError(
            f"need at least {2 * sizes[-1]} demand customers for groups of {sizes[-1]}, have {len(demand)}"
        )
    pv_ids = list(dataset.observed_pairs)
    if len(pv_ids) < 2:
        raise DisaggregationError("need at least two observed PVs")

    rng = np.random.default_rng(seed)
    rows = []
    for size in sizes:
        vals = []
        for _ in range(draws):
            order = rng.permutation(len(demand))
            a = demand[order[:size]].sum(axis=0)
            b = demand[order[size : 2 * size]].sum(axis=0)
            vals.append(pearson(a, b))
        rows.append(("demand_group", size, float(np.mean(vals)), draws))

    gen = {m: -dataset.observed_pairs[m][1].values for m in pv_ids}
    by_offset = {}
    for a, b in combinations(pv_ids, 2):
        az_a = dataset.attributes.get(a, {}).get("azimuth")
        az_b = dataset.attributes.get(b, {}).get("azimuth")
        key = None if az_a is None or az_b is None else abs(float(az_a) - float(az_b))
        by_offset.setdefault(key, []).append(pearson(gen[a], gen[b]))
    for key in sorted(by_offset, key=lambda k: (k is None, k)):
        rows.append(("pv_azimuth", key, float(np.mean(by_offset[key])), len(by_offset[key])))

    total_demand = sum(dem.values for dem, _ in dataset.observed_pairs.values())
    total_gen = sum(gen.values())
    rows.append(("demand_vs_solar", None, pearson(total_demand, total_gen), 1))
    table = pd.DataFrame(rows, columns=COLUMNS)
    table["key"] = pd.Series([r[1] for r in rows], dtype=object)
    return table
