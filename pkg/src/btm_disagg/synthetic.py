"""Synthetic feeders with known ground truth.

Demand is ``base x hour-of-day pattern x weekday factor x lognormal noise``.
PV output is ``capacity x daylight bell ** shape`` shifted in time by the
panel azimuth and scaled by one cloud process shared across the feeder.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import pandas as pd

from .config import read_config
from .dataset import FeederDataset, PowerSeries
from .errors import ConfigError



@dataclass(frozen=True)
class SynthConfig:
    n_demand: int = 60  # customers with metered demand, no PV
    n_pv_observed: int = 30  # customers with demand and PV metered separately
    laterals: dict = field(default_factory=lambda: {"L1": 22, "L2": 26, "L3": 30})
    pv_share: float = 0.6  # fraction of net-only customers owning a PV
    days: int = 365
    start: str = "2019-01-01T00:00:00Z"
    n_patterns: int = 4
    pattern_contrast: float = 0.4  # height of each pattern's signature bump
    azimuths: tuple = (-45.0, 0.0, 45.0)  # degrees from south, planted orientations
    net_azimuth_weights: tuple | None = None  # orientation mix of unobservable PVs
    hours_per_degree: float = 1.0 / 45.0
    capacity_range: tuple = (3.0, 8.0)
    shape_range: tuple = (1.0, 1.5)
    base_spread: float = 0.1  # lognormal sigma of per-customer base load
    demand_noise: float = 0.25  # lognormal sigma of hourly demand noise
    weekend_factor: float = 1.1
    cloud_noise: float = 0.5  # 0 -> clear sky every day
    pv_noise: float = 0.03  # per-PV multiplicative hourly noise
    window_hours: int = 96

    def __post_init__(self):
        counts = [self.n_demand, self.n_pv_observed, self.n_patterns, len(self.azimuths)]
        counts += list(self.laterals.values())
        if min(counts) < 1:
            raise ConfigError("synthesis counts must be positive")
        if self.days * 24 < 2 * self.window_hours:
            raise ConfigError(
                f"span of {self.days * 24} h is shorter than two windows of {self.window_hours} h"
            )
        if not 0.0 <= self.pv_share <= 1.0:
            raise ConfigError("pv_share must lie in [0, 1]")
        lo, hi = self.capacity_range
        if not 0 < lo <= hi:
            raise ConfigError("capacity_range must be positive and ordered")
        if self.net_azimuth_weights is not None and len(self.net_azimuth_weights) != len(self.azimuths):
            raise ConfigError("net_azimuth_weights needs one weight per azimuth")

    @classmethod
    def from_mapping(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown synthesis keys: {sorted(unknown)}")
        data = dict(data)
        for key in ("azimuths", "capacity_range", "shape_range", "net_azimuth_weights"):
            if data.get(key) is not None:
                data[key] = tuple(float(v) for v in data[key])
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        return cls.from_mapping(read_config(path)["synth"])

    def to_dict(self):
        return asdict(self)


def _bump(h, centre, width):
    d = (h - centre + 12.0) % 24.0 - 12.0
    return np.exp(-0.5 * (d / width) ** 2)


def demand_pattern(p, n_patterns=4, contrast=0.4, hours=None):
    """Hour-of-day load shape ``p`` of ``n_patterns`` (unit daily mean).

    All shapes share morning and evening peaks; each adds its own signature
    bump at a distinct hour so the planted patterns are roughly equidistant.
    """
    h = np.arange(24) + 0.5 if hours is None else hours
    signature = 2.0 + 24.0 * p / n_patterns
    shape = (
        0.4
        + 0.3 * _bump(h, 13.0, 3.0)
        + 0.6 * _bump(h, 7.5, 1.2)
        + 0.9 * _bump(h, 19.0, 1.8)
        + contrast * _bump(h, signature, 1.5)
    )
    return shape / shape.mean()


def clear_sky(hour_of_day, day_of_year, shift_hours, shape):
    """Daylight bell in [0, 1] for the given solar-time shift."""
    daylen = 12.0 + 3.0 * np.sin(2 * np.pi * (day_of_year - 80.0) / 365.0)
    x = (hour_of_day + 0.5 - 12.5 - shift_hours) / daylen
    bell = np.where(np.abs(x) < 0.5, np.cos(np.pi * x), 0.0)
    return np.maximum(bell, 0.0) ** shape


def cloud_process(n_hours, noise, rng):
    """Shared multiplicative cloud attenuation in (0, 1]."""
    n_days = int(np.ceil(n_hours / 24))
    daily = 1.0 - noise * rng.beta(0.7, 1.5, size=n_days)
    eps = np.empty(n_hours)
    eps[0] = 0.0
    shocks = rng.normal(0.0, 0.3, size=n_hours)
    for t in range(1, n_hours):
        eps[t] = 0.7 * eps[t - 1] + shocks[t]
    hourly = np.repeat(daily, 24)[:n_hours] * (1.0 + 0.5 * noise * eps)
    if noise == 0:
        return np.ones(n_hours)
    return np.clip(hourly, 0.05, 1.0)


def _round(x):
    return np.round(x, 6) + 0.0


def generate_synthetic_feeder(config=None, seed=0):
    """Build a :class:`FeederDataset` with ground truth for every net meter."""
    cfg = config or SynthConfig()
    rng = np.random.default_rng(seed)
    start = pd.Timestamp(cfg.start)
    start = start.tz_localize("UTC") if start.tzinfo is None else start.tz_convert("UTC")
    n = cfg.days * 24
    idx = pd.date_range(start, periods=n, freq="h")
    hour = idx.hour.to_numpy().astype(float)
    doy = idx.dayofyear.to_numpy().astype(float)
    weekday = np.where(idx.dayofweek.to_numpy() >= 5, cfg.weekend_factor, 1.0)
    patterns = np.array([demand_pattern(p, cfg.n_patterns, cfg.pattern_contrast) for p in range(cfg.n_patterns)])
    cloud = cloud_process(n, cfg.cloud_noise, rng)
    hour_i = idx.hour.to_numpy()

    def make_demand(pattern):
        base = np.exp(rng.normal(0.0, cfg.base_spread))
        sigma = cfg.demand_noise
        noise = np.exp(rng.normal(-0.5 * sigma**2, sigma, size=n)) if sigma > 0 else 1.0
        return _round(base * patterns[pattern][hour_i] * weekday * noise), base

    def make_pv(azimuth):
        cap = rng.uniform(*cfg.capacity_range)
        shape = rng.uniform(*cfg.shape_range)
        sigma = cfg.pv_noise
        noise = np.exp(rng.normal(-0.5 * sigma**2, sigma, size=n)) if sigma > 0 else 1.0
        gen = cap * clear_sky(hour, doy, azimuth * cfg.hours_per_degree, shape) * cloud * noise
        return 0.0 - _round(np.minimum(gen, cap)), {"capacity_kw": cap, "shape": shape}

    observed_demand, observed_pairs, net_only, truth, attrs = {}, {}, {}, {}, {}
    for i in range(cfg.n_demand):
        mid = f"P{i + 1:04d}"
        p = i % cfg.n_patterns
        values, base = make_demand(p)
        observed_demand[mid] = PowerSeries(start, values, "native_demand")
        attrs[mid] = {"pattern": p, "base_kw": base}
    for i in range(cfg.n_pv_observed):
        mid = f"G{i + 1:04d}"
        p = int(rng.integers(cfg.n_patterns))
        az = cfg.azimuths[i % len(cfg.azimuths)]
        dem, base = make_demand(p)
        inj, info = make_pv(az)
        observed_pairs[mid] = (
            PowerSeries(start, dem, "native_demand"),
            PowerSeries(start, inj, "solar_injection"),
        )
        attrs[mid] = {"pattern": p, "base_kw": base, "azimuth": az, **info}

    weights = np.asarray(cfg.net_azimuth_weights or [1.0] * len(cfg.azimuths), dtype=float)
    weights = weights / weights.sum()
    groups = {}
    k = 0
    for name, size in cfg.laterals.items():
        members = []
        for _ in range(size):
            k += 1
            mid = f"N{k:04d}"
            p = int(rng.integers(cfg.n_patterns))
            dem, base = make_demand(p)
            info = {"pattern": p, "base_kw": base}
            if rng.random() < cfg.pv_share:
                az = cfg.azimuths[int(rng.choice(len(weights), p=weights))]
                inj, pv = make_pv(az)
                info.update(azimuth=az, **pv)
            else:
                inj = np.zeros(n)
            truth[mid] = (
                PowerSeries(start, dem, "native_demand"),
                PowerSeries(start, inj, "solar_injection"),
            )
            net_only[mid] = PowerSeries(start, dem + inj, "net_demand")
            attrs[mid] = info
            members.append(mid)
        groups[name] = members
    return FeederDataset(observed_demand, observed_pairs, net_only, truth, groups, attrs)


def load_config(path):
    return SynthConfig.from_file(Path(path))
