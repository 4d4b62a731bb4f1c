import numpy as np
import pandas as pd
import pytest

from btm_disagg.synthetic import SynthConfig, generate_synthetic_feeder

START = pd.Timestamp("2021-03-01T00:00:00Z")

SMALL = SynthConfig(n_demand=16, n_pv_observed=9, laterals={"L1": 8, "L2": 10}, days=14)


@pytest.fixture(scope="session")
def small_feeder():
    return generate_synthetic_feeder(SMALL, seed=5)


@pytest.fixture(scope="session")
def year_feeder():
    return generate_synthetic_feeder(seed=0)


def write_meter_csv(path, rows):
    """``rows`` are (timestamp, meter, kind, kw) tuples."""
    frame = pd.DataFrame(rows, columns=["timestamp", "meter_id", "kind", "kw"])
    frame.to_csv(path, index=False)
    return path


def hourly(n, start=START):
    return [ts.strftime("%Y-%m-%dT%H:%M:%SZ") for ts in pd.date_range(start, periods=n, freq="h")]


def random_spd(rng, n):
    a = rng.normal(size=(n, n))
    return a @ a.T + n * np.eye(n)
