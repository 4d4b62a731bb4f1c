"""Sliding-window disaggregation runs, the direct-disaggregation baseline,
MAPE evaluation, observability sweeps and scenario runs."""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import pandas as pd

from .config import read_config
from .dataset import aggregate_group
from .errors import ConfigError, DisaggregationError, SpanError
from .exemplar import candidate_matrix, demand_profiles, solar_profiles
from .rgvp import init_weights, softmax_weights
from .scenario import apply_scenario
from .spectral import ClusteringResult, cluster_profiles, select_cluster_count
from .sss import separate_many



@dataclass(frozen=True)
class PipelineConfig:
    T: int = 96
    stride: int = 1
    M: int | str = 4
    N: int | str = 3
    k_max: int = 8
    seed: int = 0
    restarts: int = 10
    neighbour_rank: int = 7
    learning_rate: float | None = None  # None -> sqrt(8 ln L / T)
    fractions: tuple = (1.0, 0.5, 0.25, 0.1)
    histogram_bins: int = 50

    def __post_init__(self):
        if self.T < 2:
            raise ConfigError("window length T must be at least 2")
        if self.stride < 1:
            raise ConfigError("stride must be at least 1")
        for name in ("M", "N"):
            v = getattr(self, name)
            if v != "auto" and (not isinstance(v, int) or v < 1):
                raise ConfigError(f"{name} must be a positive integer or 'auto'")
        if "auto" in (self.M, self.N) and self.k_max < 3:
            raise ConfigError("k_max must be at least 3 when cluster counts are automatic")

    @classmethod
    def from_mapping(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown pipeline keys: {sorted(unknown)}")
        data = dict(data)
        if "fractions" in data:
            data["fractions"] = tuple(float(f) for f in data["fractions"])
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        return cls.from_mapping(read_config(path)["pipeline"])

    def to_dict(self):
        return asdict(self)


def max_workers():
    try:
        return max(1, int(os.environ.get("BTM_DISAGG_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# library
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PreparedLibrary:
    """Cluster memberships plus full-span candidate series.

    ``demand`` is ``(M, K)``, ``solar`` ``(N, K)`` (non-positive injection).
    Any window's candidates are column slices of these.
    """

    start: pd.Timestamp
    demand_ids: list
    solar_ids: list
    demand_clustering: ClusteringResult
    solar_clustering: ClusteringResult
    demand: np.ndarray
    solar: np.ndarray

    @property
    def M(self):
        return self.demand.shape[0]

    @property
    def N(self):
        return self.solar.shape[0]

    @property
    def membership(self):
        return {
            "demand": self.demand_clustering.members(self.demand_ids),
            "solar": self.solar_clustering.members(self.solar_ids),
        }


def _cluster(profiles, k, cfg):
    n = len(profiles)
    if k == "auto":
        k_max = min(cfg.k_max, n - 1)
        if k_max >= 3:
            return select_cluster_count(profiles, k_max, seed=cfg.seed, restarts=cfg.restarts, rank=cfg.neighbour_rank)
        k = n if n <= 2 else 2
    return cluster_profiles(profiles, min(k, n), seed=cfg.seed, restarts=cfg.restarts, rank=cfg.neighbour_rank)


def prepare_library(dataset, cfg=None):
    cfg = cfg or PipelineConfig()
    if not dataset.observed_demand or not dataset.observed_pairs:
        raise DisaggregationError("need at least one observed-demand customer and one observed PV")
    d_ids, d_prof = demand_profiles(dataset)
    s_ids, s_prof = solar_profiles(dataset)
    d_cl = _cluster(d_prof, cfg.M, cfg)
    s_cl = _cluster(s_prof, cfg.N, cfg)
    ref = dataset.observed_demand[d_ids[0]]
    for mid in d_ids:
        if not dataset.observed_demand[mid].same_span(ref):
            raise SpanError(f"observed demand meter {mid!r} spans a different period")
    for mid in s_ids:
        if not dataset.observed_pairs[mid][1].same_span(ref):
            raise SpanError(f"observed PV meter {mid!r} spans a different period")
    pv = {m: dataset.observed_pairs[m][1] for m in s_ids}
    demand = candidate_matrix(dataset.observed_demand, d_cl.members(d_ids))
    solar = candidate_matrix(pv, s_cl.members(s_ids))
    return PreparedLibrary(ref.start, d_ids, s_ids, d_cl, s_cl, demand, solar)


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------


@dataclass
class DisaggregationReport:
    method: str
    group: str
    index: pd.DatetimeIndex
    net_measured: np.ndarray
    demand_hat: np.ndarray  # NaN where no window has completed yet
    solar_hat: np.ndarray  # non-positive injection
    net_hat: np.ndarray
    window_end: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    residual: np.ndarray  # l1 net residual per window
    regularized: np.ndarray
    omega: np.ndarray  # weights after each window's update, (W, M)
    theta: np.ndarray
    R_p: np.ndarray
    R_g: np.ndarray
    demand_trials: np.ndarray  # latest-sample estimate of each single-candidate trial
    solar_trials: np.ndarray
    membership: dict
    truth_demand: np.ndarray | None = None
    truth_solar: np.ndarray | None = None
    choice: np.ndarray | None = None  # baseline only: chosen (i, j) per window
    mape_solar: float | None = None
    mape_demand: float | None = None
    mape_net: float | None = None
    runtime_seconds: float = 0.0
    events: list = field(default_factory=list)
    transition: dict | None = None

    @property
    def valid(self):
        return ~np.isnan(self.net_hat)

    @property
    def M(self):
        return self.omega.shape[1]

    @property
    def N(self):
        return self.theta.shape[1]

    def metrics(self):
        out = {
            "method": self.method,
            "group": self.group,
            "M": self.M,
            "N": self.N,
            "windows": int(len(self.window_end)),
            "estimated_samples": int(self.valid.sum()),
            "mape_solar": self.mape_solar,
            "mape_demand": self.mape_demand,
            "mape_net": self.mape_net,
            "regularized_windows": int(self.regularized.sum()),
        }
        if self.transition is not None:
            out["transition"] = self.transition
        return out


def evaluate_mape(estimate, truth):
    """Mean absolute error as a percentage of the mean absolute truth.

    NaN estimates (warm-up samples) are excluded.
    """
    est = np.asarray(getattr(estimate, "values", estimate), dtype=float)
    tru = np.asarray(getattr(truth, "values", truth), dtype=float)
    if est.shape != tru.shape:
        raise DisaggregationError("estimate and truth cover different spans")
    keep = ~np.isnan(est)
    est, tru = est[keep], tru[keep]
    if est.size == 0:
        raise DisaggregationError("no estimated samples to score")
    level = np.mean(np.abs(tru))
    if level == 0:
        raise DisaggregationError("truth has zero mean absolute value")
    return float(100.0 * np.mean(np.abs(est - tru)) / level)


def _score(report):
    report.mape_net = evaluate_mape(report.net_hat, report.net_measured)
    if report.truth_solar is not None:
        if np.any(report.truth_solar[report.valid]):
            report.mape_solar = evaluate_mape(report.solar_hat, report.truth_solar)
        report.mape_demand = evaluate_mape(report.demand_hat, report.truth_demand)
    return report


# --------------------------------------------------------------------------
# runs
# --------------------------------------------------------------------------


def _setup(dataset, group, cfg, library):
    cfg = cfg or PipelineConfig()
    net, truth = aggregate_group(dataset, group)
    if not dataset.observed_demand or not dataset.observed_pairs:
        raise DisaggregationError("observable customer sets are empty")
    if len(net) < cfg.T:
        raise SpanError(f"group {group!r} spans {len(net)} h, shorter than the window length T={cfg.T}")
    lib = library or prepare_library(dataset, cfg)
    if lib.start != net.start or lib.demand.shape[1] != len(net):
        raise SpanError(f"group {group!r} and the observed customers span different periods")
    return cfg, net, truth, lib


def _window_ends(K, cfg):
    ends = np.arange(cfg.T - 1, K, cfg.stride)
    if ends[-1] != K - 1:
        ends = np.append(ends, K - 1)  # a short final step so the tail is estimated too
    return ends


def _fill_range(t, prev, T):
    first = T - 1 if prev is None else prev + 1
    return np.arange(first, t + 1)


def _new_report(method, group, net, truth, lib, n_win):
    K = len(net)
    nan = np.full(K, np.nan)
    return DisaggregationReport(
        method=method,
        group=group,
        index=net.index,
        net_measured=np.array(net.values),
        demand_hat=nan.copy(),
        solar_hat=nan.copy(),
        net_hat=nan.copy(),
        window_end=np.zeros(n_win, dtype=int),
        alpha=np.zeros(n_win),
        beta=np.zeros(n_win),
        residual=np.zeros(n_win),
        regularized=np.zeros(n_win, dtype=bool),
        omega=np.zeros((n_win, lib.M)),
        theta=np.zeros((n_win, lib.N)),
        R_p=np.zeros((n_win, lib.M)),
        R_g=np.zeros((n_win, lib.N)),
        demand_trials=np.zeros((n_win, lib.M)),
        solar_trials=np.zeros((n_win, lib.N)),
        membership=lib.membership,
        truth_demand=None if truth is None else np.array(truth[0].values),
        truth_solar=None if truth is None else np.array(truth[1].values),
    )


def run_stream(dataset, group, cfg=None, library=None):
    """Disaggregate one group's net demand window by window.

    Each window composes exemplars with the current weights, separates the
    net demand, runs the single-candidate trials, accumulates regrets and
    updates the weights used by the next window. The estimate reported for
    a timestamp comes from the newest window ending at or after it.
    """
    tic = time.perf_counter()
    cfg, net, truth, lib = _setup(dataset, group, cfg, library)
    y_all = np.asarray(net.values)
    P, G = lib.demand, lib.solar
    M, N, T = lib.M, lib.N, cfg.T
    ends = _window_ends(len(y_all), cfg)
    rep = _new_report("rgvp", group, net, truth, lib, len(ends))
    state = init_weights(M, N, T, t0=net.index[T - 1], lam=cfg.learning_rate)
    omega, theta = state.omega, state.theta
    R_p, R_g = state.R_p.copy(), state.R_g.copy()
    lam_d, lam_s = state.lambda_demand, state.lambda_solar
    prev = None
    for w, t in enumerate(ends):
        s = t - T + 1
        Pw = P[:, s : t + 1]
        Gw = G[:, s : t + 1]
        y = y_all[s : t + 1]
        p_c = omega @ Pw
        g_c = theta @ Gw
        a = np.vstack([p_c[None, :], Pw, np.broadcast_to(p_c, (N, T))])
        b = np.vstack([g_c[None, :], np.broadcast_to(g_c, (M, T)), Gw])
        coef, reg, resid = separate_many(a, b, y)
        alpha, beta = coef[0]
        idx = _fill_range(t, prev, T)
        rep.demand_hat[idx] = alpha * p_c[idx - s]
        rep.solar_hat[idx] = beta * g_c[idx - s]
        rep.window_end[w] = t
        rep.alpha[w], rep.beta[w], rep.residual[w], rep.regularized[w] = alpha, beta, resid[0], reg[0]
        rep.demand_trials[w] = coef[1 : 1 + M, 0] * Pw[:, -1]
        rep.solar_trials[w] = coef[1 + M :, 1] * Gw[:, -1]
        R_p += resid[0] - resid[1 : 1 + M]
        R_g += resid[0] - resid[1 + M :]
        if M > 1:
            omega = softmax_weights(R_p, lam_d)
        if N > 1:
            theta = softmax_weights(R_g, lam_s)
        rep.omega[w], rep.theta[w], rep.R_p[w], rep.R_g[w] = omega, theta, R_p, R_g
        prev = t
    rep.net_hat = rep.demand_hat + rep.solar_hat
    rep.runtime_seconds = time.perf_counter() - tic
    return _score(rep)


def run_dd_baseline(dataset, group, cfg=None, library=None):
    """Direct disaggregation: in every window try each (demand, solar)
    candidate pair and keep the one with the smallest l1 net residual."""
    tic = time.perf_counter()
    cfg, net, truth, lib = _setup(dataset, group, cfg, library)
    y_all = np.asarray(net.values)
    P, G = lib.demand, lib.solar
    M, N, T = lib.M, lib.N, cfg.T
    ends = _window_ends(len(y_all), cfg)
    rep = _new_report("dd", group, net, truth, lib, len(ends))
    rep.choice = np.zeros((len(ends), 2), dtype=int)
    rows = np.repeat(np.arange(M), N)
    cols = np.tile(np.arange(N), M)
    prev = None
    for w, t in enumerate(ends):
        s = t - T + 1
        Pw = P[:, s : t + 1]
        Gw = G[:, s : t + 1]
        y = y_all[s : t + 1]
        coef, reg, resid = separate_many(Pw[rows], Gw[cols], y)
        best = int(np.argmin(resid))
        i, j = rows[best], cols[best]
        alpha, beta = coef[best]
        idx = _fill_range(t, prev, T)
        rep.demand_hat[idx] = alpha * Pw[i, idx - s]
        rep.solar_hat[idx] = beta * Gw[j, idx - s]
        rep.window_end[w] = t
        rep.alpha[w], rep.beta[w], rep.residual[w], rep.regularized[w] = alpha, beta, resid[best], reg[best]
        rep.choice[w] = (i, j)
        rep.omega[w, i] = 1.0
        rep.theta[w, j] = 1.0
        prev = t
    rep.net_hat = rep.demand_hat + rep.solar_hat
    rep.runtime_seconds = time.perf_counter() - tic
    return _score(rep)


def _subsample_pvs(dataset, fraction, seed):
    ids = list(dataset.observed_pairs)
    n_keep = int(round(fraction * len(ids)))
    if n_keep < 1:
        raise DisaggregationError(f"observability fraction {fraction} leaves no observable PV")
    if n_keep >= len(ids):
        return dataset
    order = np.random.default_rng(seed).permutation(len(ids))
    keep = set(order[:n_keep].tolist())
    pairs = {mid: dataset.observed_pairs[mid] for k, mid in enumerate(ids) if k in keep}
    return dataset.replace(observed_pairs=pairs)


def sensitivity_sweep(dataset, groups, cfg=None, fractions=None):
    """Re-run the disaggregation with only a fraction of the observed PVs.

    Subsets are nested (one seeded permutation, growing prefixes). Returns
    one row per fraction with the mean solar and demand MAPE over ``groups``.
    """
    cfg = cfg or PipelineConfig()
    groups = [groups] if isinstance(groups, str) else list(groups)
    fractions = list(cfg.fractions if fractions is None else fractions)

    def one(fraction):
        ds = _subsample_pvs(dataset, fraction, cfg.seed)
        lib = prepare_library(ds, cfg)
        reps = [run_stream(ds, g, cfg, lib) for g in groups]
        g_m = [r.mape_solar for r in reps if r.mape_solar is not None]
        p_m = [r.mape_demand for r in reps if r.mape_demand is not None]
        return {
            "fraction": fraction,
            "observable_pvs": len(ds.observed_pairs),
            "mean_g_m": float(np.mean(g_m)) if g_m else None,
            "mean_p_m": float(np.mean(p_m)) if p_m else None,
        }

    for f in fractions:
        _subsample_pvs(dataset, f, cfg.seed)  # fail before any work is done
    return parallel_map(one, fractions)


def rolling_mape(estimate, truth, window):
    """Trailing-window MAPE ending at each sample (NaN where undefined)."""
    est = np.asarray(estimate, dtype=float)
    tru = np.asarray(truth, dtype=float)
    out = np.full(len(est), np.nan)
    err = np.abs(est - tru)
    for t in range(window - 1, len(est)):
        e = err[t - window + 1 : t + 1]
        if np.isnan(e).any():
            continue
        level = np.mean(np.abs(tru[t - window + 1 : t + 1]))
        if level > 0:
            out[t] = 100.0 * np.mean(e) / level
    return out


def transition_metrics(report, event_index, T, factor=1.5):
    """Recovery of the solar estimate after an event at sample ``event_index``.

    The transition ends at the first sample whose trailing T-hour solar MAPE,
    computed over a window lying entirely after the event, is back below
    ``factor`` times the pre-event MAPE.
    """
    pre = np.arange(len(report.index)) < event_index
    est_pre = np.where(pre, report.solar_hat, np.nan)
    pre_mape = evaluate_mape(est_pre, report.truth_solar)
    roll = rolling_mape(report.solar_hat, report.truth_solar, T)
    first_full = event_index + T - 1
    recovered = None
    for t in range(first_full, len(roll)):
        if not np.isnan(roll[t]) and roll[t] <= factor * pre_mape:
            recovered = t
            break
    post_from = (recovered - T + 1) if recovered is not None else first_full
    est_post = np.where(np.arange(len(report.index)) >= post_from, report.solar_hat, np.nan)
    post_mape = evaluate_mape(est_post, report.truth_solar) if np.any(~np.isnan(est_post)) else None

    ends = report.window_end
    before = report.residual[ends < event_index]
    res_level = float(np.mean(before)) if before.size else None
    res_recovered = None
    if res_level is not None:
        after = np.flatnonzero(ends - T + 1 >= event_index)
        hit = [w for w in after if report.residual[w] <= factor * res_level]
        res_recovered = int(ends[hit[0]]) if hit else None
    return {
        "event_at": report.index[event_index].isoformat(),
        "pre_event_mape": pre_mape,
        "post_transition_mape": post_mape,
        "transition_hours": None if recovered is None else int(recovered - event_index + 1),
        "residual_transition_hours": None if res_recovered is None else int(res_recovered - event_index + 1),
        "pre_event_residual": res_level,
    }


def scenario_run(dataset, group, cfg=None, events=(), seed=0):
    """Apply BTM events to the net-only customers, then disaggregate."""
    cfg = cfg or PipelineConfig()
    events = list(events)
    if not events:
        return run_stream(dataset, group, cfg)
    changed = apply_scenario(dataset, events, seed=seed)
    report = run_stream(changed, group, cfg)
    report.events = events
    if report.truth_solar is not None:
        event_index = int((events[0].at - report.index[0]) / pd.Timedelta(hours=1))
        report.transition = transition_metrics(report, event_index, cfg.T)
    return report
