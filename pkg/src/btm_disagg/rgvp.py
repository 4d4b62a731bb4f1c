"""Regret-driven weighting of candidate exemplars.

Each candidate acts as an expert. After every window the learner compares
the l1 residual obtained with the composite exemplars against the residual
obtained when one candidate replaces its composite, accumulates the
differences as regrets, and re-weights candidates with the gradient of the
exponential potential ``(1/lam) * log(sum(exp(lam * R)))``, i.e. a softmax.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DisaggregationError
from .exemplar import compose
from .sss import separate


def learning_rate(n_experts, window):
    """``sqrt(8 ln L / T)``; zero for a single expert."""
    return math.sqrt(8.0 * math.log(n_experts) / window)


@dataclass(frozen=True)
class WeightState:
    omega: np.ndarray
    theta: np.ndarray
    R_p: np.ndarray
    R_g: np.ndarray
    lambda_demand: float
    lambda_solar: float
    t0: object = None

    @property
    def M(self):
        return len(self.omega)

    @property
    def N(self):
        return len(self.theta)


@dataclass(frozen=True)
class RegretUpdate:
    e_composite: float
    e_demand_candidates: np.ndarray
    e_solar_candidates: np.ndarray
    r_p: np.ndarray
    r_g: np.ndarray

    @classmethod
    def from_residuals(cls, e_composite, e_demand, e_solar):
        e_demand = np.asarray(e_demand, dtype=float)
        e_solar = np.asarray(e_solar, dtype=float)
        return cls(float(e_composite), e_demand, e_solar, e_composite - e_demand, e_composite - e_solar)


def init_weights(M, N, T, t0=None, lam=None):
    """Uniform weights, zero regrets. ``lam`` overrides the default rate."""
    if M < 1 or N < 1:
        raise DisaggregationError("need at least one demand and one solar candidate")
    if T < 2:
        raise DisaggregationError("window length must be at least 2")
    lam_d = learning_rate(M, T) if lam is None else (lam if M > 1 else 0.0)
    lam_s = learning_rate(N, T) if lam is None else (lam if N > 1 else 0.0)
    return WeightState(
        omega=np.full(M, 1.0 / M),
        theta=np.full(N, 1.0 / N),
        R_p=np.zeros(M),
        R_g=np.zeros(N),
        lambda_demand=lam_d,
        lambda_solar=lam_s,
        t0=t0,
    )


def potential(u, lam):
    """Exponential potential ``(1/lam) log sum exp(lam u)``."""
    u = np.asarray(u, dtype=float)
    z = lam * u
    top = z.max()
    return float((top + np.log(np.exp(z - top).sum())) / lam)


def softmax_weights(regrets, lam):
    """Gradient of :func:`potential`, evaluated with a max shift."""
    z = lam * np.asarray(regrets, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DisaggregationError("non-finite cumulative regrets")
    w = np.exp(z - z.max())
    return w / w.sum()


def candidate_trials(lib, composite, p_n):
    """Residuals of the composite pair and of every single-candidate pair."""
    e_c = separate(composite.demand, composite.solar, p_n).residual_l1
    e_p = [separate(lib.demand[i], composite.solar, p_n).residual_l1 for i in range(lib.M)]
    e_g = [separate(composite.demand, lib.solar[j], p_n).residual_l1 for j in range(lib.N)]
    return RegretUpdate.from_residuals(e_c, e_p, e_g)


def accumulate(state, upd):
    if upd.r_p.shape != state.R_p.shape or upd.r_g.shape != state.R_g.shape:
        raise DisaggregationError("regret vector dimensions do not match the weight state")
    return replace(state, R_p=state.R_p + upd.r_p, R_g=state.R_g + upd.r_g)


def update_weights(state):
    if state.M == 1 and state.N == 1:
        return state
    omega = state.omega if state.M == 1 else softmax_weights(state.R_p, state.lambda_demand)
    theta = state.theta if state.N == 1 else softmax_weights(state.R_g, state.lambda_solar)
    return replace(state, omega=omega, theta=theta)


def step(state, lib, p_n):
    """One full learning round on a window: compose, trial, accumulate, update."""
    upd = candidate_trials(lib, compose(lib, state.omega, state.theta), p_n)
    return update_weights(accumulate(state, upd)), upd


def trajectory_csv(labels, omega, theta, R_p, R_g):
    """Long-format ``t,kind,index,weight,cum_regret`` text, one row per
    window and candidate."""
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["t", "kind", "index", "weight", "cum_regret"])
    for w, t in enumerate(labels):
        for i in range(omega.shape[1]):
            out.writerow([t, "demand", i, repr(float(omega[w, i])), repr(float(R_p[w, i]))])
        for j in range(theta.shape[1]):
            out.writerow([t, "solar", j, repr(float(theta[w, j])), repr(float(R_g[w, j]))])
    return buf.getvalue()
