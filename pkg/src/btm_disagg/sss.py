"""Semi-supervised signal separation.

Net demand over a window is explained as ``alpha * p_C + beta * g_C`` where
``p_C`` and ``g_C`` are composite demand and solar exemplars; the two
coefficients come from the closed-form least-squares solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DisaggregationError
from .numerics import solve_normal_equations, solve_two_column_batch


@dataclass(frozen=True)
class SeparationResult:
    alpha: float
    beta: float
    demand_hat: np.ndarray
    solar_hat: np.ndarray
    net_hat: np.ndarray
    residual_l1: float
    condition_flag: str
    # alpha <= 0 or beta < 0 means the exemplars were used with the wrong sign
    sign_ok: bool


def _windows(*arrays):
    out = [np.asarray(a, dtype=float) for a in arrays]
    if any(a.ndim != 1 for a in out) or len({len(a) for a in out}) != 1:
        raise DisaggregationError("windows must be one-dimensional and of equal length")
    return out


def residual_l1(estimate, measured):
    est, meas = _windows(estimate, measured)
    return float(np.abs(est - meas).sum())


def separate(p_c, g_c, p_n):
    """Split the net-demand window ``p_n`` using composite exemplars."""
    p_c, g_c, p_n = _windows(p_c, g_c, p_n)
    if len(p_n) < 2:
        raise DisaggregationError("windows need at least two samples")
    if not (np.any(p_c) or np.any(g_c)):
        raise DisaggregationError("both exemplar columns are zero")
    sol = solve_normal_equations(np.column_stack([p_c, g_c]), p_n)
    alpha, beta = (float(c) for c in sol.coefficients)
    demand_hat = alpha * p_c
    solar_hat = beta * g_c
    net_hat = demand_hat + solar_hat
    return SeparationResult(
        alpha=alpha,
        beta=beta,
        demand_hat=demand_hat,
        solar_hat=solar_hat,
        net_hat=net_hat,
        residual_l1=residual_l1(net_hat, p_n),
        condition_flag=sol.condition_flag,
        sign_ok=alpha > 0 and beta >= 0,
    )


def separate_many(demand_cols, solar_cols, p_n):
    """Vectorized :func:`separate` over stacked ``(B, T)`` exemplar pairs.

    Returns ``(coef, regularized, residuals)`` where ``coef[:, 0]`` is alpha,
    ``coef[:, 1]`` beta and ``residuals`` the l1 reconstruction errors.
    """
    coef, regularized = solve_two_column_batch(demand_cols, solar_cols, p_n)
    recon = coef[:, :1] * demand_cols + coef[:, 1:] * solar_cols
    return coef, regularized, np.abs(recon - p_n).sum(axis=1)
