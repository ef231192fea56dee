"""Closed-form one-hop averages for threshold policies on the exact model.

A threshold policy with threshold ``alpha`` forwards to the first node whose
progress exceeds ``alpha``; if no such node exists it waits for all K nodes
and picks the best.  With p = p_alpha the probability that one node clears
the threshold,

    E[D] = sum_k C(K,k) p**k (1-p)**(K-k) / (k+1) + (1-p)**K K/(K+1)
    E[Z] = int_0^alpha 1-(1-p_z)**K dz + (1-(1-p)**K)/p int_alpha^1 p_z dz.

alpha = 0 is First Forward, alpha = 1 is Max Forward.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import comb

from .errors import DomainError
from .geometry import ProgressModel, tail_integral

__all__ = [
    "HopAverages",
    "sf_mean_delay",
    "sf_mean_progress",
    "sf_averages",
    "ff_averages",
    "mf_averages",
    "binomial_delay_sum",
    "write_averages_csv",
]


@dataclass(frozen=True)
class HopAverages:
    policy: str
    K: int
    L_i: float
    mean_delay: float
    mean_progress: float
    alpha: float | None = None
    eta: float | None = None


def _check(K: int, alpha: float) -> None:
    if K < 1:
        raise DomainError(f"K must be at least 1, got {K}")
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")


def binomial_delay_sum(K: int, p: float) -> float:
    """sum_{k=1}^K C(K,k) p^k (1-p)^(K-k) / (k+1), summed term by term."""
    k = np.arange(1, K + 1)
    return float(np.sum(comb(K, k) * p**k * (1.0 - p) ** (K - k) / (k + 1)))


def sf_mean_delay(K: int, alpha: float, model: ProgressModel) -> float:
    _check(K, alpha)
    p = float(model.tail_at(alpha))
    return binomial_delay_sum(K, p) + (1.0 - p) ** K * K / (K + 1)


def _miss_integral(model: ProgressModel, K: int, alpha: float) -> float:
    # integral over [0, alpha] of 1 - (1 - p_z)**K, trapezoid on the tail table
    if alpha <= 0.0:
        return 0.0
    g, t = model.grid_z, model.tail
    j = int(np.searchsorted(g, alpha, side="right"))
    x = np.concatenate([g[:j], [alpha]]) if g[j - 1] < alpha else g[:j]
    y = 1.0 - (1.0 - np.interp(x, g, t)) ** K
    return float(np.trapezoid(y, x))


def sf_mean_progress(K: int, alpha: float, model: ProgressModel) -> float:
    _check(K, alpha)
    first = _miss_integral(model, K, alpha)
    p_alpha = float(model.tail_at(alpha))
    if p_alpha <= 0.0:
        # no node can clear the threshold: all mass sits in the first branch
        return first
    return first + (1.0 - (1.0 - p_alpha) ** K) / p_alpha * float(tail_integral(model, alpha))


def sf_averages(K: int, alpha: float, model: ProgressModel, eta: float | None = None) -> HopAverages:
    return HopAverages(
        "SF", K, model.L_i,
        sf_mean_delay(K, alpha, model), sf_mean_progress(K, alpha, model),
        alpha=alpha, eta=eta,
    )


def ff_averages(K: int, model: ProgressModel) -> HopAverages:
    a = sf_averages(K, 0.0, model)
    return HopAverages("FF", K, model.L_i, a.mean_delay, a.mean_progress, alpha=0.0)


def mf_averages(K: int, model: ProgressModel) -> HopAverages:
    a = sf_averages(K, 1.0, model)
    return HopAverages("MF", K, model.L_i, a.mean_delay, a.mean_progress, alpha=1.0)


CSV_COLUMNS = ["policy", "K", "L_i", "alpha", "eta", "mean_delay", "mean_progress"]


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def write_averages_csv(rows: Iterable[HopAverages], fh, header: Iterable[str] = ()) -> None:
    for line in header:
        fh.write(f"# {line}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([r.policy, r.K, _fmt(r.L_i), _fmt(r.alpha), _fmt(r.eta),
                         _fmt(r.mean_delay), _fmt(r.mean_progress)])
