"""Threshold policies from the simplified (i.i.d. exponential gap) model.

In the simplified model the stopping problem no longer depends on elapsed
time and collapses to a one-step look-ahead: stop as soon as the best
progress ``b`` satisfies ``b >= alpha``, where ``alpha`` is the fixed point
of

    beta_1(b) = E[max(b, Z)] - 1/(eta K) = b + int_b^1 (1 - F_Z) - 1/(eta K)

(or 0 when beta_1(0) < 0).  First Forward and Max Forward are the
thresholds 0 and 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analytics import sf_mean_progress
from .bf import expected_max_weights
from .errors import ConvergenceError, DomainError
from .geometry import ProgressModel, tail_integral

__all__ = [
    "SfThreshold",
    "BetaTable",
    "beta1",
    "beta1_table",
    "beta_next",
    "eta_cutoff",
    "solve_alpha",
    "sf_decide",
    "ff_decide",
    "mf_decide",
    "calibrate_threshold",
    "MF_ALPHA",
]

ROOT_TOL = 1e-9
GAMMA_TOL = 1e-6
MAX_BISECT = 200
MF_ALPHA = 1.0


@dataclass(frozen=True)
class SfThreshold:
    """Threshold ``alpha`` with the multiplier it came from.

    ``eta`` is None when the threshold was calibrated to a progress target
    ``gamma`` instead of solved from a multiplier.
    """

    alpha: float
    K: int
    eta_o: float
    eta: float | None = None
    gamma: float | None = None

    @property
    def is_ff(self) -> bool:
        return self.alpha == 0.0

    @property
    def is_mf(self) -> bool:
        return self.alpha >= MF_ALPHA


def _check(K: int, eta: float) -> None:
    if K < 1:
        raise DomainError(f"K must be at least 1, got {K}")
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta}")


def beta1(b, K: int, eta: float, model: ProgressModel):
    _check(K, eta)
    b = np.asarray(b, dtype=float)
    if np.any(b < 0) or np.any(b > 1):
        raise DomainError("b must lie in [0, 1]")
    out = b + tail_integral(model, b) - 1.0 / (eta * K)
    return float(out) if np.ndim(out) == 0 else out


def eta_cutoff(K: int, model: ProgressModel) -> float:
    """Multiplier below which the threshold collapses to 0 (SF becomes FF)."""
    return 1.0 / (model.mean() * K)


def solve_alpha(K: int, eta: float, model: ProgressModel) -> SfThreshold:
    _check(K, eta)
    eta_o = eta_cutoff(K, model)
    if eta <= eta_o:
        return SfThreshold(0.0, K, eta_o, eta=eta)

    def g(b: float) -> float:
        return b - beta1(b, K, eta, model)

    lo, hi = 0.0, 1.0  # g(lo) < 0 < g(hi) = 1/(eta K)
    for _ in range(MAX_BISECT):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if abs(gm) <= ROOT_TOL:
            return SfThreshold(mid, K, eta_o, eta=eta)
        if gm < 0:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(f"no fixed point of beta_1 found for K={K}, eta={eta}")


@dataclass(frozen=True, eq=False)
class BetaTable:
    """A beta function sampled on ``grid``; linear interpolation in between."""

    grid: np.ndarray
    values: np.ndarray

    def __call__(self, b):
        return np.interp(b, self.grid, self.values)


def beta1_table(K: int, eta: float, model: ProgressModel) -> BetaTable:
    """beta_1 on the model grid, through the same quadrature as ``beta_next``.

    Sharing the rule keeps beta_{j+1} - beta_j free of cross-method noise.
    """
    _check(K, eta)
    z, W = expected_max_weights(model, model.grid_z, refine=1)
    return BetaTable(model.grid_z, W @ z - 1.0 / (eta * K))


def beta_next(beta_prev: BetaTable, K: int, eta: float, model: ProgressModel) -> BetaTable:
    """beta_{j+1}(b) = E[max(b, Z, beta_j(max(b, Z)))] - 1/(eta K)."""
    _check(K, eta)
    z, W = expected_max_weights(model, beta_prev.grid, refine=1)
    h = np.maximum(z, beta_prev(z))
    return BetaTable(beta_prev.grid, W @ h - 1.0 / (eta * K))


def sf_decide(th: SfThreshold, k: int, b):
    """Stop iff k == K or b >= alpha."""
    if not 1 <= k <= th.K:
        raise DomainError(f"stage {k} outside 1..{th.K}")
    out = np.logical_or(k == th.K, np.asarray(b) >= th.alpha)
    return bool(out) if out.ndim == 0 else out


def ff_decide(k: int) -> bool:
    return k == 1


def mf_decide(k: int, K: int) -> bool:
    return k == K


def calibrate_threshold(gamma: float, K: int, model: ProgressModel) -> SfThreshold:
    """Threshold whose exact-model mean progress equals ``gamma``.

    Targets at or below the First Forward mean give alpha = 0; targets at or
    above the Max Forward mean give the Max Forward sentinel alpha = 1.
    """
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma must lie in [0, 1], got {gamma}")
    if K < 1:
        raise DomainError(f"K must be at least 1, got {K}")
    eta_o = eta_cutoff(K, model)
    if gamma <= sf_mean_progress(K, 0.0, model):
        return SfThreshold(0.0, K, eta_o, gamma=gamma)
    if gamma >= sf_mean_progress(K, 1.0, model):
        return SfThreshold(MF_ALPHA, K, eta_o, gamma=gamma)
    lo, hi = 0.0, 1.0
    for _ in range(MAX_BISECT):
        mid = 0.5 * (lo + hi)
        err = sf_mean_progress(K, mid, model) - gamma
        if abs(err) <= GAMMA_TOL:
            return SfThreshold(mid, K, eta_o, gamma=gamma)
        if err < 0:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(f"could not calibrate a threshold for gamma={gamma}, K={K}")
