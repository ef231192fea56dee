"""Monte-Carlo evaluation of one-hop relay policies on the exact model.

Wake instants are order statistics of K uniforms (dependent gaps), progresses
are i.i.d. draws from the relay's progress law, and decisions are taken at
the continuous wake instants.  Trials are generated in fixed-size blocks,
each with its own counter-derived stream, so results do not depend on the
number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from ..bf import ThresholdSurface, bf_decide
from ..errors import ConfigError, DomainError
from ..geometry import HopContext, ProgressModel, quantile
from ..rng import seed_from, stream
from ..sf import SfThreshold

__all__ = ["HopStats", "run_onehop", "onehop_outcomes", "walk_trial", "policy_label"]

BLOCK = 1 << 16
MIN_TRIALS = 10_000

Policy = Union[ThresholdSurface, SfThreshold, str]
Decider = Callable[[int, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class HopStats:
    policy: str
    K: int
    L_i: float
    trials: int
    mean_delay: float
    se_delay: float
    mean_progress: float
    se_progress: float
    eta: float | None = None
    alpha: float | None = None
    J: float | None = None
    se_J: float | None = None

    @classmethod
    def from_outcomes(cls, policy: str, ctx: HopContext, delay, progress,
                      eta=None, alpha=None) -> HopStats:
        n = len(delay)
        se = lambda x: float(np.std(x, ddof=1) / math.sqrt(n))  # noqa: E731
        J = se_J = None
        if eta is not None:
            lag = delay - eta * progress
            J, se_J = float(lag.mean()), se(lag)
        return cls(policy, ctx.K, ctx.L_i, n,
                   float(delay.mean()), se(delay),
                   float(progress.mean()), se(progress),
                   eta=eta, alpha=alpha, J=J, se_J=se_J)


def policy_label(policy: Policy) -> str:
    if isinstance(policy, ThresholdSurface):
        return "BF"
    if isinstance(policy, SfThreshold):
        return "SF"
    return str(policy).upper()


def _decider(policy: Policy, K: int) -> Decider:
    if isinstance(policy, ThresholdSurface):
        if policy.K != K:
            raise ConfigError(f"BF surface solved for K={policy.K}, context has K={K}")
        return lambda k, w, b: bf_decide(policy, k, w, b)
    if isinstance(policy, SfThreshold):
        alpha = policy.alpha
        return lambda k, w, b: np.full(b.shape, True) if k == K else b >= alpha
    name = str(policy).upper()
    if name == "FF":
        return lambda k, w, b: np.full(b.shape, True)
    if name == "MF":
        return lambda k, w, b: np.full(b.shape, k == K)
    raise ConfigError(f"unknown policy {policy!r}")


def walk_trial(decide: Callable[[int, float, float], bool], w, z) -> tuple[int, float, float]:
    """Run one trial stage by stage; returns (stop stage, delay, progress).

    The relay may only transmit to the best node seen so far, so the
    progress is the running maximum at the stop stage.
    """
    b = -math.inf
    K = len(w)
    for k in range(1, K + 1):
        b = max(b, z[k - 1])
        if k == K or decide(k, w[k - 1], b):
            return k, float(w[k - 1]), float(b)
    raise AssertionError("unreachable: the last stage always stops")


def _block(args):
    policy, K, model, seed, index, n = args
    decide = _decider(policy, K)
    rng = stream(seed, index)
    W = np.sort(rng.random((n, K)), axis=1)
    Z = quantile(model, rng.random((n, K)))
    B = np.maximum.accumulate(Z, axis=1)
    stop = np.full(n, K - 1)
    open_ = np.ones(n, dtype=bool)
    for k in range(1, K):
        idx = np.flatnonzero(open_)
        if idx.size == 0:
            break
        hit = decide(k, W[idx, k - 1], B[idx, k - 1])
        stop[idx[hit]] = k - 1
        open_[idx[hit]] = False
    rows = np.arange(n)
    return W[rows, stop], B[rows, stop], stop + 1


def onehop_outcomes(policy: Policy, ctx: HopContext, model: ProgressModel, trials: int,
                    rng, jobs: int = 1):
    """Per-trial (delay, progress, stop stage) arrays, in trial order."""
    K = ctx.K
    if K < 1:
        raise DomainError(f"K must be at least 1, got {K}")
    if trials < MIN_TRIALS:
        raise DomainError(f"need at least {MIN_TRIALS} trials, got {trials}")
    _decider(policy, K)  # validate before fanning out
    seed = seed_from(rng)
    sizes = [min(BLOCK, trials - s) for s in range(0, trials, BLOCK)]
    tasks = [(policy, K, model, seed, i, n) for i, n in enumerate(sizes)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_block, tasks))
    else:
        parts = [_block(t) for t in tasks]
    return tuple(np.concatenate(x) for x in zip(*parts))


def run_onehop(policy: Policy, ctx: HopContext, model: ProgressModel, trials: int, rng,
               eta: float | None = None, jobs: int = 1) -> HopStats:
    """Mean delay and progress of ``policy`` over ``trials`` independent hops.

    ``rng`` is a master seed or a Generator (one draw is taken from it).
    When ``eta`` is omitted the multiplier attached to a BF surface or SF
    threshold is used for the Lagrangian ``J = delay - eta * progress``.
    """
    delay, progress, _ = onehop_outcomes(policy, ctx, model, trials, rng, jobs)
    if eta is None and isinstance(policy, (ThresholdSurface, SfThreshold)):
        eta = policy.eta
    alpha = policy.alpha if isinstance(policy, SfThreshold) else None
    return HopStats.from_outcomes(policy_label(policy), ctx, delay, progress, eta=eta, alpha=alpha)
