"""Asynchronous periodic wake process.

Each node wakes at ``k*T + T_i`` for a phase ``T_i`` uniform on [0, T).  Seen
from a relay holding a packet, the wake instants of its K forwarding nodes
within one period are the order statistics of K uniforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

__all__ = [
    "WakeSequence",
    "waiting_time",
    "sample_wakes",
    "sample_wake_matrix",
    "order_stat_pdf",
    "cond_interwake_pdf",
    "cond_interwake_mean",
    "factorial_ratio",
]


@dataclass(frozen=True, eq=False)
class WakeSequence:
    K: int
    w: np.ndarray
    u: np.ndarray

    @classmethod
    def from_instants(cls, w) -> WakeSequence:
        w = np.sort(np.asarray(w, dtype=float))
        return cls(len(w), w, np.diff(w, prepend=0.0))


def waiting_time(t: float, T_i: float, T: float = 1.0) -> float:
    """Time from ``t`` until the next wake instant ``k*T + T_i`` (k >= 0)."""
    if T <= 0:
        raise DomainError(f"period must be positive, got {T}")
    if t < 0 or not 0 <= T_i < T:
        raise DomainError(f"need t >= 0 and 0 <= T_i < T, got t={t}, T_i={T_i}")
    if t <= T_i:
        return T_i - t
    wait = (T_i - t) % T
    # (T_i - t) % T may round up to T when the true value is a hair below 0
    return 0.0 if wait >= T else wait


def sample_wakes(K: int, rng: np.random.Generator) -> WakeSequence:
    if K < 1:
        raise DomainError(f"K must be at least 1, got {K}")
    return WakeSequence.from_instants(rng.random(K))


def sample_wake_matrix(K: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent sorted wake sequences as an (n, K) array."""
    return np.sort(rng.random((n, K)), axis=1)


def _log_norm(K: int, k: int) -> float:
    return gammaln(K + 1) - gammaln(k) - gammaln(K - k + 1)


def order_stat_pdf(K: int, k: int, u):
    """Density of the k-th smallest of K i.i.d. Uniform[0, 1] variables."""
    if not 1 <= k <= K:
        raise DomainError(f"need 1 <= k <= K, got k={k}, K={K}")
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u > 1):
        raise DomainError("u must lie in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        # xlogy-style handling: 0**0 == 1
        lu = np.where(k == 1, 0.0, (k - 1) * np.log(u))
        lv = np.where(K == k, 0.0, (K - k) * np.log1p(-u))
    out = np.exp(_log_norm(K, k) + lu + lv)
    return float(out) if out.ndim == 0 else out


def cond_interwake_pdf(K: int, k: int, w: float, u):
    """Density of the gap U_{k+1} given W_k = w.

    Equal to (K-k) (1-w-u)**(K-k-1) / (1-w)**(K-k) on [0, 1-w].
    """
    if not 1 <= k <= K - 1:
        raise DomainError(f"need 1 <= k <= K-1, got k={k}, K={K}")
    if not 0 <= w < 1:
        raise DomainError(f"need 0 <= w < 1, got {w}")
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u > 1 - w + 1e-15):
        raise DomainError("u must lie in [0, 1-w]")
    m = K - k
    rest = np.clip(1.0 - w - u, 0.0, None) / (1.0 - w)
    out = m * rest ** (m - 1) / (1.0 - w)
    return float(out) if out.ndim == 0 else out


def cond_interwake_mean(K: int, k: int, w: float) -> float:
    return (1.0 - w) / (K - k + 1)


def factorial_ratio(K: int, k: int) -> float:
    """K! / ((k-1)! (K-k)!) evaluated through log-gamma."""
    return math.exp(_log_norm(K, k))
