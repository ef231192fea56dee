"""Slotted-beacon end-to-end forwarding over a fixed network.

A relay holding the packet beacons in slots of length ``t_I``.  A forwarding
node that wakes during slot m is heard at the end of that slot; several
wakers in one slot contend and the one with the largest progress wins (ties
to the smaller node index).  If the winner clears the relay's threshold it
gets the packet, which takes ``t_D``; otherwise the best node so far is kept
awake and the others go back to sleep.  A relay within range of the sink
waits for the sink instead.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..errors import ConfigError, DomainError, RoutingError
from ..geometry import HopContext, ProgressModel, build_progress_model
from ..rng import seed_from, stream
from ..sf import MF_ALPHA, calibrate_threshold
from .network import Network

__all__ = ["E2EStats", "run_e2e", "deliver", "E2E_POLICIES", "relay_model", "Transfer"]

E2E_POLICIES = ("SF", "SF-HAT", "FF", "MF")
CHUNK = 50


@lru_cache(maxsize=2048)
def _cached_model(L_key: float, n_grid: int) -> ProgressModel:
    return build_progress_model(HopContext(L_key), n_grid)


def relay_model(L_i: float, n_grid: int = 1024) -> ProgressModel:
    """Progress model for a relay at normalized distance ``L_i``.

    Models are shared between relays whose distances agree to two decimals;
    keys that would round onto the radio range are nudged to 1.01.
    """
    return _cached_model(_model_key(L_i), n_grid)


def _model_key(L_i: float) -> float:
    return max(round(L_i, 2), 1.01)


@lru_cache(maxsize=16384)
def _calibrated(L_key: float, K: int, gamma: float, n_grid: int) -> float:
    return calibrate_threshold(gamma, K, _cached_model(L_key, n_grid)).alpha


@dataclass(frozen=True)
class Transfer:
    delay: float
    hops: int
    route: tuple[int, ...] = field(repr=False, default=())


@dataclass(frozen=True)
class E2EStats:
    policy: str
    gamma: float
    transfers: int
    mean_delay_s: float
    se_delay_s: float
    mean_hops: float
    se_hops: float
    records: tuple[Transfer, ...] = field(repr=False, default=())


def _normalize_policy(policy: str) -> str:
    name = policy.upper().replace("_", "-")
    if name in ("SFHAT", "SF-HAT", "SF^"):
        name = "SF-HAT"
    if name not in E2E_POLICIES:
        raise ConfigError(f"unknown end-to-end policy {policy!r}; choose from {E2E_POLICIES}")
    return name


class _Thresholds:
    """Per-relay thresholds, computed lazily and memoized for one run."""

    def __init__(self, net: Network, policy: str, gamma: float, n_grid: int):
        self.net, self.policy, self.gamma, self.n_grid = net, policy, gamma, n_grid
        self._memo: dict[int, float] = {}

    def __call__(self, i: int) -> float:
        if i not in self._memo:
            self._memo[i] = self._solve(i)
        return self._memo[i]

    def _solve(self, i: int) -> float:
        if self.policy == "FF":
            return 0.0
        if self.policy == "MF":
            return MF_ALPHA
        key = _model_key(self.net.dist_to_sink[i] / self.net.r_c)
        if self.policy == "SF":
            K = len(self.net.forwarding[i])
        else:
            area0 = _cached_model(key, self.n_grid).area0
            K = max(1, math.floor(self.net.lam * self.net.r_c**2 * area0))
        return _calibrated(key, K, float(self.gamma), self.n_grid)


def _slot(wait: np.ndarray | float, t_I: float, n_slots: int):
    return np.minimum(np.floor_divide(wait, t_I).astype(np.int64) + 1, n_slots)


def deliver(net: Network, threshold_of, knows_K: bool, phases: np.ndarray,
            T: float = 1.0, t_I: float = 0.005, t_D: float = 0.03) -> Transfer:
    """Route one packet from source to sink for fixed wake ``phases``.

    ``threshold_of(i)`` gives relay i's progress threshold.  With
    ``knows_K`` the relay stops once its whole forwarding set has woken;
    otherwise it falls back to the best node at the last beacon slot of the
    period.
    """
    n_slots = round(T / t_I)
    dist, r_c, sink = net.dist_to_sink, net.r_c, net.sink
    t, cur, hops = 0.0, net.source, 0
    route = [cur]
    while cur != sink:
        if hops > net.N + 1:
            raise RoutingError(f"packet looped: {hops} hops on {net.N} nodes")
        if dist[cur] <= r_c:
            wait = (phases[sink] - t) % T
            t += int(_slot(wait, t_I, n_slots)) * t_I + t_D
            hops += 1
            cur = sink
            route.append(cur)
            break
        fs = net.forwarding[cur]
        if fs.size == 0:
            raise RoutingError(f"node {cur} has an empty forwarding set")
        wait = np.mod(phases[fs] - t, T)
        wait[wait >= T] = 0.0
        slots = _slot(wait, t_I, n_slots)
        prog = dist[cur] - dist[fs]
        alpha = threshold_of(cur)
        order = np.lexsort((fs, -prog, slots))
        best = chosen = -1
        seen, at = 0, n_slots
        for pos, j in enumerate(order):
            seen += 1
            # order is (slot, -progress, index) sorted: first of a slot wins it
            if best < 0 or prog[j] > prog[best]:
                best = j
            last_of_slot = pos + 1 == len(order) or slots[order[pos + 1]] != slots[j]
            if not last_of_slot:
                continue
            if prog[best] >= alpha or (knows_K and seen == fs.size):
                chosen, at = best, int(slots[j])
                break
        if chosen < 0:
            chosen = best  # no eligible node by the last beacon of the period
        t += at * t_I + t_D
        hops += 1
        cur = int(fs[chosen])
        route.append(cur)
    return Transfer(t, hops, tuple(route))


def _chunk(args):
    net, policy, gamma, seed, start, stop, T, t_I, t_D, n_grid = args
    thresholds = _Thresholds(net, policy, gamma, n_grid)
    knows_K = policy != "SF-HAT"
    n = len(net.positions)
    return [deliver(net, thresholds, knows_K, stream(seed, i).random(n) * T, T, t_I, t_D)
            for i in range(start, stop)]


def run_e2e(net: Network, policy: str, gamma: float, transfers: int, rng,
            T: float = 1.0, t_I: float = 0.005, t_D: float = 0.03,
            jobs: int = 1, n_grid: int = 1024) -> E2EStats:
    """Average end-to-end delay (seconds) and hop count over ``transfers`` packets.

    Wake phases are redrawn for every transfer from a stream keyed by the
    transfer index, so the outcome does not depend on ``jobs``.
    """
    policy = _normalize_policy(policy)
    if transfers < 1:
        raise DomainError(f"need at least one transfer, got {transfers}")
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma must lie in [0, 1], got {gamma}")
    if not (T > 0 and 0 < t_I <= T and t_D >= 0):
        raise DomainError("need T > 0, 0 < t_I <= T and t_D >= 0")
    if abs(T / t_I - round(T / t_I)) > 1e-9:
        raise DomainError(f"T / t_I = {T / t_I} must be an integer number of beacon slots")
    seed = seed_from(rng)
    tasks = [(net, policy, gamma, seed, s, min(s + CHUNK, transfers), T, t_I, t_D, n_grid)
             for s in range(0, transfers, CHUNK)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_chunk, tasks))
    else:
        parts = [_chunk(a) for a in tasks]
    records = tuple(r for part in parts for r in part)
    delay = np.array([r.delay for r in records])
    hops = np.array([r.hops for r in records], dtype=float)
    n = len(records)

    def se(x):
        return float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0

    return E2EStats(policy, float(gamma), n, float(delay.mean()), se(delay),
                    float(hops.mean()), se(hops), records)
