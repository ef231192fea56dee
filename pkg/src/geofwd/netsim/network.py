"""Poisson-deployed sensor field with source at the origin and sink at (L, L)."""

from __future__ import annotations

import csv
import dataclasses
import io
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..errors import ConfigError, DomainError, RetryExhaustedError

__all__ = ["Network", "generate_network", "write_network_csv", "read_network_csv"]


@dataclass(frozen=True, eq=False)
class Network:
    """Node field; index 0 is the source and index ``N + 1`` the sink."""

    L: float
    lam: float
    r_c: float
    positions: np.ndarray
    phases: np.ndarray
    neighbors: tuple[np.ndarray, ...]
    forwarding: tuple[np.ndarray, ...]
    dist_to_sink: np.ndarray
    # node counts of every Poisson draw, rejected ones included
    draws: tuple[int, ...] = ()

    @property
    def N(self) -> int:
        return len(self.positions) - 2

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return len(self.positions) - 1

    @classmethod
    def from_positions(cls, L: float, lam: float, r_c: float, positions, phases=None) -> Network:
        positions = np.asarray(positions, dtype=float)
        n = len(positions)
        if phases is None:
            phases = np.zeros(n)
        tree = cKDTree(positions)
        nbrs = tree.query_ball_point(positions, r_c)
        sink_xy = positions[-1]
        dist = np.hypot(*(positions - sink_xy).T)
        neighbors, forwarding = [], []
        for i, lst in enumerate(nbrs):
            arr = np.array(sorted(j for j in lst if j != i), dtype=np.intp)
            neighbors.append(arr)
            forwarding.append(arr[dist[arr] < dist[i]])
        return cls(float(L), float(lam), float(r_c), positions, np.asarray(phases, dtype=float),
                   tuple(neighbors), tuple(forwarding), dist)

    def dead_ends(self) -> np.ndarray:
        """Non-sink nodes whose forwarding set is empty."""
        sizes = np.array([len(f) for f in self.forwarding])
        return np.flatnonzero(sizes[:-1] == 0)


def generate_network(L: float, lam: float, r_c: float, rng: np.random.Generator,
                     max_retries: int = 1000, T: float = 1.0) -> Network:
    """Draw N ~ Poisson(lam L^2) uniform nodes until every forwarding set is nonempty."""
    if L <= 0 or lam <= 0 or r_c <= 0:
        raise DomainError("L, lambda and r_c must be positive")
    if lam * L * L < 1:
        raise DomainError(f"lambda * L^2 = {lam * L * L} is below 1")
    draws = []
    for _ in range(max_retries):
        N = int(rng.poisson(lam * L * L))
        draws.append(N)
        pts = rng.random((N, 2)) * L
        positions = np.vstack([[0.0, 0.0], pts, [L, L]])
        phases = rng.random(N + 2) * T
        net = Network.from_positions(L, lam, r_c, positions, phases)
        if net.dead_ends().size == 0:
            return dataclasses.replace(net, draws=tuple(draws))
    raise RetryExhaustedError(
        f"no network with nonempty forwarding sets after {max_retries} draws "
        f"(L={L}, lambda={lam}, r_c={r_c})"
    )


def write_network_csv(net: Network, fh, header=()) -> None:
    for line in header:
        fh.write(f"# {line}\n")
    fh.write(f"# L={net.L!r}\n# lambda={net.lam!r}\n# r_c={net.r_c!r}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["index", "x", "y", "phase"])
    for i, ((x, y), ph) in enumerate(zip(net.positions, net.phases)):
        w.writerow([i, repr(float(x)), repr(float(y)), repr(float(ph))])


def read_network_csv(fh) -> Network:
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    meta, rows = {}, []
    for line in fh:
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k.strip()] = v.strip()
        elif line.strip():
            rows.append(line)
    data = list(csv.DictReader(rows))
    if [int(r["index"]) for r in data] != list(range(len(data))):
        raise ConfigError("network snapshot indices must run 0..N+1 in order")
    try:
        L, lam, r_c = float(meta["L"]), float(meta["lambda"]), float(meta["r_c"])
    except KeyError as exc:
        raise ConfigError(f"network snapshot header lacks {exc}") from None
    pos = [(float(r["x"]), float(r["y"])) for r in data]
    ph = [float(r["phase"]) for r in data]
    return Network.from_positions(L, lam, r_c, pos, ph)
