"""Parameter sweeps producing the CSV tables behind the trade-off plots."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

from ..bf import solve_bf
from ..errors import ConfigError
from ..geometry import HopContext, build_progress_model
from ..rng import derive_seed, stream
from ..sf import SfThreshold, eta_cutoff, solve_alpha
from .e2e import run_e2e
from .network import Network, generate_network
from .onehop import run_onehop

__all__ = [
    "OnehopPoint",
    "E2EPoint",
    "sweep_onehop",
    "sweep_e2e",
    "write_rows",
    "sweep",
    "network_for",
    "ONEHOP_COLUMNS",
    "E2E_COLUMNS",
]

ONEHOP_COLUMNS = ["policy", "K", "L_i", "eta", "alpha", "mean_delay", "se_delay",
                  "mean_progress", "se_progress", "J"]
E2E_COLUMNS = ["policy", "gamma", "L", "lambda", "transfers", "mean_delay_s", "se_delay_s",
               "mean_hops", "se_hops"]

# first key of every derived seed, so sweep points never share a stream with the network draw
POINT_KEY = 1
NETWORK_KEY = 2


@dataclass(frozen=True)
class OnehopPoint:
    policy: str
    K: int
    L_i: float
    eta: float | None = None
    alpha: float | None = None


@dataclass(frozen=True)
class E2EPoint:
    policy: str
    gamma: float


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (str, int)):
        return str(x)
    return repr(float(x))


def write_rows(columns: Sequence[str], rows: Iterable[dict], fh, header: Iterable[str] = ()) -> None:
    for line in header:
        fh.write(f"# {line}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])


def _onehop_policy(p: OnehopPoint, ctx, model, n_w: int, n_b: int):
    name = p.policy.upper()
    if name == "BF":
        if p.eta is None:
            raise ConfigError("BF needs eta")
        return solve_bf(ctx, model, p.eta, n_w, n_b)
    if name == "SF":
        if p.alpha is not None:
            return SfThreshold(float(p.alpha), p.K, eta_cutoff(p.K, model), eta=p.eta)
        if p.eta is None:
            raise ConfigError("SF needs eta or alpha")
        return solve_alpha(p.K, p.eta, model)
    if name in ("FF", "MF"):
        return name
    raise ConfigError(f"unknown one-hop policy {p.policy!r}")


def sweep_onehop(points: Sequence[OnehopPoint], trials: int, seed: int, jobs: int = 1,
                 n_grid: int = 1024, n_w: int = 100, n_b: int = 100) -> list[dict]:
    """One row per point; point ``i`` draws from the seed derived from ``(seed, i)``."""
    rows = []
    models = {}
    for i, p in enumerate(points):
        ctx = HopContext(p.L_i, p.K)
        if ctx.L_i not in models:
            models[ctx.L_i] = build_progress_model(ctx, n_grid)
        model = models[ctx.L_i]
        policy = _onehop_policy(p, ctx, model, n_w, n_b)
        st = run_onehop(policy, ctx, model, trials, derive_seed(seed, POINT_KEY, i),
                        eta=p.eta, jobs=jobs)
        rows.append({
            "policy": st.policy, "K": p.K, "L_i": ctx.L_i, "eta": p.eta, "alpha": st.alpha,
            "mean_delay": st.mean_delay, "se_delay": st.se_delay,
            "mean_progress": st.mean_progress, "se_progress": st.se_progress, "J": st.J,
        })
    return rows


def network_for(seed: int, L: float, lam: float, r_c: float, max_retries: int = 1000) -> Network:
    return generate_network(L, lam, r_c, stream(seed, NETWORK_KEY), max_retries)


def sweep_e2e(points: Sequence[E2EPoint], net: Network, transfers: int, seed: int,
              jobs: int = 1, T: float = 1.0, t_I: float = 0.005, t_D: float = 0.03,
              n_grid: int = 1024) -> list[dict]:
    rows = []
    for i, p in enumerate(points):
        st = run_e2e(net, p.policy, p.gamma, transfers, derive_seed(seed, POINT_KEY, i),
                     T=T, t_I=t_I, t_D=t_D, jobs=jobs, n_grid=n_grid)
        rows.append({
            "policy": st.policy, "gamma": p.gamma, "L": net.L, "lambda": net.lam,
            "transfers": st.transfers, "mean_delay_s": st.mean_delay_s,
            "se_delay_s": st.se_delay_s, "mean_hops": st.mean_hops, "se_hops": st.se_hops,
        })
    return rows


def sweep(kind: str, grid: Sequence, base: dict, header: Iterable[str] = ()) -> str:
    """Run ``grid`` (OnehopPoint or E2EPoint items) and return the CSV text.

    ``base`` supplies the shared settings: ``seed``, ``jobs``, ``n_grid`` and
    either ``trials`` (plus ``n_w``, ``n_b``) or ``transfers``, ``L``,
    ``lambda``, ``r_c``, ``T``, ``t_I``, ``t_D``, ``max_retries``.
    """
    out = io.StringIO()
    seed, jobs, n_grid = int(base.get("seed", 0)), int(base.get("jobs", 1)), int(base.get("n_grid", 1024))
    if kind == "onehop":
        rows = sweep_onehop(grid, int(base["trials"]), seed, jobs, n_grid,
                            int(base.get("n_w", 100)), int(base.get("n_b", 100))) if grid else []
        write_rows(ONEHOP_COLUMNS, rows, out, header)
    elif kind == "e2e":
        rows = []
        if grid:
            net = network_for(seed, base["L"], base["lambda"], base.get("r_c", 1.0),
                              int(base.get("max_retries", 1000)))
            rows = sweep_e2e(grid, net, int(base["transfers"]), seed, jobs,
                             base.get("T", 1.0), base.get("t_I", 0.005), base.get("t_D", 0.03), n_grid)
        write_rows(E2E_COLUMNS, rows, out, header)
    else:
        raise ConfigError(f"sweep kind must be 'onehop' or 'e2e', got {kind!r}")
    return out.getvalue()
