"""Backward induction for the exact-model relay-selection MDP.

At stage k the relay has seen k forwarding nodes wake, the k-th at elapsed
time ``w``, with best progress ``b``.  Stopping earns progress ``b``;
continuing costs the next inter-wake gap and moves the state to
``(w + U, max(b, Z))``.  With the cost scaled by the progress weight eta the
optimal rule is "stop iff b >= phi_k(w, b)", where phi_K = 0 and

    phi_k(w, b) = E[max(b, Z, phi_{k+1}(w + U, max(b, Z))) - U / eta],

U having the conditional gap density given W_k = w and Z the progress law.
The surfaces are tabulated on a uniform (w, b) grid and interpolated
bilinearly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ConfigError, DomainError, ToleranceError
from .geometry import HopContext, ProgressModel, tail_integral
from .wake import cond_interwake_pdf

__all__ = [
    "ThresholdSurface",
    "solve_bf",
    "bf_decide",
    "stage_km1_closed_form",
    "write_surface_csv",
    "read_surface_csv",
]

WEIGHT_TOL = 1e-6
N_GAUSS_U = 64
MIN_Z_NODES = 256


@dataclass(frozen=True, eq=False)
class ThresholdSurface:
    K: int
    eta: float
    grid_w: np.ndarray
    grid_b: np.ndarray
    phi: np.ndarray  # shape (K, n_w, n_b); phi[k-1] is stage k

    def stage(self, k: int) -> np.ndarray:
        return self.phi[k - 1]

    def value(self, k: int, w, b):
        """phi_k at arbitrary (w, b), bilinear between grid points."""
        return bilinear(self.grid_w, self.grid_b, self.phi[k - 1], w, b)


def _locate(grid: np.ndarray, x):
    # uniform grid: index of the left cell edge and the fraction inside the cell
    n = len(grid) - 1
    pos = np.clip(np.asarray(x, dtype=float), grid[0], grid[-1]) * n / (grid[-1] - grid[0])
    idx = np.minimum(pos.astype(np.intp), n - 1)
    return idx, pos - idx


def bilinear(grid_w: np.ndarray, grid_b: np.ndarray, table: np.ndarray, w, b):
    iw, fw = _locate(grid_w, w)
    ib, fb = _locate(grid_b, b)
    v00 = table[iw, ib]
    v01 = table[iw, ib + 1]
    v10 = table[iw + 1, ib]
    v11 = table[iw + 1, ib + 1]
    out = (1 - fw) * ((1 - fb) * v00 + fb * v01) + fw * ((1 - fb) * v10 + fb * v11)
    return float(out) if np.ndim(out) == 0 else out


def expected_max_weights(model: ProgressModel, b_grid: np.ndarray, refine: int):
    """Weights for E[h(max(b, Z))] over a node set refining ``b_grid``.

    Returns ``(z_nodes, W)`` with ``W[i] @ h(z_nodes)`` equal to
    F(b_i) h(b_i) + integral_{b_i}^1 h f_Z, exact for piecewise-linear h.
    """
    n_b = len(b_grid)
    z = np.linspace(b_grid[0], b_grid[-1], (n_b - 1) * refine + 1)
    lo, hi = model.cell_weights(z)
    n_z = len(z)
    v = np.zeros(n_z)
    v[:-1] += lo
    v[1:] += hi
    below = np.concatenate([[0.0], np.cumsum(lo + hi)])  # F at each node
    W = np.zeros((n_b, n_z))
    for i in range(n_b):
        m = i * refine
        W[i, m + 1:] = v[m + 1:]
        W[i, m] = below[m] + (lo[m] if m < n_z - 1 else 0.0)
    return z, W


def _gap_rule(K: int, k: int, w: float, xg: np.ndarray, wg: np.ndarray):
    span = 1.0 - w
    u = 0.5 * span * (xg + 1.0)
    weights = 0.5 * span * wg * cond_interwake_pdf(K, k, w, u)
    return u, weights


def solve_bf(
    ctx: HopContext,
    model: ProgressModel,
    eta: float,
    n_w: int = 100,
    n_b: int = 100,
) -> ThresholdSurface:
    """Tabulate phi_1 .. phi_K for ``ctx.K`` forwarding nodes and weight ``eta``."""
    K = ctx.K
    if K < 1:
        raise DomainError(f"K must be at least 1, got {K}")
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta}")
    if n_w < 2 or n_b < 2:
        raise DomainError("grids need at least two points per axis")
    if abs(model.L_i - ctx.L_i) > 1e-12:
        raise ConfigError("progress model was built for a different L_i")

    grid_w = np.linspace(0.0, 1.0, n_w)
    grid_b = np.linspace(0.0, 1.0, n_b)
    phi = np.zeros((K, n_w, n_b))
    if K == 1:
        return _freeze(ThresholdSurface(K, float(eta), grid_w, grid_b, phi))

    refine = max(1, math.ceil((MIN_Z_NODES - 1) / (n_b - 1)))
    z, Wz = expected_max_weights(model, grid_b, refine)
    row_err = np.max(np.abs(Wz.sum(axis=1) - 1.0))
    if row_err > WEIGHT_TOL:
        raise ToleranceError(f"progress quadrature weights off by {row_err:.3g}")

    xg, wg = np.polynomial.legendre.leggauss(N_GAUSS_U)
    gap_nodes = np.empty((n_w - 1, N_GAUSS_U))
    gap_weights = np.empty((n_w - 1, N_GAUSS_U))

    for k in range(K - 1, 0, -1):
        nxt = phi[k]  # stage k+1
        # stage k+1 values at (grid_w, z): exact linear interpolation along b
        at_z = np.empty((n_w, len(z)))
        for i in range(n_w):
            at_z[i] = np.interp(z, grid_b, nxt[i])

        for i, w in enumerate(grid_w[:-1]):
            gap_nodes[i], gap_weights[i] = _gap_rule(K, k, w, xg, wg)
        werr = np.max(np.abs(gap_weights.sum(axis=1) - 1.0))
        if werr > WEIGHT_TOL:
            raise ToleranceError(f"gap quadrature weights off by {werr:.3g} at stage {k}")

        w_next = grid_w[:-1, None] + gap_nodes
        iw, fw = _locate(grid_w, w_next)
        cont = (1 - fw)[..., None] * at_z[iw] + fw[..., None] * at_z[iw + 1]
        H = np.maximum(z, cont)  # (n_w-1, n_q, n_z)
        EZ = H @ Wz.T  # (n_w-1, n_q, n_b)
        phi[k - 1, :-1] = np.einsum("iq,iqb->ib", gap_weights, EZ) - (
            np.sum(gap_weights * gap_nodes, axis=1) / eta
        )[:, None]
        # w = 1: no delay left, the gap law collapses to a point mass at 0
        phi[k - 1, -1] = Wz @ np.maximum(z, at_z[-1])

    return _freeze(ThresholdSurface(K, float(eta), grid_w, grid_b, phi))


def _freeze(s: ThresholdSurface) -> ThresholdSurface:
    for arr in (s.grid_w, s.grid_b, s.phi):
        arr.setflags(write=False)
    return s


def bf_decide(surface: ThresholdSurface, k: int, w, b):
    """True (stop) iff k == K or b >= phi_k(w, b).  Vectorized over (w, b)."""
    if not 1 <= k <= surface.K:
        raise DomainError(f"stage {k} outside 1..{surface.K}")
    if k == surface.K:
        out = np.ones(np.broadcast(np.asarray(w), np.asarray(b)).shape, dtype=bool)
        return bool(out) if out.ndim == 0 else out
    out = np.asarray(b) >= surface.value(k, w, b)
    return bool(out) if out.ndim == 0 else out


def stage_km1_closed_form(model: ProgressModel, eta: float, w, b):
    """phi_{K-1}(w, b) = E[max(b, Z)] - (1 - w) / (2 eta)."""
    b = np.asarray(b, dtype=float)
    w = np.asarray(w, dtype=float)
    return b + tail_integral(model, b) - (1.0 - w) / (2.0 * eta)


def write_surface_csv(surface: ThresholdSurface, fh, header: Iterable[str] = ()) -> None:
    """Write ``k,w,b,phi`` rows, stages 1..K, w-major then b."""
    for line in header:
        fh.write(f"# {line}\n")
    fh.write(f"# K={surface.K}\n# eta={surface.eta!r}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["k", "w", "b", "phi"])
    gw = [repr(float(x)) for x in surface.grid_w]
    gb = [repr(float(x)) for x in surface.grid_b]
    for k in range(1, surface.K + 1):
        table = surface.phi[k - 1]
        for i, ws in enumerate(gw):
            row = table[i]
            writer.writerows([k, ws, bs, repr(float(v))] for bs, v in zip(gb, row))


def read_surface_csv(fh) -> ThresholdSurface:
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    meta = {}
    rows = []
    for line in fh:
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val.strip()
        elif line.strip():
            rows.append(line)
    reader = csv.DictReader(rows)
    data = [(int(r["k"]), float(r["w"]), float(r["b"]), float(r["phi"])) for r in reader]
    if not data:
        raise ConfigError("surface table is empty")
    arr = np.array(data)
    K = int(arr[:, 0].max())
    grid_w = np.unique(arr[:, 1])
    grid_b = np.unique(arr[:, 2])
    if len(arr) != K * len(grid_w) * len(grid_b):
        raise ConfigError("surface table is not a full k x w x b grid")
    phi = arr[:, 3].reshape(K, len(grid_w), len(grid_b))
    eta = float(meta.get("eta", "nan"))
    return _freeze(ThresholdSurface(K, eta, grid_w, grid_b, phi.copy()))
