"""Forwarding-region geometry and the law of the progress variable Z.

Everything is expressed in normalized units: distances in multiples of the
communication radius and time in multiples of the wake period.  A relay at
distance ``L_i`` from the sink forwards to nodes in its forwarding region,
the part of its radio disk strictly closer to the sink.  The progress a
uniformly placed node in that region makes has density

    f_Z(z) = 2 (L_i - z) acos(c(z)) / |S_i|,
    c(z)   = (L_i**2 + (L_i - z)**2 - 1) / (2 L_i (L_i - z)),

on [0, 1]; the unnormalized numerator is the arc length of the circle of
radius ``L_i - z`` about the sink that falls inside the radio disk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .errors import DomainError, NumericalError, ToleranceError

__all__ = [
    "HopContext",
    "ProgressModel",
    "region_area",
    "build_progress_model",
    "sample_progress",
    "progress_kernel",
]

ACOS_CLAMP_TOL = 1e-12
SIMPSON_INTERVALS = 4096
DEFAULT_N_GRID = 1024
NORM_TOL = 1e-6

# Gauss-Legendre rule used for per-cell moments of f_Z.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class HopContext:
    """Geometry and node count seen by one relay.

    Raw inputs may be given in any length/time unit; on construction the
    distance is rescaled so that ``r_c == 1`` and ``T == 1``.  The original
    scales are kept in ``length_unit`` and ``time_unit`` for converting
    results back.
    """

    L_i: float
    K: int = 0
    r_c: float = 1.0
    T: float = 1.0
    length_unit: float = field(default=1.0, init=False)
    time_unit: float = field(default=1.0, init=False)

    def __post_init__(self) -> None:
        if not (self.r_c > 0 and self.T > 0):
            raise DomainError(f"r_c and T must be positive, got r_c={self.r_c}, T={self.T}")
        if not self.L_i > 0:
            raise DomainError(f"L_i must be positive, got {self.L_i}")
        if int(self.K) != self.K or self.K < 0:
            raise DomainError(f"K must be a nonnegative integer, got {self.K}")
        object.__setattr__(self, "length_unit", float(self.r_c))
        object.__setattr__(self, "time_unit", float(self.T))
        object.__setattr__(self, "L_i", float(self.L_i) / self.r_c)
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "r_c", 1.0)
        object.__setattr__(self, "T", 1.0)

    @property
    def relays(self) -> bool:
        """False when the sink is within range and the relay simply waits for it."""
        return self.L_i > 1.0

    def with_K(self, K: int) -> HopContext:
        return HopContext(self.L_i, K)


def _check_relay(ctx: HopContext) -> None:
    if not ctx.relays:
        raise DomainError(
            f"L_i={ctx.L_i} <= r_c: the sink is a neighbor, no forwarding region"
        )


def progress_kernel(L_i: float, z) -> np.ndarray:
    """Unnormalized progress density 2 (L_i - z) acos(c(z)).

    The cosine argument is clamped to [-1, 1] only when it overshoots by at
    most ``ACOS_CLAMP_TOL``.
    """
    z = np.asarray(z, dtype=float)
    rho = L_i - z
    arg = (L_i * L_i + rho * rho - 1.0) / (2.0 * L_i * rho)
    excess = np.max(np.abs(arg)) - 1.0 if arg.size else 0.0
    if excess > ACOS_CLAMP_TOL:
        raise NumericalError(
            f"acos argument out of range by {excess:.3g}; L_i={L_i} is not a valid relay distance"
        )
    return 2.0 * rho * np.arccos(np.clip(arg, -1.0, 1.0))


def _area_from(L_i: float, z: np.ndarray) -> np.ndarray:
    # Integrate over s = sqrt(1 - u): the kernel behaves like sqrt(1 - u) at
    # u = 1, which would cap composite Simpson at O(h**1.5); in s the
    # integrand 2 s kernel(1 - s**2) is smooth.
    t = np.linspace(0.0, 1.0, SIMPSON_INTERVALS + 1)
    out = np.empty(z.shape)
    flat_z, flat_out = z.ravel(), out.ravel()
    chunk = 128
    for start in range(0, flat_z.size, chunk):
        zc = flat_z[start:start + chunk]
        top = np.sqrt(1.0 - zc)
        s = top[:, None] * t[None, :]
        vals = 2.0 * s * progress_kernel(L_i, 1.0 - s * s)
        flat_out[start:start + chunk] = top * simpson(vals, dx=1.0 / SIMPSON_INTERVALS, axis=1)
    return out


def region_area(ctx: HopContext, z):
    """Area of the set of forwarding-region points with progress at least ``z``.

    Accepts a scalar or an array of offsets in [0, 1]; ``region_area(ctx, 0)``
    is the full forwarding-region area.
    """
    _check_relay(ctx)
    za = np.asarray(z, dtype=float)
    if np.any(za < 0.0) or np.any(za > 1.0) or np.any(np.isnan(za)):
        raise DomainError("offset z must lie in [0, 1]")
    out = _area_from(ctx.L_i, np.atleast_1d(za))
    return float(out[0]) if za.ndim == 0 else out.reshape(za.shape)


@dataclass(frozen=True, eq=False)
class ProgressModel:
    """Tabulated law of Z for one relay.

    ``pdf``, ``cdf`` and ``tail`` are sampled at ``grid_z``.  ``tail`` is the
    area ratio |S_i(z)| / |S_i|; ``cdf`` comes from cumulative quadrature of
    the density and was rescaled by ``norm_factor`` so that it ends at 1.
    """

    ctx: HopContext
    area0: float
    grid_z: np.ndarray
    pdf: np.ndarray
    cdf: np.ndarray
    tail: np.ndarray
    norm_factor: float

    @property
    def L_i(self) -> float:
        return self.ctx.L_i

    def pdf_at(self, z):
        return progress_kernel(self.ctx.L_i, z) / self.area0

    def cdf_at(self, z):
        return np.interp(z, self.grid_z, self.cdf)

    def tail_at(self, z):
        return np.interp(z, self.grid_z, self.tail)

    def mean(self) -> float:
        """E[Z], the integral of the tabulated tail."""
        return float(tail_integral(self, 0.0))

    def cell_weights(self, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Product-rule weights for integrating piecewise-linear functions against f_Z.

        For ascending ``nodes`` covering [0, 1], returns arrays ``(lo, hi)`` of
        length ``len(nodes) - 1`` with

            integral over cell j of h(z) f_Z(z) dz = lo[j] h(nodes[j]) + hi[j] h(nodes[j+1])

        whenever h is linear on the cell.  The weights carry the same
        normalization as ``cdf``.
        """
        nodes = np.asarray(nodes, dtype=float)
        a, b = nodes[:-1], nodes[1:]
        # Cell [a, b] maps to s in [sqrt(1-b), sqrt(1-a)] under z = 1 - s**2.
        s_lo, s_hi = np.sqrt(1.0 - b), np.sqrt(1.0 - a)
        half = 0.5 * (s_hi - s_lo)
        s = 0.5 * (s_hi + s_lo)[:, None] + half[:, None] * _GL_NODES[None, :]
        z = 1.0 - s * s
        dens = 2.0 * s * progress_kernel(self.ctx.L_i, z) / self.area0
        wq = half[:, None] * _GL_WEIGHTS[None, :] * dens
        width = (b - a)[:, None]
        hi = np.sum(wq * (z - a[:, None]) / width, axis=1)
        lo = np.sum(wq * (b[:, None] - z) / width, axis=1)
        return lo / self.norm_factor, hi / self.norm_factor


def tail_integral(model: ProgressModel, b):
    """Integral of the linearly interpolated tail over [b, 1]."""
    g, t = model.grid_z, model.tail
    cell_int = 0.5 * (t[:-1] + t[1:]) * np.diff(g)
    # suffix[j] = integral over [g[j], 1]
    suffix = np.concatenate([np.cumsum(cell_int[::-1])[::-1], [0.0]])
    b = np.asarray(b, dtype=float)
    j = np.clip(np.searchsorted(g, b, side="right") - 1, 0, len(g) - 2)
    tb = np.interp(b, g, t)
    part = 0.5 * (tb + t[j + 1]) * (g[j + 1] - b)
    out = part + suffix[j + 1]
    return float(out) if out.ndim == 0 else out


def build_progress_model(ctx: HopContext, n_grid: int = DEFAULT_N_GRID) -> ProgressModel:
    """Tabulate f_Z, F_Z and p_z for ``ctx`` on a uniform ``n_grid``-point grid.

    The normalizing area comes from the Simpson rule of ``region_area``; the
    per-cell masses from a Gauss-Legendre rule on the same kernel.  Their
    disagreement is the recorded ``norm_factor``.
    """
    _check_relay(ctx)
    if n_grid < 64:
        raise DomainError(f"n_grid must be at least 64, got {n_grid}")
    grid = np.linspace(0.0, 1.0, n_grid)
    area0 = float(_area_from(ctx.L_i, np.zeros(1))[0])
    pdf = progress_kernel(ctx.L_i, grid) / area0

    provisional = ProgressModel(ctx, area0, grid, pdf, grid, grid, 1.0)
    lo, hi = provisional.cell_weights(grid)
    mass = lo + hi
    total = float(mass.sum())
    if abs(total - 1.0) > NORM_TOL:
        raise ToleranceError(f"density integrates to {total!r}, off by more than {NORM_TOL}")
    cdf = np.concatenate([[0.0], np.cumsum(mass)]) / total
    cdf[-1] = 1.0
    tail = np.concatenate([np.cumsum(mass[::-1])[::-1], [0.0]]) / total
    tail[0] = 1.0
    for arr in (grid, pdf, cdf, tail):
        arr.setflags(write=False)
    return ProgressModel(ctx, area0, grid, pdf, cdf, tail, total)


def sample_progress(model: ProgressModel, rng: np.random.Generator, size=None):
    """Inverse-CDF draw(s) of Z with linear interpolation between grid points."""
    u = rng.random(size)
    return quantile(model, u)


def quantile(model: ProgressModel, u):
    """Inverse of the tabulated CDF; ``quantile(m, 0) == 0`` and ``quantile(m, 1) == 1``."""
    out = np.interp(u, model.cdf, model.grid_z)
    return float(out) if np.ndim(out) == 0 else out
