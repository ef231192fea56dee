"""Independent reference computations used only by the tests.

None of these touch the package's quadrature: areas come from the
closed-form circle-circle intersection, expectations from plain numpy sums.
"""

import numpy as np


def lens_area(L, R, r=1.0):
    """Area of the intersection of a radius-r disk and a radius-R disk, centers L apart."""
    d = L
    if R <= 0:
        return 0.0
    if d >= r + R:
        return 0.0
    if d <= abs(R - r):
        return np.pi * min(r, R) ** 2
    a1 = r * r * np.arccos((d * d + r * r - R * R) / (2 * d * r))
    a2 = R * R * np.arccos((d * d + R * R - r * r) / (2 * d * R))
    k = 0.5 * np.sqrt((-d + r + R) * (d + r - R) * (d - r + R) * (d + r + R))
    return a1 + a2 - k


def tail_exact(L, z):
    """p_z: share of the forwarding region with progress at least z."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    full = lens_area(L, L)
    return np.array([lens_area(L, L - zz) / full for zz in z])


def expected_max_table(L, n=20001):
    """(grid, G) with G(b) = E[max(b, Z)] = b + int_b^1 p_z dz on a fine grid."""
    g = np.linspace(0.0, 1.0, n)
    p = tail_exact(L, g)
    cell = 0.5 * (p[:-1] + p[1:]) * np.diff(g)
    suffix = np.concatenate([np.cumsum(cell[::-1])[::-1], [0.0]])
    return g, g + suffix


def rejection_fraction(L, z, n, seed, chunk=1_000_000):
    """Monte-Carlo share of the unit disk around the relay that is closer to the sink by > z.

    Returns (hits_in_region_z, hits_in_region_0, n).
    """
    rng = np.random.default_rng(seed)
    hit_z = hit_0 = 0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        # uniform points in the unit disk about the origin; sink at (L, 0)
        r = np.sqrt(rng.random(m))
        th = 2 * np.pi * rng.random(m)
        x, y = r * np.cos(th), r * np.sin(th)
        ds = np.hypot(x - L, y)
        hit_0 += int(np.count_nonzero(ds < L))
        hit_z += int(np.count_nonzero(ds < L - z))
        done += m
    return hit_z, hit_0, n


def ks_statistic(samples, cdf):
    """Two-sided Kolmogorov-Smirnov distance of ``samples`` from a callable CDF."""
    x = np.sort(samples)
    n = len(x)
    F = cdf(x)
    i = np.arange(1, n + 1)
    return max(np.max(i / n - F), np.max(F - (i - 1) / n))


def stage_km2_bruteforce(L, K, eta, w, b, n=2000):
    """phi_{K-2}(w, b) by nested midpoint sums over the gap U and the progress Z.

    The inner stage is phi_{K-1}(w', b') = E[max(b', Z)] - (1 - w') / (2 eta),
    with E[max(b', Z)] taken from the closed-form lens areas.
    """
    g, G = expected_max_table(L)
    edges = np.linspace(0.0, 1.0, n + 1)
    p = tail_exact(L, edges)
    mass = p[:-1] - p[1:]
    zm = 0.5 * (edges[:-1] + edges[1:])
    span = 1.0 - w
    ue = np.linspace(0.0, span, n + 1)
    um = 0.5 * (ue[:-1] + ue[1:])
    m = K - (K - 2)
    fu = m * (span - um) ** (m - 1) / span**m * np.diff(ue)
    bz = np.maximum(b, zm)
    total = 0.0
    for u, wu in zip(um, fu):
        inner = np.interp(bz, g, G) - (1.0 - (w + u)) / (2.0 * eta)
        total += wu * (np.sum(mass * np.maximum(bz, inner)) - u / eta)
    return total / fu.sum()


def alpha_dense_scan(L, K, eta, n=10**6):
    """Smallest b on an n-point grid with int_b^1 p_z dz <= 1/(eta K); 0 if none is needed."""
    b = np.linspace(0.0, 1.0, n + 1)
    coarse = np.linspace(0.0, 1.0, 4001)
    p = np.interp(b, coarse, tail_exact(L, coarse))
    cell = 0.5 * (p[:-1] + p[1:]) * np.diff(b)
    suffix = np.concatenate([np.cumsum(cell[::-1])[::-1], [0.0]])
    ok = np.flatnonzero(suffix <= 1.0 / (eta * K))
    return float(b[ok[0]])


def threshold_averages(L, K, alpha, n=200001):
    """(E[D], E[Z]) of the threshold-alpha rule by direct sums on the lens tail."""
    from math import comb

    z = np.linspace(0.0, 1.0, n)
    coarse = np.linspace(0.0, 1.0, 20001)
    p = np.interp(z, coarse, tail_exact(L, coarse))
    pa = float(np.interp(alpha, z, p))
    ed = sum(comb(K, k) * pa**k * (1 - pa) ** (K - k) / (k + 1) for k in range(1, K + 1))
    ed += (1 - pa) ** K * K / (K + 1)
    below = z <= alpha
    miss = 1 - (1 - p) ** K
    first = np.trapezoid(miss[below], z[below]) if below.sum() > 1 else 0.0
    above = z >= alpha
    rest = np.trapezoid(p[above], z[above]) if above.sum() > 1 else 0.0
    ez = first + ((1 - (1 - pa) ** K) / pa * rest if pa > 0 else 0.0)
    return float(ed), float(ez)

