"""Independent reference computations used only by the tests."""

import itertools

import mpmath
import numpy as np

mpmath.mp.dps = 30


def phi_cdf(x):
    """High-precision standard normal CDF."""
    return mpmath.ncdf(mpmath.mpf(x))


def quantile_error(u, x):
    """Signed error ``x - Phi^{-1}(u)`` via one high-precision Newton step from ``x``.

    The step is quadratically accurate, so the result is exact to far below 1e-9
    whenever ``x`` is already within about 1e-4 of the true quantile.
    """
    u = mpmath.mpf(u)
    x = mpmath.mpf(x)
    dens = mpmath.npdf(x)
    return float((mpmath.ncdf(x) - u) / dens)


def vec(a):
    """Columns of ``a`` stacked into one vector."""
    return np.asarray(a).reshape(-1, order="F")


def dyadic_boxes_ok(points, m):
    """Every box ``[a 2^-k1, (a+1) 2^-k1) x [b 2^-k2, (b+1) 2^-k2)`` with ``k1 + k2 = m`` holds one point."""
    pts = np.asarray(points)
    assert pts.shape == (2 ** m, 2)
    for k1 in range(m + 1):
        k2 = m - k1
        cells = np.floor(pts[:, 0] * 2 ** k1).astype(np.int64) * 2 ** k2 + np.floor(pts[:, 1] * 2 ** k2).astype(np.int64)
        counts = np.bincount(cells, minlength=2 ** m)
        if not np.all(counts == 1):
            return False
    return True


def sobol_direct(direction_numbers, indices):
    """Definition of a one-dimensional Sobol' coordinate: XOR of ``V_k`` over the set bits of ``i``.

    ``direction_numbers`` are floats ``V_k``; arithmetic is done on 52-bit integers.
    """
    w = 52
    ints = [int(round(v * 2 ** w)) for v in direction_numbers[:w]]
    out = []
    for i in indices:
        acc, k = 0, 0
        while i:
            if i & 1:
                acc ^= ints[k]
            i >>= 1
            k += 1
        out.append(acc / 2 ** w)
    return np.array(out)


def assembled_boomerang_kron(r, blocks):
    """Dense covariance with block (l, m) = blocks[min(l, m)] built by explicit loops."""
    n, m = blocks.shape[0], blocks.shape[1]
    out = np.zeros((n * m, n * m))
    for l, k in itertools.product(range(n), range(n)):
        out[l * m:(l + 1) * m, k * m:(k + 1) * m] = blocks[min(l, k)]
    return out


def kpa_least_squares(sigma, r):
    """Brute-force symmetric ``K`` minimizing ``||sigma - kron(r, K)||_F`` through the normal equations."""
    n = r.shape[0]
    mn = sigma.shape[0]
    m = mn // n
    pairs = [(i, k) for i in range(m) for k in range(i, m)]
    design = np.zeros((mn * mn, len(pairs)))
    for c, (i, k) in enumerate(pairs):
        e = np.zeros((m, m))
        e[i, k] = e[k, i] = 1.0
        design[:, c] = np.kron(r, e).ravel()
    coef = np.linalg.solve(design.T @ design, design.T @ sigma.ravel())
    out = np.zeros((m, m))
    for c, (i, k) in enumerate(pairs):
        out[i, k] = out[k, i] = coef[c]
    return out


def random_grid(rng, n, horizon=2.0):
    t = np.sort(rng.uniform(0.0, horizon, size=n))
    while t[0] <= 0 or np.any(np.diff(t) <= 1e-6):
        t = np.sort(rng.uniform(0.0, horizon, size=n))
    return t


def random_spd(rng, m):
    a = rng.standard_normal((m, m))
    return a @ a.T + m * np.eye(m)
