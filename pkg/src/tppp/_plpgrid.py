"""Tensor-grid evaluation of the PLP-PPP outer moment factor.

Everything here is dimensionless: lengths are in units of ``rho = s**(1/alpha)``.
With ``L(r) = log(1 - p/(1 + r**alpha))`` the factor is

    exp(-2 mu rho  int_0^inf (1 - exp(-2 lam rho J_b(t))) dt),
    J_b(t) = int_0^inf (1 - exp(b L(sqrt(t^2 + y^2)))) dy.

For large ``|Im b|`` the integrand oscillates in ``L``, so panel edges are put
on level sets of ``L`` spaced so that each panel carries a bounded phase.
"""

from __future__ import annotations

import math

import numba
import numpy as np
from numpy.polynomial.legendre import leggauss

# Depth below which L is treated as -inf (p = 1 only): the region r < exp(-L_CAP/alpha).
L_CAP = 25.0
PANEL_PHASE = 3.0
PANEL_NODES = 10
TAIL_NODES = 16


def nodes(bmax: float, p: float, alpha: float, r_min_scale: float = 1e-3):
    """Quadrature nodes/weights on [0, inf) suited to orders up to ``|b| = bmax``."""
    lmax = min(-math.log1p(-p) if p < 1 else L_CAP, L_CAP)
    d = min(PANEL_PHASE / max(bmax, 1e-9), lmax / 8.0)
    levels = np.arange(lmax - d, 0.0, -d)
    levels = levels[levels > 1e-12]
    # r at which -L(r) equals each level
    radii = (p / -np.expm1(-levels) - 1.0) ** (1.0 / alpha) if len(levels) else np.zeros(0)
    radii = radii[np.isfinite(radii) & (radii > 0)]
    far = max(50.0, 2.0 * radii.max()) if len(radii) else 50.0
    edges = np.unique(np.concatenate([[0.0], np.geomspace(r_min_scale, far, 40), radii[radii < far]]))
    x, w = leggauss(PANEL_NODES)
    lo, hi = edges[:-1], edges[1:]
    X = (0.5 * (hi - lo))[:, None] * x + (0.5 * (hi + lo))[:, None]
    W = (0.5 * (hi - lo))[:, None] * w
    s, ws = leggauss(TAIL_NODES)
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws
    # [far, inf) via r = far / s
    X = np.concatenate([X.ravel(), far / s])
    W = np.concatenate([W.ravel(), ws * far / s**2])
    return X, W


@numba.njit(cache=True)
def _log_table(t, y, p, alpha):
    L = np.empty((t.size, y.size))
    half = alpha / 2.0
    for i in range(t.size):
        for j in range(y.size):
            r2 = t[i] * t[i] + y[j] * y[j]
            L[i, j] = math.log1p(-p / (1.0 + r2**half))
    return L


@numba.njit(cache=True)
def outer_integral(b, t, wt, y, wy, lam_r, p, alpha):
    """``int_0^inf (1 - exp(-2 lam_r J_b(t))) dt`` for each order in ``b``."""
    L = _log_table(t, y, p, alpha)
    out = np.empty(b.size, np.complex128)
    for k in range(b.size):
        bk = b[k]
        acc = 0j
        for i in range(t.size):
            A = 0j
            for j in range(y.size):
                A += wy[j] * (1.0 - np.exp(bk * L[i, j]))
            acc += wt[i] * (1.0 - np.exp(-2.0 * lam_r * A))
        out[k] = acc
    return out


@numba.njit(cache=True)
def outer_integral_imag_grid(t0, h, n, t, wt, y, wy, lam_r, p, alpha):
    """As :func:`outer_integral` for ``b_k = j (t0 + k h)``, ``k < n``.

    ``exp(b_k L)`` is advanced multiplicatively in ``k``, which replaces the
    complex exponential per node and order by one complex multiply.
    """
    out = np.zeros(n, np.complex128)
    A = np.empty(n, np.complex128)
    half = alpha / 2.0
    for i in range(t.size):
        A[:] = 0j
        for j in range(y.size):
            r2 = t[i] * t[i] + y[j] * y[j]
            L = math.log1p(-p / (1.0 + r2**half))
            e = complex(math.cos(t0 * L), math.sin(t0 * L))
            step = complex(math.cos(h * L), math.sin(h * L))
            w = wy[j]
            for k in range(n):
                A[k] += w * (1.0 - e)
                e *= step
        for k in range(n):
            out[k] += wt[i] * (1.0 - np.exp(-2.0 * lam_r * A[k]))
    return out
