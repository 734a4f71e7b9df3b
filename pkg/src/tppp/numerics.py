"""Special functions and generic numerical routines.

Only the parameter regimes needed by the moment formulas are supported; the
hypergeometric function in particular is not a general-purpose 2F1.
"""

from __future__ import annotations

import functools
import heapq
import math

import numpy as np
from scipy import optimize, special

__all__ = [
    "NoConvergence",
    "MaxSubdivisions",
    "NoSignChange",
    "hyp2f1",
    "diversity_gain",
    "gamma_pair",
    "adaptive_quad",
    "wynn_epsilon",
    "gil_pelaez",
    "laplace_cdf",
    "reg_inc_beta",
    "brent_root",
]


class NoConvergence(RuntimeError):
    """A numerical routine stopped before reaching its tolerance."""

    def __init__(self, message, partial=None, error=None):
        super().__init__(message)
        self.partial = partial
        self.error = error


class MaxSubdivisions(NoConvergence):
    pass


class NoSignChange(ValueError):
    pass


# ----------------------------------------------------------------------------
# Gauss hypergeometric function
# ----------------------------------------------------------------------------

_SERIES_MAX_TERMS = 200_000
# Largest tolerated ratio max|term| / |sum| before the series is considered
# too cancellation-prone and the Euler integral is used instead.
_SERIES_CANCELLATION = 1e2


def _is_nonpos_int(v) -> bool:
    v = complex(v)
    return v.imag == 0 and v.real <= 0 and float(v.real).is_integer()


def _series(a, b2, c, z, tol):
    """Power series; returns (sum, converged, worst cancellation ratio)."""
    term = np.ones_like(a)
    total = np.ones_like(a)
    biggest = np.ones(a.shape)
    k = 0
    while True:
        term = term * (a + k) * (b2 + k) / ((c + k) * (k + 1)) * z
        total = total + term
        biggest = np.maximum(biggest, np.abs(term))
        k += 1
        mag = np.abs(term)
        if np.all(mag <= tol * np.abs(total)) or np.all(term == 0):
            # one more term guards against an accidental small term
            nxt = term * (a + k) * (b2 + k) / ((c + k) * (k + 1)) * z
            if np.all(np.abs(nxt) <= tol * np.abs(total)):
                return total, True, np.max(biggest / np.maximum(np.abs(total), 1e-300))
        if k >= _SERIES_MAX_TERMS:
            return total, False, np.inf


@functools.lru_cache(maxsize=64)
def _jacobi_nodes(n, al, be):
    x, w = special.roots_jacobi(n, al, be)
    return x, w


# Gauss-Jacobi nodes from scipy carry ~1e-10 relative error at a few hundred
# nodes, so the Euler route cannot promise the series' 1e-12.
_EULER_FLOOR = 1e-9


_JACOBI_MAX = 1024
_PANEL_PHASE = 2.0
_PANEL_ORDER = 20


def _euler_panels(a, b2, c, z):
    """Euler integral by composite Gauss rules for very oscillatory ``(1 - z u)^(-a)``.

    Panel edges are uniform in ``s = -log(1 - z u)`` so each panel carries a
    bounded phase; the two end panels absorb the ``u^(b2-1)`` and
    ``(1-u)^(c-b2-1)`` singularities with small Gauss-Jacobi rules.
    """
    S = -math.log1p(-z)
    phase = float(np.max(np.abs(a))) * S
    n_pan = int(math.ceil(phase / _PANEL_PHASE)) + 2
    edges = -np.expm1(-np.linspace(0.0, S, n_pan + 1)) / z
    edges[-1] = 1.0
    m = _PANEL_ORDER
    e0, e1 = edges[:-1], edges[1:]
    # interior panels
    xg, wg = _jacobi_nodes(m, 0.0, 0.0)
    mid_lo, mid_hi = e0[1:-1], e1[1:-1]
    U = (0.5 * (mid_hi - mid_lo))[:, None] * (xg + 1.0) + mid_lo[:, None]
    W = (0.5 * (mid_hi - mid_lo))[:, None] * wg * U ** (b2 - 1.0) * (1.0 - U) ** (c - b2 - 1.0)
    U, W = U.ravel(), W.ravel()
    # first panel, weight u^(b2-1)
    x0, w0 = _jacobi_nodes(m, 0.0, b2 - 1.0)
    u0 = 0.5 * e1[0] * (x0 + 1.0)
    wt0 = w0 * (0.5 * e1[0]) ** b2 * (1.0 - u0) ** (c - b2 - 1.0)
    # last panel, weight (1-u)^(c-b2-1)
    lo = e0[-1]
    x1, w1 = _jacobi_nodes(m, c - b2 - 1.0, 0.0)
    u1 = lo + 0.5 * (1.0 - lo) * (x1 + 1.0)
    wt1 = w1 * (0.5 * (1.0 - lo)) ** (c - b2) * u1 ** (b2 - 1.0)
    U = np.concatenate([u0, U, u1])
    W = np.concatenate([wt0, W, wt1])
    return np.exp(-np.multiply.outer(a, np.log1p(-z * U))) @ W


def _euler_integral(a, b2, c, z, tol):
    """Euler integral on [0, 1]; needs c > b2 > 0."""
    tol = max(tol, _EULER_FLOOR)
    log1mz = math.log1p(-z)
    phase = float(np.max(np.abs(a))) * abs(log1mz)
    pref = math.exp(special.gammaln(c) - special.gammaln(b2) - special.gammaln(c - b2))
    n = 16 * (int(phase + 48) // 16 + 1)
    if n > _JACOBI_MAX // 2:
        return pref * _euler_panels(a, b2, c, z)
    prev = None
    while n <= _JACOBI_MAX:
        x, w = _jacobi_nodes(n, c - b2 - 1.0, b2 - 1.0)
        u = 0.5 * (1.0 + x)
        w = w / 2.0 ** (c - 1.0)
        val = pref * (np.exp(-np.multiply.outer(a, np.log1p(-z * u))) @ w)
        if prev is not None and np.all(np.abs(val - prev) <= tol * np.maximum(1.0, np.abs(val))):
            return val
        prev = val
        n *= 2
    return pref * _euler_panels(a, b2, c, z)


def hyp2f1(a, b2, c, z, tol=1e-12):
    """Gauss hypergeometric function for complex ``a``, real ``b2, c`` and ``z`` in [0, 1].

    ``a`` may be an array; the result has the same shape.  The power series is
    used where it is well conditioned, Gauss's summation theorem at ``z = 1``,
    and the Euler integral representation otherwise (large ``|a| z``, where the
    series suffers catastrophic cancellation).
    """
    a_arr = np.asarray(a, dtype=complex)
    scalar = a_arr.ndim == 0
    a_arr = np.atleast_1d(a_arr)
    b2 = float(b2)
    c = float(c)
    z = float(z)
    if _is_nonpos_int(c):
        raise ValueError("c must not be a non-positive integer")
    if not 0.0 <= z <= 1.0:
        raise ValueError("z must lie in [0, 1]")

    out = np.empty_like(a_arr)
    if z == 0.0:
        out[:] = 1.0
    elif z == 1.0:
        s = c - a_arr - b2
        if np.any(s.real <= 0):
            raise NoConvergence("Gauss summation needs Re(c - a - b) > 0")
        out[:] = np.exp(
            special.loggamma(c)
            + special.loggamma(s)
            - special.loggamma(c - a_arr)
            - special.loggamma(c - b2)
        )
        # loggamma branch choice is irrelevant after exp; fix exact zeros from poles
        poles = np.array([_is_nonpos_int(v) for v in c - a_arr])
        out[poles] = 0.0
    else:
        euler_ok = c > b2 > 0
        terminating = np.array([_is_nonpos_int(v) for v in a_arr])
        easy = terminating | (np.abs(a_arr) * z <= 6.0) | (not euler_ok)
        if np.any(easy):
            vals, ok, worst = _series(a_arr[easy], b2, c, z, tol)
            if not ok or (worst > _SERIES_CANCELLATION and not np.all(terminating[easy]) and euler_ok):
                easy_idx = np.flatnonzero(easy)
                if not euler_ok:
                    raise NoConvergence("2F1 series did not converge", partial=vals)
                out[easy_idx] = _euler_integral(a_arr[easy], b2, c, z, tol)
            else:
                out[easy] = vals
        hard = ~easy
        if np.any(hard):
            out[hard] = _euler_integral(a_arr[hard], b2, c, z, tol)
    return out[0] if scalar else out


def diversity_gain(b, p, q):
    """``p b 2F1(1 - b, 1 - q; 2; p)`` for complex order ``b``."""
    b_arr = np.asarray(b, dtype=complex)
    return p * b_arr * hyp2f1(1.0 - b_arr, 1.0 - q, 2.0, p)


def gamma_pair(q):
    """``Gamma(1 + q) Gamma(1 - q)`` via the reflection formula."""
    q = np.asarray(q, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.pi * q / np.sin(np.pi * q)
    val = np.where(q == 0, 1.0, val)
    return val[()] if val.ndim == 0 else val


# ----------------------------------------------------------------------------
# Adaptive Gauss-Kronrod quadrature
# ----------------------------------------------------------------------------

# 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1]
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_KW = np.concatenate([_WK[:-1], _WK[::-1]])
_GW = np.zeros(15)
_GW[1:7:2] = _WG[:3]
_GW[7] = _WG[3]
_GW[9:14:2] = _WG[2::-1]


def _gk15(f, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    vals = f(mid + half * _NODES)
    k = half * np.dot(_KW, vals)
    g = half * np.dot(_GW, vals)
    # QUADPACK's scaling of the Gauss/Kronrod difference
    err = abs(k - g)
    resasc = abs(half) * np.dot(_KW, np.abs(vals - k / (2.0 * half)))
    if resasc != 0 and err != 0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    return k, err


def adaptive_quad(f, a, b, tol=1e-10, *, rtol=1e-10, limit=2000, full_output=False):
    """Globally adaptive 15-point Gauss-Kronrod quadrature.

    ``f`` must accept a numpy array of abscissae; it may return complex values.
    ``b = inf`` is mapped to [0, 1) by ``u = a + t / (1 - t)``.  Stops when the
    summed error estimate is below ``max(tol, rtol * |I|)``.  Raises
    :class:`MaxSubdivisions` (carrying the partial result and error estimate)
    once ``limit`` intervals have been split without success.
    """
    if math.isinf(b):
        if b < 0:
            raise ValueError("lower-infinite ranges are not supported")
        g = f

        def f(t, _g=g, _a=a):
            one_m = 1.0 - t
            return _g(_a + t / one_m) / (one_m * one_m)

        a, b = 0.0, 1.0
    if a == b:
        return (0.0, 0.0) if full_output else 0.0

    val, err = _gk15(f, a, b)
    heap = [(-err, a, b, val, err)]
    total, total_err = val, err
    splits = 0
    while total_err > max(tol, rtol * abs(total)):
        if splits >= limit:
            raise MaxSubdivisions(
                f"adaptive_quad: {limit} subdivisions exhausted", partial=total, error=total_err
            )
        _, lo, hi, v, e = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        total = total - v + v1 + v2
        total_err = total_err - e + e1 + e2
        heapq.heappush(heap, (-e1, lo, mid, v1, e1))
        heapq.heappush(heap, (-e2, mid, hi, v2, e2))
        splits += 1
        if splits % 64 == 0:
            # re-sum to avoid drift from repeated subtraction
            total = sum(item[3] for item in heap)
            total_err = sum(item[4] for item in heap)
    return (total, total_err) if full_output else total


# ----------------------------------------------------------------------------
# Gil-Pelaez inversion
# ----------------------------------------------------------------------------


def wynn_epsilon(seq):
    """Wynn's epsilon extrapolation of a sequence of partial sums.

    Returns the highest-order even column estimate available.
    """
    s = [complex(v) for v in seq]
    n = len(s)
    if n < 3:
        return s[-1]
    prev = [0.0] * (n + 1)
    cur = list(s)
    best = s[-1]
    for k in range(1, n):
        nxt = []
        for i in range(len(cur) - 1):
            diff = cur[i + 1] - cur[i]
            if diff == 0:
                # sequence already converged at this level
                return cur[i + 1] if k % 2 == 1 else cur[i + 1]
            nxt.append(prev[i + 1] + 1.0 / diff)
        prev, cur = cur, nxt
        if k % 2 == 0 and cur:
            best = cur[-1]
    return best


def gil_pelaez(moment_fn, x, tol=1e-4, *, max_periods=10_000, panel_nodes=None):
    """``P(X > x)`` for ``X`` in [0, 1] from its imaginary moments ``E[X^{jt}]``.

    ``moment_fn`` maps an array of ``t >= 0`` to ``E[X^{jt}]``.  For ``x < 1``
    the oscillatory integral is split at half periods of ``t |log x|`` and the
    partial sums are accelerated with Wynn's epsilon algorithm.  At ``x = 1``
    the integrand does not oscillate and a plain semi-infinite quadrature is used.
    The result is clamped to [0, 1].
    """
    if x <= 0:
        return 1.0
    x = min(float(x), 1.0)
    omega = -math.log(x)

    def integrand(t):
        t = np.asarray(t, dtype=float)
        m = np.asarray(moment_fn(t), dtype=complex)
        return np.imag(np.exp(1j * omega * t) * m) / t

    seg_tol = tol / 50.0
    if omega == 0.0:
        try:
            val = adaptive_quad(integrand, 0.0, math.inf, seg_tol, rtol=0.0, limit=4000)
        except MaxSubdivisions as exc:
            raise NoConvergence(
                "Gil-Pelaez integral at x = 1 did not converge",
                partial=min(max(0.5 + exc.partial / math.pi, 0.0), 1.0),
                error=exc.error,
            )
        return min(max(0.5 + val / math.pi, 0.0), 1.0)

    half = math.pi / omega
    partial = []
    total = 0.0
    estimates = []
    lo = 0.0
    for k in range(2 * max_periods):
        hi = lo + half
        # sub-panels keep the moment's own variation resolved on long half periods
        n_sub = max(1, int(math.ceil(half / 20.0)))
        edges = np.linspace(lo, hi, n_sub + 1)
        piece = 0.0
        for e0, e1 in zip(edges[:-1], edges[1:]):
            piece += adaptive_quad(integrand, e0, e1, seg_tol, rtol=1e-8, limit=500)
        total += piece
        partial.append(total)
        lo = hi
        if len(partial) >= 4:
            est = wynn_epsilon(partial[-min(len(partial), 24):]).real
            estimates.append(est)
            if len(estimates) >= 5:
                spread = max(estimates[-5:]) - min(estimates[-5:])
                env = abs(moment_fn(np.array([hi]))[0]) / hi
                # the accelerated sum converges well before the raw tail is
                # small; the loose envelope gate only guards against moments
                # that have not started to decay at all
                if spread < tol * math.pi / 4 and env * half < 100.0 * tol * math.pi:
                    return min(max(0.5 + est / math.pi, 0.0), 1.0)
    raise NoConvergence(
        "Gil-Pelaez integral did not settle within the period cap",
        partial=min(max(0.5 + (estimates[-1] if estimates else total) / math.pi, 0.0), 1.0),
    )


def laplace_cdf(transform, y, *, A=18.4, n=40, m=20):
    """CDF at ``y > 0`` of a non-negative variable ``Y`` from ``E[exp(-b Y)]``.

    Abate and Whitt's Euler algorithm applied to ``E[exp(-b Y)] / b``, the
    Laplace transform of the CDF.  ``transform`` maps an array of complex ``b``
    (with ``Re b > 0``) to the transform values.  The discretization error is
    about ``exp(-A)``; ``n + m + 1`` transform values are used.  Convergence
    slows near kinks of the CDF, where the error can reach about 1e-3.
    """
    if y <= 0:
        raise ValueError("y must be positive")
    k = np.arange(n + m + 1)
    b = (A + 2j * math.pi * k) / (2.0 * y)
    vals = np.real(np.asarray(transform(b), dtype=complex) / b)
    terms = vals * np.where(k % 2 == 0, 1.0, -1.0)
    terms[0] *= 0.5
    partial = np.cumsum(terms) * math.exp(A / 2.0) / y
    binom = special.comb(m, np.arange(m + 1)) / 2.0**m
    return float(np.dot(binom, partial[n : n + m + 1]))


# ----------------------------------------------------------------------------
# Regularized incomplete beta function
# ----------------------------------------------------------------------------


def _betacf(x, a, b, max_iter=20_000, eps=1e-16):
    """Modified Lentz evaluation of the incomplete-beta continued fraction (vectorized)."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < tiny, tiny, d)
    d = 1.0 / d
    h = d.copy()
    done = np.zeros(x.shape, dtype=bool)
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        h = np.where(done, h, h * d * c)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(done, h, h * delta)
        done |= np.abs(delta - 1.0) < eps
        if np.all(done):
            return h
    raise NoConvergence("incomplete beta continued fraction did not converge", partial=h)


def reg_inc_beta(x, a, b):
    """Regularized incomplete beta ``I_x(a, b)`` by continued fraction.

    Vectorized over ``x``, ``a`` and ``b`` (broadcast together).
    """
    x, a, b = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    )
    if np.any((x < 0) | (x > 1)) or np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("need 0 <= x <= 1 and a, b > 0")
    out = np.zeros(x.shape)
    out[x >= 1.0] = 1.0
    inner = (x > 0) & (x < 1)
    if np.any(inner):
        xi, ai, bi = x[inner], a[inner], b[inner]
        with np.errstate(divide="ignore"):
            log_front = ai * np.log(xi) + bi * np.log1p(-xi) - special.betaln(ai, bi)
        front = np.exp(log_front)
        # the fraction converges fast only below the mean; use symmetry above it
        direct = xi < (ai + 1.0) / (ai + bi + 2.0)
        res = np.empty(xi.shape)
        if np.any(direct):
            res[direct] = front[direct] * _betacf(xi[direct], ai[direct], bi[direct]) / ai[direct]
        flip = ~direct
        if np.any(flip):
            res[flip] = 1.0 - front[flip] * _betacf(1.0 - xi[flip], bi[flip], ai[flip]) / bi[flip]
        out[inner] = np.clip(res, 0.0, 1.0)
    return out[()] if out.ndim == 0 else out


# ----------------------------------------------------------------------------
# Root finding
# ----------------------------------------------------------------------------


def brent_root(f, lo, hi, tol=1e-12, maxiter=500):
    """Root of ``f`` bracketed by ``[lo, hi]`` (Brent's method)."""
    flo = f(lo)
    if flo == 0:
        return lo
    fhi = f(hi)
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise NoSignChange(f"f({lo})={flo} and f({hi})={fhi} have the same sign")
    return optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=maxiter)
