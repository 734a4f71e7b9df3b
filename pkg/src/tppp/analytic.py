"""Moments of the conditional success probability.

Real and complex orders ``b`` are supported for the PPPs, the PLP-PPP and the
PLP-based TPPP.  For the PSP models only the first moment is available in
closed/semi-closed form; higher PSP moments come from simulation.

The analytic layer ignores shadowing: ``shadow_sigma`` only affects the
Monte Carlo estimators.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import _plpgrid
from .model import PSP, Deterministic, Model, NetworkParams, resolve_model, validate
from .numerics import MaxSubdivisions, NoConvergence, adaptive_quad, diversity_gain, gamma_pair, reg_inc_beta

__all__ = [
    "moment_dppp",
    "moment_tppp_plp",
    "moment_tppp_psp",
    "moment_plp_ppp",
    "plp_outer_factor",
    "g_b",
    "success_prob_plp_ppp",
    "success_prob_tppp",
    "success_prob",
    "asymptote_theta0",
    "asymptote_theta_inf",
    "psp_typical_street_moment",
    "psp_other_streets_factor",
    "success_prob_psp_ppp",
    "success_prob_tppp_psp",
    "variance_cond_success",
    "moment",
    "tppp_outage_constant",
]

_C_D = {1: 2.0, 2: math.pi}


def _b_array(b):
    return np.asarray(b, dtype=complex)


def _ret(b, val):
    return complex(val) if np.ndim(b) == 0 else val


def moment_dppp(b, d: int, intensity: float, params: NetworkParams):
    """``E[P^b]`` in a ``d``-dimensional PPP of the given intensity, link distance ``D``."""
    if d not in _C_D:
        raise ValueError("d must be 1 or 2")
    q = d / params.alpha
    if not 0 < q < 1:
        raise ValueError(f"d/alpha must lie in (0, 1), got {q}")
    bb = _b_array(b)
    if intensity == 0:
        return _ret(b, np.ones_like(bb))
    k = intensity * _C_D[d] * params.d_link**d * params.theta**q * gamma_pair(q)
    return _ret(b, np.exp(-k * diversity_gain(bb, params.p, q)))


def moment_tppp_plp(b, params: NetworkParams):
    """``E[P^b]`` for the TPPP of a PLP street system."""
    validate(params)
    one = moment_dppp(b, 1, params.m * params.lam / 2.0, params)
    two = moment_dppp(b, 2, params.lam * params.mu, params)
    return one * two


def moment_tppp_psp(b, params: NetworkParams):
    """TPPP of a PSP street system; only ``b = 1`` is available."""
    if np.ndim(b) != 0 or complex(b) != 1:
        raise NotImplementedError("PSP moments of order other than 1 are not available analytically")
    return complex(success_prob_tppp_psp(params))


def _gp(q):
    return math.pi * q / math.sin(math.pi * q)


def tppp_outage_constant(params: NetworkParams) -> float:
    """``K`` with ``p_TPPP = exp(-lam p K)`` (PLP streets)."""
    d = params.delta
    D = params.d_link
    th = params.theta
    return params.m * D * th ** (d / 2) * _gp(d / 2) + params.mu * math.pi * D * D * th**d * _gp(d)


def success_prob_tppp(params: NetworkParams) -> float:
    sm = params.street_model
    if isinstance(sm, PSP):
        return success_prob_tppp_psp(params)
    validate(params)
    return math.exp(-params.lam * params.p * tppp_outage_constant(params))


# ----------------------------------------------------------------------------
# PLP-PPP
# ----------------------------------------------------------------------------


def _log_base(r, p, alpha):
    """``log(1 - p/(1 + r^alpha))`` in dimensionless distance ``r``."""
    return np.log1p(-p / (1.0 + r**alpha))


def _j_b(b, t, p, alpha, tol):
    """``int_0^inf 1 - (1 - p/(1 + (t^2+y^2)^(alpha/2)))^b dy`` (dimensionless)."""

    def f(y):
        return -np.expm1(b * _log_base(np.sqrt(t * t + y * y), p, alpha))

    # split where the kernel has decayed to avoid wasting the mapped tail
    knee = 1.0 + t
    return adaptive_quad(f, 0.0, knee, tol, rtol=tol) + adaptive_quad(f, knee, math.inf, tol, rtol=tol)


def g_b(b, t, params: NetworkParams, tol: float = 1e-8):
    """``G_b(t)``: generating functional of one non-typical line at distance ``t``."""
    rho = params.rho
    j = _j_b(complex(b), t / rho, params.p, params.alpha, tol)
    return complex(np.exp(-2.0 * params.lam * rho * j))


def _outer_factor_quad(b, params, tol):
    rho = params.rho
    lr = params.lam * rho
    inner_tol = tol / 10.0

    def f(ts):
        return np.array([-np.expm1(-2.0 * lr * _j_b(b, t, params.p, params.alpha, inner_tol)) for t in ts])

    knee = 1.0 + 2.0 * lr
    try:
        val = adaptive_quad(f, 0.0, knee, tol, rtol=tol) + adaptive_quad(f, knee, math.inf, tol, rtol=tol)
    except MaxSubdivisions as exc:
        raise NoConvergence("PLP outer integral did not converge", partial=exc.partial, error=exc.error)
    return np.exp(-2.0 * params.mu * rho * val)


def plp_outer_factor(b, params: NetworkParams, *, method: str = "grid", tol: float = 1e-6):
    """``exp(-2 mu int_0^inf (1 - G_b(t)) dt)``, the non-typical-street factor.

    ``method="grid"`` uses the level-set tensor grid (vectorized over ``b``,
    absolute error up to about 1e-5); ``method="quad"`` uses nested adaptive
    quadrature to ``tol``.
    """
    validate(params)
    bb = np.atleast_1d(_b_array(b))
    if params.mu == 0 or params.lam == 0:
        return _ret(b, np.ones_like(bb)) if np.ndim(b) else complex(1.0)
    if method == "quad":
        out = np.array([_outer_factor_quad(complex(v), params, tol) for v in bb])
    elif method == "grid":
        X, W = _plpgrid.nodes(max(1.0, float(np.abs(bb).max())), params.p, params.alpha)
        integ = _plpgrid.outer_integral(bb, X, W, X, W, params.lam * params.rho, params.p, params.alpha)
        out = np.exp(-2.0 * params.mu * params.rho * integ)
    else:
        raise ValueError(f"unknown method {method!r}")
    return complex(out[0]) if np.ndim(b) == 0 else out


def moment_plp_ppp(b, params: NetworkParams, tol: float = 1e-6, *, method: str = "quad"):
    """``E[P^b]`` for the PLP-PPP: typical-street factor times the other-lines factor."""
    validate(params)
    typical = moment_dppp(b, 1, params.m * params.lam / 2.0, params)
    return typical * plp_outer_factor(b, params, method=method, tol=tol)


def _laplace_typical_line(t, params, tol):
    """Laplace functional of one line at distance ``t`` for ``b = 1``, via ``u = v^delta``."""
    d = params.delta
    s = params.s
    ut = t * t * s ** (-d)

    # u = ut + w^2 removes the 1/sqrt(u - ut) endpoint singularity
    def f(w):
        return 2.0 / (1.0 + (ut + w * w) ** (1.0 / d))

    knee = 1.0 + math.sqrt(ut)
    inner = adaptive_quad(f, 0.0, knee, tol, rtol=tol) + adaptive_quad(f, knee, math.inf, tol, rtol=tol)
    return math.exp(-params.lam * params.p * s ** (d / 2.0) * inner)


def success_prob_plp_ppp(params: NetworkParams, tol: float = 1e-6) -> float:
    """Success probability of the PLP-PPP through the one-dimensional line Laplace functional."""
    validate(params)
    typical = moment_dppp(1.0, 1, params.m * params.lam / 2.0, params).real
    if params.mu == 0 or params.lam == 0:
        return typical
    inner_tol = tol / 10.0

    def f(ts):
        return np.array([1.0 - _laplace_typical_line(t, params, inner_tol) for t in ts])

    rho = params.rho
    knee = rho * (1.0 + 2.0 * params.lam * rho)
    try:
        val = adaptive_quad(f, 0.0, knee, tol * rho, rtol=tol) + adaptive_quad(f, knee, math.inf, tol * rho, rtol=tol)
    except MaxSubdivisions as exc:
        raise NoConvergence("PLP success-probability integral did not converge", partial=exc.partial, error=exc.error)
    return typical * math.exp(-2.0 * params.mu * val)


def asymptote_theta0(params: NetworkParams, theta) -> float:
    """Leading-order PLP-PPP outage as the threshold goes to zero."""
    d = params.delta
    theta = np.asarray(theta, dtype=float)
    out = params.m * params.lam * params.p * params.d_link * theta ** (d / 2.0) * gamma_pair(d / 2.0)
    return float(out) if out.ndim == 0 else out


def asymptote_theta_inf(params: NetworkParams, theta) -> float:
    """Large-threshold PLP-PPP success probability (the 2D PPP of intensity ``lam mu``)."""
    d = params.delta
    theta = np.asarray(theta, dtype=float)
    out = np.exp(-math.pi * params.lam * params.p * params.mu * params.d_link**2 * theta**d * gamma_pair(d))
    return float(out) if out.ndim == 0 else out


# ----------------------------------------------------------------------------
# PSP models (first moment only)
# ----------------------------------------------------------------------------


def _phi(x, alpha):
    """Odd function ``int_0^x dv/(1 + |v|^alpha)``."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    a = 1.0 / alpha
    full = (math.pi / alpha) / math.sin(math.pi / alpha)
    with np.errstate(over="ignore", invalid="ignore"):
        xa = ax**alpha
        z = np.where(np.isinf(xa), 1.0, xa / (1.0 + xa))
    return np.sign(x) * full * reg_inc_beta(z, a, 1.0 - a)


def _h_integral(g, hl, tol, biased):
    """``E[g(H)]`` under ``f_H`` or its length-biased version."""
    if isinstance(hl, Deterministic):
        return g(np.array([hl.h]))[0]
    if biased:
        f = lambda h: g(h) * hl.biased_pdf(h)
    else:
        f = lambda h: g(h) * hl.pdf(h)
    scale = hl.mean
    return adaptive_quad(f, 0.0, 4.0 * scale, tol, rtol=tol) + adaptive_quad(f, 4.0 * scale, math.inf, tol, rtol=tol)


def psp_typical_street_moment(params: NetworkParams, tol: float = 1e-6) -> float:
    """First-moment factor of the ``m/2`` typical sticks (length-biased, uniform offset)."""
    validate(params)
    if not isinstance(params.street_model, PSP):
        raise ValueError("psp_typical_street_moment needs a PSP street model")
    hl = params.street_model.half_length
    rho = params.rho
    a = params.alpha
    k = params.lam * params.p * rho
    if k == 0:
        return 1.0

    def over_w(h_arr):
        out = np.empty(len(h_arr))
        for i, h in enumerate(h_arr):
            if h <= 0:
                out[i] = 1.0
                continue
            hr = h / rho

            # the integrand is even in w; average over [0, h]
            def f(w):
                wr = np.asarray(w) / rho
                return np.exp(-k * (_phi(hr - wr, a) + _phi(hr + wr, a)))

            out[i] = adaptive_quad(f, 0.0, h, tol * h / 10.0, rtol=tol / 10.0) / h
        return out

    one = _h_integral(over_w, hl, tol, biased=True)
    return float(one ** (params.m // 2))


class _SegTable:
    """``S(a, x) = int_0^x dv/(1 + (v^2 + a^2)^(alpha/2))``, odd in ``x``, tabulated per ``a``.

    Tabulated on a uniform grid in ``z = asinh|x|`` with the exact derivative,
    so lookups are cubic Hermite interpolation.
    """

    def __init__(self, a, alpha, zmax, nz=800):
        self.a = np.asarray(a, dtype=float)
        self.alpha = alpha
        self.z = np.linspace(0.0, zmax, nz)
        self.dz = self.z[1] - self.z[0]
        xg, wg = leggauss(6)
        a2 = self.a[:, None, None] ** 2
        zz = self.z[:-1, None] + 0.5 * self.dz * (xg + 1.0)
        vals = self._dsdz(zz[None, :, :], a2)
        steps = 0.5 * self.dz * np.einsum("k,ijk->ij", wg, vals)
        self.S = np.concatenate([np.zeros((len(self.a), 1)), np.cumsum(steps, axis=1)], axis=1)
        self.dS = self._dsdz(self.z[None, :], self.a[:, None] ** 2)

    def _dsdz(self, z, a2):
        sh = np.sinh(z)
        return np.cosh(z) / (1.0 + (sh * sh + a2) ** (self.alpha / 2.0))

    def __call__(self, x):
        """``x`` has shape ``(len(a), n)``."""
        x = np.asarray(x, dtype=float)
        z = np.arcsinh(np.abs(x))
        u = np.minimum(z / self.dz, len(self.z) - 1 - 1e-12)
        i = np.floor(u).astype(int)
        t = u - i
        rows = np.arange(len(self.a))[:, None]
        y0, y1 = self.S[rows, i], self.S[rows, i + 1]
        d0, d1 = self.dS[rows, i] * self.dz, self.dS[rows, i + 1] * self.dz
        t2, t3 = t * t, t * t * t
        val = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * d0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * d1
        return np.sign(x) * val


def _panel_nodes(edges, n):
    zg, wg = leggauss(n)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    X = (0.5 * (hi - lo))[:, None] * zg + (0.5 * (hi + lo))[:, None]
    W = (0.5 * (hi - lo))[:, None] * wg
    return X.ravel(), W.ravel()


def _h_nodes(hl, n):
    """Nodes and ``f_H`` weights on panels between quantiles of the half-length."""
    if isinstance(hl, Deterministic):
        return np.array([hl.h]), np.array([1.0])
    qs = np.array([0.0, 0.25, 0.5, 0.75, 0.9, 0.97, 0.99, 0.999, 1 - 1e-5, 1 - 1e-8])
    H, W = _panel_nodes(hl.quantile(qs), n)
    return H, W * hl.pdf(H)


def psp_other_streets_factor(params: NetworkParams, tol: float = 1e-6, *, return_error: bool = False):
    """Laplace functional of all non-typical sticks for ``b = 1``.

    Equals ``exp(-mu E_H int_{R^2} (1 - L(a, c, H)) da dc)`` where a stick at
    perpendicular offset ``a`` and along-axis midpoint offset ``c`` contributes
    ``L = exp(-lam p int_{c-h}^{c+h} s/(s + (v^2 + a^2)^(alpha/2)) dv)``;
    the orientation integral has been absorbed by isotropy.  The square
    ``[-cut, cut]^2`` (units of ``rho``) is integrated on graded Gauss grids and
    the far field uses the linearized interference.  The grids are refined
    until successive exponents agree to ``tol``.
    """
    validate(params)
    if not isinstance(params.street_model, PSP):
        raise ValueError("psp_other_streets_factor needs a PSP street model")
    hl = params.street_model.half_length
    if params.mu == 0 or params.lam == 0:
        return (1.0, 0.0) if return_error else 1.0
    rho = params.rho
    alpha = params.alpha
    k = params.lam * params.p * rho
    tg, tw = leggauss(32)
    th = 0.125 * math.pi * (tg + 1.0)
    # int_0^{pi/4} cos^(alpha-2), for the complement of the square
    cos_int = np.sum(0.125 * math.pi * tw * np.cos(th) ** (alpha - 2.0))

    def exponent(n):
        hs, wh = _h_nodes(hl, n)
        hr_all = hs / rho
        cut = max(200.0, 20.0 * float(hr_all.max()))
        a_edges = np.unique(np.concatenate([[0.0], np.geomspace(0.125, cut, 16)]))
        A, WA = _panel_nodes(a_edges, n)
        table = _SegTable(A, alpha, math.asinh(2.0 * cut) + 1e-9, nz=40 * n)
        total = 0.0
        for hr, wt in zip(hr_all, wh):
            c_edges = np.concatenate([[0.0], np.geomspace(0.125, cut, 16), [hr - 2, hr - 0.5, hr, hr + 0.5, hr + 2]])
            c_edges = np.unique(c_edges[(c_edges >= 0) & (c_edges <= cut)])
            C, WC = _panel_nodes(c_edges, n)
            seg = table(np.broadcast_to(C + hr, (len(A), len(C)))) - table(np.broadcast_to(C - hr, (len(A), len(C))))
            inner = 4.0 * (WA @ -np.expm1(-k * seg) @ WC)
            far = k * 2.0 * hr * 8.0 * cut ** (2.0 - alpha) / (alpha - 2.0) * cos_int
            total += wt * (inner + far)
        return params.mu * rho * rho * total

    n = 8
    prev = exponent(n)
    while True:
        n += 4
        cur = exponent(n)
        err = abs(cur - prev)
        if err < tol * max(1.0, abs(cur)) or n >= 32:
            break
        prev = cur
    if err >= tol * max(1.0, abs(cur)):
        raise NoConvergence("PSP other-street integral did not converge", partial=math.exp(-cur), error=err)
    val = math.exp(-cur)
    return (val, err * val) if return_error else val


def success_prob_psp_ppp(params: NetworkParams, tol: float = 1e-6) -> float:
    """PSP-PPP success probability: typical-stick factor times other-stick factor.

    Runtime is about a second at ``tol = 1e-6`` (dominated by the grid over
    offsets of the other sticks).
    """
    return psp_typical_street_moment(params, tol) * psp_other_streets_factor(params, tol)


def success_prob_tppp_psp(params: NetworkParams, tol: float = 1e-6) -> float:
    """TPPP of a PSP: typical-stick factor times a 2D PPP of intensity ``2 lam mu E[H]``."""
    typical = psp_typical_street_moment(params, tol)
    d = params.delta
    hl = params.street_model.half_length
    two_d = 2.0 * params.lam * params.p * params.mu * math.pi * hl.mean * params.d_link**2 * params.theta**d * gamma_pair(d)
    return typical * math.exp(-two_d)


# ----------------------------------------------------------------------------
# Dispatch
# ----------------------------------------------------------------------------


def moment(model, b, params: NetworkParams, tol: float = 1e-6, *, method: str = "grid"):
    """``E[P^b]`` for any model that supports order ``b``."""
    model = resolve_model(model, params)
    if model is Model.PPP1D:
        return moment_dppp(b, 1, params.m * params.lam / 2.0, params)
    if model is Model.PPP2D:
        return moment_dppp(b, 2, validate(params).lambda2, params)
    if model is Model.TPPP_PLP:
        return moment_tppp_plp(b, params)
    if model is Model.PLP_PPP:
        return moment_plp_ppp(b, params, tol, method=method)
    if model is Model.TPPP_PSP:
        return moment_tppp_psp(b, params)
    if np.ndim(b) == 0 and complex(b) == 1:
        return complex(success_prob_psp_ppp(params, tol))
    raise NotImplementedError("PSP-PPP moments of order other than 1 are not available analytically")


def success_prob(model, params: NetworkParams, tol: float = 1e-6) -> float:
    model = resolve_model(model, params)
    if model is Model.PLP_PPP:
        return success_prob_plp_ppp(params, tol)
    if model is Model.PSP_PPP:
        return success_prob_psp_ppp(params, tol)
    if model is Model.TPPP_PSP:
        return success_prob_tppp_psp(params)
    return moment(model, 1.0, params, tol).real


def variance_cond_success(model, params: NetworkParams, tol: float = 1e-7, *, method: str = "grid") -> float:
    """``M_2 - M_1^2`` for the PLP-PPP or the PLP-based TPPP."""
    model = resolve_model(model, params)
    if model not in (Model.PLP_PPP, Model.TPPP_PLP, Model.PPP1D, Model.PPP2D):
        raise ValueError(f"variance not available for {model.value}")
    m = np.atleast_1d(moment(model, np.array([1.0, 2.0]), params, tol, method=method)) \
        if method == "grid" or model is not Model.PLP_PPP else \
        np.array([moment(model, 1.0, params, tol, method=method), moment(model, 2.0, params, tol, method=method)])
    return float(m[1].real - m[0].real ** 2)
