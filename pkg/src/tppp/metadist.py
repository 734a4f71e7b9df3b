"""SIR meta distribution: exact (Gil-Pelaez) and beta-approximated.

For the PLP-PPP the imaginary moments are expensive and decay slowly, because
the typical line alone behaves like a 1D PPP.  The TPPP shares that factor and
has closed-form moments, so it is used as a control variate: the TPPP MD is
inverted with the adaptive Gil-Pelaez routine, and only the difference of the
two moment functions, which is small and decays faster, is inverted on a
uniform midpoint grid in ``t`` that is shared across all ``x``.

At very small thresholds ``P`` concentrates near 1 and the imaginary moments
decay too slowly for the oscillatory integral.  Then ``MD(x)`` is recovered
instead as the CDF of ``-log P`` at ``-log x`` from the moments at complex
orders with positive real part (Laplace inversion), which needs a few dozen
moment evaluations per ``x``.  Each interferer scales ``P`` by at least
``1 - p``, so the MD has kinks at ``x = (1 - p)^k``; near them the Laplace
route is only good to about 1e-3, but at the thresholds where it is chosen
the MD is needed at ``x`` close to 1, above the first kink.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import _plpgrid
from .analytic import moment, moment_dppp, success_prob
from .model import Model, NetworkParams, resolve_model, validate
from .numerics import gil_pelaez, laplace_cdf, reg_inc_beta

__all__ = [
    "BetaParams",
    "InfeasibleMoments",
    "beta_from_moments",
    "md_exact",
    "md_exact_curve",
    "md_beta",
    "md_beta_curve",
    "model_moments",
    "X_CLAMP",
]

X_CLAMP = (1e-6, 1.0 - 1e-6)
_EXACT_MODELS = (Model.TPPP_PLP, Model.PLP_PPP, Model.PPP1D, Model.PPP2D)

# PLP difference-moment grid: spacing, block length and tail tolerance
PLP_GRID_STEP = 0.5
PLP_BLOCK = 25.0
PLP_T_MAX = 20_000.0
# In "auto" mode the grid stops here; slower decay switches the PLP-PPP to
# the Laplace route, since each block costs about as much as its order.
PLP_T_AUTO = 1_500.0
_PLP_CACHE: OrderedDict = OrderedDict()
_PLP_CACHE_SIZE = 16


class InfeasibleMoments(ValueError):
    """The moment pair cannot belong to a non-degenerate beta distribution."""


@dataclass(frozen=True)
class BetaParams:
    alpha_shape: float
    beta_shape: float

    def __post_init__(self):
        if not (self.alpha_shape > 0 and self.beta_shape > 0):
            raise InfeasibleMoments("beta shapes must be positive")

    @property
    def mean(self) -> float:
        return self.alpha_shape / (self.alpha_shape + self.beta_shape)

    @property
    def second_moment(self) -> float:
        a, b = self.alpha_shape, self.beta_shape
        return a * (a + 1.0) / ((a + b) * (a + b + 1.0))

    def survival(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return 1.0 - reg_inc_beta(x, self.alpha_shape, self.beta_shape)


def beta_from_moments(m1: float, m2: float) -> BetaParams:
    """Beta shapes matching mean ``m1`` and second moment ``m2``.

    From ``m1 = a/(a+b)`` and ``m2 = m1 (a+1)/(a+b+1)``:
    ``a = m1 (m1 - m2)/(m2 - m1^2)`` and ``b = a (1 - m1)/m1``.
    """
    m1 = float(m1)
    m2 = float(m2)
    if not (0.0 < m1 < 1.0):
        raise InfeasibleMoments(f"mean must lie in (0, 1), got {m1}")
    if not (m1 * m1 < m2 < m1):
        raise InfeasibleMoments(f"need m1^2 < m2 < m1, got m1={m1}, m2={m2}")
    a = m1 * (m1 - m2) / (m2 - m1 * m1)
    return BetaParams(a, a * (1.0 - m1) / m1)


def model_moments(model, params: NetworkParams, *, m2=None, sim=None):
    """First two moments of ``P``.

    The PSP models have no analytic second moment; pass ``m2`` or a
    :class:`~tppp.montecarlo.SimConfig` to estimate it by simulation.
    """
    model = resolve_model(model, params)
    if model in (Model.PSP_PPP, Model.TPPP_PSP):
        m1 = success_prob(model, params)
        if m2 is None:
            from .montecarlo import SimConfig, simulate_cond_success

            P = simulate_cond_success(model, params, sim or SimConfig())
            m2 = float(np.mean(P * P))
        return float(m1), float(m2)
    m = np.atleast_1d(moment(model, np.array([1.0, 2.0]), params))
    return float(m[0].real), float(m[1].real) if m2 is None else float(m2)


def md_beta(model, params: NetworkParams, x, *, moments=None, sim=None):
    """Beta approximation ``1 - I_x(a, b)`` of the meta distribution.

    Infeasible moment pairs (e.g. zero variance) fall back to the degenerate
    distribution at ``m1``: 1 for ``x < m1`` and 0 otherwise.
    """
    m1, m2 = moments if moments is not None else model_moments(model, params, sim=sim)
    xs = np.asarray(x, dtype=float)
    try:
        bp = beta_from_moments(m1, m2)
    except InfeasibleMoments:
        out = np.where(xs < m1, 1.0, 0.0)
    else:
        out = bp.survival(xs)
    return float(out) if out.ndim == 0 else out


md_beta_curve = md_beta


def _moment_fn(model, params):
    if model is Model.PPP1D:
        return lambda t: moment_dppp(1j * np.asarray(t), 1, params.m * params.lam / 2.0, params)
    if model is Model.PPP2D:
        return lambda t: moment_dppp(1j * np.asarray(t), 2, validate(params).lambda2, params)
    return lambda t: moment(Model.TPPP_PLP, 1j * np.asarray(t), params)


def _plp_key(params, tol, t_max):
    return (params.lam, params.mu, params.p, params.theta, params.d_link, params.alpha, params.m, tol, t_max)


def _plp_difference(params: NetworkParams, tol: float, t_max: float = PLP_T_MAX):
    """``t_k`` and ``M_PLP(j t_k) - M_TPPP(j t_k)`` on the shared midpoint grid.

    Returns ``None`` when the difference has not decayed below ``tol`` by
    ``t_max`` (only for ``t_max < PLP_T_MAX``).
    """
    key = _plp_key(params, tol, t_max)
    if key in _PLP_CACHE:
        _PLP_CACHE.move_to_end(key)
        return _PLP_CACHE[key]
    h = PLP_GRID_STEP
    rho = params.rho
    lam_r = params.lam * rho
    per_block = int(round(PLP_BLOCK / h))
    ts, diffs = [], []
    lo = 0.0
    done = False
    while lo < t_max:
        hi = lo + PLP_BLOCK
        X, W = _plpgrid.nodes(max(hi, 1.0), params.p, params.alpha)
        t0 = lo + 0.5 * h
        integ = _plpgrid.outer_integral_imag_grid(t0, h, per_block, X, W, X, W, lam_r, params.p, params.alpha)
        t = t0 + h * np.arange(per_block)
        typical = moment_dppp(1j * t, 1, params.m * params.lam / 2.0, params)
        two_d = moment_dppp(1j * t, 2, params.lam * params.mu, params)
        d = typical * (np.exp(-2.0 * params.mu * rho * integ) - two_d)
        ts.append(t)
        diffs.append(d)
        lo = hi
        # |d| decays at least like t^-1.5 here, so the remaining
        # contribution to the MD is bounded by about max|d| / (1.5 pi)
        if np.abs(d).max() / (1.5 * math.pi) < tol:
            done = True
            break
    out = (np.concatenate(ts), np.concatenate(diffs)) if done or t_max >= PLP_T_MAX else None
    _PLP_CACHE[key] = out
    if len(_PLP_CACHE) > _PLP_CACHE_SIZE:
        _PLP_CACHE.popitem(last=False)
    return out


def _plp_correction(params, xs, tol, t_max=PLP_T_MAX):
    diff = _plp_difference(params, tol, t_max)
    if diff is None:
        return None
    t, d = diff
    h = PLP_GRID_STEP
    lx = np.log(xs)
    phase = np.exp(-1j * np.outer(lx, t))
    return (h / math.pi) * np.imag(phase * d[None, :]) @ (1.0 / t)


# Imaginary-order budget for the oscillatory route; beyond it, invert the Laplace transform.
GP_T_BUDGET = 2.0e4


def _slow_decay(params, xs, tol):
    """Per ``x``: True when the imaginary moments are still too large at the budget ``t``.

    The TPPP moment carries the slowly decaying typical-street factor shared by
    all supported models, so it serves as the indicator.
    """
    m = abs(complex(moment(Model.TPPP_PLP, 1j * GP_T_BUDGET, params)))
    w = np.maximum(np.abs(np.log(xs)), 1e-12)
    return m / (w * GP_T_BUDGET) > tol


# Below this -log x the Euler abscissae (about A / (2 y)) make the moments
# unaffordable, so points with x above exp(-0.01) always use Gil-Pelaez.
LAPLACE_Y_MIN = 0.01


def _md_laplace(model, params, xs):
    if model is Model.PLP_PPP:
        fn = lambda b: moment(Model.PLP_PPP, b, params, method="grid")
    elif model is Model.TPPP_PLP:
        fn = lambda b: moment(Model.TPPP_PLP, b, params)
    else:
        fn = lambda b: moment(model, b, params)
    return np.array([laplace_cdf(fn, -math.log(x)) for x in xs])


def md_exact_curve(model, params: NetworkParams, xs, tol: float = 1e-4, *, method: str = "auto"):
    """Exact meta distribution on a grid of ``x``; see :func:`md_exact`."""
    model = resolve_model(model, params)
    if model not in _EXACT_MODELS:
        raise NotImplementedError(f"no exact meta distribution for {model.value}")
    if method not in ("auto", "gil-pelaez", "laplace"):
        raise ValueError(f"unknown method {method!r}")
    validate(params)
    xs = np.clip(np.atleast_1d(np.asarray(xs, dtype=float)), *X_CLAMP)
    if params.lam == 0 or (params.lam * params.mu == 0 and model is Model.PPP2D):
        return np.ones_like(xs)
    near_one = -np.log(xs) < LAPLACE_Y_MIN
    if method == "laplace":
        if near_one.any():
            raise ValueError(f"the Laplace route needs x <= {math.exp(-LAPLACE_Y_MIN):.4f}")
        lap = np.ones(len(xs), dtype=bool)
    elif method == "auto":
        lap = ~near_one & _slow_decay(params, xs, tol)
    else:
        lap = np.zeros(len(xs), dtype=bool)
    plp = model is Model.PLP_PPP and params.mu > 0
    # the midpoint grid's tail tolerance is set looser than the adaptive
    # inversion's: its aliasing and truncation errors scale with the
    # already small difference
    grid_tol = max(tol, 2e-3)
    t_grid = PLP_T_MAX
    if plp and method == "auto" and not lap.all():
        if _plp_difference(params, grid_tol, PLP_T_AUTO) is None:
            lap = ~near_one
        else:
            t_grid = PLP_T_AUTO
    out = np.empty(len(xs))
    if lap.any():
        out[lap] = _md_laplace(model, params, xs[lap])
    gp = ~lap
    if gp.any():
        fn = _moment_fn(model, params)
        v = np.array([gil_pelaez(fn, x, tol) for x in xs[gp]])
        if plp:
            v = v + _plp_correction(params, xs[gp], grid_tol, t_grid)
        out[gp] = v
    return np.clip(out, 0.0, 1.0)


def md_exact(model, params: NetworkParams, x, tol: float = 1e-4, *, method: str = "auto"):
    """``P(P > x)`` by inversion of the moments.

    ``method="gil-pelaez"`` integrates the imaginary moments; ``"laplace"``
    inverts the moments at complex orders as a Laplace transform of the CDF of
    ``-log P``; ``"auto"`` uses Gil-Pelaez unless the imaginary moments decay
    too slowly (for the PLP-PPP: unless its correction grid is still
    significant at ``t = PLP_T_AUTO``).  Above ``x = exp(-0.01)`` only Gil-Pelaez is used, since the
    Laplace abscissae grow like ``1 / -log x``.  ``x`` is clamped to
    ``[1e-6, 1 - 1e-6]``.  Supported for the PPPs, the PLP-PPP and the
    PLP-based TPPP.
    """
    if np.ndim(x) == 0:
        return float(md_exact_curve(model, params, [x], tol, method=method)[0])
    return md_exact_curve(model, params, x, tol, method=method)
