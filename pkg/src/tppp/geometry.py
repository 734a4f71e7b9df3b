"""Street systems and Palm-conditioned vehicle patterns.

The receiver (typical vehicle) sits at the origin.  Its street(s) are laid along
the x-axis (and the y-axis for an intersection vehicle, ``m = 4``); all models
are isotropic so this costs no generality.

Samplers come in two flavours.  ``sample_*`` return one realization as
:class:`StreetSystem` / :class:`PointPattern` objects.  ``batch_*`` draw many
realizations at once as flat arrays tagged with a realization index, which is
what the Monte Carlo estimators use.  The single samplers are thin wrappers over
the batch ones, so both follow the same distribution exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .model import (
    PSP,
    Deterministic,
    Model,
    NetworkParams,
    resolve_model,
    validate,
)

__all__ = [
    "Line",
    "Stick",
    "StreetSystem",
    "PointPattern",
    "PatternBatch",
    "default_window_radius",
    "psp_h_cut",
    "lognormal_params",
    "sample_marks",
    "batch_plp_ppp",
    "batch_psp_ppp",
    "batch_tppp",
    "batch_sample",
    "sample_plp_ppp",
    "sample_psp_ppp",
    "sample_tppp",
    "stick_disk_overlap",
    "nnd_cdf",
    "pcf_plp_ppp",
    "nn_distance_moments",
    "write_pattern_csv",
]

# Quantile of f_H at which stick half-lengths are truncated when sampling.
H_CUT_QUANTILE = 1.0 - 1e-6
# Bound on the expected truncated contribution to -log P (hence on the bias of P).
TRUNCATION_BOUND = 1e-4


@dataclass(frozen=True)
class Line:
    t: float
    phi: float

    def contains(self, x, y, atol=1e-9):
        return abs(x * math.cos(self.phi) + y * math.sin(self.phi) - self.t) <= atol


@dataclass(frozen=True)
class Stick:
    midpoint: tuple
    orientation: float
    half_length: float

    @property
    def endpoints(self):
        cx, cy = self.midpoint
        dx = self.half_length * math.cos(self.orientation)
        dy = self.half_length * math.sin(self.orientation)
        return (cx - dx, cy - dy), (cx + dx, cy + dy)

    def contains(self, x, y, atol=1e-9):
        cx, cy = self.midpoint
        ex, ey = math.cos(self.orientation), math.sin(self.orientation)
        along = (x - cx) * ex + (y - cy) * ey
        across = -(x - cx) * ey + (y - cy) * ex
        return abs(across) <= atol and abs(along) <= self.half_length + atol


Street = Union[Line, Stick]


@dataclass
class StreetSystem:
    typical_streets: list
    other_streets: list
    window_radius: float


@dataclass
class PointPattern:
    """Interferer candidates around the typical vehicle (which is not included)."""

    xy: np.ndarray
    shadow_mark: np.ndarray
    on_typical_street: np.ndarray

    def __len__(self):
        return len(self.xy)

    @property
    def distances(self):
        return np.hypot(self.xy[:, 0], self.xy[:, 1])


@dataclass
class PatternBatch:
    """Points of ``n`` realizations; ``owner[i]`` is the realization of point ``i``."""

    n: int
    xy: np.ndarray
    owner: np.ndarray
    on_typical: np.ndarray
    window_radius: float
    lines: dict = None
    sticks: dict = None

    def pattern(self, k: int, marks=None) -> PointPattern:
        sel = self.owner == k
        mk = np.ones(int(sel.sum())) if marks is None else marks[sel]
        return PointPattern(self.xy[sel], mk, self.on_typical[sel])


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def psp_h_cut(params: NetworkParams) -> float:
    hl = params.street_model.half_length
    return float(hl.quantile(H_CUT_QUANTILE))


def _tau(params):
    return validate(params).tau


def default_window_radius(params: NetworkParams, bound: float = TRUNCATION_BOUND) -> float:
    """Radius beyond which dropped interferers shift ``E[-log P]`` by less than ``bound``.

    For small ``p s r^-alpha``, an interferer at distance ``r`` contributes
    ``p s r^-alpha`` to ``-log P``.  Outside ``b(o, R)`` the 2D mean is
    ``2 pi lam tau R^(2-alpha)/(alpha-2)`` and the typical street(s) add
    ``m lam R^(1-alpha)/(alpha-1)``.  Solved by bisection in log R.
    """
    a = params.alpha
    scale = params.p * params.s * params.lam
    tau = _tau(params)

    def excess(R):
        two_d = 2.0 * math.pi * tau * R ** (2.0 - a) / (a - 2.0)
        one_d = params.m * R ** (1.0 - a) / (a - 1.0)
        return scale * (two_d + one_d) - bound

    lo = max(4.0 * params.rho, 2.0 * params.d_link)
    if isinstance(params.street_model, PSP):
        lo = max(lo, 1e-9)
    if scale == 0 or excess(lo) <= 0:
        return lo
    hi = lo
    while excess(hi) > 0:
        hi *= 2.0
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


def lognormal_params(sigma: float):
    """Log-space (mean, sd) of a lognormal with mean 1 and standard deviation ``sigma``."""
    s2 = math.log1p(sigma * sigma)
    return -0.5 * s2, math.sqrt(s2)


def sample_marks(rng, size, sigma: float):
    if sigma == 0:
        return np.ones(size)
    m_ln, s_ln = lognormal_params(sigma)
    return rng.lognormal(m_ln, s_ln, size)


# ----------------------------------------------------------------------------
# Batch samplers
# ----------------------------------------------------------------------------


def _typical_lines(rng, n, lam, R, m):
    """1D PPPs of intensity ``lam`` on ``(-R, R)`` along the axes."""
    xs, owners = [], []
    for k in range(m // 2):
        counts = rng.poisson(2.0 * lam * R, n)
        u = rng.uniform(-R, R, counts.sum())
        xy = np.zeros((len(u), 2))
        xy[:, k] = u
        xs.append(xy)
        owners.append(np.repeat(np.arange(n), counts))
    return xs, owners


def _typical_sticks(rng, n, lam, R, m, hl):
    """Length-biased sticks through the origin, one per axis, origin uniform on each."""
    xs, owners = [], []
    info = []
    for k in range(m // 2):
        h = hl.sample_biased(rng, n)
        w = rng.uniform(-h, h)
        lo = np.maximum(-h - w, -R)
        hi = np.minimum(h - w, R)
        length = np.maximum(hi - lo, 0.0)
        counts = rng.poisson(lam * length)
        owner = np.repeat(np.arange(n), counts)
        u = lo[owner] + rng.random(counts.sum()) * length[owner]
        xy = np.zeros((len(u), 2))
        xy[:, k] = u
        xs.append(xy)
        owners.append(owner)
        info.append((h, w))
    return xs, owners, info


def _assemble(n, R, typ_xy, typ_own, oth_xy, oth_own, **extra):
    xy = np.concatenate(typ_xy + oth_xy) if (typ_xy or oth_xy) else np.zeros((0, 2))
    owner = np.concatenate(typ_own + oth_own) if (typ_own or oth_own) else np.zeros(0, int)
    flags = np.concatenate(
        [np.ones(len(a), bool) for a in typ_xy] + [np.zeros(len(a), bool) for a in oth_xy]
    ) if (typ_xy or oth_xy) else np.zeros(0, bool)
    if len(xy) == 0:
        xy = np.zeros((0, 2))
    order = np.argsort(owner, kind="stable")
    return PatternBatch(n, xy[order], owner[order], flags[order], R, **extra)


def batch_plp_ppp(params: NetworkParams, n: int, window_radius: float, rng) -> PatternBatch:
    """PLP streets with 1D PPP vehicles, Palm-conditioned at the origin."""
    rng = _rng(rng)
    R = float(window_radius)
    lam, mu = params.lam, params.mu
    typ_xy, typ_own = _typical_lines(rng, n, lam, R, params.m)

    n_lines = rng.poisson(2.0 * mu * R, n)
    line_owner = np.repeat(np.arange(n), n_lines)
    t = rng.uniform(-R, R, n_lines.sum())
    phi = rng.uniform(0.0, math.pi, n_lines.sum())
    chord = np.sqrt(np.maximum(R * R - t * t, 0.0))
    counts = rng.poisson(2.0 * lam * chord)
    idx = np.repeat(np.arange(len(t)), counts)
    u = (rng.random(counts.sum()) * 2.0 - 1.0) * chord[idx]
    c, s = np.cos(phi[idx]), np.sin(phi[idx])
    pts = np.column_stack([t[idx] * c - u * s, t[idx] * s + u * c])
    lines = {"t": t, "phi": phi, "owner": line_owner}
    return _assemble(n, R, typ_xy, typ_own, [pts], [line_owner[idx]], lines=lines)


def batch_psp_ppp(params: NetworkParams, n: int, window_radius: float, rng) -> PatternBatch:
    """PSP streets with 1D PPP vehicles, Palm-conditioned at the origin."""
    rng = _rng(rng)
    R = float(window_radius)
    lam, mu = params.lam, params.mu
    hl = params.street_model.half_length
    h_cut = psp_h_cut(params)
    typ_xy, typ_own, typ_info = _typical_sticks(rng, n, lam, R, params.m, hl)

    R_mid = R + h_cut
    n_sticks = rng.poisson(mu * math.pi * R_mid * R_mid, n)
    stick_owner = np.repeat(np.arange(n), n_sticks)
    tot = n_sticks.sum()
    rad = R_mid * np.sqrt(rng.random(tot))
    ang = rng.uniform(0.0, 2.0 * math.pi, tot)
    cx, cy = rad * np.cos(ang), rad * np.sin(ang)
    orient = rng.uniform(0.0, math.pi, tot)
    h = hl.sample(rng, tot, h_cut=h_cut)
    ex, ey = np.cos(orient), np.sin(orient)
    # clip each stick to the window disk
    along = cx * ex + cy * ey
    perp2 = np.maximum(cx * cx + cy * cy - along * along, 0.0)
    half_chord = np.sqrt(np.maximum(R * R - perp2, 0.0))
    lo = np.maximum(-h, -along - half_chord)
    hi = np.minimum(h, -along + half_chord)
    length = np.where(perp2 < R * R, np.maximum(hi - lo, 0.0), 0.0)
    counts = rng.poisson(lam * length)
    idx = np.repeat(np.arange(tot), counts)
    v = lo[idx] + rng.random(counts.sum()) * length[idx]
    pts = np.column_stack([cx[idx] + v * ex[idx], cy[idx] + v * ey[idx]])
    sticks = {"cx": cx, "cy": cy, "orientation": orient, "h": h, "owner": stick_owner,
              "typical": typ_info}
    return _assemble(n, R, typ_xy, typ_own, [pts], [stick_owner[idx]], sticks=sticks)


def batch_tppp(params: NetworkParams, n: int, window_radius: float, rng,
               *, lambda2=None) -> PatternBatch:
    """Typical street(s) superposed with a 2D PPP of intensity ``lambda2``.

    The typical streets are infinite lines for a PLP street model and
    length-biased sticks for a PSP model.
    """
    rng = _rng(rng)
    R = float(window_radius)
    lam = params.lam
    if lambda2 is None:
        lambda2 = validate(params).lambda2
    info = None
    if isinstance(params.street_model, PSP):
        typ_xy, typ_own, info = _typical_sticks(rng, n, lam, R, params.m,
                                                params.street_model.half_length)
    else:
        typ_xy, typ_own = _typical_lines(rng, n, lam, R, params.m)
    counts = rng.poisson(lambda2 * math.pi * R * R, n)
    tot = counts.sum()
    rad = R * np.sqrt(rng.random(tot))
    ang = rng.uniform(0.0, 2.0 * math.pi, tot)
    pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    owner = np.repeat(np.arange(n), counts)
    sticks = {"typical": info} if info is not None else None
    return _assemble(n, R, typ_xy, typ_own, [pts], [owner], sticks=sticks)


def _batch_ppp(params, n, R, rng, dim, intensity):
    rng = _rng(rng)
    if dim == 1:
        counts = rng.poisson(2.0 * intensity * R, n)
        u = rng.uniform(-R, R, counts.sum())
        pts = np.column_stack([u, np.zeros_like(u)])
    else:
        counts = rng.poisson(intensity * math.pi * R * R, n)
        rad = R * np.sqrt(rng.random(counts.sum()))
        ang = rng.uniform(0.0, 2.0 * math.pi, counts.sum())
        pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    owner = np.repeat(np.arange(n), counts)
    return PatternBatch(n, pts, owner, np.full(len(pts), dim == 1), R)


def batch_sample(model, params: NetworkParams, n: int, window_radius: float, rng) -> PatternBatch:
    """Dispatch to the batch sampler of ``model``.

    ``PPP1D`` has intensity ``m lam / 2`` and ``PPP2D`` intensity ``lam tau``,
    i.e. the two components of the TPPP on their own.
    """
    model = resolve_model(model, params)
    if model is Model.PLP_PPP:
        return batch_plp_ppp(params, n, window_radius, rng)
    if model is Model.PSP_PPP:
        return batch_psp_ppp(params, n, window_radius, rng)
    if model in (Model.TPPP_PLP, Model.TPPP_PSP):
        return batch_tppp(params, n, window_radius, rng)
    if model is Model.PPP1D:
        return _batch_ppp(params, n, window_radius, rng, 1, params.m * params.lam / 2.0)
    return _batch_ppp(params, n, window_radius, rng, 2, validate(params).lambda2)


# ----------------------------------------------------------------------------
# Single-realization samplers
# ----------------------------------------------------------------------------


def _typical_street_objects(params, batch):
    m = params.m
    if batch.sticks is not None and batch.sticks.get("typical") is not None:
        out = []
        for k, (h, w) in enumerate(batch.sticks["typical"]):
            orient = 0.0 if k == 0 else math.pi / 2
            mid = (-w[0], 0.0) if k == 0 else (0.0, -w[0])
            out.append(Stick(mid, orient, float(h[0])))
        return out
    # line along x-axis has phi = pi/2, t = 0; along y-axis phi = 0
    return [Line(0.0, math.pi / 2), Line(0.0, 0.0)][: m // 2]


def _single(batch, params, rng):
    marks = sample_marks(rng, len(batch.xy), params.shadow_sigma)
    pattern = PointPattern(batch.xy, marks, batch.on_typical)
    others = []
    if batch.lines is not None:
        others = [Line(float(t), float(f)) for t, f in zip(batch.lines["t"], batch.lines["phi"])]
    elif batch.sticks is not None and "cx" in batch.sticks:
        st = batch.sticks
        others = [
            Stick((float(x), float(y)), float(o), float(h))
            for x, y, o, h in zip(st["cx"], st["cy"], st["orientation"], st["h"])
        ]
    streets = StreetSystem(_typical_street_objects(params, batch), others, batch.window_radius)
    return streets, pattern


def sample_plp_ppp(params: NetworkParams, window_radius=None, rng_seed=None):
    validate(params)
    R = default_window_radius(params) if window_radius is None else window_radius
    rng = _rng(rng_seed)
    return _single(batch_plp_ppp(params, 1, R, rng), params, rng)


def sample_psp_ppp(params: NetworkParams, window_radius=None, rng_seed=None):
    validate(params)
    R = default_window_radius(params) if window_radius is None else window_radius
    rng = _rng(rng_seed)
    return _single(batch_psp_ppp(params, 1, R, rng), params, rng)


def sample_tppp(params: NetworkParams, window_radius=None, rng_seed=None) -> PointPattern:
    validate(params)
    R = default_window_radius(params) if window_radius is None else window_radius
    rng = _rng(rng_seed)
    return _single(batch_tppp(params, 1, R, rng), params, rng)[1]


def write_pattern_csv(pattern: PointPattern, path):
    """One row per point: x, y, on_typical_street, shadow_mark."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "on_typical_street", "shadow_mark"])
        for (x, y), flag, mk in zip(pattern.xy, pattern.on_typical_street, pattern.shadow_mark):
            w.writerow([repr(float(x)), repr(float(y)), int(bool(flag)), repr(float(mk))])


# ----------------------------------------------------------------------------
# Nearest-neighbour distance distributions
# ----------------------------------------------------------------------------


def stick_disk_overlap(r, gamma, psi, h):
    """Length of the stick ``[-h, h]`` lying inside ``b(o, r)``.

    The stick's midpoint is at distance ``gamma`` from the origin and ``psi`` is
    the angle between the midpoint direction and the stick.  Along the stick,
    the disk occupies ``[-gamma cos psi - w, -gamma cos psi + w]`` with
    ``w = sqrt(r^2 - gamma^2 sin^2 psi)``; the two endpoint magnitudes are the
    ``u_1``, ``u_2`` terms.
    """
    r, gamma, psi, h = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, gamma, psi, h)))
    c = gamma * np.cos(psi)
    perp2 = (gamma * np.sin(psi)) ** 2
    w = np.sqrt(np.maximum(r * r - perp2, 0.0))
    lo = np.maximum(-c - w, -h)
    hi = np.minimum(-c + w, h)
    return np.where(perp2 < r * r, np.maximum(hi - lo, 0.0), 0.0)


def _h_nodes(hl, n=48):
    """Nodes/weights for E[g(H)] under f_H, via the quantile transform."""
    if isinstance(hl, Deterministic):
        return np.array([hl.h]), np.array([1.0])
    x, w = leggauss(n)
    u = 0.5 * (x + 1.0)
    return hl.quantile(u), 0.5 * w


def _psp_typical_nnd_factor(params, r, n=48):
    """``E`` over the length-biased typical stick of ``exp(-lam * overlap)``."""
    hl = params.street_model.half_length
    hs, wh = _h_nodes(hl, n)
    # switch f_H weights to the length-biased density
    wh = wh * hs / hl.mean
    xg, wg = leggauss(n)
    total = 0.0
    for h, wt in zip(hs, wh):
        # origin at distance gamma from the midpoint, uniform on [0, h]
        g = 0.5 * h * (xg + 1.0)
        ov = stick_disk_overlap(r, g, 0.0, h)
        total += wt * np.sum(0.5 * wg * np.exp(-params.lam * ov))
    return total


def _psp_other_nnd_exponent(params, r, n=40):
    """``mu * E_H[ int_0^{2pi} int_0^{r+h} gamma (1 - exp(-lam l)) dgamma dpsi ]``."""
    hl = params.street_model.half_length
    hs, wh = _h_nodes(hl, n)
    xg, wg = leggauss(n)
    # psi in [0, pi/2] suffices by symmetry (factor 4)
    psi = 0.25 * math.pi * (xg + 1.0)
    wpsi = 0.25 * math.pi * wg
    total = 0.0
    for h, wt in zip(hs, wh):
        top = r + h
        # split gamma at r (overlap has a kink there)
        parts = [(0.0, min(r, top)), (min(r, top), top)]
        for a, b in parts:
            if b <= a:
                continue
            g = 0.5 * (b - a) * (xg + 1.0) + a
            wgam = 0.5 * (b - a) * wg
            ov = stick_disk_overlap(r, g[:, None], psi[None, :], h)
            vals = g[:, None] * (1.0 - np.exp(-params.lam * ov))
            total += wt * 4.0 * np.sum(wgam[:, None] * wpsi[None, :] * vals)
    return params.mu * total


def nnd_cdf(model, params: NetworkParams, r, *, intensity=None):
    """Nearest-neighbour distance CDF seen from the typical vehicle.

    ``PPP1D``/``PPP2D`` default to intensities ``m lam / 2`` and ``lam tau``
    (override with ``intensity``).
    """
    model = resolve_model(model, params)
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    lam, mu, m = params.lam, params.mu, params.m
    out = np.zeros_like(r_arr)
    for i, rv in enumerate(r_arr):
        if rv <= 0:
            out[i] = 0.0
            continue
        if model is Model.PPP1D:
            lam1 = m * lam / 2.0 if intensity is None else intensity
            out[i] = -math.expm1(-2.0 * lam1 * rv)
        elif model is Model.PPP2D:
            lam2 = validate(params).lambda2 if intensity is None else intensity
            out[i] = -math.expm1(-math.pi * lam2 * rv * rv)
        elif model is Model.TPPP_PLP:
            out[i] = -math.expm1(-lam * m * rv - lam * mu * math.pi * rv * rv)
        elif model is Model.PLP_PPP:
            x, w = leggauss(64)
            # u = r sin(phi) removes the square-root endpoint behaviour
            ph = 0.25 * math.pi * (x + 1.0)
            wp = 0.25 * math.pi * w
            integ = np.sum(wp * rv * np.cos(ph) * -np.expm1(-2.0 * lam * rv * np.cos(ph)))
            out[i] = -math.expm1(-lam * m * rv - 2.0 * mu * integ)
        elif model is Model.PSP_PPP:
            typ = _psp_typical_nnd_factor(params, rv) ** (m // 2)
            out[i] = 1.0 - typ * math.exp(-_psp_other_nnd_exponent(params, rv))
        elif model is Model.TPPP_PSP:
            typ = _psp_typical_nnd_factor(params, rv) ** (m // 2)
            out[i] = 1.0 - typ * math.exp(-validate(params).lambda2 * math.pi * rv * rv)
    return out[0] if np.ndim(r) == 0 else out


def pcf_plp_ppp(mu, r):
    """Pair correlation of the PLP-PPP, ``1 + 1/(mu r)``."""
    r = np.asarray(r, dtype=float)
    return 1.0 + 1.0 / (mu * r)


def nn_distance_moments(model, params: NetworkParams, n_max: int, n_realizations: int,
                        rng_seed=0, *, chunk: int = 500):
    """Empirical ``E[r_n^2] / n`` for ``n = 1..n_max`` with standard errors.

    The window is sized so that the expected number of points inside it is
    several times ``n_max``; realizations with fewer than ``n_max`` points are
    redrawn in a larger window.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    model = resolve_model(model, params)
    tau = validate(params).tau
    lam = params.lam
    target = 3.0 * n_max + 30.0
    # solve lam m R + lam tau pi R^2 = target for R
    a, b = lam * tau * math.pi, lam * params.m
    R = (-b + math.sqrt(b * b + 4 * a * target)) / (2 * a) if a > 0 else target / b
    ss = np.random.SeedSequence(rng_seed)
    rows = []
    done = 0
    for child in ss.spawn((n_realizations + chunk - 1) // chunk):
        k = min(chunk, n_realizations - done)
        rng = np.random.default_rng(child)
        Rk = R
        pending = np.arange(k)
        got = np.empty((k, n_max))
        while len(pending):
            batch = batch_sample(model, params, len(pending), Rk, rng)
            d2 = np.sum(batch.xy**2, axis=1)
            counts = np.bincount(batch.owner, minlength=batch.n)
            starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
            ok = counts >= n_max
            for j in np.flatnonzero(ok):
                seg = np.sort(d2[starts[j]: starts[j] + counts[j]])[:n_max]
                got[pending[j]] = seg
            pending = pending[~ok]
            Rk *= 1.5
        rows.append(got)
        done += k
    r2 = np.concatenate(rows)
    n = np.arange(1, n_max + 1)
    vals = r2 / n
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(len(vals))
    return {"n": n, "mean": mean, "stderr": se}
