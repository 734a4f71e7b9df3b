"""Transmit-rate control: ``(lam, p)`` pairs that meet a reliability target.

Contours are solved for the PLP-based TPPP, either for a success-probability
target (closed form) or for a meta-distribution target through the beta
approximation.  The exact PLP-PPP meta distribution is used only to check the
chosen pairs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .analytic import success_prob_tppp, tppp_outage_constant
from .metadist import md_beta, md_exact
from .model import Model, NetworkParams, validate
from .numerics import NoSignChange, brent_root

__all__ = [
    "ContourRequest",
    "ContourPoint",
    "contour_success",
    "contour_md",
    "contour",
    "validate_against_exact",
    "success_range_along_md_contour",
    "second_differences",
    "write_contour_csv",
]

P_FLOOR = 1e-9


@dataclass(frozen=True)
class ContourRequest:
    target_q: float
    lambda_grid: tuple
    params: NetworkParams = NetworkParams()
    reliability_x: float | None = None

    def __post_init__(self):
        if not 0 < self.target_q <= 1:
            raise ValueError("target_q must lie in (0, 1]")
        g = np.asarray(self.lambda_grid, dtype=float)
        if g.ndim != 1 or len(g) and (np.any(g <= 0) or np.any(np.diff(g) <= 0)):
            raise ValueError("lambda_grid must be positive and strictly increasing")
        if self.reliability_x is not None and not 0 < self.reliability_x < 1:
            raise ValueError("reliability_x must lie in (0, 1)")


@dataclass(frozen=True)
class ContourPoint:
    lam: float
    p: float
    achieved_metric: float
    feasible: bool

    @property
    def inv_lambda(self) -> float:
        return 1.0 / self.lam


def contour_success(req: ContourRequest):
    """``p = -log(q) / (lam K)`` per grid point; ``p > 1`` is reported infeasible.

    Infeasible points carry ``p = 1`` and the success probability reached there.
    ``q = 1`` is only met by silence: ``p = 0``, flagged infeasible.
    """
    prm = req.params
    validate(prm)
    K = tppp_outage_constant(prm)
    out = []
    for lam in req.lambda_grid:
        if req.target_q == 1.0:
            out.append(ContourPoint(float(lam), 0.0, 1.0, False))
            continue
        p = -math.log(req.target_q) / (lam * K)
        if p <= 1.0:
            out.append(ContourPoint(float(lam), p, math.exp(-lam * p * K), True))
        else:
            out.append(ContourPoint(float(lam), 1.0, math.exp(-lam * K), False))
    return out


def _md_tppp_beta(prm, x):
    return md_beta(Model.TPPP_PLP, prm, x)


def contour_md(req: ContourRequest, *, tol: float = 1e-13):
    """Per ``lam``, the ``p`` at which the beta-approximated TPPP MD equals ``q``.

    The MD decreases in ``p``; when it still exceeds ``q`` at ``p = 1`` the
    point is infeasible in the sense that any ``p`` works, and it is reported
    at ``p = 1`` with the MD reached there.
    """
    if req.reliability_x is None:
        raise ValueError("contour_md needs reliability_x")
    x = req.reliability_x
    q = req.target_q
    out = []
    for lam in req.lambda_grid:
        base = req.params.with_(lam=float(lam))
        f = lambda p: _md_tppp_beta(base.with_(p=p), x) - q
        hi_val = f(1.0)
        try:
            p = brent_root(f, P_FLOOR, 1.0, tol)
        except NoSignChange:
            out.append(ContourPoint(float(lam), 1.0, hi_val + q, False))
            continue
        out.append(ContourPoint(float(lam), p, f(p) + q, True))
    return out


def contour(req: ContourRequest):
    return contour_success(req) if req.reliability_x is None else contour_md(req)


def validate_against_exact(pairs, params: NetworkParams, x: float, *, method: str = "exact",
                           sim=None, target_q: float | None = None):
    """Exact PLP-PPP (and TPPP) MD at each ``(lam, p)``.

    ``method="exact"`` inverts the moments; ``method="empirical"`` simulates
    with ``sim``.  Rows carry the deviation from ``target_q`` when given.
    """
    rows = []
    for pt in pairs:
        lam, p = (pt.lam, pt.p) if isinstance(pt, ContourPoint) else pt
        prm = params.with_(lam=float(lam), p=float(p))
        if method == "exact":
            plp = md_exact(Model.PLP_PPP, prm, x)
            tppp = md_exact(Model.TPPP_PLP, prm, x)
            se = 0.0
        elif method == "empirical":
            from .montecarlo import SimConfig, estimate_md

            cfg = sim or SimConfig(10_000)
            cfg = SimConfig(cfg.n_realizations, cfg.seed, cfg.window_radius, (x,), False, cfg.block_size, cfg.threads)
            e = estimate_md(Model.PLP_PPP, prm, cfg)
            plp, se = float(e.md[0]), float(e.stderr[0])
            tppp = md_exact(Model.TPPP_PLP, prm, x)
        else:
            raise ValueError(f"unknown method {method!r}")
        beta = _md_tppp_beta(prm, x)
        row = {"lambda": float(lam), "p": float(p), "x": x, "md_plp": plp, "md_plp_stderr": se,
               "md_tppp_exact": tppp, "md_tppp_beta": beta}
        if target_q is not None:
            row["deviation_plp"] = plp - target_q
            row["deviation_tppp"] = tppp - target_q
        rows.append(row)
    return rows


def success_range_along_md_contour(req: ContourRequest):
    """Min and max TPPP success probability over the feasible contour points."""
    pts = [pt for pt in contour(req) if pt.feasible]
    if not pts:
        raise ValueError("no feasible contour points")
    if req.reliability_x is None:
        return req.target_q, req.target_q
    vals = [success_prob_tppp(req.params.with_(lam=pt.lam, p=pt.p)) for pt in pts]
    return min(vals), max(vals)


def second_differences(points):
    """Second differences of ``p`` against ``1/lam`` (divided differences for uneven spacing)."""
    pts = sorted((pt for pt in points if pt.feasible), key=lambda pt: pt.inv_lambda)
    u = np.array([pt.inv_lambda for pt in pts])
    p = np.array([pt.p for pt in pts])
    if len(u) < 3:
        return np.zeros(0)
    s1 = np.diff(p) / np.diff(u)
    return 2.0 * np.diff(s1) / (u[2:] - u[:-2])


def write_contour_csv(points, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "inv_lambda", "p", "achieved_metric", "feasible"])
        for pt in points:
            w.writerow([f"{pt.lam:.17g}", f"{pt.inv_lambda:.17g}", f"{pt.p:.17g}",
                        f"{pt.achieved_metric:.17g}", int(pt.feasible)])
