"""Command-line front end.

Each command reads one JSON config, writes CSV/JSON results into the output
directory and a ``<command>_manifest.json`` next to them.  Passing a manifest
instead of a config re-runs it with the recorded config and seed.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (
    asymptote_theta0,
    asymptote_theta_inf,
    success_prob,
    success_prob_plp_ppp,
    success_prob_tppp,
)
from .congestion import (
    ContourRequest,
    contour,
    success_range_along_md_contour,
    validate_against_exact,
    write_contour_csv,
)
from .geometry import nn_distance_moments
from .metadist import md_beta, md_exact_curve
from .model import Model, ParameterError, db_to_linear, params_from_dict, params_to_dict
from .montecarlo import SimConfig, estimate_md, simulate_cond_success, write_raw_csv
from .numerics import NoConvergence, brent_root

log = logging.getLogger("tppp")

OUT_ENV = "TPPP_OUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    version: str = __version__
    duration_s: float = 0.0
    outputs: dict = field(default_factory=dict)
    status: str = "ok"
    notes: dict = field(default_factory=dict)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return v


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _grid(spec, name):
    """A list, a scalar, or ``{"start", "stop", "num"}`` (optionally ``"log": true``)."""
    if spec is None:
        raise ConfigError(f"missing {name}")
    if isinstance(spec, (int, float)):
        return [float(spec)]
    if isinstance(spec, list):
        return [float(v) for v in spec]
    if isinstance(spec, dict):
        try:
            start, stop, num = float(spec["start"]), float(spec["stop"]), int(spec["num"])
        except KeyError as exc:
            raise ConfigError(f"{name} needs start, stop and num") from exc
        if spec.get("log"):
            return list(np.geomspace(start, stop, num))
        return list(np.linspace(start, stop, num))
    raise ConfigError(f"cannot read grid {name}")


def _params(cfg):
    return params_from_dict(cfg.get("params", {}))


def _theta_db_grid(cfg):
    if "theta_db" in cfg:
        return _grid(cfg["theta_db"], "theta_db")
    return [0.0]


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------

_SUCCESS_EXTRA = ("ASYMPTOTE_THETA0", "ASYMPTOTE_THETA_INF")


def cmd_success(cfg, args, manifest):
    """Success probability per threshold and model."""
    prm = _params(cfg)
    models = cfg.get("models", ["PLP_PPP", "TPPP", "PPP1D", "PPP2D"])
    tol = float(cfg.get("tol", 1e-6))
    rows = []
    for tdb in _theta_db_grid(cfg):
        q = prm.with_(theta=float(db_to_linear(tdb)))
        for name in models:
            if name == "ASYMPTOTE_THETA0":
                val = 1.0 - asymptote_theta0(q, q.theta)
            elif name == "ASYMPTOTE_THETA_INF":
                val = asymptote_theta_inf(q, q.theta)
            else:
                val = success_prob(Model(name), q, tol)
            rows.append((tdb, q.theta, name, val))
    out = Path(args.out) / "success.csv"
    _write_csv(out, ["theta_db", "theta", "model", "success_prob"], rows)
    manifest.notes["timing"] = _timing_note(prm)
    return [out]


def _timing_note(prm):
    """Per-call cost of the closed-form TPPP value against the PLP quadrature."""
    reps = 20000
    t0 = time.perf_counter()
    for _ in range(reps):
        success_prob_tppp(prm)
    closed = (time.perf_counter() - t0) / reps
    t0 = time.perf_counter()
    success_prob_plp_ppp(prm, 1e-6)
    quad = time.perf_counter() - t0
    return {"tppp_closed_form_s": closed, "plp_quadrature_s": quad, "ratio": quad / closed}


def cmd_metadist(cfg, args, manifest):
    """MD versus x at fixed thresholds (or versus threshold at fixed x)."""
    prm = _params(cfg)
    models = cfg.get("models", ["TPPP"])
    methods = cfg.get("methods", ["exact", "beta"])
    xs = _grid(cfg.get("x", [0.6, 0.95]), "x")
    tol = float(cfg.get("tol", 1e-4))
    n_sim = int(cfg.get("n_realizations", 10_000))
    rows = []
    for tdb in _theta_db_grid(cfg):
        q = prm.with_(theta=float(db_to_linear(tdb)))
        for name in models:
            model = Model(name)
            for method in methods:
                if method == "exact":
                    vals = md_exact_curve(model, q, xs, tol)
                    ses = np.zeros(len(xs))
                elif method == "beta":
                    sim = SimConfig(n_sim, args.seed, threads=args.threads)
                    vals = np.atleast_1d(md_beta(model, q, xs, sim=sim))
                    ses = np.zeros(len(xs))
                elif method == "empirical":
                    e = estimate_md(model, q, SimConfig(n_sim, args.seed, x_grid=tuple(xs), threads=args.threads))
                    vals, ses = e.md, e.stderr
                else:
                    raise ConfigError(f"unknown method {method!r}")
                for x, v, se in zip(xs, vals, ses):
                    rows.append((name, tdb, x, method, v, se))
    out = Path(args.out) / "metadist.csv"
    _write_csv(out, ["model", "theta_db", "x", "method", "md", "stderr"], rows)
    outs = [out]
    inv = cfg.get("inverse")
    if inv:
        outs.append(_inverse_sweep(prm, inv, args))
    return outs


def _inverse_sweep(prm, inv, args):
    """Threshold (dB) at which the exact MD at ``x`` equals ``target``."""
    x = float(inv["x"])
    target = float(inv["target"])
    lo, hi = (float(v) for v in inv.get("theta_db_bracket", [-40.0, 10.0]))
    res = {}
    for name in inv.get("models", ["TPPP"]):
        model = Model(name)
        f = lambda tdb: md_exact_curve(model, prm.with_(theta=float(db_to_linear(tdb))), [x])[0] - target
        res[name] = brent_root(f, lo, hi, float(inv.get("tol_db", 1e-3)))
    out = Path(args.out) / "metadist_inverse.json"
    with open(out, "w") as fh:
        json.dump({"x": x, "target": target, "theta_db": res}, fh, indent=2)
    return out


def cmd_simulate(cfg, args, manifest):
    """Empirical MD, success probability, raw P values and NN distance moments."""
    prm = _params(cfg)
    model = Model(cfg.get("model", "PLP_PPP"))
    n = int(cfg.get("n_realizations", 10_000))
    xs = tuple(_grid(cfg.get("x_grid", list(np.round(np.arange(0.05, 0.951, 0.05), 10))), "x_grid"))
    wanted = cfg.get("outputs", ["md", "success"])
    overrides = cfg.get("overrides", [{}])
    outs = []
    md_rows, sp_rows, raw_all = [], [], []
    for k, ov in enumerate(overrides):
        q = params_from_dict({**params_to_dict(prm), **ov})
        sim = SimConfig(n, args.seed, cfg.get("window_radius"), xs, False, threads=args.threads)
        P = simulate_cond_success(model, q, sim)
        if "md" in wanted:
            for x in xs:
                m = float(np.mean(P > x))
                md_rows.append((k, x, m, math.sqrt(m * (1 - m) / n)))
        if "success" in wanted:
            sp_rows.append((k, q.lam, q.p, P.mean(), P.std(ddof=1) / math.sqrt(n), P.var(ddof=1)))
        if "raw" in wanted:
            raw_all.append(P)
    if md_rows:
        outs.append(Path(args.out) / "simulate_md.csv")
        _write_csv(outs[-1], ["set", "x", "md", "stderr"], md_rows)
    if sp_rows:
        outs.append(Path(args.out) / "simulate_success.csv")
        _write_csv(outs[-1], ["set", "lambda", "p", "mean", "stderr", "variance"], sp_rows)
    if raw_all:
        for k, P in enumerate(raw_all):
            outs.append(Path(args.out) / f"simulate_raw_{k}.csv")
            write_raw_csv(P, outs[-1])
    if "nnd" in wanted:
        n_max = int(cfg.get("n_max", 40))
        rows = []
        for name in cfg.get("nnd_models", [model.value]):
            t = nn_distance_moments(Model(name), prm, n_max, int(cfg.get("nnd_realizations", n)), args.seed)
            rows += [(name, int(i), m, s) for i, m, s in zip(t["n"], t["mean"], t["stderr"])]
        outs.append(Path(args.out) / "simulate_nnd.csv")
        _write_csv(outs[-1], ["model", "n", "mean_rn2_over_n", "stderr"], rows)
    return outs


def _lambda_grid(cfg):
    if "lambda_grid" in cfg:
        return sorted(_grid(cfg["lambda_grid"], "lambda_grid"))
    if "inv_lambda_grid" in cfg:
        return sorted(1.0 / v for v in _grid(cfg["inv_lambda_grid"], "inv_lambda_grid"))
    raise ConfigError("contour needs lambda_grid or inv_lambda_grid")


def cmd_contour(cfg, args, manifest):
    """``(lam, p)`` contours, their success-probability range and exact-MD validation."""
    prm = _params(cfg)
    req = ContourRequest(float(cfg["target_q"]), tuple(_lambda_grid(cfg)), prm, cfg.get("reliability_x"))
    pts = contour(req)
    out = Path(args.out) / "contour.csv"
    write_contour_csv(pts, out)
    outs = [out]
    feasible = [pt for pt in pts if pt.feasible]
    summary = {"n_points": len(pts), "n_feasible": len(feasible)}
    if feasible:
        lo, hi = success_range_along_md_contour(req)
        summary["success_prob_range"] = [lo, hi]
        lp = [pt.lam * pt.p for pt in feasible]
        summary["lambda_p_spread"] = (max(lp) - min(lp)) / min(lp) if min(lp) > 0 else None
    val = cfg.get("validate")
    if val and req.reliability_x is not None and feasible:
        k = int(val.get("max_pairs", len(feasible)))
        idx = np.unique(np.linspace(0, len(feasible) - 1, k).round().astype(int))
        sim = SimConfig(int(val.get("n_realizations", 10_000)), args.seed, threads=args.threads)
        rows = validate_against_exact([feasible[i] for i in idx], prm, req.reliability_x,
                                      method=val.get("method", "exact"), sim=sim, target_q=req.target_q)
        vout = Path(args.out) / "contour_validation.csv"
        header = list(rows[0])
        _write_csv(vout, header, [[r[h] for h in header] for r in rows])
        outs.append(vout)
        summary["max_abs_deviation_plp"] = max(abs(r["deviation_plp"]) for r in rows)
    sout = Path(args.out) / "contour_summary.json"
    with open(sout, "w") as fh:
        json.dump(summary, fh, indent=2)
    outs.append(sout)
    return outs


def maxgap_scan(mu, alpha, lp_grid, y_grid, m=2, refine=True):
    """Scan ``p_PLP - p_TPPP`` over ``(lam p, D^2 theta^delta)``.

    Both success probabilities depend on ``lam`` and ``p`` only through
    ``lam p`` and on ``D`` and ``theta`` only through ``D^2 theta^delta``;
    the scan fixes ``theta = 1`` and ``p = 1/2``.
    """
    from .model import NetworkParams

    def gap(lp, y):
        prm = NetworkParams(lam=2.0 * lp, mu=mu, p=0.5, theta=1.0, d_link=math.sqrt(y), alpha=alpha, m=m)
        return success_prob_plp_ppp(prm) - success_prob_tppp(prm)

    table = np.array([[gap(lp, y) for y in y_grid] for lp in lp_grid])
    i, j = np.unravel_index(np.argmax(table), table.shape)
    best = (float(lp_grid[i]), float(y_grid[j]), float(table[i, j]))
    if refine and table.size > 1:
        from scipy.optimize import minimize

        res = minimize(lambda z: -gap(math.exp(z[0]), math.exp(z[1])),
                       [math.log(best[0]), math.log(best[1])], method="Nelder-Mead",
                       options={"xatol": 1e-4, "fatol": 1e-7})
        if -res.fun > best[2]:
            best = (math.exp(res.x[0]), math.exp(res.x[1]), float(-res.fun))
    return table, best


def cmd_maxgap(cfg, args, manifest):
    """Largest success-probability gap between the PLP-PPP and its TPPP."""
    prm = _params(cfg)
    lp_grid = _grid(cfg.get("lambda_p", {"start": 0.01, "stop": 1.0, "num": 25, "log": True}), "lambda_p")
    y_grid = _grid(cfg.get("d2_theta_delta", {"start": 0.1, "stop": 100.0, "num": 25, "log": True}), "d2_theta_delta")
    table, (lp, y, g) = maxgap_scan(prm.mu, prm.alpha, lp_grid, y_grid, prm.m, cfg.get("refine", True))
    grid_out = Path(args.out) / "maxgap_grid.csv"
    _write_csv(grid_out, ["lambda_p", "d2_theta_delta", "gap"],
               [(a, b, table[i, j]) for i, a in enumerate(lp_grid) for j, b in enumerate(y_grid)])
    out = Path(args.out) / "maxgap.json"
    with open(out, "w") as fh:
        json.dump({"mu": prm.mu, "alpha": prm.alpha, "m": prm.m, "max_gap": g,
                   "lambda_p": lp, "d2_theta_delta": y}, fh, indent=2)
    return [out, grid_out]


COMMANDS = {
    "success": cmd_success,
    "metadist": cmd_metadist,
    "simulate": cmd_simulate,
    "contour": cmd_contour,
    "maxgap": cmd_maxgap,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default: config 'seed' or 0)")
    common.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ENV} or .)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for simulations")
    common.add_argument("-v", "--verbose", action="count", default=0)
    parser = argparse.ArgumentParser(prog="tppp", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0], parents=[common])
        p.add_argument("config", help="JSON config (or a manifest from an earlier run)")
    return parser


def _load_config(path):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    if "command" in obj and "config" in obj and "seed" in obj:
        return obj["config"], obj["seed"], obj["command"]
    return obj, obj.get("seed"), None


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    out_dir = Path(args.out or os.environ.get(OUT_ENV, "."))
    err_report = {"command": args.command}
    try:
        cfg, cfg_seed, recorded = _load_config(args.config)
        if recorded is not None and recorded != args.command:
            raise ConfigError(f"manifest is for '{recorded}', not '{args.command}'")
        seed = args.seed if args.seed is not None else int(cfg_seed or 0)
        args.seed = seed
        args.out = str(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(args.command, cfg, seed)
        t0 = time.perf_counter()
        try:
            outs = COMMANDS[args.command](cfg, args, manifest)
        except NoConvergence as exc:
            manifest.status = "partial"
            manifest.notes["error"] = str(exc)
            manifest.notes["partial"] = None if exc.partial is None else repr(exc.partial)
            outs = [p for p in out_dir.glob(f"{args.command}*") if p.suffix in (".csv", ".json")
                    and not p.name.endswith("_manifest.json")]
            _finish(manifest, outs, t0, out_dir)
            print(json.dumps({"error": "NoConvergence", "message": str(exc)}), file=sys.stderr)
            return EXIT_NUMERIC
        _finish(manifest, outs, t0, out_dir)
    except (ConfigError, ParameterError, KeyError, TypeError, ValueError) as exc:
        err_report.update(error=type(exc).__name__, message=str(exc))
        if isinstance(exc, ParameterError):
            err_report["violations"] = exc.violations
        print(json.dumps(err_report), file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def _finish(manifest, outs, t0, out_dir):
    manifest.duration_s = time.perf_counter() - t0
    manifest.outputs = {Path(p).name: _sha256(p) for p in outs}
    path = out_dir / f"{manifest.command}_manifest.json"
    with open(path, "w") as fh:
        json.dump(asdict(manifest), fh, indent=2, default=_json_default)
    log.info("wrote %s", path)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
