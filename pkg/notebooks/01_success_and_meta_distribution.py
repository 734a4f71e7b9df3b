"""
Success probability and meta distribution of a vehicular link
=============================================================

Vehicles sit on a Poisson line process of streets.  The receiver at the
origin listens to a transmitter at distance D; everybody else transmits with
probability p.  Run with ``python3 notebooks/01_success_and_meta_distribution.py``.
"""

# %%
import numpy as np

from tppp.analytic import success_prob
from tppp.metadist import md_beta, md_exact_curve
from tppp.model import Model, NetworkParams
from tppp.montecarlo import SimConfig, estimate_md

prm = NetworkParams(lam=1.0, mu=1.0, p=0.3, theta=1.0, d_link=0.25, alpha=4.0)

# %% Success probability against the threshold.  The TPPP replaces every
# street except the receiver's own by a 2D PPP and is a lower bound.
print(f"{'theta dB':>9} {'PLP-PPP':>9} {'TPPP':>9} {'1D PPP':>9} {'2D PPP':>9}")
for tdb in (-20, -10, 0, 10, 20):
    q = prm.with_(theta_db=tdb)
    vals = [success_prob(m, q) for m in (Model.PLP_PPP, Model.TPPP, Model.PPP1D, Model.PPP2D)]
    print(f"{tdb:>9} " + " ".join(f"{v:9.4f}" for v in vals))

# %% Meta distribution at 0 dB: exact (moment inversion), beta fit, simulation
xs = np.round(np.arange(0.1, 0.951, 0.1), 10)
exact = md_exact_curve(Model.PLP_PPP, prm, xs)
beta = md_beta(Model.TPPP, prm, xs)
emp = estimate_md(Model.PLP_PPP, prm, SimConfig(20_000, seed=1, x_grid=tuple(xs)))
print(f"\n{'x':>5} {'exact':>8} {'beta':>8} {'simulated':>10}")
for row in zip(xs, exact, beta, emp.md):
    print("{:5.2f} {:8.4f} {:8.4f} {:10.4f}".format(*row))

# %% At low thresholds a single close interferer caps P near 1 - p, so the
# meta distribution steps down at x = 0.7.  The beta fit smooths the step out.
low = prm.with_(theta_db=-20.0)
xs = np.array([0.6, 0.65, 0.7, 0.75, 0.8])
print("\n-20 dB exact:", np.round(md_exact_curve(Model.TPPP, low, xs), 4))
print("-20 dB beta: ", np.round(md_beta(Model.TPPP, low, xs), 4))
