"""
Choosing the ALOHA probability for a target reliability
=======================================================

For a success-probability target the TPPP gives lambda p = const.  For a
target fraction of reliable links the product is not constant, and the pairs
chosen with the TPPP beta fit are checked against the exact PLP-PPP meta
distribution.
"""

# %%
import numpy as np

from tppp.congestion import ContourRequest, contour_md, contour_success, validate_against_exact
from tppp.model import NetworkParams

prm = NetworkParams(mu=1.0, theta=1.0, d_link=0.25, alpha=4.0)
lams = (0.5, 1.0, 2.0, 5.0)

# %%
for pt in contour_success(ContourRequest(0.9, lams, prm)):
    print(f"success target: 1/lambda={pt.inv_lambda:5.2f}  p={pt.p:.4f}  lambda p={pt.lam * pt.p:.4f}")

# %%
for x in (0.1, 0.5, 0.9):
    pts = contour_md(ContourRequest(0.9, lams, prm, x))
    lp = np.array([pt.lam * pt.p for pt in pts])
    print(f"x={x}: p = {np.round([pt.p for pt in pts], 4)}, lambda p spread {np.ptp(lp) / lp.mean():.2f}")

# %% Check two pairs against the exact PLP-PPP meta distribution (slow: ~15 s each)
for row in validate_against_exact(contour_md(ContourRequest(0.9, (1.0, 5.0), prm, 0.5)), prm, 0.5, target_q=0.9):
    print(f"lambda={row['lambda']}: exact PLP-PPP MD {row['md_plp']:.4f} (deviation {row['deviation_plp']:+.4f})")
