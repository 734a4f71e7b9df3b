import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tppp.analytic import success_prob
from tppp.metadist import (
    BetaParams,
    InfeasibleMoments,
    beta_from_moments,
    md_beta,
    md_exact,
    md_exact_curve,
    model_moments,
)
from tppp.model import PSP, Model, NetworkParams, Rayleigh
from tppp.montecarlo import SimConfig, estimate_md

BASE = NetworkParams(lam=1.0, mu=1.0, p=0.3, theta=1.0, d_link=0.25, alpha=4.0)
XS = np.round(np.arange(0.05, 0.951, 0.05), 10)


def test_beta_from_moments_symmetric_case():
    bp = beta_from_moments(0.5, 0.3)
    assert bp.alpha_shape == pytest.approx(bp.beta_shape, rel=1e-14)
    assert bp.alpha_shape == pytest.approx(2.0, rel=1e-14)
    assert bp.second_moment == pytest.approx(0.3, rel=1e-14)


@given(m1=st.floats(0.01, 0.99), frac=st.floats(0.01, 0.99))
@settings(max_examples=100)
def test_beta_back_substitution(m1, frac):
    m2 = m1 * m1 + frac * (m1 - m1 * m1)
    bp = beta_from_moments(m1, m2)
    assert bp.mean == pytest.approx(m1, abs=1e-12)
    assert bp.second_moment == pytest.approx(m2, abs=1e-12)


@pytest.mark.parametrize("m1, m2", [(0.5, 0.25), (0.5, 0.5), (0.0, 0.0), (1.0, 1.0), (0.4, 0.1)])
def test_beta_from_moments_infeasible(m1, m2):
    with pytest.raises(InfeasibleMoments):
        beta_from_moments(m1, m2)
    with pytest.raises(InfeasibleMoments):
        BetaParams(0.0, 1.0)


def test_md_beta_endpoints_and_monotone():
    assert md_beta(Model.TPPP, BASE, 0.0) == 1.0
    assert md_beta(Model.TPPP, BASE, 1.0) == 0.0
    v = md_beta(Model.PLP_PPP, BASE, np.linspace(0, 1, 101))
    assert np.all(np.diff(v) <= 0)


def test_md_beta_degenerate_fallback():
    v = md_beta(Model.TPPP, BASE, [0.3, 0.7], moments=(0.5, 0.25))
    assert list(v) == [1.0, 0.0]


def test_psp_moments_by_simulation():
    prm = BASE.with_(street_model=PSP(Rayleigh(1.0)))
    m1, m2 = model_moments(Model.PSP_PPP, prm, sim=SimConfig(20_000, seed=2))
    assert m1 == pytest.approx(success_prob(Model.PSP_PPP, prm))
    assert m1 * m1 < m2 < m1
    with pytest.raises(NotImplementedError):
        md_exact(Model.PSP_PPP, prm, 0.5)


@pytest.mark.parametrize("model", [Model.TPPP, Model.PLP_PPP, Model.PPP1D, Model.PPP2D])
def test_md_exact_empty_network(model):
    assert np.all(md_exact_curve(model, BASE.with_(lam=0.0, mu=0.0), [0.1, 0.5, 0.99]) == 1.0)


def test_md_exact_monotone_and_in_range():
    v = md_exact_curve(Model.TPPP, BASE, XS)
    assert np.all((v >= 0) & (v <= 1))
    assert np.all(np.diff(v) <= 1e-4)


@pytest.mark.parametrize("theta_db", [-10.0, 10.0])
def test_md_exact_routes_agree_away_from_kinks(theta_db):
    prm = BASE.with_(theta_db=theta_db)
    xs = [0.2, 0.5, 0.8, 0.95]
    a = md_exact_curve(Model.TPPP, prm, xs, 1e-6, method="gil-pelaez")
    b = md_exact_curve(Model.TPPP, prm, xs, method="laplace")
    assert np.max(np.abs(a - b)) < 2e-3


def test_survival_integrates_to_first_moment():
    # E[P] = int_0^1 P(P > x) dx.  Gauss-Legendre on [0.01, 0.7] and
    # [0.7, 0.99] (split at the kink x = 1 - p); the two end strips are
    # bracketed by monotonicity of the survival function.
    u, w = np.polynomial.legendre.leggauss(32)
    total = 0.0
    for lo, hi in ((0.01, 0.7), (0.7, 0.99)):
        x = 0.5 * (hi - lo) * u + 0.5 * (hi + lo)
        total += 0.5 * (hi - lo) * np.dot(w, md_exact_curve(Model.TPPP, BASE, x, 1e-6))
    lo_end, hi_end = md_exact_curve(Model.TPPP, BASE, [0.01, 0.99], 1e-6)
    m1 = success_prob(Model.TPPP, BASE)
    assert total + 0.01 * lo_end - 2e-4 <= m1 <= total + 0.01 + 0.01 * hi_end + 2e-4


def test_tppp_md_matches_monte_carlo():
    emp = estimate_md(Model.TPPP, BASE, SimConfig(100_000, seed=4, x_grid=(0.6,)))
    assert abs(md_exact(Model.TPPP, BASE, 0.6) - emp.md[0]) < 0.02


def test_ppp2d_md_matches_monte_carlo():
    prm = BASE.with_(mu=2.0)
    xs = (0.3, 0.6, 0.9)
    emp = estimate_md(Model.PPP2D, prm, SimConfig(100_000, seed=5, x_grid=xs))
    assert emp.sup_gap(md_exact_curve(Model.PPP2D, prm, xs)) < 0.02


@pytest.mark.slow
def test_plp_md_matches_monte_carlo_and_dominates_tppp():
    xs = (0.3, 0.6, 0.8, 0.95)
    exact = md_exact_curve(Model.PLP_PPP, BASE, xs)
    emp = estimate_md(Model.PLP_PPP, BASE, SimConfig(100_000, seed=6, x_grid=xs))
    assert np.all(np.abs(exact - emp.md) < 3 * emp.stderr + 2e-3)
    assert np.all(exact >= md_exact_curve(Model.TPPP, BASE, xs) - 0.05)


def test_beta_tight_at_high_threshold():
    prm = BASE.with_(theta_db=10.0)
    assert np.max(np.abs(md_beta(Model.TPPP, prm, XS) - md_exact_curve(Model.TPPP, prm, XS))) < 0.05


def test_beta_gap_peaks_near_transition_at_low_threshold():
    # the smooth beta fit overshoots just above the step at x = 1 - p
    prm = BASE.with_(theta_db=-20.0)
    xs = np.round(np.arange(0.05, 0.951, 0.025), 10)
    gap = np.abs(md_beta(Model.TPPP, prm, xs) - md_exact_curve(Model.TPPP, prm, xs))
    assert abs(xs[np.argmax(gap)] - (1 - prm.p)) <= 0.1
    assert gap[xs < 0.5].max() < 0.25 * gap.max()


@pytest.mark.parametrize("model", [Model.TPPP, Model.PPP2D])
@pytest.mark.parametrize("theta_db", [-10.0, 0.0, 10.0])
def test_beta_and_exact_agree_near_zero(model, theta_db):
    prm = BASE.with_(theta_db=theta_db)
    assert abs(md_beta(model, prm, 1e-3) - md_exact(model, prm, 1e-3)) < 1e-3


@pytest.mark.slow
def test_beta_and_exact_agree_near_one_at_high_threshold():
    # at 0 dB and below the x = 0.999 gap is still 0.003 to 0.27; the
    # agreement near x = 1 is a limit that Gil-Pelaez cannot reach cheaply
    prm = BASE.with_(theta_db=10.0)
    assert abs(md_beta(Model.PPP2D, prm, 0.999) - md_exact(Model.PPP2D, prm, 0.999)) < 1e-3


def test_laplace_route_rejects_points_near_one():
    with pytest.raises(ValueError):
        md_exact(Model.TPPP, BASE, 0.999, method="laplace")
