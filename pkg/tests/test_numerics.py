import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tppp.numerics import (
    MaxSubdivisions,
    NoSignChange,
    adaptive_quad,
    brent_root,
    diversity_gain,
    gamma_pair,
    gil_pelaez,
    hyp2f1,
    laplace_cdf,
    reg_inc_beta,
    wynn_epsilon,
)

# frozen mpmath values (30 digits; the last one via the Euler integral)
HYP2F1_ORACLE = [
    ((1 - 30j, 0.75, 0.3), 0.04879786014482809 - 0.22629629290975145j),
    ((1 - 600j, 0.5, 0.3), 0.05946281196329043 - 0.05922163366168436j),
    ((1 - 5000j, 0.75, 0.9), 0.0007807599650461106 - 0.0018572202422285832j),
    ((-2.5 + 3j, 0.75, 1.0), 0.3000073249929011 + 0.17093620815568364j),
    ((1 - 1e5j, 0.5, 0.5), 0.003568232100276371 - 0.00356825490688566j),
]


@pytest.mark.parametrize("args, want", HYP2F1_ORACLE)
def test_hyp2f1_against_mpmath(args, want):
    a, b2, z = args
    assert abs(hyp2f1(a, b2, 2.0, z) - want) < 1e-10 * max(1.0, abs(want))


def test_hyp2f1_trivial_cases():
    assert hyp2f1(0.0, 0.3, 2.0, 0.7) == 1.0
    assert hyp2f1(-1.0, 0.5, 2.0, 0.3) == pytest.approx(0.925, abs=1e-15)
    assert hyp2f1(3 + 1j, 0.5, 2.0, 0.0) == 1.0


def test_hyp2f1_rejects_bad_arguments():
    with pytest.raises(ValueError):
        hyp2f1(1.0, 0.5, -1.0, 0.3)
    with pytest.raises(ValueError):
        hyp2f1(1.0, 0.5, 2.0, 1.5)


def test_hyp2f1_vectorized_matches_scalar():
    mpmath = pytest.importorskip("mpmath")
    a = np.array([1 - 2j, 1 - 50j, 1 - 900j])
    vec = hyp2f1(a, 0.75, 2.0, 0.4)
    for ai, v in zip(a, vec):
        # batches share one quadrature order, so agreement is to the Euler tolerance
        assert v == pytest.approx(hyp2f1(ai, 0.75, 2.0, 0.4), abs=1e-10)
        assert v == pytest.approx(complex(mpmath.hyp2f1(complex(ai), 0.75, 2, 0.4)), abs=1e-10)


@pytest.mark.parametrize("q", [0.25, 0.5])
@pytest.mark.parametrize("p", np.round(np.arange(0.1, 1.0, 0.1), 1))
def test_diversity_gain_closed_forms(p, q):
    assert abs(diversity_gain(1.0, p, q) - p) < 1e-12
    assert abs(diversity_gain(2.0, p, q) - (2 * p + (q - 1) * p * p)) < 1e-12
    assert diversity_gain(0.0, p, q) == 0


@given(p=st.floats(0.01, 1.0), q=st.floats(0.05, 0.95), t=st.floats(0.0, 500.0))
@settings(max_examples=60, deadline=None)
def test_diversity_gain_conjugate_symmetry(p, q, t):
    # real coefficients: D_{-jt} is the conjugate of D_{jt}
    assert diversity_gain(-1j * t, p, q) == pytest.approx(np.conj(diversity_gain(1j * t, p, q)), abs=1e-10)


@given(p=st.floats(0.01, 1.0), q=st.floats(0.05, 0.95), b=st.floats(0.0, 6.0))
@settings(max_examples=60, deadline=None)
def test_diversity_gain_real_order_is_expected_value(p, q, b):
    # D_b = E[1 - (1 - p g)^b] integrated against the law of g; bounded by 1 and increasing in p
    d = diversity_gain(b, p, q)
    assert abs(d.imag) < 1e-12
    assert -1e-12 <= d.real <= max(b, 1.0) + 1e-12


def test_gamma_pair():
    assert gamma_pair(0.5) == pytest.approx(math.pi / 2, rel=1e-15)
    assert gamma_pair(0.0) == 1.0
    assert gamma_pair(1e-9) == pytest.approx(1.0, abs=1e-12)
    assert gamma_pair(0.25) == pytest.approx(1.11072073453959156, rel=1e-14)


def test_adaptive_quad_basic():
    assert adaptive_quad(lambda u: np.exp(-u), 0.0, math.inf, 1e-10) == pytest.approx(1.0, abs=1e-9)
    assert adaptive_quad(lambda u: u**-0.5, 0.0, 1.0, 1e-9) == pytest.approx(2.0, abs=1e-8)
    val = adaptive_quad(lambda u: np.exp(1j * u) * np.exp(-u), 0.0, math.inf, 1e-10)
    assert val == pytest.approx(0.5 + 0.5j, abs=1e-9)


def test_adaptive_quad_reports_partial_result():
    with pytest.raises(MaxSubdivisions) as info:
        adaptive_quad(lambda u: np.sin(1.0 / u) / u, 1e-8, 1.0, 1e-14, limit=20)
    assert info.value.partial is not None


def test_wynn_epsilon_accelerates_alternating_series():
    partial = np.cumsum([(-1) ** k / (k + 1) for k in range(12)])
    assert wynn_epsilon(partial) == pytest.approx(math.log(2), abs=1e-8)


@pytest.mark.parametrize("x, want", [(0.3, 1.0), (0.8, 0.0)])
def test_gil_pelaez_point_mass(x, want):
    x0 = 0.55
    assert gil_pelaez(lambda t: x0 ** (1j * np.asarray(t)), x, 1e-5) == pytest.approx(want, abs=1e-4)


@pytest.mark.parametrize("a, b, x", [(2.0, 3.0, 0.3), (0.7, 1.5, 0.6), (5.0, 1.0, 0.9)])
def test_gil_pelaez_beta_distribution(a, b, x):
    from scipy import special

    # E[X^{jt}] = B(a + jt, b) / B(a, b)
    def mfn(t):
        t = np.asarray(t, dtype=float)
        return np.exp(special.loggamma(a + 1j * t) - special.loggamma(a + b + 1j * t)
                      + special.gammaln(a + b) - special.gammaln(a))

    want = 1.0 - special.betainc(a, b, x)
    assert gil_pelaez(mfn, x, 1e-6) == pytest.approx(want, abs=1e-5)


@pytest.mark.parametrize("a, b, x", [(2.0, 3.0, 0.3), (0.7, 1.5, 0.6), (40.0, 2.0, 0.97)])
def test_laplace_cdf_beta_distribution(a, b, x):
    from scipy import special

    # Y = -log X; E[exp(-s Y)] = E[X^s]
    def tr(s):
        return np.exp(special.loggamma(a + s) - special.loggamma(a + b + s)
                      + special.gammaln(a + b) - special.gammaln(a))

    want = 1.0 - special.betainc(a, b, x)
    assert laplace_cdf(tr, -math.log(x)) == pytest.approx(want, abs=1e-6)


def test_laplace_cdf_rejects_nonpositive_argument():
    with pytest.raises(ValueError):
        laplace_cdf(lambda s: 1.0 / (1.0 + s), 0.0)


@pytest.mark.parametrize("x, a, b, want", [
    (0.3, 2.5, 3.5, 0.296752989295666378),
    (0.9, 0.5, 0.5, 0.795167235300866572),
    (0.41, 40.0, 60.0, 0.585775793800962060),
])
def test_reg_inc_beta_against_mpmath(x, a, b, want):
    assert reg_inc_beta(x, a, b) == pytest.approx(want, abs=1e-13)


def test_reg_inc_beta_endpoints():
    assert reg_inc_beta(0.0, 2.0, 3.0) == 0.0
    assert reg_inc_beta(1.0, 2.0, 3.0) == 1.0


@given(x=st.floats(0.0, 1.0), a=st.floats(0.05, 50.0), b=st.floats(0.05, 50.0))
@settings(max_examples=80, deadline=None)
def test_reg_inc_beta_symmetry_and_range(x, a, b):
    y = 1.0 - x
    x = 1.0 - y  # so that x + y == 1 exactly in floating point
    v = reg_inc_beta(x, a, b)
    assert -1e-14 <= v <= 1 + 1e-14
    assert v + reg_inc_beta(y, b, a) == pytest.approx(1.0, abs=1e-10)


def test_brent_root():
    assert brent_root(lambda v: v * v - 2.0, 0.0, 2.0) == pytest.approx(math.sqrt(2), abs=1e-12)
    with pytest.raises(NoSignChange):
        brent_root(lambda v: v * v + 1.0, -1.0, 1.0)
