import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from tppp.model import (
    PLP,
    PSP,
    AlphaOutOfRange,
    Deterministic,
    Model,
    NetworkParams,
    NonPositiveParam,
    ParameterError,
    ProbOutOfRange,
    Rayleigh,
    db_to_linear,
    linear_to_db,
    load_params,
    params_from_dict,
    params_to_dict,
    resolve_model,
    validate,
)


def test_derived_quantities():
    d = validate(NetworkParams(alpha=4.0))
    assert d.delta == 0.5
    assert d.tau == 1.0
    assert d.lambda2 == 1.0
    assert NetworkParams(theta=2.0, d_link=0.5, alpha=4.0).s == pytest.approx(2.0 * 0.5**4)


def test_psp_tau_matches_numeric_mean():
    c = 0.1
    mean_h, _ = integrate.quad(lambda h: h * 2 * c * h * math.exp(-c * h * h), 0, math.inf)
    d = validate(NetworkParams(mu=0.1, street_model=PSP(Rayleigh(c))))
    assert d.tau == pytest.approx(2 * 0.1 * math.sqrt(math.pi / 0.4), rel=1e-14)
    assert d.tau == pytest.approx(2 * 0.1 * mean_h, rel=1e-9)


@pytest.mark.parametrize("c", [0.1, 1.0, 7.5])
def test_rayleigh_densities_integrate_to_one(c):
    hl = Rayleigh(c)
    assert integrate.quad(hl.pdf, 0, math.inf)[0] == pytest.approx(1.0, abs=1e-10)
    assert integrate.quad(hl.biased_pdf, 0, math.inf)[0] == pytest.approx(1.0, abs=1e-10)
    assert integrate.quad(lambda h: h * h * hl.pdf(h), 0, math.inf)[0] == pytest.approx(hl.second_moment)


def test_rayleigh_samplers():
    rng = np.random.default_rng(11)
    hl = Rayleigh(0.5)
    draws = hl.sample(rng, 10**6)
    assert abs(draws.mean() - hl.mean) < 3 * draws.std() / 1e3
    biased = hl.sample_biased(rng, 10**6)
    want = hl.second_moment / hl.mean
    assert abs(biased.mean() - want) < 3 * biased.std() / 1e3
    cut = hl.sample(rng, 10**5, h_cut=1.0)
    assert cut.max() <= 1.0


def test_deterministic_half_length():
    hl = Deterministic(2.0)
    assert hl.mean == 2.0 and hl.second_moment == 4.0
    assert np.all(hl.sample_biased(np.random.default_rng(0), 5) == 2.0)


@pytest.mark.parametrize("kw, exc", [
    ({"alpha": 2.0}, AlphaOutOfRange),
    ({"p": 0.0}, ProbOutOfRange),
    ({"p": 1.5}, ProbOutOfRange),
    ({"theta": -1.0}, NonPositiveParam),
    ({"d_link": 0.0}, NonPositiveParam),
    ({"lam": -1.0}, NonPositiveParam),
    ({"m": 3}, NonPositiveParam),
    ({"street_model": PSP(Rayleigh(-1.0))}, NonPositiveParam),
])
def test_single_violation_raises_specific_error(kw, exc):
    with pytest.raises(exc) as info:
        validate(NetworkParams(**kw))
    assert len(info.value.violations) == 1


def test_all_violations_are_listed():
    with pytest.raises(ParameterError) as info:
        validate(NetworkParams(alpha=1.0, p=2.0, theta=0.0))
    assert len(info.value.violations) == 3
    assert type(info.value) is ParameterError


def test_empty_network_is_valid():
    assert validate(NetworkParams(lam=0.0, mu=0.0)).lambda2 == 0.0


@given(st.floats(-80.0, 80.0))
def test_db_round_trip(v):
    assert linear_to_db(db_to_linear(v)) == pytest.approx(v, abs=1e-12)


def test_theta_db_helpers():
    p = NetworkParams().with_(theta_db=10.0)
    assert p.theta == pytest.approx(10.0)
    assert p.theta_db == pytest.approx(10.0)


def test_resolve_model():
    assert resolve_model("TPPP", NetworkParams()) is Model.TPPP_PLP
    assert resolve_model(Model.TPPP, NetworkParams(street_model=PSP())) is Model.TPPP_PSP
    with pytest.raises(ValueError):
        resolve_model(Model.PSP_PPP, NetworkParams())


@pytest.mark.parametrize("street", [PLP(), PSP(Rayleigh(0.3)), PSP(Deterministic(1.5))])
def test_json_round_trip(tmp_path, street):
    p = NetworkParams(lam=0.7, mu=0.2, p=0.4, theta=3.0, d_link=0.5, alpha=3.5, m=4,
                      street_model=street, shadow_sigma=1.0)
    path = tmp_path / "p.json"
    path.write_text(json.dumps(params_to_dict(p)))
    assert load_params(path) == p


def test_json_rejects_unknown_keys_and_accepts_db():
    with pytest.raises(ParameterError):
        params_from_dict({"lambda": 1.0})
    with pytest.raises(ParameterError):
        params_from_dict({"theta": 1.0, "theta_db": 0.0})
    assert params_from_dict({"theta_db": 20.0}).theta == pytest.approx(100.0)
