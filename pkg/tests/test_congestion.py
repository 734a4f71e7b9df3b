import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tppp.analytic import success_prob_tppp
from tppp.congestion import (
    ContourPoint,
    ContourRequest,
    contour,
    contour_md,
    contour_success,
    second_differences,
    success_range_along_md_contour,
    validate_against_exact,
    write_contour_csv,
)
from tppp.metadist import md_beta, md_exact
from tppp.model import Model, NetworkParams
from tppp.montecarlo import SimConfig
from tppp.numerics import brent_root

BASE = NetworkParams(lam=1.0, mu=1.0, p=0.3, theta=1.0, d_link=0.25, alpha=4.0)
LAMS = (0.5, 1.0, 2.0, 4.0, 8.0)


def test_success_contour_residual_and_scaling():
    pts = contour_success(ContourRequest(0.9, LAMS, BASE))
    assert all(pt.feasible for pt in pts)
    for pt in pts:
        assert abs(success_prob_tppp(BASE.with_(lam=pt.lam, p=pt.p)) - 0.9) < 1e-10
    for a, b in zip(pts, pts[1:]):
        assert b.p == pytest.approx(a.p / 2, rel=1e-14)
    lp = [pt.lam * pt.p for pt in pts]
    assert max(lp) - min(lp) < 1e-14


def test_success_contour_closed_form_matches_root_finder():
    for pt in contour_success(ContourRequest(0.8, LAMS, BASE)):
        prm = BASE.with_(lam=pt.lam)
        p = brent_root(lambda v: success_prob_tppp(prm.with_(p=v)) - 0.8, 1e-9, 1.0, 1e-14)
        assert p == pytest.approx(pt.p, abs=1e-8)


def test_q_one_and_infeasible_points():
    pts = contour_success(ContourRequest(1.0, LAMS, BASE))
    assert all(pt.p == 0.0 and not pt.feasible for pt in pts)
    pts = contour_success(ContourRequest(0.9, (0.01, 1.0), BASE))
    assert [pt.feasible for pt in pts] == [False, True]
    assert pts[0].p == 1.0
    assert pts[0].achieved_metric == pytest.approx(success_prob_tppp(BASE.with_(lam=0.01, p=1.0)))


@given(q1=st.floats(0.05, 0.99), q2=st.floats(0.05, 0.99), lam=st.floats(0.1, 20.0))
@settings(max_examples=50, deadline=None)
def test_p_non_increasing_in_target(q1, q2, lam):
    lo, hi = sorted((q1, q2))
    for x in (None, 0.5):
        a = contour(ContourRequest(lo, (lam,), BASE, x))[0]
        b = contour(ContourRequest(hi, (lam,), BASE, x))[0]
        assert b.p <= a.p + 1e-9
        assert 0 < a.p <= 1


def test_md_contour_residual_and_not_constant_product():
    pts = contour_md(ContourRequest(0.9, LAMS, BASE, 0.5))
    assert all(pt.feasible for pt in pts)
    for pt in pts:
        assert abs(md_beta(Model.TPPP, BASE.with_(lam=pt.lam, p=pt.p), 0.5) - 0.9) < 1e-8
    lp = np.array([pt.lam * pt.p for pt in pts])
    assert (lp.max() - lp.min()) / lp.mean() > 0.01


def test_md_contour_infeasible_reports_p_one():
    (pt,) = contour_md(ContourRequest(0.9, (0.01,), BASE, 0.5))
    assert not pt.feasible and pt.p == 1.0
    assert pt.achieved_metric == pytest.approx(md_beta(Model.TPPP, BASE.with_(lam=0.01, p=1.0), 0.5))
    with pytest.raises(ValueError):
        contour_md(ContourRequest(0.9, LAMS, BASE))


@pytest.mark.parametrize("x, u_max, sign", [(0.9, 14.0, 1.0), (0.1, 2.4, -1.0)])
def test_md_contour_curvature(x, u_max, sign):
    u = np.linspace(u_max / 5, u_max, 5)
    pts = contour_md(ContourRequest(0.9, tuple(np.sort(1 / u)), BASE, x))
    assert all(pt.feasible for pt in pts)
    assert np.all(sign * second_differences(pts) > 0)


def test_second_differences_of_a_parabola():
    pts = [ContourPoint(1 / u, u * u, 0.0, True) for u in (1.0, 2.0, 4.0, 5.0)]
    assert second_differences(pts) == pytest.approx([2.0, 2.0])
    assert len(second_differences(pts[:2])) == 0


def test_success_range():
    assert success_range_along_md_contour(ContourRequest(0.9, LAMS, BASE)) == (0.9, 0.9)
    lams = tuple(np.geomspace(1 / 11.5, 10.0, 40))
    lo, hi = success_range_along_md_contour(ContourRequest(0.9, lams, BASE, 0.8))
    assert lo < 0.9 < hi
    fine = tuple(np.geomspace(1 / 11.5, 10.0, 79))
    lo2, hi2 = success_range_along_md_contour(ContourRequest(0.9, fine, BASE, 0.8))
    assert abs(lo - lo2) < 1e-3 and abs(hi - hi2) < 1e-3
    with pytest.raises(ValueError):
        success_range_along_md_contour(ContourRequest(0.9, (0.01,), BASE, 0.5))


def test_validate_empty_and_empirical():
    assert validate_against_exact([], BASE, 0.5) == []
    pts = contour_md(ContourRequest(0.9, (2.0,), BASE, 0.5))
    (row,) = validate_against_exact(pts, BASE, 0.5, method="empirical",
                                    sim=SimConfig(20_000, seed=3), target_q=0.9)
    assert abs(row["deviation_plp"]) < 0.03
    assert row["md_tppp_beta"] == pytest.approx(0.9, abs=1e-8)
    with pytest.raises(ValueError):
        validate_against_exact(pts, BASE, 0.5, method="bogus")


def test_validate_exact_at_one_pair():
    pts = contour_md(ContourRequest(0.9, (2.0,), BASE, 0.9))
    (row,) = validate_against_exact(pts, BASE, 0.9, target_q=0.9)
    assert abs(row["deviation_plp"]) < 0.03
    # the TPPP deviation stays inside the beta error seen at high x
    assert abs(row["deviation_tppp"]) < 0.06
    assert row["md_tppp_exact"] == pytest.approx(md_exact(Model.TPPP, BASE.with_(lam=2.0, p=pts[0].p), 0.9))


def test_contour_request_validation():
    with pytest.raises(ValueError):
        ContourRequest(0.0, LAMS)
    with pytest.raises(ValueError):
        ContourRequest(0.9, (2.0, 1.0))
    with pytest.raises(ValueError):
        ContourRequest(0.9, LAMS, BASE, 1.0)


def test_contour_csv(tmp_path):
    path = tmp_path / "c.csv"
    write_contour_csv(contour_success(ContourRequest(0.9, (0.01, 3.0), BASE)), path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["lambda", "inv_lambda", "p", "achieved_metric", "feasible"]
    assert rows[1][4] == "0" and rows[2][4] == "1"
    assert float(rows[2][1]) == 1 / 3.0
    assert math.isclose(float(rows[2][0]) * float(rows[2][1]), 1.0)
