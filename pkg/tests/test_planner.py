import numpy as np
import pytest

from subrie.controllers import ControllerSpec, build_controller
from subrie.curves import Curve
from subrie.errors import DomainError
from subrie.lifting import lift
from subrie.planner import (PlanRequest, free_endpoint, plan_iterated, plan_local,
                            staircase, verify_plan)

H_HEIS = 4e-4
H_ENGEL = 4e-7


@pytest.fixture(scope="module")
def hspec():
    return ControllerSpec(0.2, H_HEIS)


@pytest.fixture(scope="module")
def hctl(heis, hspec):
    return build_controller(heis, hspec)


def heis_request(heis, hspec, base, offset, hctl=None):
    probe = PlanRequest(heis, [0, 0, 0], [*base, 0.0], hspec)
    free = free_endpoint(probe, hctl)
    return PlanRequest(heis, [0, 0, 0], [*base, free[2] + offset], hspec)


# -- requests ------------------------------------------------------------------------

def test_request_validation(heis, hspec):
    with pytest.raises(DomainError):
        PlanRequest(heis, [0, 0, 0], [0.6, 0, 0], hspec)
    with pytest.raises(ValueError):
        PlanRequest(heis, [0, 0], [0, 0, 0], hspec)
    with pytest.raises(ValueError):
        PlanRequest(heis, [0, 0, 0], [0, 0, 0], hspec, tol=0.0)


# -- staircase -----------------------------------------------------------------------

@pytest.mark.parametrize("target", [[0.1, 0.05], [-0.1, -0.05], [0.0, 0.0], [0.1, 0.0]])
def test_staircase_shape(target):
    st = staircase([0.0, 0.0], target, 0.2, 1e-3)
    c = st.curve
    assert np.array_equal(c.start, [0.0, 0.0]) and np.array_equal(c.end, target)
    steps = np.diff(c.points, axis=0)
    assert np.all(np.sum(np.abs(steps) > 1e-15, axis=1) == 1)
    assert np.all(np.linalg.norm(steps, axis=1) <= 1e-3 + 1e-12)
    corridor = (c.times >= st.t0 - st.tau) & (c.times <= st.t0 + st.tau)
    seg = c.points[corridor]
    assert np.all(seg[:, 1] == seg[0, 1]) and np.all(np.diff(seg[:, 0]) > 0)
    assert st.tau >= 0.2


def test_staircase_jogs_away_from_target():
    up = staircase([0.0, 0.0], [0.1, 0.1], 0.2, 1e-3)
    down = staircase([0.0, 0.0], [0.1, -0.1], 0.2, 1e-3)
    assert up.curve.at(up.t0)[1] < 0 < down.curve.at(down.t0)[1]


def test_staircase_base_is_embedded():
    from subrie.lifting import base_crossings
    for target in ([0.1, 0.05], [0.0, 0.0], [-0.1, 0.02]):
        assert base_crossings(staircase([0.0, 0.0], target, 0.2, 1e-3).curve) == []


def test_staircase_three_base_coordinates():
    st = staircase([0.0, 0.0, 0.0], [0.05, 0.02, -0.03], 0.1, 1e-3)
    assert np.array_equal(st.curve.end, [0.05, 0.02, -0.03])


# -- planning --------------------------------------------------------------------------

def test_free_endpoint_is_plain_lift(heis, hspec, hctl):
    req = PlanRequest(heis, [0, 0, 0], [0.1, 0.05, 0.0], hspec)
    fe = free_endpoint(req, hctl)
    assert np.allclose(fe[:2], [0.1, 0.05])
    res = plan_local(PlanRequest(heis, [0, 0, 0], fe, hspec), hctl)
    assert res.iterations == 0 and res.residual <= 1e-6
    assert np.array_equal(res.free_vertical, fe[2:])


@pytest.mark.parametrize("offset", [0.3 * H_HEIS, -0.45 * H_HEIS])
def test_heisenberg_plan(heis, hspec, hctl, offset):
    req = heis_request(heis, hspec, [0.1, 0.05], offset, hctl)
    res = plan_local(req, hctl)
    assert res.residual <= req.tol
    assert np.array_equal(res.curve.points[0], req.start)
    rep = verify_plan(res, req)
    assert rep.passed, rep.as_dict()
    assert rep.horizontality <= 1e-9


def test_engel_plan(engel):
    spec = ControllerSpec(0.2, H_ENGEL)
    tol = min(1e-6, 1e-3 * H_ENGEL)
    probe = PlanRequest(engel, [0, 0, 0, 0], [0.05, -0.05, 0, 0], spec, tol=tol)
    fe = free_endpoint(probe)
    target = np.r_[0.05, -0.05, fe[2:] + [0.2 * H_ENGEL, -0.3 * H_ENGEL]]
    req = PlanRequest(engel, [0, 0, 0, 0], target, spec, tol=tol)
    res = plan_local(req)
    assert res.residual <= tol
    assert verify_plan(res, req).passed


def test_offset_beyond_half_h_rejected(heis, hspec, hctl):
    req = heis_request(heis, hspec, [0.1, 0.05], 0.6 * H_HEIS, hctl)
    with pytest.raises(DomainError, match="free lift"):
        plan_local(req, hctl)


def test_plan_is_deterministic(heis, hspec, hctl):
    req = heis_request(heis, hspec, [-0.05, 0.1], 0.2 * H_HEIS, hctl)
    a, b = plan_local(req, hctl), plan_local(req, hctl)
    assert np.array_equal(a.curve.points, b.curve.points)
    assert np.array_equal(a.curve.times, b.curve.times)


def test_plan_agrees_with_relift(heis, hspec, hctl, cfg):
    req = heis_request(heis, hspec, [0.1, 0.05], 0.1 * H_HEIS, hctl)
    res = plan_local(req, hctl)
    base = Curve(res.curve.times, res.curve.points[:, :2])
    again = lift(heis, base, [0.0], cfg).curve
    assert np.allclose(again.points, res.curve.points, atol=1e-12)


# -- verification ------------------------------------------------------------------------

def test_verify_flags_wrong_target(heis, hspec, hctl):
    req = heis_request(heis, hspec, [0.1, 0.05], 0.1 * H_HEIS, hctl)
    res = plan_local(req, hctl)
    moved = PlanRequest(heis, req.start, req.target + [0, 0, 1e-3], hspec)
    rep = verify_plan(res, moved)
    assert not rep.endpoint_ok and rep.horizontal_ok and not rep.passed


def test_verify_flags_wrong_start(heis, hspec, hctl):
    req = heis_request(heis, hspec, [0.1, 0.05], 0.1 * H_HEIS, hctl)
    res = plan_local(req, hctl)
    other = PlanRequest(heis, [0.01, 0, 0], req.target, hspec)
    assert verify_plan(res, other).endpoint_error == np.inf


def test_verify_flags_non_horizontal(heis, hspec, hctl):
    req = heis_request(heis, hspec, [0.1, 0.05], 0.1 * H_HEIS, hctl)
    res = plan_local(req, hctl)
    pts = res.curve.points.copy()
    pts[:, 2] += 0.01 * res.curve.times
    bad = type(res)(Curve(res.curve.times, pts), res.d, res.residual, res.iterations,
                    res.free_vertical, res.corridor)
    rep = verify_plan(bad, req)
    assert not rep.horizontal_ok
    assert set(rep.as_dict()) >= {"endpoint_error", "horizontality", "gap", "passed"}


# -- iterated planning -------------------------------------------------------------------

def test_iterated_single_round(heis, hspec, hctl):
    req = heis_request(heis, hspec, [0.1, 0.05], 0.2 * H_HEIS, hctl)
    out = plan_iterated(req)
    assert len(out) == 1 and out[0].residual <= req.tol


def test_iterated_reports_failure(heis, hspec, hctl):
    req = heis_request(heis, hspec, [0.1, 0.05], 2 * H_HEIS, hctl)
    with pytest.raises(DomainError):
        plan_iterated(req, max_rounds=3)
