import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from subrie.controllers import (ControllerSpec, EndpointMap, build_controller, chi_S,
                                controller_curve, insert_controller, jacobian,
                                max_feasible_h, solve_displacement)
from subrie.errors import ConvergenceError, InfeasibleError
from subrie.lifting import lift, self_intersection_gap
from subrie.tangles import axis_host

R = 0.2
H_HEIS = 4e-4
H_ENGEL = 4e-7


@pytest.fixture(scope="module")
def hc(heis):
    return build_controller(heis, ControllerSpec(R, H_HEIS))


@pytest.fixture(scope="module")
def ec(engel):
    return build_controller(engel, ControllerSpec(R, H_ENGEL))


@pytest.fixture(scope="module")
def hem(hc):
    return EndpointMap.create(hc)


@pytest.fixture(scope="module")
def eem(ec):
    return EndpointMap.create(ec)


# -- χ_S ---------------------------------------------------------------------------

def test_chi_antisymmetric_part_symbolic():
    a = sp.symbols("a", real=True)
    S = sp.symbols("S", positive=True)
    chi = (S + sp.sqrt(a ** 2 + S ** 2)) / 2 + a / 2
    assert sp.simplify(chi - chi.subs(a, -a) - a) == 0
    assert sp.simplify(chi.subs(a, 0) - S) == 0


def test_chi_antisymmetric_part_numeric(rng):
    S = 0.25
    a = rng.uniform(-1, 1, 1000)
    diff = chi_S(a, S) - chi_S(-a, S)
    assert np.all(np.abs(diff - a) <= 4 * np.spacing(chi_S(np.abs(a), S)))


@given(st.floats(-1e3, 1e3), st.floats(1e-6, 10))
def test_chi_positive(a, S):
    assert chi_S(a, S) > 0


def test_chi_at_zero_and_scalar():
    assert chi_S(0.0, 0.3) == 0.3
    assert isinstance(chi_S(0.1, 0.3), float)
    with pytest.raises(ValueError):
        chi_S(0.0, 0.0)


# -- spec and construction ---------------------------------------------------------

def test_spec_defaults_and_validation():
    s = ControllerSpec(R, 0.01)
    assert s.S == 0.0025 and s.axis_step == R / 200
    with pytest.raises(ValueError):
        ControllerSpec(R, 0.01, S=0.02)
    with pytest.raises(ValueError):
        ControllerSpec(0.0, 0.01)
    with pytest.raises(ValueError):
        ControllerSpec(R, -1.0)


def test_heisenberg_slots(hc):
    pos = {s.sign: s.center / (2 * R) for s in hc.slots}
    assert pos[1] == pytest.approx(1 / 3) and pos[-1] == pytest.approx(1 / 6)
    assert all(s.half_window == pytest.approx(R / 6) for s in hc.slots)
    assert hc.mu(3) == pytest.approx(np.sqrt(2 * H_HEIS))
    assert hc.dim == 1


def test_engel_boxes_disjoint(ec):
    assert len(ec.models) == 4
    boxes = [m.attaching for m in ec.models]
    for a in range(4):
        assert ec.models[a].box_side < R / 8
        for b in range(a + 1, 4):
            gap = np.abs(boxes[a].box_center - boxes[b].box_center) \
                - boxes[a].box_half - boxes[b].box_half
            assert np.any(gap > 0)
    assert ec.mu(4) == pytest.approx((2 * H_ENGEL) ** (1 / 3))


def test_infeasible_h(heis, engel):
    with pytest.raises(InfeasibleError, match="unreachable"):
        build_controller(heis, ControllerSpec(R, 0.01))
    with pytest.raises(InfeasibleError, match="largest feasible"):
        build_controller(heis, ControllerSpec(R, 1.2 * max_feasible_h(heis, R)))
    assert 4e-4 < max_feasible_h(heis, R) < 5e-4
    assert 4e-7 < max_feasible_h(engel, R) < 6e-7


def test_h_must_be_below_diameter(heis):
    with pytest.raises(ValueError):
        build_controller(heis, ControllerSpec(R, 2 * heis.radius))


def test_cartan_not_supported(cartan):
    with pytest.raises(ValueError, match="cannot be realised"):
        build_controller(cartan, ControllerSpec(R, 1e-7))


# -- geometry of the controller curve ----------------------------------------------

def test_rest_position_cancels(hem, eem):
    for em in (hem, eem):
        c = em.controller
        assert np.linalg.norm(em(np.zeros(c.dim))) <= 0.05 * c.spec.S


def test_full_displacement(hem, eem):
    for em in (hem, eem):
        h = em.controller.h
        ep = em(np.full(em.controller.dim, h))
        assert np.all(np.abs(ep / h - 1) <= 0.15)


@pytest.mark.parametrize("which", ["hc", "ec"])
def test_boundary_fixed_bitwise(which, request):
    c = request.getfixturevalue(which)
    grid = np.linspace(-c.h, c.h, 5)
    ds = [np.array([a]) for a in grid] if c.dim == 1 else \
        [np.array([a, b]) for a in grid for b in grid]
    lo = min(m.window[0] for m in c.models)
    hi = max(m.window[1] for m in c.models)
    ax = c.axis
    head, tail = ax.points[ax.times < lo], ax.points[ax.times > hi]
    for d in ds:
        cv = controller_curve(c, d, 1.0)
        assert np.array_equal(cv.points[0], ax.points[0])
        assert np.array_equal(cv.points[-1], ax.points[-1])
        assert np.array_equal(cv.points[cv.times < lo], head)
        assert np.array_equal(cv.points[cv.times > hi], tail)


def test_theta_zero_is_the_axis(hc):
    assert controller_curve(hc, [H_HEIS / 2], 0.0).same_as(hc.axis)


def test_lifted_controller_embedded(hem, eem):
    for em in (hem, eem):
        h = em.lifted(np.zeros(em.controller.dim))
        assert self_intersection_gap(h, 2 * h.spacing()) > 0


def test_endpoint_continuous_in_theta(hem):
    d = np.array([0.5 * H_HEIS])
    thetas = np.linspace(0, 1, 11)
    ep = np.array([hem.gmodel.vertical(hem.lifted(d, t).points[-1])[0] for t in thetas])
    assert ep[0] == pytest.approx(0.0, abs=1e-12)
    assert np.max(np.abs(np.diff(ep))) <= 0.25 * abs(ep[-1])


# -- insertion -----------------------------------------------------------------------

def test_insert_into_longer_host(hc, heis, cfg):
    host = axis_host(2, 1, [-0.3, 0.0], 0.6, 1e-3)
    cv = insert_controller(host, 0.3, hc, R + 0.01, d=[H_HEIS])
    jumps = np.linalg.norm(np.diff(cv.points, axis=0), axis=1)
    # straight stretches inside a window are resampled, a little coarser than the host
    assert jumps.max() <= 3 * host.spacing()
    out = (host.times < 0.3 - R) | (host.times > 0.3 + R)
    out_c = (cv.times < 0.3 - R) | (cv.times > 0.3 + R)
    assert np.array_equal(host.points[out], cv.points[out_c])
    assert insert_controller(host, 0.3, hc, R + 0.01, theta=0.0) is host
    ep = lift(heis, cv, [0.0], cfg).curve.points[-1, 2]
    em = EndpointMap.create(hc)
    assert ep == pytest.approx(em([H_HEIS])[0], rel=1e-3)


def test_insert_rejects_short_or_bent_window(hc):
    host = axis_host(2, 1, [-0.3, 0.0], 0.6, 1e-3)
    with pytest.raises(ValueError):
        insert_controller(host, 0.3, hc, R / 2)
    bent = axis_host(2, 2, [0.0, -0.3], 0.6, 1e-3)
    with pytest.raises(ValueError):
        insert_controller(bent, 0.3, hc, R + 0.01)


# -- Jacobian and Newton -------------------------------------------------------------

def test_jacobian_near_identity(hem, eem):
    for em, bound in ((hem, 0.1), (eem, 0.2)):
        J = jacobian(em, np.zeros(em.controller.dim))
        assert np.linalg.norm(J - np.eye(len(J)), 2) <= bound


def test_jacobian_probe_converged(eem):
    d = np.zeros(2)
    h = eem.controller.h
    a = jacobian(eem, d, 2e-2 * h)
    b = jacobian(eem, d, 1e-2 * h)
    assert np.max(np.abs(a - b)) <= 1e-3


def test_jacobian_one_sided_at_boundary(hem):
    J = jacobian(hem, [H_HEIS])
    assert 0.8 < J[0, 0] < 1.1


def test_newton_zero_iterations_at_rest(hem):
    sol = solve_displacement(hem, hem([0.0]))
    assert sol.iterations == 0 and sol.residual == 0.0


@pytest.mark.parametrize("which", ["hem", "eem"])
def test_newton_converges(which, request):
    em = request.getfixturevalue(which)
    h = em.controller.h
    target = em(np.zeros(em.controller.dim)) + 0.4 * h
    sol = solve_displacement(em, target, tol=1e-3 * h * 1e-5)
    assert sol.residual <= 1e-8 * max(1.0, h)
    assert sol.iterations <= 8
    assert np.all(np.abs(sol.d) <= h)
    assert np.allclose(em(sol.d), sol.endpoint)


def test_newton_far_target_fails(hem):
    with pytest.raises(ConvergenceError):
        solve_displacement(hem, [3 * H_HEIS], max_iter=5)


@pytest.mark.parametrize("which", ["hem", "eem"])
def test_affine_model(which, request, rng):
    em = request.getfixturevalue(which)
    c = em.controller
    e0 = em(np.zeros(c.dim))
    for _ in range(3):
        d = rng.uniform(-c.h, c.h, c.dim)
        assert np.linalg.norm(em(d) - e0 - d) <= 0.2 * np.linalg.norm(d)
