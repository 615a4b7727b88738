"""Controllers: banks of paired ± tangles whose lifted endpoint map is invertible.

A controller lives on the axis segment γ(s) = (2Rs − R, 0, ..., 0), s ∈ [0,1].
For every vertical direction i it carries a (+∂_i)-tangle at γ((i−q)/n) and a
(−∂_i)-tangle at γ((i−q)/n − 1/(2n)).  Each tangle is sized so that its
total area μ^λ is 2h and is shrunk by the area isotopy to the displacement
χ_S(±d_i); the pair then moves the lifted endpoint by about d_i along ∂_i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .curves import Curve
from .errors import (BallExitError, ConvergenceError, InfeasibleError,
                     SingularJacobianError)
from .fields import GraphicalModel
from .flows import IntegratorConfig
from .lifting import lift
from .tangles import (TangleModel, TangleSpec, _check_axis, _levels_dict, _local,
                      birth_homotopy, build_tangle_model, normalize_expr)

__all__ = [
    "chi_S", "ControllerSpec", "Slot", "Controller", "EndpointMap", "Solution",
    "build_controller", "controller_curve", "insert_controller", "endpoint_map",
    "jacobian", "solve_displacement", "max_feasible_h", "AXIS",
]

AXIS = 1
DELTA_RATIO = 1.0 / 20.0


def chi_S(a, S):
    """Size-at-rest bump: S/2 + a/2 + √(a² + S²)/2.

    Positive everywhere, equal to S at a = 0, and χ_S(a) − χ_S(−a) = a.
    """
    if not S > 0:
        raise ValueError("S must be positive")
    a = np.asarray(a, dtype=float)
    out = 0.5 * (S + np.hypot(a, S)) + 0.5 * a
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ControllerSpec:
    R: float
    h: float
    S: float | None = None
    delta: float | None = None
    axis_step: float | None = None

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.S is None:
            object.__setattr__(self, "S", self.h / 4)
        if not 0 < self.S <= self.h:
            raise ValueError("need 0 < S <= h")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("δ must be positive")
        if self.axis_step is None:
            object.__setattr__(self, "axis_step", self.R / 200)
        if not self.axis_step > 0:
            raise ValueError("axis_step must be positive")


@dataclass(frozen=True)
class Slot:
    """One tangle of the controller: direction ``sign·∂_index``."""

    index: int
    sign: int
    expr: object
    mu: float
    delta: float
    center: float       # arclength position on the axis, in [0, 2R]
    half_window: float

    @property
    def length(self):
        return self.expr.length

    @property
    def total_area(self):
        return self.mu ** self.length


@dataclass(frozen=True, eq=False)
class Controller:
    gmodel: GraphicalModel
    spec: ControllerSpec
    slots: tuple
    axis: Curve
    models: tuple       # TangleModels attached to the bare axis

    @property
    def h(self):
        return self.spec.h

    @property
    def dim(self):
        return self.gmodel.n - self.gmodel.q

    def mu(self, i):
        return next(s.mu for s in self.slots if s.index == i)


def _width_factor(expr, sign=1):
    """Box side of the tangle for μ = 1 with δ = μ/20 (sizes scale linearly)."""
    norm, nsign, _, _ = normalize_expr(expr, AXIS)
    d = DELTA_RATIO
    spec = TangleSpec(expr, 1.0, d)
    loc = _local(norm, 1.0, d, _levels_dict(norm.length, d, spec.level_smoothing),
                 sign * nsign)
    if norm.length == 2:
        return loc.w
    from .tangles import _run
    c = _run(loc.prog, d / 8)
    return max(loc.w, float(np.ptp(c.points[:, 1])))


def max_feasible_h(gmodel: GraphicalModel, R: float) -> float:
    """Largest h whose tangles (δ = μ/20) fit the controller boxes."""
    n = gmodel.n
    limit = R / (2 * n)
    best = math.inf
    for i in range(gmodel.q + 1, n + 1):
        e = gmodel.generators[i]
        f = _width_factor(e)
        best = min(best, 0.5 * (limit / f) ** e.length)
    return best


def _slots(gmodel, spec):
    n, q = gmodel.n, gmodel.q
    R = spec.R
    half = R / (2 * n)
    out = []
    for i in range(q + 1, n + 1):
        e = gmodel.generators.get(i)
        if e is None:
            raise ValueError(f"model has no generator for direction {i}")
        try:
            normalize_expr(e, AXIS)
        except ValueError as exc:
            raise ValueError(f"generator A_{i} cannot be realised along the ∂_{AXIS} "
                             f"axis: {exc}") from None
        mu = (2 * spec.h) ** (1.0 / e.length)
        delta = spec.delta if spec.delta is not None else DELTA_RATIO * mu
        for sign, frac in ((1, (i - q) / n), (-1, (i - q) / n - 1 / (2 * n))):
            out.append(Slot(i, sign, e, mu, delta, 2 * R * frac, half))
    return out


def _attach(slots, host, t0, v, R):
    """TangleModels for every slot, on ``host`` with the axis centre at t0."""
    models = []
    for s in slots:
        tc = t0 + (s.center - R) / v
        tspec = TangleSpec(s.expr, s.mu, s.delta, sign=s.sign)
        models.append(build_tangle_model(tspec, host, tc - s.half_window / v,
                                         tc + s.half_window / v))
    return tuple(models)


def _axis_curve(q, R, step):
    n = max(int(math.ceil(2 * R / step - 1e-9)), 1)
    t = np.linspace(0.0, 2 * R, n + 1)
    pts = np.zeros((n + 1, q))
    pts[:, AXIS - 1] = t - R
    return Curve(t, pts)


def build_controller(gmodel: GraphicalModel, spec: ControllerSpec) -> Controller:
    """Controller with one ± tangle pair per vertical direction.

    Raises :class:`InfeasibleError` when a tangle of total area 2h does not
    fit its box of side R/(2n).
    """
    if not spec.h < 2 * gmodel.radius:
        raise ValueError("need h < 2r")
    if not 2 * spec.R <= 2 * gmodel.radius:
        raise ValueError("controller axis longer than the model ball")
    slots = _slots(gmodel, spec)
    limit = spec.R / (2 * gmodel.n)
    axis = _axis_curve(gmodel.q, spec.R, spec.axis_step)
    for s in slots:
        if not s.delta <= s.mu / 10 * (1 + 1e-12):
            raise InfeasibleError(f"δ={s.delta:.3g} too large for μ={s.mu:.3g}")
    try:
        models = _attach(slots, axis, spec.R, 1.0, spec.R)
    except ValueError as exc:
        raise InfeasibleError(f"h={spec.h:.3g} unreachable: {exc}") from None
    for s, m in zip(slots, models):
        if not m.box_side < limit:
            raise InfeasibleError(
                f"h={spec.h:.3g} unreachable: tangle box {m.box_side:.4g} for ∂_{s.index} "
                f"exceeds {limit:.4g}; largest feasible h is "
                f"{max_feasible_h(gmodel, spec.R):.3g}")
    _assert_disjoint(models)
    return Controller(gmodel, spec, tuple(slots), axis, models)


def _assert_disjoint(models):
    for a in range(len(models)):
        for b in range(a + 1, len(models)):
            A, B = models[a].attaching, models[b].attaching
            gap = np.abs(A.box_center - B.box_center) - (A.box_half + B.box_half)
            if not np.any(gap > 0):
                raise AssertionError("controller boxes overlap")


def _u_values(c: Controller, d):
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if d.shape != (c.dim,):
        raise ValueError(f"d must have {c.dim} entries")
    if np.max(np.abs(d)) > c.h * (1 + 1e-12):
        raise ValueError("displacement out of range [-h, h]")
    q = c.gmodel.q
    return [chi_S(s.sign * d[s.index - q - 1], c.spec.S) / s.total_area for s in c.slots]


def _apply(c: Controller, models, host, d, theta):
    curve = host
    for m, u in zip(models, _u_values(c, d)):
        curve = birth_homotopy(curve, m, theta, u)
    return curve


def controller_curve(c: Controller, d, theta: float) -> Curve:
    """The axis with every tangle born at θ and isotoped to area χ_S(±d_i)."""
    return _apply(c, c.models, c.axis, d, theta)


def _host_speed(host, t0, tau, R):
    v = _check_axis(host, AXIS, t0 - tau, t0 + tau)
    if v * 2 * tau < 2 * R * (1 - 1e-12):
        raise ValueError("insertion window shorter than the controller axis")
    return v


def insert_controller(host: Curve, t0: float, c: Controller, tau: float,
                      d=None, theta: float = 1.0) -> Curve:
    """Splice the controller into a host that runs along +∂_1 on [t0−τ, t0+τ].

    The controller axis is centred at host(t0); the curve is unchanged
    outside the window.
    """
    v = _host_speed(host, t0, tau, c.spec.R)
    models = _attach(c.slots, host, t0, v, c.spec.R)
    return _apply(c, models, host, np.zeros(c.dim) if d is None else d, theta)


@dataclass(frozen=True, eq=False)
class EndpointMap:
    """d ↦ vertical part of the lifted endpoint of the controller-equipped host."""

    controller: Controller
    host: Curve
    t0: float
    start_vertical: np.ndarray
    cfg: IntegratorConfig
    models: tuple

    @classmethod
    def create(cls, controller, host=None, t0=None, tau=None, start_vertical=None,
               cfg=None):
        R = controller.spec.R
        if host is None:
            host, t0, tau = controller.axis, R, R
        if tau is None:
            tau = R
        v = _host_speed(host, t0, tau, R)
        models = controller.models if host is controller.axis else \
            _attach(controller.slots, host, t0, v, R)
        m = controller.gmodel
        sv = np.zeros(m.n - m.q) if start_vertical is None else \
            np.atleast_1d(np.asarray(start_vertical, dtype=float))
        return cls(controller, host, float(t0), sv, cfg or IntegratorConfig(), models)

    @property
    def gmodel(self):
        return self.controller.gmodel

    def curve(self, d, theta=1.0):
        return _apply(self.controller, self.models, self.host, d, theta)

    def lifted(self, d, theta=1.0) -> Curve:
        out = lift(self.gmodel, self.curve(d, theta), self.start_vertical, self.cfg)
        if out.exited:
            raise BallExitError(f"controller lift left the ball at t={out.exit_time:.6g}")
        return out.curve

    def __call__(self, d):
        return self.gmodel.vertical(self.lifted(d).points[-1])


def endpoint_map(em: EndpointMap, d) -> np.ndarray:
    return em(d)


def jacobian(em: EndpointMap, d, probe: float | None = None) -> np.ndarray:
    """Central differences; one-sided where d sits on the box boundary."""
    c = em.controller
    h = c.h
    d = np.atleast_1d(np.asarray(d, dtype=float))
    probe = probe if probe is not None else 1e-2 * h
    if not probe > 0:
        raise ValueError("probe must be positive")
    m = c.dim
    J = np.empty((m, m))
    base = None
    for k in range(m):
        e = np.zeros(m)
        e[k] = probe
        up, down = d + e, d - e
        up_ok = abs(up[k]) <= h * (1 + 1e-12)
        down_ok = abs(down[k]) <= h * (1 + 1e-12)
        if up_ok and down_ok:
            J[:, k] = (em(up) - em(down)) / (2 * probe)
        else:
            if base is None:
                base = em(d)
            J[:, k] = (em(up) - base) / probe if up_ok else (base - em(down)) / probe
    return J


@dataclass(frozen=True)
class Solution:
    d: np.ndarray
    residual: float
    iterations: int
    endpoint: np.ndarray


def solve_displacement(em: EndpointMap, target, tol: float = 1e-6, max_iter: int = 20,
                       probe: float | None = None) -> Solution:
    """Damped Newton for ep(d) = target with iterates clamped to [−h, h]."""
    c = em.controller
    h = c.h
    target = np.atleast_1d(np.asarray(target, dtype=float))
    if target.shape != (c.dim,):
        raise ValueError(f"target must have {c.dim} entries")
    d = np.zeros(c.dim)
    ep = em(d)
    res = float(np.linalg.norm(target - ep))
    it = 0
    while res > tol:
        if it >= max_iter:
            raise ConvergenceError(f"no convergence in {max_iter} iterations "
                                   f"(residual {res:.3g})")
        J = jacobian(em, d, probe)
        if np.linalg.cond(J) > 1e8:
            raise SingularJacobianError("endpoint Jacobian is singular")
        step = np.linalg.solve(J, target - ep)
        alpha = 1.0
        while True:
            d_new = np.clip(d + alpha * step, -h, h)
            ep_new = em(d_new)
            res_new = float(np.linalg.norm(target - ep_new))
            if res_new < res or alpha <= 1.0 / 64:
                break
            alpha /= 2
        d, ep, res = d_new, ep_new, res_new
        it += 1
    return Solution(d, res, it, ep)
