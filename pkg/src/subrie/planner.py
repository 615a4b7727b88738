"""Local motion planning with a single controller.

The base path is an axis-parallel staircase: a short ∂_2 jog, a straight
+∂_1 corridor that carries the controller, then one leg per base coordinate
to the target.  Newton on the controller's endpoint map fixes the vertical
part of the lifted endpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controllers import (AXIS, Controller, ControllerSpec, EndpointMap,
                          build_controller, solve_displacement)
from .curves import Curve
from .errors import BallExitError, DomainError
from .fields import GraphicalModel
from .flows import IntegratorConfig
from .lifting import lift, self_intersection_gap

__all__ = ["PlanRequest", "PlanResult", "PlanReport", "Staircase", "staircase",
           "free_endpoint", "plan_local", "verify_plan", "plan_iterated"]

JOG = 0.05
MARGIN = 0.02


@dataclass(frozen=True, eq=False)
class PlanRequest:
    gmodel: GraphicalModel
    start: np.ndarray
    target: np.ndarray
    spec: ControllerSpec
    tol: float = 1e-6
    cfg: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        n = self.gmodel.n
        for name in ("start", "target"):
            p = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if p.shape != (n,):
                raise ValueError(f"{name} must have {n} entries")
            if not np.linalg.norm(p) <= self.gmodel.radius:
                raise DomainError(f"{name} lies outside the model ball")
            object.__setattr__(self, name, p)
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True, eq=False)
class PlanResult:
    curve: Curve
    d: np.ndarray
    residual: float
    iterations: int
    free_vertical: np.ndarray
    corridor: tuple     # (t0, τ) of the controller window on the base path


@dataclass(frozen=True)
class PlanReport:
    endpoint_error: float
    horizontality: float
    gap: float
    tol: float
    step: float

    @property
    def endpoint_ok(self):
        return self.endpoint_error <= self.tol

    @property
    def horizontal_ok(self):
        return self.horizontality <= 10 * self.step

    @property
    def embedded_ok(self):
        return self.gap > 0

    @property
    def passed(self):
        return self.endpoint_ok and self.horizontal_ok and self.embedded_ok

    def as_dict(self):
        return {"endpoint_error": self.endpoint_error, "horizontality": self.horizontality,
                "gap": self.gap, "tol": self.tol, "step": self.step,
                "endpoint_ok": self.endpoint_ok, "horizontal_ok": self.horizontal_ok,
                "embedded_ok": self.embedded_ok, "passed": self.passed}


@dataclass(frozen=True, eq=False)
class Staircase:
    curve: Curve
    t0: float
    tau: float


def _leg(p, axis, to, ds):
    n = max(int(math.ceil(abs(to - p[axis]) / ds - 1e-9)), 1)
    s = np.linspace(p[axis], to, n + 1)[1:]
    out = np.repeat(p[None, :], n, axis=0)
    out[:, axis] = s
    return out


def staircase(start_base, target_base, R: float, ds: float) -> Staircase:
    """Axis-parallel base path with a +∂_1 corridor of length 2R + 2·margin."""
    s = np.asarray(start_base, dtype=float)
    g = np.asarray(target_base, dtype=float)
    q = s.size
    if q < 2:
        raise ValueError("need at least two base coordinates")
    a, b = AXIS - 1, 1
    L = 2 * R + 2 * MARGIN
    jog = -JOG if g[b] > s[b] else JOG
    pts = [s[None, :]]
    p = s.copy()
    if g[b] == s[b]:
        # keep the return leg off the start point
        jog = -JOG if s[b] > 0 else JOG
    pts.append(_leg(p, b, s[b] + jog, ds))
    p = pts[-1][-1].copy()
    corridor_start = sum(len(x) for x in pts) - 1
    pts.append(_leg(p, a, s[a] + L, ds))
    p = pts[-1][-1].copy()
    corridor_end = sum(len(x) for x in pts) - 1
    for k in [b] + [k for k in range(q) if k not in (a, b)] + [a]:
        if p[k] != g[k]:
            pts.append(_leg(p, k, g[k], ds))
            p = pts[-1][-1].copy()
    P = np.vstack(pts)
    P[-1] = g
    t = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(P, axis=0), axis=1))])
    t0 = 0.5 * (t[corridor_start] + t[corridor_end])
    return Staircase(Curve(t, P), float(t0), float(R + MARGIN * 0.5))


def _setup(req: PlanRequest, controller: Controller | None = None):
    g = req.gmodel
    c = controller or build_controller(g, req.spec)
    st = staircase(req.start[:g.q], req.target[:g.q], req.spec.R, req.spec.axis_step)
    em = EndpointMap.create(c, st.curve, st.t0, st.tau, g.vertical(req.start), req.cfg)
    return c, st, em


def free_endpoint(req: PlanRequest, controller: Controller | None = None) -> np.ndarray:
    """Lifted endpoint with every controller tangle at rest (d = 0)."""
    _, _, em = _setup(req, controller)
    return em.lifted(np.zeros(em.controller.dim)).points[-1]


def plan_local(req: PlanRequest, controller: Controller | None = None) -> PlanResult:
    """Horizontal curve from ``req.start`` to ``req.target``.

    Raises :class:`DomainError` if the vertical offset from the free lift
    exceeds h/2, and propagates Newton and ball-exit failures.
    """
    g = req.gmodel
    c, st, em = _setup(req, controller)
    zero = np.zeros(c.dim)
    free = g.vertical(em.lifted(zero).points[-1])
    want = g.vertical(req.target)
    offset = float(np.linalg.norm(want - free))
    if offset > c.h / 2:
        raise DomainError(f"vertical offset {offset:.3g} from the free lift "
                          f"{np.array2string(free, precision=6)} exceeds h/2 = {c.h / 2:.3g}")
    sol = solve_displacement(em, want, tol=req.tol)
    curve = em.lifted(sol.d)
    residual = float(np.linalg.norm(curve.points[-1] - req.target))
    return PlanResult(curve, sol.d, residual, sol.iterations, free, (st.t0, st.tau))


def _horizontality(gmodel: GraphicalModel, c: Curve) -> float:
    """Max over chords of ‖Δx − Σ_j Δx_j X_j(mid)‖ / ‖Δx‖."""
    x = c.points
    dx = np.diff(x, axis=0)
    size = np.linalg.norm(dx, axis=1)
    keep = size > 0
    if not keep.any():
        return 0.0
    dx, size = dx[keep], size[keep]
    mid = 0.5 * (x[:-1] + x[1:])[keep]
    q = gmodel.q
    pred = np.zeros_like(dx)
    for j, X in enumerate(gmodel.frame[:q]):
        pred += dx[:, j:j + 1] * X.evaluate_many(mid)
    return float(np.max(np.linalg.norm(dx - pred, axis=1) / size))


def verify_plan(res: PlanResult, req: PlanRequest, cfg: IntegratorConfig | None = None) -> PlanReport:
    """Re-lift, horizontality and embeddedness checks; never raises on failure."""
    cfg = cfg or req.cfg
    g = req.gmodel
    c = res.curve
    base = Curve(c.times, c.points[:, :g.q])
    err = math.inf
    if np.array_equal(c.points[0], req.start):
        try:
            out = lift(g, base, g.vertical(req.start), cfg)
            if not out.exited:
                err = float(np.linalg.norm(out.curve.points[-1] - req.target))
        except BallExitError:
            pass
    horiz = _horizontality(g, c)
    try:
        gap = self_intersection_gap(c, 2 * c.spacing())
    except ValueError:
        gap = 0.0
    return PlanReport(err, horiz, gap, req.tol, cfg.step)


def plan_iterated(req: PlanRequest, max_rounds: int = 10) -> list[PlanResult]:
    """Greedy chain of local plans whose vertical targets step toward the goal.

    Each round aims at the target base point with the vertical offset from the
    free lift clipped to 0.45·h.  Stops with :class:`DomainError` when a round
    cannot make progress.
    """
    g = req.gmodel
    out = []
    cur = req
    c = build_controller(g, req.spec)
    for _ in range(max_rounds):
        free = g.vertical(free_endpoint(cur, c))
        want = g.vertical(req.target)
        gap = want - free
        norm = float(np.linalg.norm(gap))
        if norm <= c.h / 2:
            out.append(plan_local(cur, c))
            return out
        step_t = cur.target.copy()
        step_t[g.q:] = free + gap * (0.45 * c.h / norm)
        res = plan_local(PlanRequest(g, cur.start, step_t, cur.spec, cur.tol, cur.cfg), c)
        out.append(res)
        end = res.curve.points[-1]
        if np.linalg.norm(g.vertical(req.target) - g.vertical(end)) >= norm:
            raise DomainError("iterated planning made no progress")
        cur = PlanRequest(g, end, req.target, cur.spec, cur.tol, cur.cfg)
    raise DomainError(f"target not reached in {max_rounds} rounds")
