"""Flows of (time-varying) polynomial fields and flow-schedule programs.

A schedule is a list of ``(field, duration)`` segments run one after the
other; :func:`commutator_schedule` and :func:`expr_schedule` build the
iterated-commutator programs whose endpoints displace by ``s^λ`` along the
bracket field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .curves import Curve
from .errors import BallExitError, NonFiniteError
from .fields import (BracketExpr, GraphicalModel, Leaf, PolyVectorField,
                     coordinate_field, eval_bracket_expr)

__all__ = [
    "Constant", "CornerBlend", "Reversed", "Scaled", "TimeVaryingField",
    "FlowSchedule", "IntegratorConfig", "integrate", "run_schedule",
    "commutator_schedule", "expr_schedule", "bracket_flow_error",
    "corner_blend", "coordinate_frame",
]


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"
    step: float = 1e-3
    max_points: int | None = None

    def __post_init__(self):
        if self.method != "rk4":
            raise ValueError(f"unsupported method {self.method!r}")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.max_points is not None and self.max_points < 2:
            raise ValueError("max_points must be at least 2")


# --------------------------------------------------------------------------
# time-varying fields; each reduces to sum_f (a_f + b_f t) F_f on its segment

@dataclass(frozen=True)
class Constant:
    field: PolyVectorField

    @property
    def dim(self):
        return self.field.dim

    def terms(self, duration):
        return [(self.field, 1.0, 0.0)]


@dataclass(frozen=True)
class CornerBlend:
    """((δ−t)/δ)·s_i·X_i + (t/δ)·s_j·X_j on local time t ∈ [0, δ]."""

    first: PolyVectorField
    second: PolyVectorField
    delta: float
    sign_first: int = 1
    sign_second: int = 1

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("CornerBlend duration must be positive")
        if self.sign_first not in (1, -1) or self.sign_second not in (1, -1):
            raise ValueError("signs must be ±1")
        if self.first.dim != self.second.dim:
            raise ValueError("dimension mismatch")

    @property
    def dim(self):
        return self.first.dim

    def terms(self, duration):
        d = self.delta
        return [(self.first, float(self.sign_first), -self.sign_first / d),
                (self.second, 0.0, self.sign_second / d)]


@dataclass(frozen=True)
class Reversed:
    inner: "TimeVaryingField"

    @property
    def dim(self):
        return self.inner.dim

    def terms(self, duration):
        # -(a + b (D - t)) = -(a + b D) + b t
        return [(F, -(a + b * duration), b) for F, a, b in self.inner.terms(duration)]


@dataclass(frozen=True)
class Scaled:
    inner: "TimeVaryingField"
    factor: float

    @property
    def dim(self):
        return self.inner.dim

    def terms(self, duration):
        c = self.factor
        return [(F, c * a, c * b) for F, a, b in self.inner.terms(duration)]


TimeVaryingField = Constant | CornerBlend | Reversed | Scaled


def evaluate(field: TimeVaryingField, x, t, duration) -> np.ndarray:
    """Value of a time-varying field at local time ``t`` of a segment."""
    out = np.zeros(field.dim)
    for F, a, b in field.terms(duration):
        out += (a + b * t) * F(x)
    return out


def invert(field: TimeVaryingField) -> TimeVaryingField:
    """The segment that undoes ``field``; CornerBlends flip order and signs."""
    if isinstance(field, Reversed):
        return field.inner
    if isinstance(field, CornerBlend):
        return CornerBlend(field.second, field.first, field.delta,
                           -field.sign_second, -field.sign_first)
    return Reversed(field)


def coordinate_frame(dim: int):
    """The constant coordinate fields ∂_1..∂_dim of R^dim."""
    return [coordinate_field(dim, j) for j in range(1, dim + 1)]


def corner_blend(frame, i, j, delta, sign_i=1, sign_j=1) -> CornerBlend:
    """CornerBlend from ``sign_i·X_i`` to ``sign_j·X_j`` (1-based indices)."""
    return CornerBlend(frame[i - 1], frame[j - 1], delta, sign_i, sign_j)


# --------------------------------------------------------------------------
# schedules

@dataclass(frozen=True)
class FlowSchedule:
    segments: tuple

    def __post_init__(self):
        segs = tuple((f, float(d)) for f, d in self.segments)
        for _, d in segs:
            if not d > 0:
                raise ValueError("segment durations must be positive")
        object.__setattr__(self, "segments", segs)

    @property
    def total_duration(self):
        return float(sum(d for _, d in self.segments))

    def __add__(self, other: "FlowSchedule") -> "FlowSchedule":
        """Concatenation ``self # other``: run self first."""
        return FlowSchedule(self.segments + other.segments)

    def __mul__(self, k: int) -> "FlowSchedule":
        return FlowSchedule(self.segments * k)

    def __len__(self):
        return len(self.segments)

    def inverse(self) -> "FlowSchedule":
        return FlowSchedule(tuple((invert(f), d) for f, d in reversed(self.segments)))


def _time_grid(duration, step):
    nfull = int(math.floor(duration / step + 1e-9))
    times = np.arange(nfull + 1, dtype=float) * step
    rem = duration - nfull * step
    if rem > 1e-12 * max(duration, 1.0) or nfull == 0:
        times = np.append(times, duration)
    else:
        times[-1] = duration
    return times


def integrate(field: TimeVaryingField, start, duration, cfg: IntegratorConfig,
              t0: float = 0.0) -> Curve:
    """Fixed-step RK4 flow of ``field`` from ``start`` for ``duration``."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    x0 = np.array(start, dtype=float)
    if x0.shape != (field.dim,):
        raise ValueError("start point dimension mismatch")
    if duration == 0:
        return Curve(np.array([t0]), x0[None, :])
    times = _time_grid(float(duration), cfg.step)
    if cfg.max_points is not None and times.size > cfg.max_points:
        raise ValueError(f"{times.size} samples exceed the cap of {cfg.max_points}")
    terms = field.terms(float(duration))
    tables = _kernels.encode_fields([F for F, _, _ in terms])
    a = np.array([t[1] for t in terms], dtype=float)
    b = np.array([t[2] for t in terms], dtype=float)
    pts = _kernels.rk4_path(x0, times, a, b, *tables)
    if not np.all(np.isfinite(pts)):
        raise NonFiniteError("non-finite state during integration")
    return Curve(times + t0, pts)


def run_schedule(s: FlowSchedule, start, cfg: IntegratorConfig) -> Curve:
    """Integrate each segment from the previous endpoint and join the samples."""
    if not s.segments:
        raise ValueError("empty schedule")
    times, pts = [], []
    x = np.array(start, dtype=float)
    t = 0.0
    for k, (f, d) in enumerate(s.segments):
        c = integrate(f, x, d, cfg)
        times.append(c.times[(k > 0):] + t)
        pts.append(c.points[(k > 0):])
        x = c.points[-1]
        t += d
    times = np.concatenate(times)
    if cfg.max_points is not None and times.size > cfg.max_points:
        raise ValueError(f"{times.size} samples exceed the cap of {cfg.max_points}")
    return Curve(times, np.vstack(pts))


def commutator_schedule(a: TimeVaryingField, b: TimeVaryingField, s: float,
                        k: int = 1) -> FlowSchedule:
    """(a # b # a⁻¹ # b⁻¹)^k with every segment lasting s/√k."""
    if not s > 0:
        raise ValueError("s must be positive")
    if not isinstance(k, int) or k < 1:
        raise ValueError("k must be a positive integer")
    tau = s / math.sqrt(k)
    unit = FlowSchedule(((a, tau), (b, tau), (invert(a), tau), (invert(b), tau)))
    return unit * k


def _frame_of(model):
    if isinstance(model, GraphicalModel):
        return model.frame
    return list(model)


def expr_schedule(e: BracketExpr, model, s: float) -> FlowSchedule:
    """The flow program A(s) of a bracket expression.

    ``model`` is a GraphicalModel or a plain sequence of fields indexed from 1.
    """
    frame = _frame_of(model)
    if isinstance(e, Leaf):
        if not 1 <= e.j <= len(frame):
            raise IndexError(f"leaf index {e.j} out of range")
        return FlowSchedule(((Constant(frame[e.j - 1]), s / e.k),) * e.k)
    tau = s / math.sqrt(e.k)
    left = expr_schedule(e.left, frame, tau)
    right = expr_schedule(e.right, frame, tau)
    return (left + right + left.inverse() + right.inverse()) * e.k


def _inside(curve, r):
    return bool(np.all(np.linalg.norm(curve.points, axis=1) <= r * (1 + 1e-12)))


def bracket_flow_error(e: BracketExpr, model: GraphicalModel, start, t: float,
                       cfg: IntegratorConfig) -> float:
    """‖A(φ_t)(start) − φ^{A(X)}_{t^λ}(start)‖."""
    start = np.asarray(start, dtype=float)
    if np.linalg.norm(start) > model.radius:
        raise BallExitError("start outside the model ball")
    orbit = run_schedule(expr_schedule(e, model, t), start, cfg)
    direct = integrate(Constant(eval_bracket_expr(e, model)), start, t ** e.length, cfg)
    if not (_inside(orbit, model.radius) and _inside(direct, model.radius)):
        raise BallExitError("orbit leaves the model ball")
    return float(np.linalg.norm(orbit.end - direct.end))
