"""Horizontal lifts of base curves and the measurements built on them.

The lift of a base curve γ in R^q through a graphical model solves
``x' = sum_j γ'_j X_j(x)`` with γ' taken from the piecewise-linear
interpolation of the base samples.  Because the base components of X_j are
the coordinate fields, the projection of the lift reproduces γ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import directed_hausdorff

from . import _kernels
from .curves import Curve, polyline_length
from .errors import BallExitError
from .fields import GraphicalModel, validate_model
from .flows import IntegratorConfig

__all__ = [
    "Curve", "LiftOutcome", "Crossing", "lift", "vertical_displacement",
    "naive_bound_check", "enclosed_area", "area_lift_check",
    "stop_reparametrize", "self_intersection_gap", "base_crossings",
    "hausdorff_distance", "bracket_plane",
]


@dataclass(frozen=True)
class LiftOutcome:
    curve: Curve
    exited: bool
    exit_time: float | None = None


def lift(model: GraphicalModel, base: Curve, start_vertical, cfg: IntegratorConfig) -> LiftOutcome:
    """Lift ``base`` from the fibre point ``start_vertical``.

    Samples are recorded at the base sample times; between them the RK4 step
    is at most ``cfg.step``.  An orbit leaving the closed ball is truncated at
    the last sample inside it.
    """
    if base.dim != model.q:
        raise ValueError(f"base curve must live in R^{model.q}")
    v0 = np.atleast_1d(np.asarray(start_vertical, dtype=float))
    if v0.shape != (model.n - model.q,):
        raise ValueError(f"start_vertical must have {model.n - model.q} entries")
    x0 = np.concatenate([base.points[0], v0])
    r2 = model.radius ** 2
    if not x0 @ x0 <= r2:
        raise BallExitError("lift starts outside the model ball")
    if cfg.max_points is not None and len(base) > cfg.max_points:
        raise ValueError(f"{len(base)} samples exceed the cap of {cfg.max_points}")
    pts, n_ok, t_exit = _kernels.lift_path(
        x0, np.ascontiguousarray(base.times), np.ascontiguousarray(base.points),
        float(cfg.step), r2, *model._horizontal_tables)
    exited = n_ok < len(base)
    curve = Curve(base.times[:n_ok], pts[:n_ok])
    return LiftOutcome(curve, exited, float(t_exit) if exited else None)


def vertical_displacement(h: Curve, model: GraphicalModel) -> np.ndarray:
    return model.vertical(h.points[-1]) - model.vertical(h.points[0])


def _lift_or_raise(model, base, start_vertical, cfg):
    out = lift(model, base, start_vertical, cfg)
    if out.exited:
        raise BallExitError(f"lift left the ball at t={out.exit_time:.6g}")
    return out.curve


def naive_bound_check(model, base, start_vertical, cfg, constant=None):
    """Return ``(‖Δ vertical‖, len(base)·C·r)``; nothing is asserted."""
    h = _lift_or_raise(model, base, start_vertical, cfg)
    actual = float(np.linalg.norm(vertical_displacement(h, model)))
    if constant is None:
        constant = validate_model(model).constant
    return actual, polyline_length(base) * constant * model.radius


def enclosed_area(base: Curve, i: int = 1, j: int = 2) -> float:
    """Signed shoelace area of the (x_i, x_j) shadow of a closed polyline."""
    if not base.closed:
        raise ValueError("enclosed_area needs a closed curve")
    x = base.points[:, i - 1]
    y = base.points[:, j - 1]
    return float(0.5 * np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))


def bracket_plane(model: GraphicalModel, z: int):
    """Base plane (i, j) whose bracket generates ∂_z; taken from A_z."""
    e = model.generators.get(z)
    if e is None:
        raise ValueError(f"no generator for vertical index {z}")
    leaves = e.leaves()
    i = leaves[0]
    others = [l for l in leaves if l != i]
    if not others:
        raise ValueError("generator does not span a plane")
    return i, others[0]


def area_lift_check(model, loop: Curve, z: int, start_vertical, cfg, plane=None):
    """Return ``(Δx_z of the lift, enclosed area in the bracket plane)``."""
    if not loop.closed:
        raise ValueError("loop must be closed")
    i, j = plane if plane is not None else bracket_plane(model, z)
    h = _lift_or_raise(model, loop, start_vertical, cfg)
    delta = float(h.points[-1, z - 1] - h.points[0, z - 1])
    return delta, enclosed_area(loop, i, j)


# --------------------------------------------------------------------------
# stopping trick

def _hermite(s):
    # f(0)=0, f'(0)=0, f(1)=1, f'(1)=2/3 so the speed joins smoothly at 1
    return s * s * (7.0 / 3.0 - (4.0 / 3.0) * s)


def _hermite_inv(y):
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = _hermite(mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def stop_reparametrize(c: Curve, t0: float, width: float) -> Curve:
    """Precompose ``c`` with a non-decreasing φ that is constant near ``t0``.

    φ(t) = t0 on |t−t0| ≤ width/3 and φ(t) = t outside the window; in between
    a cubic keeps φ C¹.  New samples sit at φ⁻¹ of the old sample times, so
    the polyline image is unchanged.
    """
    if not width > 0:
        raise ValueError("width must be positive")
    if t0 - width < c.times[0] or t0 + width > c.times[-1]:
        raise ValueError("stopping window lies outside the time domain")
    w = float(width)
    t = c.times
    inside = (t > t0 - w) & (t < t0 + w)
    left = inside & (t < t0)
    right = inside & (t > t0)
    # φ(t0 ± (w/3 + 2w/3·s)) = t0 ± w·f(s)
    s_left = _hermite_inv((t0 - t[left]) / w)
    s_right = _hermite_inv((t[right] - t0) / w)
    new_left = t0 - (w / 3 + 2 * w / 3 * s_left)
    new_right = t0 + (w / 3 + 2 * w / 3 * s_right)
    p0 = c.at(t0)
    times = np.concatenate([t[~inside & (t <= t0)], new_left,
                            [t0 - w / 3, t0, t0 + w / 3], new_right,
                            t[~inside & (t > t0)]])
    pts = np.vstack([c.points[~inside & (t <= t0)], c.points[left],
                     np.repeat(p0[None, :], 3, axis=0), c.points[right],
                     c.points[~inside & (t > t0)]])
    order = np.argsort(times, kind="stable")
    times, pts = times[order], pts[order]
    keep = np.concatenate([[True], np.diff(times) > 1e-15 * max(1.0, abs(t0))])
    return Curve(times[keep], pts[keep], c.closed)


# --------------------------------------------------------------------------
# embeddedness measurements

def self_intersection_gap(c: Curve, window: float) -> float:
    """Minimum distance between samples more than ``window`` apart in time.

    Closed curves use the cyclic time separation.  Returns ``inf`` if no pair
    is far enough apart.
    """
    if not window > c.spacing():
        raise ValueError("window must exceed the largest sample spacing")
    pts = c.points
    t = c.times
    n = len(c)
    period = t[-1] - t[0]

    tree = cKDTree(pts)
    best = np.inf
    pending = np.arange(n)
    k = 16
    while pending.size:
        kk = min(k, n)
        d, idx = tree.query(pts[pending], kk)
        d = d.reshape(pending.size, kk)
        idx = idx.reshape(pending.size, kk)
        ok = _separated_rows(t, pending, idx, window, period if c.closed else None)
        found = ok.any(axis=1)
        if found.any():
            dmin = np.where(ok, d, np.inf).min(axis=1)
            best = min(best, float(dmin[found].min()))
        unresolved = ~found & (d[:, -1] < best)
        if kk == n:
            break
        pending = pending[unresolved]
        k *= 4
    return float(best)


def _separated_rows(t, rows, idx, window, period):
    sep = np.abs(t[rows][:, None] - t[idx])
    if period is not None:
        sep = np.minimum(sep, period - sep)
    return sep > window


@dataclass(frozen=True)
class Crossing:
    """Transverse self-crossing of a planar shadow.

    ``ta < tb`` are the two times through ``point``; ``area`` is the signed
    shoelace area of the sub-loop traced between them.
    """

    ta: float
    tb: float
    point: np.ndarray
    area: float


def base_crossings(c: Curve, i: int = 1, j: int = 2) -> list[Crossing]:
    """Self-crossings of the (x_i, x_j) shadow of a polyline."""
    P = c.points[:, [i - 1, j - 1]]
    a, b = P[:-1], P[1:]
    nseg = len(a)
    if nseg < 3:
        return []
    lengths = np.linalg.norm(b - a, axis=1)
    mids = 0.5 * (a + b)
    tree = cKDTree(mids)
    pairs = tree.query_pairs(float(lengths.max()) + 1e-15, output_type="ndarray")
    if pairs.size == 0:
        return []
    pairs = pairs[np.abs(pairs[:, 0] - pairs[:, 1]) >= 2]
    if c.closed:
        pairs = pairs[~((pairs.min(axis=1) == 0) & (pairs.max(axis=1) == nseg - 1))]
    p, q = pairs.min(axis=1), pairs.max(axis=1)
    r = b[p] - a[p]
    s = b[q] - a[q]
    den = r[:, 0] * s[:, 1] - r[:, 1] * s[:, 0]
    qp = a[q] - a[p]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / den
        v = (qp[:, 0] * r[:, 1] - qp[:, 1] * r[:, 0]) / den
    hit = (den != 0) & (u >= 0) & (u < 1) & (v >= 0) & (v < 1)
    out = []
    for pi, qi, ui, vi in zip(p[hit], q[hit], u[hit], v[hit]):
        point = a[pi] + ui * (b[pi] - a[pi])
        loop = np.vstack([point, P[pi + 1: qi + 1], point])
        area = 0.5 * float(np.sum(loop[:-1, 0] * loop[1:, 1] - loop[1:, 0] * loop[:-1, 1]))
        ta = c.times[pi] + ui * (c.times[pi + 1] - c.times[pi])
        tb = c.times[qi] + vi * (c.times[qi + 1] - c.times[qi])
        out.append(Crossing(float(ta), float(tb), point, area))
    out.sort(key=lambda x: x.ta)
    return out


def hausdorff_distance(a: Curve, b: Curve) -> float:
    """Symmetric Hausdorff distance between the sample sets."""
    return float(max(directed_hausdorff(a.points, b.points)[0],
                     directed_hausdorff(b.points, a.points)[0]))
