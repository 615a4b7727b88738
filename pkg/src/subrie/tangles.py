"""Pretangles, smoothed tangle models and their deformations.

Tangle curves are assembled in a local plane with coordinates ``(a, b)``:
``a`` runs along the host axis ∂_i and ``b`` along the second leaf ∂_j of
the bracket expression.  A local program is a list of straight runs and
corner blends; running it through the coordinate flows of R² gives the
curve, which is then placed on the host.

Length-2 models are smoothed squares.  Longer expressions ``[i, B]`` are a
three-pass zigzag along the axis: the first pass carries a copy of the
tangle for ``B``, the return pass carries a mirrored copy with the opposite
displacement, and the third pass exits.  The passes are ``τ`` apart and the
copies are ``ρ`` away from the turns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .curves import Curve
from .errors import BallExitError
from .fields import Bracket, BracketExpr, GraphicalModel, Leaf, PolyVectorField
from .flows import (Constant, CornerBlend, FlowSchedule, IntegratorConfig,
                    coordinate_frame, expr_schedule, run_schedule)
from .lifting import lift, vertical_displacement

__all__ = [
    "TangleSpec", "AttachingModel", "TangleModel", "pretangle", "s_pretangle",
    "build_tangle_model", "birth_homotopy", "area_isotopy",
    "tangle_endpoint_displacement", "axis_host", "normalize_expr",
    "default_level_smoothing", "max_isotopy_factor", "tangle_width", "tangle_on_axis",
]

SAMPLES_PER_DELTA = 64


# --------------------------------------------------------------------------
# local programs: ("line", d, T) or ("blend", d1, d2, T) with d a 2-vector

_A = (1.0, 0.0)
_B = (0.0, 1.0)


def _neg(d):
    return (-d[0], -d[1])


def _comb(*terms):
    a = sum(c * d[0] for c, d in terms)
    b = sum(c * d[1] for c, d in terms)
    return (float(a), float(b))


def _line(d, T):
    if T < -1e-12:
        raise ValueError("smoothing parameters too large for the tangle size")
    return [("line", d, float(T))] if T > 1e-15 else []


def _blend(d1, d2, T):
    return [("blend", d1, d2, float(T))]


def _map_dirs(prog, f):
    out = []
    for seg in prog:
        if seg[0] == "line":
            out.append(("line", f(seg[1]), seg[2]))
        else:
            out.append(("blend", f(seg[1]), f(seg[2]), seg[3]))
    return out


def _reflect_a(prog):
    return _map_dirs(prog, lambda d: (-d[0], d[1]))


def _mirror_b(prog):
    return _map_dirs(prog, lambda d: (d[0], -d[1]))


def _inverse(prog):
    out = []
    for seg in reversed(prog):
        if seg[0] == "line":
            out.append(("line", _neg(seg[1]), seg[2]))
        else:
            out.append(("blend", _neg(seg[2]), _neg(seg[1]), seg[3]))
    return out


def _displacement(prog):
    a = b = 0.0
    for seg in prog:
        if seg[0] == "line":
            a += seg[1][0] * seg[2]
            b += seg[1][1] * seg[2]
        else:
            a += 0.5 * (seg[1][0] + seg[2][0]) * seg[3]
            b += 0.5 * (seg[1][1] + seg[2][1]) * seg[3]
    return a, b


_FIELDS: dict = {}


def _field(d):
    f = _FIELDS.get(d)
    if f is None:
        f = PolyVectorField(2, [{(0, 0): d[0]}, {(0, 0): d[1]}])
        _FIELDS[d] = f
    return f


def _run(prog, step) -> Curve:
    segs = []
    for seg in prog:
        if seg[0] == "line":
            segs.append((Constant(_field(seg[1])), seg[2]))
        else:
            segs.append((CornerBlend(_field(seg[1]), _field(seg[2]), seg[3]), seg[3]))
    return run_schedule(FlowSchedule(tuple(segs)), np.zeros(2), IntegratorConfig(step=step))


# --------------------------------------------------------------------------
# length-2 pieces

def _detour(d):
    # enters along b, leaves along -a after a small closed curl
    d1 = d / 4 - d / 50
    d2 = d / 25
    d3 = d / 50
    return (_line(_B, d1) + _blend(_B, _A, d2) + _line(_A, d1 - d3)
            + _blend(_A, _neg(_B), d2) + _line(_neg(_B), d1 - d3)
            + _blend(_neg(_B), _neg(_A), d2) + _line(_neg(_A), d / 4 - d3))


def _spt_loop(t, d, last, drop=0.0, run=0.0):
    na, nb = _neg(_A), _neg(_B)
    prog = (_line(_A, t - d / 2) + _blend(_A, _B, d) + _line(_B, t - d) + _detour(d)
            + _line(na, t - d) + _blend(na, nb, d) + _line(nb, t - 2 * d)
            + _blend(nb, _A, d))
    if last:
        prog += (_line(_A, t - 1.5 * d) + _blend(_A, nb, d) + _line(nb, drop)
                 + _blend(nb, _A, d) + _line(_A, run))
    return prog


def _spt_program(t, d):
    return _spt_loop(t, d, True)


def _coil_program(s, d, k):
    side = s / math.sqrt(k)
    prog = []
    for m in range(k):
        t_m = side - 1.5 * m * d
        if t_m < 2 * d:
            raise ValueError("too many nested copies for this size and smoothing")
        last = m == k - 1
        prog += _spt_loop(t_m, d, last, drop=(k - 1) * d / 2, run=(k - 1) * d / 2)
    return prog


def _lead_out(d):
    # rises δ/2 over an axis run of δ/2
    up = _comb((1, _A), (2, _B))
    return _blend(_A, up, d / 4) + _blend(up, _A, d / 4)


def _square(s, sign):
    b = (0.0, float(sign))
    return _line(_A, s) + _line(b, s) + _line(_neg(_A), s) + _line(_neg(b), s)


# --------------------------------------------------------------------------
# expression normal form

def normalize_expr(e: BracketExpr, axis: int | None = None):
    """Rewrite ``e`` as ``±[i, [i, ... [i, j]]]`` with iteration counts kept.

    Returns ``(expr, sign, i, j)``.  Antisymmetry is used to move the axis
    leaf ``i`` to the left at every level.
    """
    if isinstance(e, Leaf):
        raise ValueError("a tangle needs a bracket expression, not a leaf")
    if axis is None:
        axis = e.left.j if isinstance(e.left, Leaf) else (
            e.right.j if isinstance(e.right, Leaf) else None)
        if axis is None:
            raise ValueError("outer bracket has no leaf to serve as the axis")
    i = axis

    def rec(node):
        L, R = node.left, node.right
        if isinstance(L, Leaf) and L.j == i:
            head, rest, sgn = L, R, 1
        elif isinstance(R, Leaf) and R.j == i:
            head, rest, sgn = R, L, -1
        else:
            raise ValueError(f"expression {node} has no leaf {i} at its top level")
        if isinstance(rest, Leaf):
            if rest.j == i:
                raise ValueError("[i, i] is zero and carries no displacement")
            return Bracket(Leaf(i, head.k), rest, node.k), sgn, rest.j
        inner, s2, j = rec(rest)
        return Bracket(Leaf(i, head.k), inner, node.k), sgn * s2, j

    expr, sign, j = rec(e)
    return expr, sign, i, j


def _count(e, leaf):
    return sum(1 for l in e.leaves() if l == leaf)


def default_level_smoothing(length: int, delta: float):
    """(τ, ρ) for levels 3..length, doubling outward from δ."""
    return [(2.0 ** (l - 2) * delta, 2.0 ** (l - 2) * delta) for l in range(3, length + 1)]


# --------------------------------------------------------------------------
# recursive local models

@dataclass(frozen=True)
class _Local:
    prog: list
    w: float         # axis length from p1 to p2
    alpha: float     # offset of the pretangle anchor from p1
    ext: float       # axis extent of the pretangle
    pre: list        # associated pretangle model, p1 to p2


def _pure(e, s, sign):
    """Line program of the pretangle of a normalized expression."""
    k = e.k
    tau = s / math.sqrt(k)
    if isinstance(e.right, Leaf):
        return _square(tau, sign) * k
    inner = _pure(e.right, tau, sign)
    return (_line(_A, tau) + inner + _line(_neg(_A), tau) + _inverse(inner)) * k


def _pure_ext(e, s):
    tau = s / math.sqrt(e.k)
    if isinstance(e.right, Leaf):
        return tau
    return tau + _pure_ext(e.right, tau)


def _local(e, s, d, levels, sign) -> _Local:
    if isinstance(e.right, Leaf):
        side = s / math.sqrt(e.k)
        prog = _line(_A, d) + _coil_program(s, d, e.k) + _lead_out(d)
        if sign < 0:
            prog = _mirror_b(prog)
        w = side + 2 * d
        pre = _line(_A, d) + _square(side, sign) * e.k + _line(_A, side + d)
        return _Local(prog, w, d, side, pre)
    k = e.k
    tau_s = s / math.sqrt(k)
    one = _level(e, tau_s, d, levels, sign)
    if k == 1:
        return one
    return _Local(one.prog * k, k * one.w, one.alpha, (k - 1) * one.w + one.ext, one.pre * k)


def _level(e, s, d, levels, sign) -> _Local:
    tau, rho = levels[e.length]
    B = e.right
    i = e.left.j
    b1 = _local(B, s, d, levels, sign)
    b2 = _local(B, s, d, levels, sign * (-1) ** (_count(B, i) + 1))
    wB, aB, eB = b1.w, b1.alpha, b1.ext
    X4 = tau
    X3 = tau + rho + wB
    A = X3 - aB - eB
    X1 = A + s - aB
    X2 = X1 + wB + rho
    W = X2 + tau
    if X1 < tau + rho - 1e-12:
        raise ValueError("level smoothing too large for the tangle size")
    na, nb = _neg(_A), _neg(_B)
    dip = _comb((1, _A), (-2, _B))
    prog = (_blend(_A, dip, tau / 2) + _blend(dip, _A, tau / 2)
            + _line(_A, X1 - tau) + b1.prog + _line(_A, rho)
            + _blend(_A, _B, tau / 2) + _line(_B, tau / 2) + _blend(_B, na, tau / 2)
            + _line(na, X2 - X3) + _reflect_a(b2.prog) + _line(na, rho)
            + _blend(na, _B, tau / 2) + _line(_B, tau / 2) + _blend(_B, _A, tau / 2)
            + _line(_A, X2 - X4)
            + _blend(_A, dip, tau / 2) + _blend(dip, _A, tau / 2))
    pre = _line(_A, A) + _pure(Bracket(e.left, B, 1), s, sign) + _line(_A, W - A)
    return _Local(prog, W, A, s + eB, pre)


def _levels_dict(length, delta, level_smoothing):
    out = {}
    for l, (tau, rho) in zip(range(3, length + 1), level_smoothing):
        out[l] = (float(tau), float(rho))
    return out


# --------------------------------------------------------------------------
# public constructions

def pretangle(e: BracketExpr, mu: float, q: int | None = None, step: float | None = None) -> Curve:
    """Base polyline traced by the coordinate-flow schedule of ``e`` at s = μ."""
    if not mu > 0:
        raise ValueError("μ must be positive")
    q = q or max(e.leaves())
    if max(e.leaves()) > q:
        raise IndexError("leaf index exceeds the base dimension")
    step = step or mu / 2048
    c = run_schedule(expr_schedule(e, coordinate_frame(q), mu), np.zeros(q),
                     IntegratorConfig(step=step))
    return c.close() if isinstance(e, Bracket) else c


def _embed(local_pts, q, i, j, origin):
    pts = np.repeat(np.asarray(origin, dtype=float)[None, :], len(local_pts), axis=0)
    pts[:, i - 1] += local_pts[:, 0]
    pts[:, j - 1] += local_pts[:, 1]
    return pts


def s_pretangle(i: int, j: int, mu: float, delta: float, q: int | None = None) -> Curve:
    """Smoothed [∂_i, ∂_j] square of side μ starting at the origin.

    Three corners are rounded by corner blends of duration δ and the upper
    right one by a small closed curl.  The curve ends at ``(μ+δ/2, −δ/2)`` in the
    (i, j) plane heading along ∂_i; use :meth:`Curve.close` for its area.
    """
    if i == j:
        raise ValueError("i and j must differ")
    if not (delta > 0 and delta <= mu / 10 * (1 + 1e-12)):
        raise ValueError("need 0 < δ ≤ μ/10")
    q = q or max(i, j)
    c = _run(_spt_program(mu, delta), delta / SAMPLES_PER_DELTA)
    return Curve(c.times, _embed(c.points, q, i, j, np.zeros(q)))


@dataclass(frozen=True)
class TangleSpec:
    expr: BracketExpr
    mu: float
    delta: float
    level_smoothing: tuple = ()
    sign: int = 1

    def __post_init__(self):
        if not isinstance(self.expr, Bracket):
            raise ValueError("a tangle needs a bracket expression")
        if not self.mu > 0:
            raise ValueError("μ must be positive")
        if not (self.delta > 0 and self.delta <= self.mu / 10 * (1 + 1e-12)):
            raise ValueError("need 0 < δ ≤ μ/10")
        if self.sign not in (1, -1):
            raise ValueError("sign must be ±1")
        levels = tuple(tuple(map(float, p)) for p in self.level_smoothing)
        if not levels:
            levels = tuple(default_level_smoothing(self.expr.length, self.delta))
        if len(levels) != max(self.expr.length - 2, 0):
            raise ValueError("need one (τ, ρ) pair per level above length 2")
        prev = self.delta
        for tau, rho in levels:
            if not (tau > prev and rho > prev):
                raise ValueError("level smoothing must increase strictly outward")
            prev = max(tau, rho)
        object.__setattr__(self, "level_smoothing", levels)

    @property
    def length(self):
        return self.expr.length


@dataclass(frozen=True, eq=False)
class AttachingModel:
    axis: int
    size: float
    t1: float
    t2: float
    box_center: np.ndarray
    box_half: float
    inner_curve: Curve

    @property
    def p1(self):
        return self.inner_curve.start

    @property
    def p2(self):
        return self.inner_curve.end

    def contains(self, pts, tol=1e-12):
        pts = np.atleast_2d(pts)
        return bool(np.all(np.abs(pts - self.box_center) <= self.box_half + tol))


def _smoothstep(s):
    return s * s * (3.0 - 2.0 * s)


def _psi(r, F):
    out = np.zeros_like(r)
    out[r <= 1.0] = 1.0
    mid = (r > 1.0) & (r < F)
    out[mid] = 1.0 - _smoothstep((r[mid] - 1.0) / (F - 1.0))
    return out


def max_isotopy_factor(F: float) -> float:
    """Largest axis scale k keeping x ↦ x(1 + ψ(k−1)) monotone for support F."""
    if F <= 1.0:
        return 1.0
    r = np.linspace(1.0, F, 20001)
    s = (r - 1.0) / (F - 1.0)
    slope = (1.0 - _smoothstep(s)) - r * 6.0 * s * (1.0 - s) / (F - 1.0)
    m = slope.min()
    return math.inf if m >= 0 else 1.0 + 1.0 / abs(m)


@dataclass(frozen=True, eq=False)
class TangleModel:
    """A tangle attached to a straight host window.

    ``window`` is the host time interval that the deformations may touch;
    the tangle itself occupies ``attaching.t1 .. attaching.t2`` at its centre.
    """

    spec: TangleSpec
    attaching: AttachingModel
    host: Curve
    window: tuple
    plane: tuple
    pretangle_model: Curve
    support_factor: float
    local_width: float

    @property
    def total_area(self):
        return self.spec.mu ** self.spec.length

    @property
    def box_side(self):
        return 2.0 * self.attaching.box_half

    @property
    def iso_exponent(self):
        """ρ_i: how often the axis leaf occurs in the expression."""
        return _count(self.spec.expr, self.plane[0])

    @property
    def max_box_factor(self):
        return max_isotopy_factor(self.support_factor) ** self.iso_exponent

    @property
    def max_displacement(self):
        return self.max_box_factor * self.total_area

    @property
    def axis_center(self):
        return self.host.at(0.5 * (self.window[0] + self.window[1]))

    @cached_property
    def splice(self) -> Curve:
        """Host with β spliced in; samples exist at both window ends."""
        host = self.host
        t1w, t2w = self.window
        at = self.attaching
        beta = at.inner_curve
        t = host.times
        eps = _time_eps(host)
        before = t < at.t1 - eps
        after = t > at.t2 + eps
        times = np.concatenate([t[before], beta.times, t[after]])
        pts = np.vstack([host.points[before], beta.points, host.points[after]])
        extra_t, extra_p = [], []
        for tw in (t1w, t2w):
            near = np.abs(times - tw) <= eps
            if near.any():
                times[np.argmax(near)] = tw
            else:
                extra_t.append(tw)
                extra_p.append(host.at(tw))
        if extra_t:
            times = np.concatenate([times, extra_t])
            pts = np.vstack([pts, extra_p])
            order = np.argsort(times, kind="stable")
            times, pts = times[order], pts[order]
        return Curve(times, pts)

    def psi_map(self, points, u):
        """Apply Ψ^u; rows with ψ = 0 are returned bitwise unchanged."""
        if u < 0:
            raise ValueError("u must be non-negative")
        if u > self.max_box_factor * (1 + 1e-12):
            raise ValueError(f"u={u} exceeds the maximal box factor {self.max_box_factor:.6g}")
        pts = np.array(points, dtype=float)
        k = u ** (1.0 / self.iso_exponent)
        if k == 1.0:
            return pts
        c = self.attaching.box_center
        r = np.max(np.abs(pts - c), axis=1) / self.attaching.box_half
        psi = _psi(r, self.support_factor)
        sel = psi > 0
        ax = self.plane[0] - 1
        pts[sel, ax] = c[ax] + (pts[sel, ax] - c[ax]) * (1.0 + psi[sel] * (k - 1.0))
        return pts


def _time_eps(c: Curve) -> float:
    # samples closer than this to a splice point are treated as sitting on it
    return 1e-9 * max(c.spacing(), 1e-300)


def axis_host(q: int, i: int, start, length: float, step: float, t0: float = 0.0) -> Curve:
    """Unit-speed straight host along +∂_i sampled every ``step``."""
    n = max(int(math.ceil(length / step - 1e-9)), 1)
    s = np.linspace(0.0, length, n + 1)
    pts = np.repeat(np.asarray(start, dtype=float)[None, :], n + 1, axis=0)
    pts[:, i - 1] += s
    return Curve(s + t0, pts)


def _check_axis(host, i, t1, t2):
    if not (host.times[0] <= t1 < t2 <= host.times[-1]):
        raise ValueError("attachment window outside the host's time domain")
    sel = (host.times > t1) & (host.times < t2)
    t = np.concatenate([[t1], host.times[sel], [t2]])
    p = np.vstack([host.at(t1), host.points[sel], host.at(t2)])
    scale = max(1.0, float(np.max(np.abs(p))))
    others = np.delete(p, i - 1, axis=1)
    if np.max(np.abs(others - others[0]), initial=0.0) > 1e-12 * scale:
        raise ValueError(f"host is not parallel to ∂_{i} on the window")
    x = p[:, i - 1]
    v = (x[-1] - x[0]) / (t2 - t1)
    if not v > 0:
        raise ValueError(f"host must move along +∂_{i} on the window")
    if np.max(np.abs(x - (x[0] + v * (t - t1)))) > 1e-9 * scale:
        raise ValueError("host speed is not constant on the window")
    return v


def build_tangle_model(spec: TangleSpec, host: Curve, t1: float, t2: float) -> TangleModel:
    """Attach the tangle of ``spec`` at the centre of the host window [t1, t2]."""
    expr, nsign, i, j = normalize_expr(spec.expr)
    q = host.dim
    if max(i, j) > q:
        raise IndexError("expression leaves exceed the base dimension")
    levels = _levels_dict(expr.length, spec.delta, spec.level_smoothing)
    loc = _local(expr, spec.mu, spec.delta, levels, spec.sign * nsign)
    v = _check_axis(host, i, t1, t2)
    L = v * (t2 - t1)
    W = loc.w
    if L < W * (1 - 1e-12):
        raise ValueError(f"window length {L:.6g} is shorter than the tangle width {W:.6g}")
    step = spec.delta / SAMPLES_PER_DELTA
    raw = _run(loc.prog, step)
    da, db = _displacement(loc.prog)
    if abs(da - W) > 1e-9 * W or abs(db) > 1e-9 * W:
        raise AssertionError("tangle program does not end on the axis")
    tc = 0.5 * (t1 + t2)
    ta, tb = tc - W / (2 * v), tc + W / (2 * v)
    origin = host.at(ta)
    local = raw.points.copy()
    local[-1] = (W, 0.0)
    times = ta + raw.times / raw.times[-1] * (tb - ta)
    times[-1] = tb
    beta = Curve(times, _embed(local, q, i, j, origin))
    # box: a cube of side W for length 2, centred on the b-extent otherwise
    if expr.length == 2:
        side = W
        sgn = spec.sign * nsign
        b_lo, b_hi = (-spec.delta, side - spec.delta) if sgn > 0 else \
            (-(side - spec.delta), spec.delta)
    else:
        b_lo, b_hi = float(local[:, 1].min()), float(local[:, 1].max())
        side = max(W, b_hi - b_lo)
    center = origin.copy()
    center[i - 1] += W / 2
    center[j - 1] += 0.5 * (b_lo + b_hi)
    at = AttachingModel(i, W, ta, tb, center, side / 2, beta)
    if not at.contains(beta.points, tol=1e-9 * side):
        raise AssertionError("tangle leaves its box")
    pre = _run(loc.pre, step)
    pre_model = Curve(pre.times, _embed(pre.points, q, i, j, origin))
    return TangleModel(spec, at, host, (float(t1), float(t2)), (i, j), pre_model,
                       L / side, W)


def _window_curve(model: TangleModel, u: float):
    c = model.splice
    t1w, t2w = model.window
    sel = (c.times >= t1w) & (c.times <= t2w)
    pts = model.psi_map(c.points[sel], u)
    return c.times[sel], pts


def area_isotopy(model: TangleModel, u: float) -> Curve:
    """The spliced host after Ψ^u, which rescales the axis coordinate by u^{1/ρ_i} in the box."""
    c = model.splice
    if u == 1.0:
        return c
    t1w, t2w = model.window
    sel = (c.times >= t1w) & (c.times <= t2w)
    pts = c.points.copy()
    pts[sel] = model.psi_map(c.points[sel], u)
    return Curve(c.times, pts)


def birth_homotopy(host: Curve, model: TangleModel, theta: float, u: float = 1.0) -> Curve:
    """Grow the (area-isotoped) tangle from nothing at θ=0 to full size at θ=1.

    The middle fraction θ of the window carries the window curve scaled by θ
    about the window's axis centre; the rest of the window is the host.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("θ must lie in [0, 1]")
    if theta == 0.0:
        return host
    t1w, t2w = model.window
    D = t2w - t1w
    wt, wp = _window_curve(model, u)
    c = model.axis_center
    lo = t1w + 0.5 * (1.0 - theta) * D
    hi = t1w + 0.5 * (1.0 + theta) * D
    new_t = lo + theta * (wt - t1w)
    new_p = wp if theta == 1.0 else c + theta * (wp - c)
    eps = _time_eps(host)
    if theta == 1.0:
        new_t = wt
        lo, hi = t1w, t2w
    keep_lo = host.times < lo - eps
    keep_hi = host.times > hi + eps
    times = np.concatenate([host.times[keep_lo], new_t, host.times[keep_hi]])
    pts = np.vstack([host.points[keep_lo], new_p, host.points[keep_hi]])
    return Curve(times, pts)


def tangle_endpoint_displacement(model: TangleModel, gmodel: GraphicalModel, u: float,
                                 start, cfg: IntegratorConfig) -> np.ndarray:
    """Vertical endpoint of the lifted isotoped tangle minus that of the bare host.

    ``start`` is either the full starting point in R^n or its vertical part.
    """
    start = np.atleast_1d(np.asarray(start, dtype=float))
    q = gmodel.q
    if start.shape == (gmodel.n,):
        if np.max(np.abs(start[:q] - model.host.start)) > 1e-12:
            raise ValueError("start does not lie over the host's first point")
        start = start[q:]
    out = []
    for base in (area_isotopy(model, u), model.host):
        res = lift(gmodel, base, start, cfg)
        if res.exited:
            raise BallExitError(f"lift left the ball at t={res.exit_time:.6g}")
        out.append(vertical_displacement(res.curve, gmodel))
    return out[0] - out[1]


def tangle_width(spec: TangleSpec) -> float:
    """Length of host axis consumed by the tangle of ``spec``."""
    expr, nsign, _, _ = normalize_expr(spec.expr)
    levels = _levels_dict(expr.length, spec.delta, spec.level_smoothing)
    return _local(expr, spec.mu, spec.delta, levels, spec.sign * nsign).w


def tangle_on_axis(spec: TangleSpec, q: int, window_factor: float = 1.5,
                   step: float | None = None) -> TangleModel:
    """Tangle on a straight host through the origin along its axis.

    The attachment window is ``window_factor`` box sides long and is centred
    at the origin, so ``area_isotopy`` accepts u up to max_box_factor.
    """
    if not window_factor >= 1:
        raise ValueError("window_factor must be at least 1")
    _, _, i, _ = normalize_expr(spec.expr)
    side = tangle_width(spec)
    for _ in range(2):
        L = window_factor * side
        h = step if step is not None else min(1e-3, L / 200)
        start = np.zeros(q)
        start[i - 1] = -L / 2
        host = axis_host(q, i, start, L, h)
        model = build_tangle_model(spec, host, 0.0, host.times[-1])
        if model.box_side <= side * (1 + 1e-12):
            return model
        side = model.box_side
    return model
