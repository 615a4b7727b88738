"""Command-line interface: ``subrie <command> [flags]``.

Exit codes: 0 success, 1 domain failure (ball exit, Newton failure, failed
check), 2 usage or I/O error.  Curves are written as CSV with header
``t,x1,...,xn`` and 17 significant digits; reports are JSON.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .controllers import (ControllerSpec, EndpointMap, build_controller, jacobian,
                          max_feasible_h, solve_displacement)
from .curves import Curve
from .errors import DomainError, SchemaError
from .fields import (builtin_model, format_expr, load_model, model_to_document,
                     parse_expr, validate_model)
from .flows import (Constant, IntegratorConfig, bracket_flow_error, expr_schedule,
                    run_schedule)
from .lifting import area_lift_check, bracket_plane, enclosed_area, lift
from .planner import PlanRequest, plan_iterated, plan_local, verify_plan
from .tangles import (TangleSpec, birth_homotopy, normalize_expr, tangle_endpoint_displacement,
                      tangle_on_axis)

DEFAULT_STEP = 1e-3
DEFAULT_TOL = 1e-6
SUITES = ("bracket-flows", "area-lift", "scaling-laws", "controller", "all")


class UsageError(Exception):
    """Bad flags or unreadable input; maps to exit code 2."""


# --------------------------------------------------------------------------
# I/O

def _atomic_write(path, text: str):
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def curve_to_csv(c: Curve) -> str:
    buf = io.StringIO()
    buf.write(",".join(["t"] + [f"x{k + 1}" for k in range(c.dim)]) + "\n")
    for t, p in zip(c.times, c.points):
        buf.write(",".join(f"{v:.17g}" for v in (t, *p)) + "\n")
    return buf.getvalue()


def write_curve(path, c: Curve):
    _atomic_write(path, curve_to_csv(c))


def read_curve(path) -> Curve:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    if not rows or not rows[0] or rows[0][0].strip() != "t":
        raise UsageError(f"{path}: header must start with 't'")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] != len(rows[0]):
        raise UsageError(f"{path}: ragged or empty table")
    pts = data[:, 1:]
    closed = len(pts) > 2 and np.max(np.abs(pts[0] - pts[-1])) <= 1e-12
    try:
        return Curve(data[:, 0], pts, closed)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


# --------------------------------------------------------------------------
# flag helpers

def _vector(text, name):
    if text is None:
        return None
    try:
        return np.array([float(x) for x in text.split(",")], dtype=float)
    except ValueError:
        raise UsageError(f"--{name} must be a comma-separated list of numbers") from None


def _model(args):
    if args.builtin:
        try:
            return builtin_model(args.builtin)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    try:
        text = Path(args.file).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {args.file}: {exc}") from None
    try:
        return load_model(text)
    except (SchemaError, ValueError) as exc:
        raise UsageError(f"{args.file}: {exc}") from None


def _cfg(args):
    cap = os.environ.get("SUBRIE_MAX_POINTS")
    try:
        cap = int(cap) if cap else None
    except ValueError:
        raise UsageError("SUBRIE_MAX_POINTS must be an integer") from None
    try:
        return IntegratorConfig(step=args.step, max_points=cap)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _expr(text):
    try:
        return parse_expr(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check(name, passed, value=None, tolerance=None, **extra):
    out = {"name": name, "passed": bool(passed)}
    if value is not None:
        out["value"] = value
    if tolerance is not None:
        out["tolerance"] = tolerance
    out.update(extra)
    return out


def _slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


# --------------------------------------------------------------------------
# commands; each returns (checks, results, outputs)

def cmd_model_validate(args):
    m = _model(args)
    rep = validate_model(m, args.tol)
    checks = [_check(c.name, c.passed, c.residual, c.tol, detail=c.detail)
              for c in rep.checks]
    return checks, {"C": rep.constant, "model": model_to_document(m)}, []


def cmd_flow(args):
    m = _model(args)
    cfg = _cfg(args)
    e = _expr(args.expr)
    start = _vector(args.start, "start")
    start = np.zeros(m.n) if start is None else start
    if start.shape != (m.n,):
        raise UsageError(f"--start needs {m.n} entries")
    c = run_schedule(expr_schedule(e, m, args.s), start, cfg)
    results = {"expr": format_expr(e), "endpoint": c.end, "displacement": c.end - start}
    checks = []
    if e.length > 1:
        err = bracket_flow_error(e, m, start, args.s, cfg)
        results["bracket_flow_error"] = err
        results["error_over_t_lambda"] = err / args.s ** e.length
    outs = []
    if args.out:
        write_curve(args.out, c)
        outs.append(args.out)
    return checks, results, outs


def cmd_lift(args):
    m = _model(args)
    cfg = _cfg(args)
    base = read_curve(args.base)
    if base.dim != m.q:
        raise UsageError(f"base curve must have {m.q} coordinates")
    sv = _vector(args.start_vert, "start-vert")
    sv = np.zeros(m.n - m.q) if sv is None else sv
    if sv.shape != (m.n - m.q,):
        raise UsageError(f"--start-vert needs {m.n - m.q} entries")
    out = lift(m, base, sv, cfg)
    c = out.curve
    results = {"exited": out.exited, "exit_time": out.exit_time,
               "vertical_displacement": m.vertical(c.end) - sv, "samples": len(c)}
    if base.closed and m.q >= 2:
        results["enclosed_area_12"] = enclosed_area(base, 1, 2)
    outs = []
    if args.out:
        write_curve(args.out, c)
        outs.append(args.out)
    checks = [_check("stayed_in_ball", not out.exited)]
    return checks, results, outs


def cmd_tangle(args):
    m = _model(args)
    cfg = _cfg(args)
    e = _expr(args.expr)
    delta = args.delta if args.delta is not None else args.mu / 20
    spec = TangleSpec(e, args.mu, delta, sign=args.sign)
    model = tangle_on_axis(spec, m.q, args.window_factor)
    start = np.zeros(m.n - m.q)
    base = birth_homotopy(model.host, model, args.theta, args.u)
    out = lift(m, base, start, cfg)
    if out.exited:
        raise DomainError(f"tangle lift left the ball at t={out.exit_time:.6g}")
    bare = lift(m, model.host, start, cfg)
    disp = m.vertical(out.curve.end) - m.vertical(bare.curve.end)
    z = int(np.argmax(np.abs(disp))) + m.q + 1
    results = {"expr": format_expr(e), "mu": args.mu, "delta": delta, "u": args.u,
               "theta": args.theta, "sign": args.sign, "total_area": model.total_area,
               "box_side": model.box_side, "max_box_factor": model.max_box_factor,
               "displacement": disp, "direction": z,
               "displacement_over_area": float(disp[z - m.q - 1] / model.total_area)}
    outs = []
    if args.out:
        write_curve(args.out, out.curve)
        outs.append(args.out)
    return [], results, outs


def _controller_spec(args, m):
    h = args.h if args.h is not None else 0.9 * max_feasible_h(m, args.R)
    S = args.S if args.S is not None else h / 4
    return ControllerSpec(R=args.R, h=h, S=S, delta=args.delta)


def cmd_controller(args):
    m = _model(args)
    cfg = _cfg(args)
    spec = _controller_spec(args, m)
    c = build_controller(m, spec)
    em = EndpointMap.create(c, cfg=cfg)
    d = _vector(args.d, "d")
    d = np.zeros(c.dim) if d is None else d
    if d.shape != (c.dim,):
        raise UsageError(f"--d needs {c.dim} entries")
    lifted = em.lifted(d, args.theta)
    J = jacobian(em, np.zeros(c.dim))
    results = {"R": spec.R, "h": spec.h, "S": spec.S, "d": d, "theta": args.theta,
               "endpoint_vertical": m.vertical(lifted.end), "ep0": em(np.zeros(c.dim)),
               "jacobian": J, "jacobian_error_inf": float(np.abs(J - np.eye(c.dim)).sum(1).max()),
               "slots": [{"index": s.index, "sign": s.sign, "mu": s.mu, "delta": s.delta,
                          "center": s.center} for s in c.slots]}
    outs = []
    if args.out:
        write_curve(args.out, lifted)
        outs.append(args.out)
    return [], results, outs


def cmd_plan(args):
    m = _model(args)
    cfg = _cfg(args)
    spec = _controller_spec(args, m)
    start = _vector(args.start, "start")
    start = np.zeros(m.n) if start is None else start
    target = _vector(args.target, "target")
    if start.shape != (m.n,) or target.shape != (m.n,):
        raise UsageError(f"--start and --target need {m.n} entries")
    req = PlanRequest(m, start, target, spec, args.tol, cfg)
    parts = plan_iterated(req, args.max_rounds) if args.iterate else [plan_local(req)]
    res = parts[-1]
    reports = []
    cur = start
    for p in parts:
        sub = PlanRequest(m, cur, p.curve.end, spec, args.tol, cfg)
        reports.append(verify_plan(p, sub, cfg))
        cur = p.curve.end
    final = verify_plan(res, PlanRequest(m, parts[-1].curve.start, target, spec, args.tol, cfg), cfg)
    checks = [_check("endpoint", final.endpoint_ok, final.endpoint_error, args.tol),
              _check("horizontality", all(r.horizontal_ok for r in reports),
                     max(r.horizontality for r in reports), 10 * cfg.step),
              _check("embedded", all(r.embedded_ok for r in reports),
                     min(r.gap for r in reports), 0.0)]
    results = {"h": spec.h, "R": spec.R, "rounds": len(parts), "d": [p.d for p in parts],
               "residual": float(np.linalg.norm(res.curve.end - target)),
               "iterations": [p.iterations for p in parts],
               "free_vertical": parts[0].free_vertical}
    outs = []
    if args.out:
        curve = parts[0].curve
        for p in parts[1:]:
            nxt = p.curve
            curve = Curve(np.concatenate([curve.times, nxt.times[1:] - nxt.times[0] + curve.times[-1]]),
                          np.vstack([curve.points, nxt.points[1:]]))
        write_curve(args.out, curve)
        outs.append(args.out)
    return checks, results, outs


# --------------------------------------------------------------------------
# verification suites

_T_GRID = (0.2, 0.1, 0.05, 0.025)


def suite_bracket_flows(m, cfg, rng):
    checks = []
    zero = np.zeros(m.n)
    for z, e in sorted(m.generators.items()):
        lam = e.length
        disp = [np.linalg.norm(run_schedule(expr_schedule(e, m, t), zero, cfg).end)
                for t in _T_GRID]
        slope = _slope(_T_GRID, disp)
        checks.append(_check(f"scaling_law_A{z}", abs(slope - lam) <= 0.05, slope, 0.05,
                             expected=lam))
        errs = [bracket_flow_error(e, m, zero, t, cfg) for t in _T_GRID]
        checks.append(_check(f"bracket_error_A{z}", True, [er / t ** lam for er, t in
                                                            zip(errs, _T_GRID)],
                             note="error/t^λ, reported only"))
        sched = expr_schedule(e, m, 0.1)
        back = run_schedule(sched + sched.inverse(), zero, cfg).end
        bound = 10 * cfg.step ** 4 * 2 * sched.total_duration
        checks.append(_check(f"inverse_A{z}", np.linalg.norm(back) <= max(bound, 1e-14),
                             float(np.linalg.norm(back)), max(bound, 1e-14)))
        ends = []
        for k in range(3):
            c = IntegratorConfig(step=cfg.step / 2 ** k, max_points=cfg.max_points)
            ends.append(run_schedule(sched, zero, c).end)
        d1 = float(np.linalg.norm(ends[0] - ends[1]))
        d2 = float(np.linalg.norm(ends[1] - ends[2]))
        checks.append(_check(f"richardson_A{z}", d1 <= 16 * d2 + 1e-14, [d1, d2],
                             "16x + 1e-14"))
    return checks


def suite_area_lift(m, cfg, rng, loops=20):
    checks = []
    C = validate_model(m).constant
    z = min(j for j, e in m.generators.items() if e.length == 2)
    i, j = bracket_plane(m, z)
    worst = 0.0
    for _ in range(loops):
        ang = np.sort(rng.uniform(0, 2 * np.pi, 16))
        rad = rng.uniform(0.02, 0.15, 16)
        centre = rng.uniform(-0.1, 0.1, 2)
        P = np.zeros((17, m.q))
        P[:16, i - 1] = centre[0] + rad * np.cos(ang)
        P[:16, j - 1] = centre[1] + rad * np.sin(ang)
        P[16] = P[0]
        loop = Curve(np.arange(17, dtype=float), P, closed=True)
        dz, area = area_lift_check(m, loop, z, np.zeros(m.n - m.q), cfg, (i, j))
        worst = max(worst, abs(dz - area) - abs(area) * C * m.radius)
    checks.append(_check(f"area_lift_x{z}", worst <= 1e-6, worst, 1e-6,
                         note="|Δx_z − area| − |area|·C·r"))
    return checks


def suite_scaling_laws(m, cfg, rng):
    checks = []
    zero = np.zeros(m.n - m.q)
    for z, e in sorted(m.generators.items()):
        try:
            normalize_expr(e)
        except ValueError as exc:
            checks.append(_check(f"tangle_slope_A{z}", False, note=str(exc)))
            continue
        lam = e.length
        mus = (0.05, 0.1, 0.2)
        disps = []
        for mu in mus:
            model = tangle_on_axis(TangleSpec(e, mu, mu / 20), m.q)
            disps.append(abs(tangle_endpoint_displacement(model, m, 1.0, zero, cfg)[z - m.q - 1]))
        slope = _slope(mus, disps)
        checks.append(_check(f"tangle_slope_A{z}", abs(slope - lam) <= 0.1, slope, 0.1,
                             expected=lam))
        model = tangle_on_axis(TangleSpec(e, 0.1, 0.005), m.q)
        base = tangle_endpoint_displacement(model, m, 1.0, zero, cfg)[z - m.q - 1]
        dev = max(abs(tangle_endpoint_displacement(model, m, u, zero, cfg)[z - m.q - 1]
                      / (u * base) - 1) for u in (0.25, 0.5))
        checks.append(_check(f"u_linearity_A{z}", dev <= 0.05, dev, 0.05))
    return checks


def suite_controller(m, cfg, rng, R=0.2, targets=50):
    h = 0.9 * max_feasible_h(m, R)
    c = build_controller(m, ControllerSpec(R=R, h=h))
    em = EndpointMap.create(c, cfg=cfg)
    n = c.dim
    checks = []
    J = jacobian(em, np.zeros(n))
    err = float(np.abs(J - np.eye(n)).sum(1).max())
    checks.append(_check("jacobian_near_identity", err <= 0.2, err, 0.2, h=h))
    ep0 = em(np.zeros(n))
    tol = min(DEFAULT_TOL, 1e-3 * h)
    worst_res, worst_it = 0.0, 0
    for _ in range(targets):
        v = rng.normal(size=n)
        v *= rng.uniform() ** (1 / n) * (h / 2) / np.linalg.norm(v)
        s = solve_displacement(em, ep0 + v, tol=tol)
        worst_res, worst_it = max(worst_res, s.residual), max(worst_it, s.iterations)
    checks.append(_check("newton_residual", worst_res <= tol, worst_res, tol))
    checks.append(_check("newton_iterations", worst_it <= 20, worst_it, 20))
    edge = 0.05 * 2 * R
    axis = c.axis
    ok = True
    for d in (np.full(n, -h), np.zeros(n), np.full(n, h)):
        for theta in (0.0, 0.5, 1.0):
            cc = em.curve(d, theta)
            for lo, hi in ((0.0, edge), (2 * R - edge, 2 * R)):
                a = (axis.times >= lo) & (axis.times <= hi)
                b = (cc.times >= lo) & (cc.times <= hi)
                ok &= np.array_equal(axis.points[a], cc.points[b])
    checks.append(_check("boundary_fixed", ok))
    return checks


_SUITES = {"bracket-flows": suite_bracket_flows, "area-lift": suite_area_lift,
           "scaling-laws": suite_scaling_laws, "controller": suite_controller}


def cmd_verify(args):
    m = _model(args)
    cfg = _cfg(args)
    names = list(_SUITES) if args.suite == "all" else [args.suite]
    checks = []
    for name in names:
        rng = np.random.default_rng(args.seed)
        try:
            got = _SUITES[name](m, cfg, rng)
        except (DomainError, ValueError) as exc:
            got = [_check(f"{name}_run", False, note=f"{type(exc).__name__}: {exc}")]
        checks.extend({**c, "suite": name} for c in got)
    return checks, {"suites": names}, []


# --------------------------------------------------------------------------
# argument parsing

def _add_model(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--builtin", choices=("heisenberg", "engel", "cartan"))
    g.add_argument("--file", metavar="MODEL.json")


def _add_common(p, out=True, tol=DEFAULT_TOL):
    _add_model(p)
    p.add_argument("--step", type=float, default=DEFAULT_STEP, help="RK4 step (default 1e-3)")
    p.add_argument("--tol", type=float, default=tol, help=f"tolerance (default {tol:g})")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--report", metavar="PATH", help="write the JSON report here")
    if out:
        p.add_argument("--out", metavar="PATH", help="write the curve CSV here")


def _add_controller(p):
    p.add_argument("--R", type=float, default=0.2, help="controller half-length (default 0.2)")
    p.add_argument("--h", type=float, default=None,
                   help="maximal displacement (default 0.9 × largest feasible)")
    p.add_argument("--S", type=float, default=None, help="size-at-rest (default h/4)")
    p.add_argument("--delta", type=float, default=None, help="smoothing (default μ/20)")


def build_parser():
    p = argparse.ArgumentParser(prog="subrie", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    mp = sub.add_parser("model", help="model utilities")
    msub = mp.add_subparsers(dest="action", required=True)
    v = msub.add_parser("validate", help="check the graphical-model conditions")
    _add_common(v, out=False, tol=1e-12)
    v.set_defaults(func=cmd_model_validate)

    f = sub.add_parser("flow", help="run the flow program of a bracket expression")
    _add_common(f)
    f.add_argument("--expr", required=True, help="e.g. '[1,[1,2]]^2'")
    f.add_argument("--s", type=float, default=0.1, help="schedule parameter (default 0.1)")
    f.add_argument("--start", help="comma-separated start point (default origin)")
    f.set_defaults(func=cmd_flow)

    li = sub.add_parser("lift", help="lift a base curve CSV")
    _add_common(li)
    li.add_argument("--base", required=True, metavar="CSV")
    li.add_argument("--start-vert", help="comma-separated vertical start (default 0)")
    li.set_defaults(func=cmd_lift)

    t = sub.add_parser("tangle", help="build, isotope and lift a tangle")
    _add_common(t)
    t.add_argument("--expr", required=True)
    t.add_argument("--mu", type=float, default=0.1, help="tangle size (default 0.1)")
    t.add_argument("--delta", type=float, default=None, help="smoothing (default μ/20)")
    t.add_argument("--u", type=float, default=1.0, help="area-isotopy factor (default 1)")
    t.add_argument("--theta", type=float, default=1.0, help="birth parameter (default 1)")
    t.add_argument("--sign", type=int, choices=(1, -1), default=1)
    t.add_argument("--window-factor", type=float, default=1.5,
                   help="attachment window in box sides (default 1.5)")
    t.set_defaults(func=cmd_tangle)

    c = sub.add_parser("controller", help="build a controller and lift C(d, θ)")
    _add_common(c)
    _add_controller(c)
    c.add_argument("--d", help="comma-separated displacement (default 0)")
    c.add_argument("--theta", type=float, default=1.0)
    c.set_defaults(func=cmd_controller)

    pl = sub.add_parser("plan", help="plan a horizontal curve to a nearby target")
    _add_common(pl)
    _add_controller(pl)
    pl.add_argument("--start", help="comma-separated start (default origin)")
    pl.add_argument("--target", required=True)
    pl.add_argument("--iterate", action="store_true", help="chain local plans greedily")
    pl.add_argument("--max-rounds", type=int, default=10)
    pl.set_defaults(func=cmd_plan)

    vs = sub.add_parser("verify", help="run a property battery")
    vs.add_argument("suite", choices=SUITES)
    _add_common(vs, out=False)
    vs.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    t0 = time.perf_counter()
    config = {k: v for k, v in vars(args).items() if k != "func"}
    report = {"command": argv, "config": config, "step": args.step}
    code = 0
    try:
        checks, results, outs = args.func(args)
        report.update(checks=checks, results=results, outputs=outs)
        if not all(c["passed"] for c in checks):
            code = 1
    except UsageError as exc:
        print(f"subrie: error: {exc}", file=sys.stderr)
        report["error"] = str(exc)
        code = 2
    except DomainError as exc:
        print(f"subrie: {type(exc).__name__}: {exc}", file=sys.stderr)
        report["error"] = f"{type(exc).__name__}: {exc}"
        code = 1
    except (ValueError, IndexError) as exc:
        print(f"subrie: error: {exc}", file=sys.stderr)
        report["error"] = str(exc)
        code = 2
    except OSError as exc:
        print(f"subrie: I/O error: {exc}", file=sys.stderr)
        report["error"] = str(exc)
        code = 2
    report["exit_code"] = code
    report["wall_time"] = time.perf_counter() - t0
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True)
    if args.report:
        try:
            _atomic_write(args.report, text + "\n")
        except OSError as exc:
            print(f"subrie: I/O error: {exc}", file=sys.stderr)
            return 2
    else:
        print(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
