"""Compiled inner loops: polynomial evaluation, RK4 stepping and lifting.

Fields are passed as flat term tables: for term t, ``tf[t]`` is the index of
the field it belongs to, ``tc[t]`` the component, ``tco[t]`` the
coefficient and ``te[t]`` the exponent row.  A combination
``sum_f w[f] * F_f(x)`` is then one pass over the table.
"""

import numpy as np
from numba import njit


def encode_fields(fields):
    """Flatten a sequence of PolyVectorFields into a term table."""
    tf, tc, tco, te = [], [], [], []
    dim = fields[0].dim
    for f_idx, F in enumerate(fields):
        comp, coef, exps = F._flat
        tf.extend([f_idx] * len(comp))
        tc.extend(comp.tolist())
        tco.extend(coef.tolist())
        te.extend(exps.tolist())
    return (np.array(tf, dtype=np.int64), np.array(tc, dtype=np.int64),
            np.array(tco, dtype=np.float64),
            np.array(te, dtype=np.int64).reshape(len(tf), dim))


@njit(cache=True)
def _combo(x, w, tf, tc, tco, te, out):
    out[:] = 0.0
    n = x.shape[0]
    for t in range(tf.shape[0]):
        v = w[tf[t]] * tco[t]
        if v == 0.0:
            continue
        for d in range(n):
            e = te[t, d]
            while e > 0:
                v *= x[d]
                e -= 1
        out[tc[t]] += v


@njit(cache=True)
def rk4_path(x0, times, a, b, tf, tc, tco, te):
    """RK4 for x' = sum_f (a_f + b_f t) F_f(x), recording every time in ``times``."""
    m = times.shape[0]
    n = x0.shape[0]
    pts = np.empty((m, n))
    pts[0] = x0
    x = x0.copy()
    w = np.empty(a.shape[0])
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    for s in range(m - 1):
        t = times[s]
        h = times[s + 1] - t
        w[:] = a + b * t
        _combo(x, w, tf, tc, tco, te, k1)
        w[:] = a + b * (t + 0.5 * h)
        _combo(x + 0.5 * h * k1, w, tf, tc, tco, te, k2)
        _combo(x + 0.5 * h * k2, w, tf, tc, tco, te, k3)
        w[:] = a + b * (t + h)
        _combo(x + h * k3, w, tf, tc, tco, te, k4)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        pts[s + 1] = x
    return pts


@njit(cache=True)
def lift_path(x0, btimes, bpts, step, r2, tf, tc, tco, te):
    """Lift a piecewise-linear base through x' = sum_j v_j X_j(x).

    Returns the lifted samples at the base times, the number of samples
    retained, and the time at which the orbit left the ball (or NaN).
    """
    m = btimes.shape[0]
    n = x0.shape[0]
    q = bpts.shape[1]
    pts = np.empty((m, n))
    pts[0] = x0
    x = x0.copy()
    v = np.empty(q)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    for s in range(m - 1):
        dt = btimes[s + 1] - btimes[s]
        for j in range(q):
            v[j] = (bpts[s + 1, j] - bpts[s, j]) / dt
        nfull = int(np.floor(dt / step + 1e-9))
        rem = dt - nfull * step
        nsub = nfull
        if rem > 1e-12 * dt or nfull == 0:
            nsub = nfull + 1
        elapsed = 0.0
        for i in range(nsub):
            h = step
            if i == nsub - 1:
                h = dt - elapsed
            _combo(x, v, tf, tc, tco, te, k1)
            _combo(x + 0.5 * h * k1, v, tf, tc, tco, te, k2)
            _combo(x + 0.5 * h * k2, v, tf, tc, tco, te, k3)
            _combo(x + h * k3, v, tf, tc, tco, te, k4)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            elapsed += h
            nrm = 0.0
            for d in range(n):
                nrm += x[d] * x[d]
            if not nrm <= r2:
                return pts, s + 1, btimes[s] + elapsed
        pts[s + 1] = x
    return pts, m, np.nan
