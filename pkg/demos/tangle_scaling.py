"""Tangle displacement scales like μ^λ, λ being the bracket length."""

import numpy as np

from subrie import builtin_model
from subrie.fields import parse_expr
from subrie.flows import IntegratorConfig
from subrie.tangles import TangleSpec, tangle_endpoint_displacement, tangle_on_axis

cfg = IntegratorConfig()
cases = [("heisenberg", "[1,2]", 0), ("engel", "[1,[1,2]]", 1)]
mus = np.array([0.05, 0.1, 0.2])

for name, expr, k in cases:
    m = builtin_model(name)
    e = parse_expr(expr)
    disp = []
    for mu in mus:
        model = tangle_on_axis(TangleSpec(e, mu, mu / 20), m.q)
        disp.append(abs(tangle_endpoint_displacement(model, m, 1.0, np.zeros(m.n - m.q), cfg)[k]))
    slope = np.polyfit(np.log(mus), np.log(disp), 1)[0]
    print(f"{name:10s} {expr:10s} displacements {np.round(disp, 8)}  slope {slope:.4f}")
