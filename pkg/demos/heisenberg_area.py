"""Lifting loops in the Heisenberg model: height gained equals area enclosed."""

import numpy as np

from subrie import builtin_model
from subrie.curves import Curve
from subrie.flows import IntegratorConfig
from subrie.lifting import enclosed_area, lift

model = builtin_model("heisenberg")
cfg = IntegratorConfig(step=1e-3)

for n in (4, 8, 32, 128):
    s = np.linspace(0, 2 * np.pi, n + 1)
    pts = 0.1 * np.c_[np.cos(s), np.sin(s)]
    pts[-1] = pts[0]
    t = np.concatenate([[0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    loop = Curve(t, pts, closed=True)
    h = lift(model, loop, [0.0], cfg).curve
    print(f"{n:4d}-gon  area {enclosed_area(loop):.8f}  lift rises {h.end[2] - h.start[2]:.8f}")
print(f"circle   area {np.pi * 0.01:.8f}")
