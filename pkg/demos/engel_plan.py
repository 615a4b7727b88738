"""Plan a horizontal curve in the Engel model and check it.

The controller can only move the vertical endpoint by about h ≈ 4e-7 at
R = 0.2, so the target is chosen near the free lift of the staircase path.
"""

import numpy as np

from subrie import builtin_model
from subrie.controllers import ControllerSpec, max_feasible_h
from subrie.planner import PlanRequest, free_endpoint, plan_local, verify_plan

m = builtin_model("engel")
h = 0.8 * max_feasible_h(m, 0.2)
spec = ControllerSpec(0.2, h)
tol = 1e-3 * h

base = np.array([0.04, -0.03])
free = free_endpoint(PlanRequest(m, np.zeros(4), np.r_[base, 0, 0], spec))
target = np.r_[base, free[2:] + [0.3 * h, -0.2 * h]]
req = PlanRequest(m, np.zeros(4), target, spec, tol=tol)

res = plan_local(req)
rep = verify_plan(res, req)
print(f"h = {h:.3g}, free lift vertical {free[2:]}")
print(f"controller setting d = {res.d}, Newton iterations {res.iterations}")
print(f"samples {len(res.curve)}, residual {res.residual:.3g}")
for k, v in rep.as_dict().items():
    print(f"  {k:15s} {v}")
