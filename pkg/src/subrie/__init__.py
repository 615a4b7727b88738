"""Horizontal curves, tangles and controllers in polynomial graphical models."""

__version__ = "0.1.0"

from .errors import (BallExitError, ConvergenceError, DomainError, InfeasibleError,
                     ModelIndexError, NonFiniteError, SchemaError, SingularJacobianError)
from .curves import Curve, concat_curves, polyline_length
from .fields import (Bracket, GraphicalModel, Leaf, PolyVectorField, builtin_model,
                     eval_bracket_expr, eval_field, format_expr, lie_bracket, load_model,
                     model_to_document, parse_expr, validate_model)
from .flows import (Constant, CornerBlend, FlowSchedule, IntegratorConfig, Reversed, Scaled,
                    bracket_flow_error, commutator_schedule, expr_schedule, integrate,
                    run_schedule)
from .lifting import (area_lift_check, base_crossings, enclosed_area, hausdorff_distance, lift,
                      naive_bound_check, self_intersection_gap, stop_reparametrize,
                      vertical_displacement)
from .tangles import (TangleModel, TangleSpec, area_isotopy, birth_homotopy,
                      build_tangle_model, pretangle, s_pretangle, tangle_endpoint_displacement,
                      tangle_on_axis)
from .controllers import (Controller, ControllerSpec, EndpointMap, build_controller, chi_S,
                          controller_curve, endpoint_map, insert_controller, jacobian,
                          max_feasible_h, solve_displacement)
from .planner import PlanRequest, PlanResult, plan_local, verify_plan
