"""Characteristic-function grids, collision operators and evolutions."""

from .grid import (AbsDiffModel, CharFnGrid, GaussPolyModel, abs_difference,
                   check_char_invariants, fp_distance, rebase, tangency_defect)
from .ops import (eval_interp, gamma_apply, gamma_point, l_apply,
                  matrix_map_apply, semigroup_apply, stationary_apply)
from .evolve import evolve, evolve_linear_bound
from .profile import (ProfileResult, StabilityReport, fixed_point_profile,
                      stability_experiment)

__all__ = [
    "AbsDiffModel", "CharFnGrid", "GaussPolyModel", "abs_difference",
    "check_char_invariants", "fp_distance", "rebase", "tangency_defect",
    "eval_interp", "gamma_apply", "gamma_point", "l_apply", "matrix_map_apply",
    "semigroup_apply", "stationary_apply", "evolve", "evolve_linear_bound",
    "ProfileResult", "StabilityReport", "fixed_point_profile",
    "stability_experiment",
]
