"""Numerical laboratory for a family of semilinear stochastic PDEs on [0,1]:
simulation, fluctuation and moderate-deviation studies, and min-norm control
evaluation of the rate function."""

__version__ = "0.1.0"

from .coefficients import CoefficientSet, check_assumptions, preset, zero_coefficients
from .errors import (BlowUpError, ConfigError, ContractViolation,
                     DegenerateStudyError, SpdelabError)
from .grids import GridSpec, PathField, SpaceField, h_norm_sq, l2_norm, sup_l2_norm
from .kernel import (AuditSamplePlan, KernelConfig, apply_J, audit_bounds,
                     green, green_dt, green_dx, green_dy, semigroup_defect)
from .noise import NoiseRealization, SeedSpec, aggregate, refine, sample_sheet
from .rate import (Control, RateCertificate, evaluate_rate, rate_ladder,
                   rate_lower_bound_functional)
from .solvers import (SimParams, SolveOutput, solve_controlled,
                      solve_deterministic, solve_linearized, solve_mild_picard,
                      solve_skeleton, solve_spde)
from .studies import (StudyConfig, StudyResult, clt_study, contraction_study,
                      grid_refinement_study, mdp_tail_study)
