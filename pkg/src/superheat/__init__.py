"""Numerical tools for u_t = Δu + f(u) with singular initial data."""
from ._backend import NAME as backend
from .classify import (ExistenceTimeBound, Verdict, classify, existence_time_lower_bound,
                       threshold_report)
from .errors import *  # noqa: F401,F403
from .evolve import (BlowupReport, Certificate, EvolveConfig, PicardState, build_supersolution,
                     contraction_probe, imex_evolve, picard_monotone, weissler_certificate)
from .heatkernel import (DirectKernel, SemigroupPlan, SpectralPeriodic, apply_semigroup,
                         jensen_check, smoothing_ratio)
from .nonlinearity import (Custom, ExpSquare, Exponential, NonlinearitySpec, Power, PowerSum,
                           ShiftedPower, Side, estimate_A, eval_F, eval_F_inv,
                           parse_nonlinearity, profile)
from .singular import ConvexGrowth, exp_singular, power_singular
from .transforms import (SpaceTimeField, TransformReport, cole_hopf_u, cole_hopf_v,
                         convexity_probe, general_transform_residual, invariant_integral,
                         log_transform, log_transform_inv, quasi_scale, quasi_scaled_residual)
from .uloc_grid import (ConstantExtension, Grid, GridField, Periodic, UlocParams,
                        classification_integral, load_field, refine_trend, save_field, uloc_norm)

__version__ = "0.1.0"
