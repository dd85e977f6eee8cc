"""Numerical laboratory for Carleman estimates across an anisotropic
diffusion interface: exact per-frequency symbol algebra, the quasi-mode
counterexample machinery, and finite-difference smallest-singular-value
sweeps of the conjugated operator."""

from .errors import (CoverFailureError, NonConvergenceError, ValidationError,
                     ZoneAssignmentError)
from .symbols import (ConditionReport, ConvexZone, ModelCoefficients,
                      ReducedCoefficients, RegionLabel, SymbolValues,
                      TangentialFrequency, WeightSpec, check_condition,
                      classify_region, convexified_symbols,
                      reduce_coefficients, subellipticity_report,
                      sup_m_ratio, symbol_values)
from .quasimode import (Grid2D, QuadratureSpec, QuasiModeEval, QuasiModeSpec,
                        ViolationPoint, ab_coefficients, build_physical_v,
                        build_spec, eval_quasimode, find_violation,
                        quasimode_norms)
from .discrete import (AssembledOperator, Grid1D, HalfLineFactor,
                       InterfaceFunction, TransmissionData, assemble_operator,
                       carleman_sweep, estimate_sides, halfline_factor_check,
                       make_grid, min_singular_value, random_admissible_v,
                       select_beta, smallest_singular_value)
from .config import ExperimentConfig, load_config, parse_config

__all__ = [name for name in dir() if not name.startswith("_")]
