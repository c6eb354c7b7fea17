"""Active-subspace design-space analysis for marine propeller blades."""
from .airfoil import AirfoilSection, naca4_section, scale_max_camber
from .errors import BladeASError
from .evaluation import (OUTPUT_NAMES, Dataset, OperatingPoint, bem_evaluate,
                         hydrodynamic_coefficients, ingest_results)
from .geometry import (RadialDistributions, load_baseline, loft_blade, place_section,
                       replicate_propeller)
from .parameterization import (ParameterSpace, apply_parameters, sample_designs,
                               smoothness_filter)
from .response import constrained_optimize, fit_response_surface, sensitivity_table
from .spline import BSplineCurve, count_inflections, derivative, evaluate, fit_least_squares
from .subspace import (compute_active_subspace, estimate_gradients, project, reconstruct,
                       shared_subspace)

__version__ = "0.1.0"
