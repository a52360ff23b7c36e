"""Higher-order Galerkin variational integrators ``PsNrQu``."""
from .analysis import (ConvergenceReport, StabilityGrid, conservation_series, convergence_sweep,
                       fit_order, global_error, return_error, reversibility_defect,
                       stability_matrix, stability_scan, symplecticity_defect)
from .basis import ControlPoints, ControlScheme, make_control_points
from .core import (IntegrationFailure, IntegratorSpec, SpecError, Trajectory, WellPosednessWarning,
                   hamiltonian_step, integrate, make_spec, parse_spec)
from .models import (LagrangianSystem, PhasePoint, SingularityError, angular_momentum,
                     default_start, harmonic_oscillator, kepler, kepler_start, rk4_integrate)
from .quadrature import QuadratureKind, QuadratureRule, gauss_legendre, gauss_lobatto, make_rule
from .solver import NonConvergence, SolverSettings, newton_solve

__version__ = "0.1.0"
