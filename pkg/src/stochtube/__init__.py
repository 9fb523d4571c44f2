"""Gaussian tubes around noisy limit cycles of planar flows."""
from .dynamics import SystemKind, SystemSpec, variation_matrix, velocity, reversed_velocity
from .errors import *  # noqa: F401,F403
from .integrate import (CycleInfo, JacobianPath, Trajectory, find_limit_cycle,
                        integrate_orbit, integrate_with_jacobian)
from .lyapunov import (CovariancePath, NoiseSpec, TubeProfile, adjoint_step, closed_form_solution,
                       delta_p_min, diffusive_variance, evolve_adjoint, evolve_forward,
                       forward_step, ou_stationary_variance, tube_profile, zaslavsky_time)
from .langevin import (EnsembleConfig, EnsembleStats, SectionStats, binned_tube_variance,
                       section_statistics, simulate_ensemble)
from .density import (DensityGrid, GridNorm, analytic_circle_density, angular_ripple,
                      assemble_tube_density, compare, empirical_density, tube_extent)
from .io import emit_grid, emit_pgm, emit_profile, read_grid, read_profile

__version__ = "0.1.0"
