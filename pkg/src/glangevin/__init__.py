"""Geometric Langevin algorithm: splitting samplers for inertial Langevin
dynamics, with exact OU noise and long-run accuracy diagnostics."""

from .errors import (ConfigError, DegenerateCovarianceError,
                     DimensionMismatchError, GlangevinError,
                     InvalidParameterError, NonFiniteStateError, NumericError,
                     UnboundedMeasureError, UnstableSchemeError)
from .model import (DoubleWell, HamiltonianSystem, Harmonic, MassMatrix,
                    PhaseState, Polynomial, Potential, gibbs_log_density_unnormalized,
                    hamiltonian_energy, potential_by_name)
from .integrators import (NERI4, STORMER_VERLET, SYMPLECTIC_EULER,
                          IntegratorScheme, SplittingCoefficients,
                          custom_scheme, energy_error, exact_harmonic_flow,
                          iterate_variational, jacobian_fd, scheme_by_name,
                          symplectic_defect, variational_step)
from .ou import (OUOperator, build_ou_operator, gibbs_preservation_defect,
                 ou_step, ou_transition_density, spd_matrix_function)
from .noise import NoiseStream, normals_at, philox4x32
from .stats import BatchAccumulator, MomentEstimate, batch_means
from .gla import (ChainResult, RefinableNoise, StrongOrderResult,
                  aggregate_noise, exact_splitting_step_linear,
                  generate_refinable_noise, gla_step, refine_noise, run_chain,
                  sample_trajectory, strong_error_experiment)
from .analysis import (ConvergenceRow, GaussianMeasure, convergence_study,
                       cumulative_moment_error, discrete_lyapunov_2x2,
                       gaussian_tv_quadrature, gibbs_moment_quadrature,
                       linear_scheme_matrices, linear_stationary_covariance,
                       moment_error_curve, observed_orders, tv_to_gibbs_curve)

__version__ = "0.1.0"
