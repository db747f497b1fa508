"""Hermite-pseudospectral standing waves of the Anderson-Gross-Pitaevskii equation in 1D and 2D."""

__version__ = "0.1.0"

from .anderson import (AndersonForm, EigenResult, assemble, certified_shift, coercivity_probe,
                       eigen_lowest, form_value)
from .diagnostics import (LocalizationFit, localization_fit, residual, sign_condition_check,
                          sobolev_growth)
from .errors import *  # noqa: F401,F403
from .functionals import (J_omega, P_omega, ProblemParams, Q_func, action, energy,
                          energy_gradient, mass, nehari_I, nonlinear_term, scale_field, t_nehari)
from .noise import (EnhancedNoise, NoiseRealization, compute_Y, enhance, noise_sobolev_series,
                    sample_noise, wick_expectation, zero_noise)
from .solvers import (CriticalMassResult, GNResult, GroundState, SolverConfig, SweepResult,
                      action_ground_state, critical_mass, energy_ground_state, gn_constant,
                      nehari_ground_state, noisy_gn_constant, small_mass_sweep)
from .spectral import (BasisSpec, QuadratureGrid, SpectralField, analyze, evaluate,
                       gauss_hermite, hermite_eval, project, sobolev_norm, synthesize)
