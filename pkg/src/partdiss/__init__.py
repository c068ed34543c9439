"""Numerical toolkit for partially dissipative hyperbolic systems.

Covers Fourier-symbol analysis (Kalman rank / strict dissipativity),
certified hypocoercive Lyapunov functionals, dyadic Littlewood-Paley and
hybrid Besov norms, exact linear and pseudo-spectral nonlinear solvers,
decay-exponent fitting, and the strong relaxation limit towards
porous-medium-type parabolic equations.
"""

from .grid import Grid, SpectralField, random_real_field
from .system import (AffineFluxFamily, BlockDims, RelaxationBlock,
                     StructureFlags, SystemSpec, build_isentropic_euler,
                     build_linearized_euler, build_sk_counterexample,
                     evaluate_flux_matrix, validate)
from .symbols import (DirectionSample, FrequencySymbol,
                      check_lemma_equivalences, elliptic_block_check,
                      euler_dispersion, kalman_rank, sk_condition,
                      symbol_at, spectral_abscissa)
from .lyapunov import LyapunovCertificate, CertificateError, construct
from .paley import (FilterBank, HybridNormSpec, besov_norm, bernstein_check,
                    block, hf_norm, hybrid_norm, lf_norm, multiplier_apply,
                    sobolev_norm)
from .propagator import (PropagatorPlan, damped_mode_linear, duhamel,
                         propagate, verify_mode_decay)
from .solver import (SolverConfig, TrajectoryReport, damped_mode,
                     functional_X, functional_Y, lyapunov_monitor, solve,
                     step)
from .decay import (DecaySpec, RadialLinearOracle, alpha1, c0_from_data,
                    fit_decay, linear_decay_study, negative_besov_track)
from .relaxation import (EpsSweep, LimitEquation, convergence_study,
                         diffusive_rescale, damped_mode_tilde,
                         extract_limit_equation, maximal_regularity_check,
                         solve_limit)

__version__ = "0.1.0"
