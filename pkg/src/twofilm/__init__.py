"""Spectral simulator for a two-phase thin-film flow with insoluble surfactant.

Two stacked viscous films evolve under capillarity and Marangoni stresses
while a surfactant concentration is advected along the free surface and
diffuses.  The degenerate fourth-order system is regularized (mobilities
bounded below by eps, tension slope truncated) and discretized by a cosine
Galerkin projection whose coefficients are marched with an adaptive
embedded Runge-Kutta pair.  The construction preserves the structure that
matters: exact mass conservation, an energy that decays by a computable
dissipation, and non-negativity that improves as eps shrinks.
"""

from .closures import (ClosureReport, PhysicalParams, SurfactantClosure,
                       derive_coefficients, quadratic_closure, validate_closure)
from .diagnostics import (DiagnosticsRecord, MollifierKernel, bump_kernel,
                          chi_delta, collect, dispersion_matrix, energy,
                          dissipation_rate, kernel_by_name, kernel_check,
                          mollifier_lemma_check, negativity_functional,
                          polynomial_kernel)
from .fluxes import (FluxBundle, GridFields, Problem, RhsResult, SpectralState,
                     assemble_rhs, dissipation_from_fluxes, eval_fields,
                     eval_fluxes, eval_fluxes_expanded, mass_matrix,
                     stiffness_scale)
from .regularization import (a_eps, sigma_eps, sigma_eps_prime,
                             tau_eps, tau_identity_threshold, tent, tent_eps)
from .scenarios import (ComparisonReport, ConvergenceReport, DispersionReport,
                        InitialDataSpec, RunArtifacts, ScalingReport,
                        ScenarioConfig, dispersion_study, fit_loglog_slope,
                        reduction_thinfilm, resume, run, sweep_eps, sweep_n)
from .spectral import CosineBasis, evaluate_coeffs
from .timestepper import (StepAux, StepControl, StiffnessAbort, Trajectory,
                          integrate_ode)

__version__ = "0.1.0"
