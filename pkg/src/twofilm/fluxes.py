"""Flux assembly and the coefficient ODE right-hand side.

The semi-discrete scheme expands the two film heights f, g and the transformed
surfactant variable v = Phi'(Gamma) in the cosine basis and tests the three
conservation laws against the basis derivatives:

    d/dt F_j = <h_f,     phi_j'>        (lower film)
    d/dt G_j = <h_g,     phi_j'>        (upper film)
    M dV/dt  = <h_gamma, phi_j'>,   M_jk = <W'(v) phi_k, phi_j>

where the h_* are the conserved-form flux aggregates of the regularized
system, evaluated pointwise on the collocation grid (pseudo-spectral
product rule).  Because phi_0' = 0, the j = 0 components of all tested
right-hand sides vanish identically: the means of f, g and Gamma are
conserved exactly, independent of resolution.

Two independent evaluation routes for the aggregates are kept on purpose:

* `eval_fluxes` builds them from the square-root-factored interface flux
  densities j_f, j_fg, j_g (whose squares are the dissipation integrand),
* `eval_fluxes_expanded` multiplies out the mobility polynomials term by
  term.

They agree identically in exact arithmetic; the test suite holds them
against each other on random states, so a typo in either form is caught by
the other.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .closures import PhysicalParams, SurfactantClosure
from .regularization import a_eps, sigma_eps_prime, tau_eps
from .spectral import CosineBasis

_SQ3 = np.sqrt(3.0)


@dataclass
class SpectralState:
    """Coefficient vectors of f, g and v = Phi'(Gamma)."""

    f_hat: np.ndarray
    g_hat: np.ndarray
    v_hat: np.ndarray

    def pack(self) -> np.ndarray:
        return np.concatenate([self.f_hat, self.g_hat, self.v_hat])

    @classmethod
    def unpack(cls, y: np.ndarray, n: int) -> "SpectralState":
        m = n + 1
        return cls(f_hat=y[:m], g_hat=y[m:2 * m], v_hat=y[2 * m:3 * m])

    def copy(self) -> "SpectralState":
        return SpectralState(self.f_hat.copy(), self.g_hat.copy(), self.v_hat.copy())


class Problem:
    """Bundle of discretization + physics defining one simulation.

    Holds the basis, the physical parameters, the closure and the
    regularization strength, plus the cached Cholesky factor of the
    surfactant mass matrix when the closure makes it state-independent.
    """

    def __init__(self, basis: CosineBasis, params: PhysicalParams,
                 closure: SurfactantClosure, eps: float):
        if eps <= 0.0:
            raise ValueError(f"regularization eps must be positive, got {eps}")
        self.basis = basis
        self.params = params
        self.closure = closure
        self.eps = float(eps)

    def solve_mass(self, fields: "GridFields", rhs: np.ndarray) -> np.ndarray:
        """Solve M x = rhs with M the surfactant coefficient mass matrix.

        For a closure with constant Phi'' the matrix is Gram/Phi'', and the
        Gram matrix of the orthonormal basis under this (exact) quadrature
        IS the identity, so the solve reduces to a scalar multiple; the
        zero mean-component of the tested equations then survives bitwise.
        """
        phi2 = self.closure.constant_phi_second
        if phi2 is not None:
            return phi2 * rhs
        m = mass_matrix(self, fields)
        return linalg.cho_solve(linalg.cho_factor(m, lower=True), rhs)


@dataclass
class GridFields:
    """Pointwise grid data shared by flux assembly and diagnostics."""

    f: np.ndarray
    g: np.ndarray
    v: np.ndarray
    gamma: np.ndarray            # W(v)
    d3f: np.ndarray
    d3g: np.ndarray
    dv: np.ndarray
    dgamma: np.ndarray           # W'(v) * dv = dv / Phi''(Gamma)
    phi_second_gamma: np.ndarray
    a_f: np.ndarray              # eps + max(0, f)
    a_g: np.ndarray
    slope_gamma: np.ndarray      # truncated sigma'(Gamma)
    tau_gamma: np.ndarray        # truncated identity at Gamma
    sigma_x: np.ndarray          # d/dx of the truncated tension


@dataclass
class FluxBundle:
    """Interface flux densities and conserved-form aggregates."""

    j_f: np.ndarray
    j_fg: np.ndarray
    j_g: np.ndarray
    h_f: np.ndarray
    h_g: np.ndarray
    h_gamma: np.ndarray
    marangoni: np.ndarray        # S*a_g*(f+g)_xxx + sigma_x, reused by dissipation


def eval_fields(problem: Problem, state: SpectralState) -> GridFields:
    """Evaluate all pointwise fields the fluxes need, on the grid."""
    basis, closure, eps = problem.basis, problem.closure, problem.eps

    stacked = np.vstack([state.f_hat, state.g_hat, state.v_hat])
    values = basis.synthesize(stacked)
    third = basis.derivative_on_grid(stacked[:2], order=3)
    dv = basis.derivative_on_grid(state.v_hat, order=1)

    f, g, v = values
    gamma = np.asarray(closure.w(v), dtype=float)
    phi2 = np.asarray(closure.phi_second(gamma), dtype=float)
    dgamma = dv / phi2

    return GridFields(
        f=f, g=g, v=v, gamma=gamma,
        d3f=third[0], d3g=third[1], dv=dv, dgamma=dgamma,
        phi_second_gamma=phi2,
        a_f=a_eps(f, eps), a_g=a_eps(g, eps),
        slope_gamma=np.asarray(sigma_eps_prime(gamma, eps, closure), dtype=float),
        tau_gamma=np.asarray(tau_eps(gamma, eps, closure), dtype=float),
        sigma_x=np.asarray(sigma_eps_prime(gamma, eps, closure), dtype=float) * dgamma,
    )


def eval_fluxes(problem: Problem, fields: GridFields) -> FluxBundle:
    """Square-root-factored flux aggregates (canonical route).

    The densities are

        j_f  = sqrt(a_f) [ a_f*P/sqrt3 + (sqrt3/2) mu (S a_g q3 + sigma_x) ]
        j_fg = sqrt(a_f) [ a_f*P/sqrt3 + (2/sqrt3) mu (S a_g q3 + sigma_x) ]
        j_g  = sqrt(a_g) [ (S/sqrt3) a_g q3 + (sqrt3/2) sigma_x ]

    with P = ((R+S*mu) f + S*mu g)_xxx and q3 = (f+g)_xxx, and the aggregates

        h_f     = a_f^{3/2}/sqrt3 * j_f
        h_g     = (sqrt3/2) a_g sqrt(a_f) j_fg + a_g^{3/2}/sqrt3 * j_g
        h_gamma = (sqrt3/2) tau (sqrt(a_f) j_fg + sqrt(a_g) j_g)
                  + tau a_g sigma_x / 4 - D * Gamma_x.
    """
    p = problem.params
    r_cap, s_cap, mu = p.cap_r, p.cap_s, p.mu

    q3 = fields.d3f + fields.d3g
    p3 = (r_cap + s_cap * mu) * fields.d3f + s_cap * mu * fields.d3g
    mar = s_cap * fields.a_g * q3 + fields.sigma_x

    sq_f = np.sqrt(fields.a_f)
    sq_g = np.sqrt(fields.a_g)

    j_f = sq_f * (fields.a_f * p3 / _SQ3 + (_SQ3 / 2.0) * mu * mar)
    j_fg = sq_f * (fields.a_f * p3 / _SQ3 + (2.0 / _SQ3) * mu * mar)
    j_g = sq_g * ((s_cap / _SQ3) * fields.a_g * q3 + (_SQ3 / 2.0) * fields.sigma_x)

    tau = fields.tau_gamma
    h_f = fields.a_f * sq_f / _SQ3 * j_f
    h_g = (_SQ3 / 2.0) * fields.a_g * sq_f * j_fg + fields.a_g * sq_g / _SQ3 * j_g
    h_gamma = ((_SQ3 / 2.0) * tau * (sq_f * j_fg + sq_g * j_g)
               + 0.25 * tau * fields.a_g * fields.sigma_x
               - p.diffusivity * fields.dgamma)

    return FluxBundle(j_f=j_f, j_fg=j_fg, j_g=j_g,
                      h_f=h_f, h_g=h_g, h_gamma=h_gamma, marangoni=mar)


def eval_fluxes_expanded(problem: Problem, fields: GridFields):
    """Term-by-term expanded flux aggregates (cross-check route).

    Returns (h_f, h_g, h_gamma) built directly from the mobility
    polynomials of the regularized system, without the square-root
    factorization.  Kept independent of `eval_fluxes` so the two can be
    tested against each other.
    """
    p = problem.params
    r_cap, s_cap, mu = p.cap_r, p.cap_s, p.mu
    a_f, a_g = fields.a_f, fields.a_g
    q3 = fields.d3f + fields.d3g

    h_f = a_f * (r_cap * a_f ** 2 / 3.0 * fields.d3f
                 + s_cap * mu * (a_f ** 2 / 3.0 + a_f * a_g / 2.0) * q3
                 + mu * (a_f / 2.0) * fields.sigma_x)
    h_g = a_g * (r_cap * a_f ** 2 / 2.0 * fields.d3f
                 + s_cap * (a_g ** 2 / 3.0 + mu * (a_f ** 2 / 2.0 + a_f * a_g)) * q3
                 + (mu * a_f + a_g / 2.0) * fields.sigma_x)
    h_gamma = (fields.tau_gamma * (r_cap * a_f ** 2 / 2.0 * fields.d3f
                                   + s_cap * (a_g ** 2 / 2.0 + mu * (a_f ** 2 / 2.0 + a_f * a_g)) * q3
                                   + (mu * a_f + a_g) * fields.sigma_x)
               - p.diffusivity * fields.dgamma)
    return h_f, h_g, h_gamma


def mass_matrix(problem: Problem, fields: GridFields) -> np.ndarray:
    """Surfactant coefficient mass matrix M_jk = <W'(v) phi_k, phi_j>.

    Symmetric positive definite as long as Phi'' stays positive along the
    grid (uniform convexity of the closure).
    """
    return problem.basis.weighted_gram(1.0 / fields.phi_second_gamma)


@dataclass
class RhsResult:
    """Coefficient time derivatives plus per-evaluation diagnostics."""

    df: np.ndarray
    dg: np.ndarray
    dv: np.ndarray
    diss_rate: float          # dissipation functional at this state
    stiffness_scale: float    # max |linearized decay rate|; step cap = c_stab/this
    fields: GridFields
    fluxes: FluxBundle

    def pack(self) -> np.ndarray:
        return np.concatenate([self.df, self.dg, self.dv])


def dissipation_from_fluxes(problem: Problem, fields: GridFields,
                            fluxes: FluxBundle) -> float:
    """Dissipation functional (quadrature of the sum-of-squares integrand).

    Equals -dE/dt of the semi-discrete system exactly up to rounding: the
    integrand below is the pointwise rearrangement of the tested equations
    against (R f_xx + S mu (f+g)_xx, S mu (f+g)_xx, mu v).
    """
    p = problem.params
    mu = p.mu
    integrand = (fluxes.j_f ** 2
                 + mu * fluxes.j_g ** 2
                 + fields.a_f * mu ** 2 / 4.0 * fluxes.marangoni ** 2
                 + fields.a_g * mu / 4.0 * fields.sigma_x ** 2
                 + mu * p.diffusivity * fields.phi_second_gamma * fields.dgamma ** 2)
    return float(problem.basis.weight * integrand.sum())


def stiffness_scale(problem: Problem, fields: GridFields) -> float:
    """Largest decay rate the explicit stepper has to resolve.

    Estimated as m4 * k_max^4 + m2 * k_max^2 with m4 the worst fourth-order
    mobility aggregate over the grid (one per equation) and m2 the worst
    second-order (diffusive + Marangoni) coefficient of the surfactant
    equation.
    """
    p = problem.params
    r_cap, s_cap, mu = p.cap_r, p.cap_s, p.mu
    a_f, a_g = fields.a_f, fields.a_g
    abs_tau = np.abs(fields.tau_gamma)

    mob_f = (r_cap + s_cap * mu) * a_f ** 3 / 3.0 + s_cap * mu * a_f ** 2 * a_g / 2.0
    mob_g = (r_cap * a_f ** 2 * a_g / 2.0 + s_cap * a_g ** 3 / 3.0
             + s_cap * mu * (a_f ** 2 * a_g / 2.0 + a_f * a_g ** 2))
    mob_gamma = abs_tau * (r_cap * a_f ** 2 / 2.0 + s_cap * a_g ** 2 / 2.0
                           + s_cap * mu * (a_f ** 2 / 2.0 + a_f * a_g))
    m4 = max(float(mob_f.max()), float(mob_g.max()), float(mob_gamma.max()))

    m2 = p.diffusivity + float(np.max(np.abs(fields.slope_gamma)
                                      * abs_tau * (mu * a_f + a_g)))
    k_max = problem.basis.wavenumbers[-1]
    return m4 * k_max ** 4 + m2 * k_max ** 2


def assemble_rhs(problem: Problem, state: SpectralState) -> RhsResult:
    """Tested right-hand side of the coefficient ODE at one state.

    The mean components (j = 0) of all three returned derivative vectors
    are exactly zero because the test functions are basis derivatives.
    """
    fields = eval_fields(problem, state)
    fluxes = eval_fluxes(problem, fields)

    tested = problem.basis.test_against_dx(
        np.vstack([fluxes.h_f, fluxes.h_g, fluxes.h_gamma]))
    # rhs_v[0] = 0 exactly, so (M dV)_0 = 0: the surfactant mean obeys
    # d/dt <W(v), 1> = 0 regardless of the closure.
    dv = problem.solve_mass(fields, tested[2])

    return RhsResult(
        df=tested[0], dg=tested[1], dv=dv,
        diss_rate=dissipation_from_fluxes(problem, fields, fluxes),
        stiffness_scale=stiffness_scale(problem, fields),
        fields=fields, fluxes=fluxes,
    )
