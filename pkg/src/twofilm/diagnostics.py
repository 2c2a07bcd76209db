"""Observables: energy, dissipation, masses, minima, negativity functionals.

The negativity functionals use a mollified negative-part function chi_delta,
built by scaling a fixed profile chi1: chi_delta(x) = delta * chi1(x/delta).
chi1 is obtained by integrating a kernel psi twice (chi1'' = psi) with
chi1 = 0 on [0, inf); psi >= 0 is supported in [-1, 0] with unit mass, so
chi_delta is a convex, non-increasing C^1 ramp that approximates
max(-x, 0) to within delta and has curvature confined to [-delta, 0].
The integral of chi_delta(f) over the domain therefore measures "how
negative" f gets, with a resolution that sharpens as delta shrinks.

The default kernel is the polynomial psi(x) = 30 x^2 (1+x)^2 on [-1, 0]:
closed-form antiderivatives, C^1 smoothness (all the diagnostics need).
A C-infinity exponential bump is available behind a config switch; its
profile is tabulated once by cumulative quadrature and interpolated.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .fluxes import Problem, SpectralState, dissipation_from_fluxes, eval_fields, eval_fluxes
from .regularization import a_eps, sigma_eps_prime, tau_eps

# ---------------------------------------------------------------------------
# mollified negative-part family


@dataclass(frozen=True)
class MollifierKernel:
    """A kernel psi plus the closed profile chi1 with chi1'' = psi."""

    name: str
    psi: Callable            # curvature profile, supported in [-1, 0]
    chi1: Callable           # ramp profile, 0 on [0, inf), slope -1 left of -1
    chi1_prime: Callable
    psi_sup: float           # sup of psi (the constant K in the bounds)


def polynomial_kernel() -> MollifierKernel:
    """Closed-form kernel psi(x) = 30 x^2 (1+x)^2 on [-1, 0]."""

    def psi(x):
        x = np.asarray(x, dtype=float)
        inside = (x >= -1.0) & (x <= 0.0)
        xm = np.where(inside, x, 0.0)
        return np.where(inside, 30.0 * xm**2 * (1.0 + xm) ** 2, 0.0)

    def chi1(x):
        x = np.asarray(x, dtype=float)
        mid = (x >= -1.0) & (x < 0.0)
        xm = np.where(mid, x, 0.0)
        ramp = xm**4 * ((xm + 3.0) * xm + 2.5)      # 2.5 x^4 + 3 x^5 + x^6
        tail = np.where(x >= 0.0, 0.0, -x - 0.5)
        return np.where(mid, ramp, tail)

    def chi1_prime(x):
        x = np.asarray(x, dtype=float)
        mid = (x >= -1.0) & (x < 0.0)
        xm = np.where(mid, x, 0.0)
        slope = xm**3 * ((6.0 * xm + 15.0) * xm + 10.0)   # 10 x^3 + 15 x^4 + 6 x^5
        tail = np.where(x >= 0.0, 0.0, -1.0)
        return np.where(mid, slope, tail)

    return MollifierKernel("polynomial", psi, chi1, chi1_prime, psi_sup=1.875)


def bump_kernel(n_table: int = 32769) -> MollifierKernel:
    """Exponential-bump kernel, tabulated and linearly interpolated.

    The exposed psi is the piecewise-linear interpolant of the table, so
    every derived quantity is computed as an exact integral of that
    interpolant (cumulative trapezoid): the unit-mass normalisation and the
    slope table then agree with what an independent quadrature of psi sees.
    """
    u = np.linspace(-1.0, 0.0, n_table)
    arg = 1.0 - (2.0 * u + 1.0) ** 2
    raw = np.zeros_like(u)
    interior = arg > 0
    raw[interior] = np.exp(-1.0 / arg[interior])
    cum_raw = integrate.cumulative_trapezoid(raw, x=u, initial=0.0)
    norm = 1.0 / cum_raw[-1]                     # interpolant has unit mass
    psi_table = norm * raw
    chi1p_table = norm * cum_raw - 1.0           # -integral of psi from u to 0
    cum_slope = integrate.cumulative_trapezoid(chi1p_table, x=u, initial=0.0)
    chi1_table = cum_slope - cum_slope[-1]       # chi1(0) = 0
    chi1_left = float(chi1_table[0])             # value at -1; tail is linear

    def psi(x):
        x = np.asarray(x, dtype=float)
        return np.interp(x, u, psi_table, left=0.0, right=0.0)

    def chi1(x):
        x = np.asarray(x, dtype=float)
        val = np.interp(x, u, chi1_table, left=chi1_left, right=0.0)
        return np.where(x < -1.0, chi1_left - (x + 1.0), val)

    def chi1_prime(x):
        x = np.asarray(x, dtype=float)
        return np.interp(x, u, chi1p_table, left=-1.0, right=0.0)

    return MollifierKernel("bump", psi, chi1, chi1_prime,
                           psi_sup=norm * math.exp(-1.0))


_KERNELS = {"polynomial": polynomial_kernel, "bump": bump_kernel}


def kernel_by_name(name: str) -> MollifierKernel:
    try:
        return _KERNELS[name]()
    except KeyError:
        raise ValueError(
            f"unknown mollifier kernel {name!r}; choose from {sorted(_KERNELS)}")


def chi_delta(kernel: MollifierKernel, delta: float, s):
    """delta * chi1(s / delta): mollified negative part at resolution delta."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return delta * kernel.chi1(np.asarray(s, dtype=float) / delta)


def chi_delta_prime(kernel: MollifierKernel, delta: float, s):
    return kernel.chi1_prime(np.asarray(s, dtype=float) / delta)


def chi_delta_second(kernel: MollifierKernel, delta: float, s):
    return kernel.psi(np.asarray(s, dtype=float) / delta) / delta


@dataclass
class KernelReport:
    """Defects of the kernel contract; all should sit at rounding level."""

    name: str
    psi_negativity: float        # max(0, -min psi)
    psi_support_leak: float      # max |psi| outside [-1, 0]
    psi_mass_defect: float       # |integral of psi - 1|
    chi1_positive_leak: float    # max |chi1| on [0, inf)
    chi1_slope_excess: float     # max(0, max chi1' ) and max(0, -1 - min chi1')
    chi1_convexity_defect: float # max decrease of chi1' along increasing x
    tol: float = 1e-10

    @property
    def ok(self) -> bool:
        return max(self.psi_negativity, self.psi_support_leak,
                   self.psi_mass_defect, self.chi1_positive_leak,
                   self.chi1_slope_excess, self.chi1_convexity_defect) <= self.tol


def kernel_check(kernel: MollifierKernel, num: int = 20001) -> KernelReport:
    """Verify the kernel contract by dense sampling and quadrature."""
    s = np.linspace(-3.0, 3.0, num)
    psi_vals = kernel.psi(s)
    outside = (s < -1.0) | (s > 0.0)
    # dense composite rule on nodes unrelated to any internal table: adaptive
    # quadrature stalls on the kinks of an interpolated kernel profile
    x_mass = np.linspace(-1.0, 0.0, 2**20 + 1)
    mass = integrate.simpson(kernel.psi(x_mass), x=x_mass)
    chi_pos = kernel.chi1(np.linspace(0.0, 3.0, num))
    slopes = kernel.chi1_prime(s)
    return KernelReport(
        name=kernel.name,
        psi_negativity=max(0.0, float(-psi_vals.min())),
        psi_support_leak=float(np.abs(psi_vals[outside]).max()),
        psi_mass_defect=abs(mass - 1.0),
        chi1_positive_leak=float(np.abs(chi_pos).max()),
        chi1_slope_excess=max(0.0, float(slopes.max()),
                              float(-1.0 - slopes.min())),
        chi1_convexity_defect=max(0.0, float(-np.diff(slopes).min())),
    )


@dataclass
class MollifierReport:
    """Worst violation of each chi_delta bound over the supplied samples."""

    delta: float
    n_samples: int
    approx_excess: float      # max(0, |chi_d - max(-s,0)| - delta)
    slope_excess: float       # max(0, |chi_d'| - 1)
    curvature_excess: float   # max(0, |chi_d''| - K/delta)
    product_excess: float     # max(0, |s chi_d''(s)| - K) on [-delta, delta]
    support_leak: float       # max |chi_d''| outside [-delta, 0]
    tol: float

    @property
    def worst(self) -> float:
        return max(self.approx_excess, self.slope_excess, self.curvature_excess,
                   self.product_excess, self.support_leak)

    @property
    def ok(self) -> bool:
        return self.worst <= self.tol


def mollifier_lemma_check(kernel: MollifierKernel, delta: float, samples,
                          tol: float = 1e-12) -> MollifierReport:
    """Check the four chi_delta bounds pointwise on the given samples."""
    s = np.asarray(samples, dtype=float)
    val = chi_delta(kernel, delta, s)
    slope = chi_delta_prime(kernel, delta, s)
    curv = chi_delta_second(kernel, delta, s)
    big_k = kernel.psi_sup

    approx = np.abs(val - np.maximum(-s, 0.0)) - delta
    slope_ex = np.abs(slope) - 1.0
    curv_ex = np.abs(curv) - big_k / delta
    near = np.abs(s) <= delta
    product = np.abs(s[near] * curv[near]) - big_k if near.any() else np.array([-big_k])
    outside = (s < -delta) | (s > 0.0)
    leak = np.abs(curv[outside]) if outside.any() else np.array([0.0])

    return MollifierReport(
        delta=delta, n_samples=s.size,
        approx_excess=max(0.0, float(approx.max())),
        slope_excess=max(0.0, float(slope_ex.max())),
        curvature_excess=max(0.0, float(curv_ex.max())),
        product_excess=max(0.0, float(product.max())),
        support_leak=float(leak.max()),
        tol=tol,
    )


def negativity_functional(kernel: MollifierKernel, delta: float,
                          values, weight: float) -> float:
    """Quadrature of chi_delta(field) over the domain (midpoint rule)."""
    return weight * float(np.sum(chi_delta(kernel, delta, values)))


# ---------------------------------------------------------------------------
# energy, dissipation, linearization


def energy(problem: Problem, state: SpectralState) -> float:
    """Capillary + surfactant free energy driving the gradient flow.

    E = int (R/2) |f_x|^2 + (S mu / 2) |(f+g)_x|^2 + mu Phi(Gamma) dx,
    with R and S the derived spreading coefficients.  For quadratic Phi the
    integrand is band-limited, so the midpoint quadrature is exact.
    """
    basis, params = problem.basis, problem.params
    big_r, big_s = params.cap_r, params.cap_s
    df = basis.derivative_on_grid(state.f_hat, 1)
    dfg = basis.derivative_on_grid(state.f_hat + state.g_hat, 1)
    gamma = problem.closure.w(basis.synthesize(state.v_hat))
    grand = (0.5 * (big_r * df**2 + big_s * params.mu * dfg**2)
             + params.mu * problem.closure.phi(gamma))
    return basis.weight * float(np.sum(grand))


def dissipation_rate(problem: Problem, state: SpectralState) -> float:
    """Instantaneous dissipation at a state (also reported by the RHS)."""
    fields = eval_fields(problem, state)
    fluxes = eval_fluxes(problem, fields)
    return dissipation_from_fluxes(problem, fields, fluxes)


def dispersion_matrix(problem: Problem, f_bar: float, g_bar: float,
                      gamma_bar: float, k: int) -> np.ndarray:
    """Linearized growth matrix of cosine mode k about a flat state.

    Returns A such that perturbations (df, dg, dGamma) cos(k pi x / L)
    evolve as d/dt (df, dg, dGamma) = A (df, dg, dGamma) to first order.
    Mode 0 is neutral (pure transport of conserved quantities): A(0) = 0.
    """
    if k < 0:
        raise ValueError("mode index must be non-negative")
    params, closure, eps = problem.params, problem.closure, problem.eps
    q = k * math.pi / params.length
    big_r, big_s, mu = params.cap_r, params.cap_s, params.mu
    dd = params.diffusivity
    af = float(a_eps(f_bar, eps))
    ag = float(a_eps(g_bar, eps))
    slope = float(sigma_eps_prime(np.array(gamma_bar), eps, closure))
    tau = float(tau_eps(np.array(gamma_bar), eps, closure))

    c_f = af**3 / 3.0 + af**2 * ag / 2.0
    c_g = ag * (ag**2 / 3.0 + mu * (af**2 / 2.0 + af * ag))
    c_gam = ag**2 / 2.0 + mu * (af**2 / 2.0 + af * ag)
    q2, q4 = q**2, q**4
    return np.array([
        [-q4 * (big_r * af**3 / 3.0 + big_s * mu * c_f),
         -q4 * big_s * mu * c_f,
         q2 * mu * (af**2 / 2.0) * slope],
        [-q4 * (big_r * ag * af**2 / 2.0 + big_s * c_g),
         -q4 * big_s * c_g,
         q2 * ag * (mu * af + ag / 2.0) * slope],
        [-q4 * tau * (big_r * af**2 / 2.0 + big_s * c_gam),
         -q4 * tau * big_s * c_gam,
         q2 * tau * (mu * af + ag) * slope - q2 * dd],
    ])


# ---------------------------------------------------------------------------
# per-sample record


@dataclass
class DiagnosticsRecord:
    """One row of the time-series diagnostics."""

    t: float
    energy: float
    diss_rate: float
    diss_cum: float
    energy_residual: float    # energy(t) + diss_cum - energy(0)
    mass_f: float
    mass_g: float
    mass_gamma: float
    min_f: float
    min_g: float
    min_gamma: float
    chi_f: float
    chi_g: float

    HEADER = ("t,energy,diss_rate,diss_cum,energy_residual,"
              "mass_f,mass_g,mass_gamma,min_f,min_g,min_gamma,chi_f,chi_g")

    def csv_row(self) -> str:
        vals = (self.t, self.energy, self.diss_rate, self.diss_cum,
                self.energy_residual, self.mass_f, self.mass_g,
                self.mass_gamma, self.min_f, self.min_g, self.min_gamma,
                self.chi_f, self.chi_g)
        return ",".join("%.17g" % v for v in vals)


def collect(problem: Problem, state: SpectralState, t: float,
            diss_rate: float, diss_cum: float, energy0: float,
            kernel: MollifierKernel, delta: float) -> DiagnosticsRecord:
    """Evaluate every diagnostic at one sample."""
    basis = problem.basis
    fields = eval_fields(problem, state)
    en = energy(problem, state)
    return DiagnosticsRecord(
        t=t, energy=en, diss_rate=diss_rate, diss_cum=diss_cum,
        energy_residual=en + diss_cum - energy0,
        mass_f=float(basis.mass(state.f_hat)),
        mass_g=float(basis.mass(state.g_hat)),
        mass_gamma=basis.weight * float(np.sum(fields.gamma)),
        min_f=float(fields.f.min()),
        min_g=float(fields.g.min()),
        min_gamma=float(fields.gamma.min()),
        chi_f=negativity_functional(kernel, delta, fields.f, basis.weight),
        chi_g=negativity_functional(kernel, delta, fields.g, basis.weight),
    )
