"""Flux evaluation, the tested right-hand side, and the dissipation identity."""

import dataclasses

import numpy as np
import pytest
from scipy import integrate, linalg

from twofilm import (
    CosineBasis,
    PhysicalParams,
    Problem,
    SpectralState,
    assemble_rhs,
    energy,
    eval_fields,
    eval_fluxes,
    eval_fluxes_expanded,
    mass_matrix,
    quadratic_closure,
)

BETA = 0.5


def make_problem(n=8, eps=1e-2, mu=0.5, length=1.0, oversample=4.0,
                 diffusivity=0.05):
    basis = CosineBasis(n, length, oversample)
    params = PhysicalParams(length=length, mu=mu, diffusivity=diffusivity)
    return Problem(basis, params, quadratic_closure(BETA), eps)


def random_state(rng, basis, f_base=1.0, g_base=0.8, amp=0.2):
    """Random band-limited state with films bounded away from zero."""
    n = basis.n
    k = np.arange(n + 1)
    decay = 1.0 / (1.0 + k) ** 2
    f_hat = basis.coeffs_from_cosine(f_base, {})
    g_hat = basis.coeffs_from_cosine(g_base, {})
    f_hat[1:] += amp * rng.standard_normal(n) * decay[1:]
    g_hat[1:] += amp * rng.standard_normal(n) * decay[1:]
    v_hat = amp * 0.5 * rng.standard_normal(n + 1) * decay
    v_hat[0] = 0.0
    return SpectralState(f_hat=f_hat, g_hat=g_hat, v_hat=v_hat)


# ----------------------------------------------------------------------
# field evaluation
# ----------------------------------------------------------------------

def test_eval_fields_pointwise_relations():
    problem = make_problem()
    rng = np.random.default_rng(31)
    state = random_state(rng, problem.basis)
    fields = eval_fields(problem, state)

    assert np.allclose(fields.gamma, 1.0 + fields.v / BETA, rtol=1e-15, atol=1e-15)
    assert np.array_equal(fields.phi_second_gamma, np.full_like(fields.v, BETA))
    assert np.allclose(fields.dgamma, fields.dv / BETA, rtol=1e-15, atol=1e-15)
    assert np.all(fields.a_f >= problem.eps)
    assert np.all(fields.a_g >= problem.eps)
    assert np.allclose(fields.sigma_x, fields.slope_gamma * fields.dgamma,
                       rtol=0, atol=1e-15)


def test_mobility_floor_applies_to_negative_films():
    problem = make_problem(eps=1e-3)
    state = random_state(np.random.default_rng(2), problem.basis,
                         f_base=0.0, g_base=0.0, amp=0.3)
    fields = eval_fields(problem, state)
    assert fields.f.min() < 0.0  # the construction does dip negative
    assert np.all(fields.a_f >= 1e-3)
    assert np.allclose(fields.a_f, 1e-3 + np.maximum(fields.f, 0.0), atol=0)


# ----------------------------------------------------------------------
# compact vs expanded flux routes
# ----------------------------------------------------------------------

@pytest.mark.parametrize("mu", [0.5, 0.0, 2.0])
def test_flux_routes_agree(mu):
    problem = make_problem(mu=mu)
    rng = np.random.default_rng(37)
    for _ in range(20):
        state = random_state(rng, problem.basis)
        fields = eval_fields(problem, state)
        bundle = eval_fluxes(problem, fields)
        h_f, h_g, h_gamma = eval_fluxes_expanded(problem, fields)
        for got, want in ((bundle.h_f, h_f), (bundle.h_g, h_g),
                          (bundle.h_gamma, h_gamma)):
            scale = max(np.max(np.abs(want)), 1e-30)
            assert np.max(np.abs(got - want)) <= 1e-9 * scale


def test_single_phase_flux_closed_form():
    # at mu = 0 the lower-film flux is R a_f^3/3 * f_xxx exactly
    problem = make_problem(mu=0.0)
    rng = np.random.default_rng(41)
    state = random_state(rng, problem.basis)
    fields = eval_fields(problem, state)
    bundle = eval_fluxes(problem, fields)
    want = problem.params.cap_r * fields.a_f ** 3 / 3.0 * fields.d3f
    assert np.allclose(bundle.h_f, want, rtol=1e-12, atol=1e-14)


# ----------------------------------------------------------------------
# tested right-hand side vs dense independent quadrature
# ----------------------------------------------------------------------

def dense_rhs_oracle(problem, state, num=10001):
    """Recompute the tested RHS with independent pointwise trig evaluation
    and composite-Simpson quadrature on a dense uniform grid."""
    p = problem.params
    length, mu = p.length, p.mu
    r_cap, s_cap, dcap = p.cap_r, p.cap_s, p.diffusivity
    eps = problem.eps
    n = problem.basis.n

    x = np.linspace(0.0, length, num)
    k = np.arange(n + 1)
    q = k * np.pi / length
    amp = np.where(k == 0, np.sqrt(1.0 / length), np.sqrt(2.0 / length))
    cos_t = amp[:, None] * np.cos(np.outer(q, x))
    sin_t = np.sin(np.outer(q, x))

    f = state.f_hat @ cos_t
    g = state.g_hat @ cos_t
    v = state.v_hat @ cos_t
    d3f = state.f_hat @ (amp[:, None] * q[:, None] ** 3 * sin_t)
    d3g = state.g_hat @ (amp[:, None] * q[:, None] ** 3 * sin_t)
    dv = state.v_hat @ (-amp[:, None] * q[:, None] * sin_t)

    gamma = 1.0 + v / BETA
    dgamma = dv / BETA
    slope = -BETA * gamma
    # odd tent truncation, written out longhand
    u = slope * eps
    mag = np.abs(u)
    tent = np.sign(u) * np.where(mag < 1.0, mag, np.maximum(2.0 - mag, 0.0))
    slope_eps = tent / eps
    ratio = np.where(np.abs(slope) < 1e-30, 1.0,
                     slope_eps / np.where(np.abs(slope) < 1e-30, 1.0, slope))
    tau = gamma * ratio
    sigma_x = slope_eps * dgamma

    a_f = eps + np.maximum(f, 0.0)
    a_g = eps + np.maximum(g, 0.0)
    q3 = d3f + d3g

    h_f = a_f * (r_cap * a_f ** 2 / 3.0 * d3f
                 + s_cap * mu * (a_f ** 2 / 3.0 + a_f * a_g / 2.0) * q3
                 + mu * (a_f / 2.0) * sigma_x)
    h_g = a_g * (r_cap * a_f ** 2 / 2.0 * d3f
                 + s_cap * (a_g ** 2 / 3.0 + mu * (a_f ** 2 / 2.0 + a_f * a_g)) * q3
                 + (mu * a_f + a_g / 2.0) * sigma_x)
    h_gamma = (tau * (r_cap * a_f ** 2 / 2.0 * d3f
                      + s_cap * (a_g ** 2 / 2.0 + mu * (a_f ** 2 / 2.0 + a_f * a_g)) * q3
                      + (mu * a_f + a_g) * sigma_x)
               - dcap * dgamma)

    dphi = -amp[:, None] * q[:, None] * sin_t
    df = integrate.simpson(h_f[None, :] * dphi, x=x, axis=-1)
    dg = integrate.simpson(h_g[None, :] * dphi, x=x, axis=-1)
    dv_hat = BETA * integrate.simpson(h_gamma[None, :] * dphi, x=x, axis=-1)
    return df, dg, dv_hat


@pytest.mark.parametrize("mu,n", [(0.5, 8), (0.0, 6), (1.5, 4)])
def test_rhs_matches_dense_quadrature(mu, n):
    problem = make_problem(n=n, mu=mu)
    rng = np.random.default_rng(43 + n)
    for _ in range(3):
        state = random_state(rng, problem.basis)
        res = assemble_rhs(problem, state)
        df, dg, dv = dense_rhs_oracle(problem, state)
        for got, want in ((res.df, df), (res.dg, dg), (res.dv, dv)):
            scale = max(np.max(np.abs(want)), 1e-30)
            assert np.max(np.abs(got - want)) <= 1e-9 * scale


def test_rhs_conserves_every_mean_exactly():
    problem = make_problem()
    rng = np.random.default_rng(47)
    state = random_state(rng, problem.basis)
    res = assemble_rhs(problem, state)
    assert res.df[0] == 0.0
    assert res.dg[0] == 0.0
    assert res.dv[0] == 0.0  # bitwise: surfactant mean is conserved


def test_rhs_vanishes_on_flat_states():
    problem = make_problem()
    basis = problem.basis
    state = SpectralState(
        f_hat=basis.coeffs_from_cosine(1.0, {}),
        g_hat=basis.coeffs_from_cosine(0.5, {}),
        v_hat=np.zeros(basis.n + 1),
    )
    res = assemble_rhs(problem, state)
    assert np.array_equal(res.pack(), np.zeros(3 * (basis.n + 1)))


# ----------------------------------------------------------------------
# mass matrix and the two solve paths
# ----------------------------------------------------------------------

def test_mass_matrix_spd_and_scalar_for_quadratic():
    problem = make_problem()
    rng = np.random.default_rng(53)
    state = random_state(rng, problem.basis)
    fields = eval_fields(problem, state)
    m = mass_matrix(problem, fields)
    assert np.allclose(m, m.T, atol=1e-15)
    assert np.linalg.eigvalsh(m).min() > 0.0
    # constant Phi'': M = Gram / beta
    assert np.allclose(m, problem.basis.gram() / BETA, atol=1e-14)


def test_solve_mass_analytic_and_factored_paths_agree():
    problem = make_problem()
    rng = np.random.default_rng(59)
    state = random_state(rng, problem.basis)
    fields = eval_fields(problem, state)
    rhs = rng.standard_normal(problem.basis.n + 1)

    fast = problem.solve_mass(fields, rhs)
    assert np.array_equal(fast, BETA * rhs)  # scalar multiple, no solve

    generic_closure = dataclasses.replace(problem.closure, constant_phi_second=None)
    generic = Problem(problem.basis, problem.params, generic_closure, problem.eps)
    slow = generic.solve_mass(fields, rhs)
    assert np.allclose(slow, fast, rtol=1e-12, atol=1e-13)

    # and both satisfy M x = rhs
    m = mass_matrix(problem, fields)
    assert np.allclose(m @ slow, rhs, rtol=1e-12, atol=1e-13)


# ----------------------------------------------------------------------
# dissipation identity and stiffness scale
# ----------------------------------------------------------------------

def test_dissipation_matches_energy_decay_direction():
    # D = -dE/dt along the tested right-hand side (the gradient-flow
    # structure); checked by central differences of the energy
    problem = make_problem()
    rng = np.random.default_rng(61)
    state = random_state(rng, problem.basis)
    res = assemble_rhs(problem, state)

    h = 1e-7 / max(1.0, np.max(np.abs(res.pack())))
    y = state.pack()

    def energy_at(yv):
        return energy(problem, SpectralState.unpack(yv, problem.basis.n))

    de = (energy_at(y + h * res.pack()) - energy_at(y - h * res.pack())) / (2 * h)
    assert de <= 0.0
    assert -de == pytest.approx(res.diss_rate, rel=1e-6)


def test_dissipation_is_nonnegative_sum_of_squares():
    problem = make_problem()
    rng = np.random.default_rng(67)
    for _ in range(10):
        state = random_state(rng, problem.basis, f_base=0.3, g_base=0.2, amp=0.4)
        res = assemble_rhs(problem, state)
        assert res.diss_rate >= 0.0


def test_stiffness_scale_grows_with_the_films():
    problem = make_problem()
    rng = np.random.default_rng(71)
    state = random_state(rng, problem.basis)
    thick = SpectralState(f_hat=2.0 * state.f_hat, g_hat=2.0 * state.g_hat,
                          v_hat=state.v_hat)
    s1 = assemble_rhs(problem, state).stiffness_scale
    s2 = assemble_rhs(problem, thick).stiffness_scale
    assert 0.0 < s1 < s2


def test_state_pack_round_trip():
    rng = np.random.default_rng(73)
    y = rng.standard_normal(3 * 9)
    state = SpectralState.unpack(y, 8)
    assert np.array_equal(state.pack(), y)
    other = state.copy()
    other.f_hat[0] += 1.0
    assert state.f_hat[0] != other.f_hat[0]
