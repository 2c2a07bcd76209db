"""Mobility floor, tent-truncated tension slope, and truncation thresholds."""

import dataclasses

import numpy as np
import pytest

from twofilm import (
    a_eps,
    quadratic_closure,
    sigma_eps,
    sigma_eps_prime,
    tau_eps,
    tau_identity_threshold,
    tent,
    tent_eps,
)


def test_mobility_floor_values():
    s = np.array([-3.0, -1e-9, 0.0, 1e-9, 2.5])
    out = a_eps(s, 1e-2)
    assert np.array_equal(out, [1e-2, 1e-2, 1e-2, 1e-2 + 1e-9, 2.51])
    assert np.all(a_eps(np.linspace(-5, 5, 101), 1e-3) >= 1e-3)


def test_tent_piecewise_values():
    s = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
    assert np.array_equal(tent(s), [0.0, 0.5, 1.0, 0.5, 0.0, 0.0])
    # odd extension: negative arguments keep their sign
    assert np.array_equal(tent(-s), -tent(s))


def test_tent_eps_clamps_at_inverse_eps():
    s = np.linspace(-100.0, 100.0, 100001)
    for eps in (0.5, 1e-1, 1e-2):
        out = np.asarray(tent_eps(s, eps))
        assert np.max(np.abs(out)) <= 1.0 / eps
        # identity on |s| < 1/eps
        band = np.abs(s) * eps < 1.0
        assert np.allclose(out[band], s[band], rtol=1e-14, atol=0)


def test_truncated_slope_case():
    # slope -3 at eps = 0.5 lands on the descending ramp: tent(-1.5)/0.5 = -1
    clo = quadratic_closure(beta=1.0)
    assert float(sigma_eps_prime(3.0, 0.5, clo)) == pytest.approx(-1.0, abs=1e-15)


def test_identity_threshold_exact_inverse():
    # |sigma'(s)| = beta*s = 1/eps at s = 1/(eps*beta)
    clo = quadratic_closure(beta=0.5)
    assert tau_identity_threshold(1.0, clo) == pytest.approx(2.0, rel=1e-15)
    assert tau_identity_threshold(1e-2, clo) == pytest.approx(200.0, rel=1e-15)


def test_identity_threshold_generic_growth_bound():
    # without the slope inverse the growth bound gives the guaranteed value
    # ((1/(eps*C))^(r/(r+1)) - 1)^(1/r); frozen for eps=1, C=0.5, r=0.5
    clo = dataclasses.replace(quadratic_closure(beta=0.5), abs_slope_inverse=None)
    got = tau_identity_threshold(1.0, clo)
    assert got == pytest.approx(0.06755895217845316, rel=1e-13)
    # the guaranteed threshold never exceeds the exact one
    assert got < 2.0


def test_identity_threshold_degenerate_warns():
    clo = dataclasses.replace(quadratic_closure(beta=0.5), abs_slope_inverse=None)
    with pytest.warns(RuntimeWarning):
        assert tau_identity_threshold(4.0, clo) == 0.0


def test_identity_threshold_rejects_bad_eps():
    with pytest.raises(ValueError):
        tau_identity_threshold(0.0, quadratic_closure())


def test_truncation_bounds_random_sweep():
    # |sigma_eps'| <= min(|sigma'|, 1/eps), tau identity below the threshold,
    # |tau_eps| <= |s|: a seeded sweep over magnitudes and eps decades
    rng = np.random.default_rng(2024)
    clo = quadratic_closure(beta=0.5)
    eps = 10.0 ** rng.uniform(-4.0, 0.0, 20000)
    s = rng.uniform(-60.0, 60.0, 20000)
    slope = np.asarray(clo.sigma_prime(s))
    trunc = np.array([float(sigma_eps_prime(si, ei, clo)) for si, ei in zip(s, eps)])
    tau = np.array([float(tau_eps(si, ei, clo)) for si, ei in zip(s, eps)])

    bound = np.minimum(np.abs(slope), 1.0 / eps)
    assert np.all(np.abs(trunc) <= bound * (1.0 + 1e-14) + 1e-300)
    assert np.all(np.abs(tau) <= np.abs(s) * (1.0 + 1e-14))
    assert np.all(trunc * s <= 0.0)  # odd truncation never flips the sign

    thresholds = np.array([tau_identity_threshold(ei, clo) for ei in eps])
    inside = (s >= 0.0) & (s <= thresholds * (1.0 - 1e-12))
    assert inside.sum() > 1000
    assert np.allclose(tau[inside], s[inside], rtol=1e-13, atol=0)


def test_tau_vanishes_with_the_slope_cutoff():
    # beyond the tent support (eps*|sigma'| >= 2) the advected load is cut
    clo = quadratic_closure(beta=0.5)
    eps = 0.5
    cutoff = clo.abs_slope_inverse(2.0 / eps)  # here: s = 8
    s = np.linspace(cutoff * 1.0001, cutoff * 3.0, 100)
    assert np.array_equal(np.asarray(tau_eps(s, eps, clo)), np.zeros(100))
    assert np.array_equal(np.asarray(sigma_eps_prime(s, eps, clo)), np.zeros(100))


def test_truncated_tension_matches_quadrature_of_truncated_slope():
    # beta = 0.5, eps = 0.25: sigma'(t) = -t/2, so the ramp runs over
    # t in [8, 16] where the truncated slope is -8 + t/2, and cuts at 16.
    clo = quadratic_closure(beta=0.5)
    eps = 0.25

    def primitive(t):
        # integral of the truncated slope from 0 to t, piecewise exact
        if t <= 8.0:
            return -t * t / 4.0
        if t <= 16.0:
            return -16.0 - 8.0 * (t - 8.0) + (t * t - 64.0) / 4.0
        return -32.0

    for sv, want in ((0.5, 0.1875), (4.0, -3.75), (12.0, -27.75), (20.0, -31.75)):
        assert primitive(sv) + 0.25 == pytest.approx(want, abs=1e-12)
        got = float(sigma_eps(sv, eps, clo))
        assert got == pytest.approx(want, rel=1e-9, abs=1e-9), sv


def test_vector_shapes_round_trip():
    clo = quadratic_closure()
    s = np.linspace(-2, 10, 23).reshape(23)
    for fn in (lambda x: a_eps(x, 1e-3),
               lambda x: sigma_eps_prime(x, 1e-2, clo),
               lambda x: tau_eps(x, 1e-2, clo)):
        out = np.asarray(fn(s))
        assert out.shape == s.shape
