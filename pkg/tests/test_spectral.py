"""Cosine basis: orthonormality, transforms, derivatives, quadrature."""

import numpy as np
import pytest

from twofilm import CosineBasis, evaluate_coeffs


def random_coeffs(rng, n, decay=1.5):
    k = np.arange(n + 1)
    return rng.standard_normal(n + 1) / (1.0 + k) ** decay


def test_discrete_orthonormality():
    basis = CosineBasis(16, length=2.5, oversample=4.0)
    gram = basis.gram()
    assert np.max(np.abs(gram - np.eye(17))) < 5e-15


def test_gram_identity_at_demo_resolution():
    # the midpoint rule integrates products of modes j + k < 2Q exactly, so
    # the discrete Gram matrix is the identity up to rounding of the sums
    basis = CosineBasis(32, length=1.0, oversample=4.0)
    assert np.max(np.abs(basis.gram() - np.eye(33))) < 5e-15


def test_round_trip_analyze_synthesize():
    rng = np.random.default_rng(7)
    basis = CosineBasis(24, length=1.0)
    c = random_coeffs(rng, 24)
    back = basis.analyze(basis.synthesize(c))
    assert np.max(np.abs(back - c)) < 1e-14


def test_synthesize_matches_pointwise_evaluation():
    basis = CosineBasis(8, length=3.0)
    rng = np.random.default_rng(11)
    c = random_coeffs(rng, 8)
    dense = evaluate_coeffs(c, 3.0, basis.nodes)
    assert np.allclose(basis.synthesize(c), dense, rtol=0, atol=1e-14)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_derivatives_against_trigonometric_reference(order):
    length = 1.3
    basis = CosineBasis(10, length=length, oversample=8.0)
    rng = np.random.default_rng(13)
    c = random_coeffs(rng, 10)
    got = basis.derivative_on_grid(c, order=order)

    # independent construction: d/dx cos(qx) = -q sin(qx), and so on
    k = np.arange(11)
    q = k * np.pi / length
    amp = np.where(k == 0, np.sqrt(1.0 / length), np.sqrt(2.0 / length))
    arg = np.outer(q, basis.nodes)
    tables = {
        1: -amp[:, None] * q[:, None] * np.sin(arg),
        2: -amp[:, None] * q[:, None] ** 2 * np.cos(arg),
        3: amp[:, None] * q[:, None] ** 3 * np.sin(arg),
    }
    ref = c @ tables[order]
    scale = max(1.0, np.max(np.abs(ref)))
    assert np.max(np.abs(got - ref)) < 1e-12 * scale


def test_first_derivative_against_finite_differences():
    basis = CosineBasis(10, length=1.0, oversample=8.0)
    rng = np.random.default_rng(29)
    c = random_coeffs(rng, 10)
    got = basis.derivative_on_grid(c, order=1)
    h = 1e-6
    x = basis.nodes
    ref = (evaluate_coeffs(c, 1.0, x + h) - evaluate_coeffs(c, 1.0, x - h)) / (2 * h)
    assert np.max(np.abs(got - ref)) < 1e-3 * max(1.0, np.max(np.abs(got)))


def test_boundary_derivatives_vanish():
    # every expansion satisfies the no-flux conditions structurally
    basis = CosineBasis(12, length=1.0)
    rng = np.random.default_rng(17)
    c = random_coeffs(rng, 12)
    for x_bdry in (0.0, 1.0):
        h = 1e-6
        d1 = (evaluate_coeffs(c, 1.0, x_bdry + h) - evaluate_coeffs(c, 1.0, x_bdry - h)) / (2 * h)
        assert abs(d1) < 1e-9


def test_mass_reads_mean_coefficient():
    basis = CosineBasis(6, length=4.0)
    c = basis.coeffs_from_cosine(0.75, {2: 0.3})
    # cosines integrate to zero; the mean survives
    assert basis.mass(c) == pytest.approx(0.75 * 4.0, rel=1e-15)


def test_coeffs_from_cosine_is_exact():
    basis = CosineBasis(8, length=2.0)
    c = basis.coeffs_from_cosine(1.0, {1: 0.2, 3: -0.05})
    x = np.linspace(0.0, 2.0, 101)
    want = 1.0 + 0.2 * np.cos(np.pi * x / 2.0) - 0.05 * np.cos(3 * np.pi * x / 2.0)
    assert np.allclose(evaluate_coeffs(c, 2.0, x), want, rtol=0, atol=1e-14)


def test_coeffs_from_cosine_rejects_out_of_range_mode():
    basis = CosineBasis(4, length=1.0)
    with pytest.raises(ValueError):
        basis.coeffs_from_cosine(1.0, {5: 0.1})


def test_test_against_dx_derivative_gram_identity():
    # the weak form is applied to odd (sine-type) grid functions, where the
    # midpoint rule is exact: <sum_k c_k phi_k', phi_j'> = c_j * q_j^2
    length = 0.8
    basis = CosineBasis(12, length=length, oversample=4.0)
    rng = np.random.default_rng(19)
    c = random_coeffs(rng, 12)
    u = basis.derivative_on_grid(c, order=1)
    left = basis.test_against_dx(u)
    q = np.arange(13) * np.pi / length
    assert np.allclose(left, c * q**2, rtol=1e-13, atol=1e-12)
    assert left[0] == 0.0  # constant test function sees no flux


def test_weighted_gram_spd_and_consistent():
    basis = CosineBasis(10, length=1.0)
    rng = np.random.default_rng(23)
    w = 1.0 + 0.5 * np.abs(np.sin(basis.nodes * 7.0))
    m = basis.weighted_gram(w)
    assert np.allclose(m, m.T, atol=1e-15)
    eig = np.linalg.eigvalsh(m)
    assert eig.min() > 0.0
    # against a dense independent quadrature of <w phi_k, phi_j>
    c = random_coeffs(rng, 10)
    quad = basis.analyze(w * basis.synthesize(c))
    assert np.allclose(m @ c, quad, rtol=1e-13, atol=1e-14)


def test_constructor_rejects_bad_arguments():
    with pytest.raises(ValueError):
        CosineBasis(0, 1.0)
    with pytest.raises(ValueError):
        CosineBasis(4, -1.0)
    with pytest.raises(ValueError):
        CosineBasis(4, 1.0, oversample=0.5)
