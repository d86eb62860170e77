import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linrisk import function_space as fs
from linrisk.errors import ValidationError


def test_hermite_coefficients_against_oracle(frozen):
    h = frozen["hermite"]
    assert np.allclose(fs.get_activation("relu").mu(8), h["relu_mu"], atol=1e-10)
    assert np.allclose(fs.get_activation("tanh").mu(8), h["tanh_mu"], atol=1e-10)
    assert np.allclose(fs.get_activation("tanh").mu_prime(8), h["tanh_prime_mu"], atol=1e-9)
    assert fs.get_activation("tanh").second_moment() == pytest.approx(h["tanh_sq"], rel=1e-12)


def test_bars_and_parseval_masses(frozen):
    h = frozen["hermite"]
    relu = fs.hermite_bars("relu")
    assert relu.b0 == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-12)
    assert relu.b1 == pytest.approx(0.5, rel=1e-12)
    assert relu.bstar_sq == pytest.approx(h["relu_bstar_sq"], rel=1e-10)
    assert fs.residual_mass_bl("relu", 1) == pytest.approx(h["relu_b1"], rel=1e-10)
    assert fs.residual_mass_bl("tanh", 1) == pytest.approx(h["tanh_b1"], rel=1e-10)
    # derivative of relu is the step; v_0 = E step^2
    assert fs.activation_tail_vl("relu", 0) == pytest.approx(h["step_v0"], rel=1e-12)
    assert math.isnan(fs.hermite_bars("identity").zeta)


def test_limit_kernels_against_closed_forms(frozen):
    h = frozen["hermite"]
    rf, nt = fs.limit_kernels("relu")
    assert np.allclose(rf(np.array(h["t_grid"])), h["relu_hrf"], atol=1e-9)
    assert np.allclose(nt(np.array(h["t_grid"])), h["relu_hnt"], atol=1e-9)
    rf_tanh, _ = fs.limit_kernels("tanh", n_nodes=129)
    assert np.allclose(rf_tanh(np.array([-0.5, 0.3, 0.7])), h["tanh_hrf"], atol=1e-8)
    with pytest.raises(ValidationError):
        rf(np.array([1.5]))


def test_gaussian_pair_expectation_moments():
    val = fs.gaussian_pair_expectation(lambda u, v: u * u * v * v, 2.0, 0.5, 3.0)
    # Isserlis: E u^2 v^2 = var_u var_v + 2 cov^2
    assert val == pytest.approx(6.5, rel=1e-12)
    with pytest.raises(ValidationError):
        fs.gaussian_pair_expectation(lambda u, v: u, 1.0, 2.0, 1.0)


def test_sphere_dimensions(frozen):
    for d, dims in frozen["sphere"]["sphere_dim"].items():
        assert [fs.sphere_dim(int(d), k) for k in range(8)] == dims


@pytest.mark.parametrize("d", ["5", "20"])
def test_gegenbauer_against_gram_schmidt(frozen, d):
    ref = frozen["sphere"]["gegenbauer"][d]
    vals = fs.gegenbauer_all(int(d), 5, np.array(ref["t"]))
    assert np.allclose(vals, ref["values"], atol=1e-12)
    q = fs.sphere_quadrature(int(d))
    qk = fs.gegenbauer_all(int(d), 5, math.sqrt(int(d)) * q.nodes)
    gram = (qk * q.weights) @ qk.T
    assert np.allclose(np.diag(gram), ref["norm_sq"], rtol=1e-10)
    assert np.allclose(gram - np.diag(np.diag(gram)), 0.0, atol=1e-12)


def test_kernel_level_coefficients(frozen):
    rf, _ = fs.limit_kernels("relu")
    xi2 = fs.kernel_level_coeffs(rf, 25, k_max=4, kinks=())
    assert np.allclose(xi2, frozen["sphere"]["relu_hrf_xi2_d25"], atol=1e-9)


def test_ridge_target_masses(frozen):
    phi = fs.hermite_series_activation([0.0, math.sqrt(0.4), math.sqrt(0.2), 0.0, math.sqrt(1 / 120)])
    t = fs.ridge_target(phi, np.eye(20)[0])
    m = t.degree_masses(6)
    assert np.allclose(m, frozen["sphere"]["three_hermite_masses_d20"], atol=1e-10)
    assert t.norm_sq() == pytest.approx(frozen["sphere"]["three_hermite_norm_d20"], rel=1e-10)
    he2 = fs.ridge_target("he2", np.eye(25)[0])
    low, high = fs.projection_masses(he2, 1)
    assert low == pytest.approx(0.0, abs=1e-12)
    assert high == pytest.approx(frozen["sphere"]["he2_high_mass_d25"], rel=1e-10)


def test_harmonic_target_mass_matches_sample_average():
    rng = np.random.default_rng(0)
    t = fs.gp_target(10, [0.0, 1.0, 0.5], m=4, seed=3)
    X = fs.sample_sphere(200000, 10, rng)
    assert np.mean(t(X) ** 2) == pytest.approx(t.norm_sq(), rel=0.02)


def test_sample_sphere_radius():
    X = fs.sample_sphere(100, 7, np.random.default_rng(1))
    assert np.allclose(np.linalg.norm(X, axis=1), math.sqrt(7))


@settings(max_examples=20, deadline=None)
@given(d=st.integers(3, 30), k=st.integers(0, 6))
def test_gegenbauer_endpoint_and_bound(d, k):
    vals = fs.gegenbauer_eval(d, k, np.linspace(-d, d, 41))
    assert vals[-1] == pytest.approx(1.0, rel=1e-12)
    assert np.all(np.abs(vals) <= 1 + 1e-12)


def test_finite_d_kernel_matches_sphere_monte_carlo():
    d = 6
    rf, _ = fs.finite_d_kernels("relu", d, n_nodes=65)
    rng = np.random.default_rng(4)
    W = fs.sample_sphere(400000, d, rng, radius=1.0)
    x1 = np.zeros(d); x1[0] = math.sqrt(d)
    x2 = np.zeros(d); x2[0] = 0.3 * math.sqrt(d); x2[1] = math.sqrt(d * (1 - 0.09))
    v = np.maximum(W @ x1, 0) * np.maximum(W @ x2, 0)
    sem = v.std() / math.sqrt(v.size)
    assert abs(float(rf(0.3)) - v.mean()) < 4 * sem


def test_hermite_and_gegenbauer_examples():
    mu = fs.hermite_coeffs(lambda x: x, 4)
    assert mu == pytest.approx([0, 1, 0, 0, 0], abs=1e-12)
    mu = fs.hermite_coeffs(lambda x: x * x, 4)
    assert mu == pytest.approx([1, 0, 2, 0, 0], abs=1e-12)
    assert [fs.sphere_dim(7, 0), fs.sphere_dim(7, 1), fs.sphere_dim(3, 2)] == [1, 7, 5]
    t = np.linspace(-9, 9, 7)
    assert np.allclose(fs.gegenbauer_eval(9, 0, t), 1) and np.allclose(fs.gegenbauer_eval(9, 1, t), t / 9)
    xi = fs.kernel_level_coeffs(lambda s: s, 12, 4)
    assert xi == pytest.approx([0, 1 / 12, 0, 0, 0], abs=1e-12)
    xi = fs.kernel_level_coeffs(lambda s: 0 * s + 2.5, 12, 3)
    assert xi == pytest.approx([2.5, 0, 0, 0], abs=1e-12)


def test_residual_and_derivative_masses():
    he2 = fs.get_activation("he2")
    assert fs.residual_mass_bl(he2, 2) == pytest.approx(0.0, abs=1e-12)
    assert fs.residual_mass_bl(he2, 1) == pytest.approx(2.0, rel=1e-12)
    assert fs.residual_mass_bl("relu", 1) == pytest.approx(0.5 - 1 / (2 * math.pi) - 0.25, rel=1e-9)
    assert [fs.activation_tail_vl("identity", k) for k in (0, 1)] == pytest.approx([1.0, 0.0], abs=1e-12)
    assert [fs.activation_tail_vl("square_half", k) for k in (1, 2)] == pytest.approx([1.0, 0.0], abs=1e-12)
    assert fs.activation_tail_vl("relu", 0) == pytest.approx(0.5, rel=1e-9)


def test_three_hermite_target_has_unit_norm():
    c = [0.0, math.sqrt(0.4), math.sqrt(0.2), 0.0, math.sqrt(1 / 120)]
    phi = fs.hermite_series_activation(c)
    assert phi.second_moment() == pytest.approx(1.0, rel=1e-10)
    assert fs.residual_mass_bl(phi, 1) == pytest.approx(0.4 + 0.2, rel=1e-10)
