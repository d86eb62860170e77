import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linrisk import gaussian_design as gd
from linrisk.errors import SingularSystemError, ValidationError


def test_constructors_and_validation():
    s = gd.power_law(1.5, 50)
    assert s.eigenvalues[0] == 1.0 and s.p == 50 and s.normalized
    assert s.tail(1) > 0 and np.isinf(gd.power_law(0.5, 10).tail(1))
    assert gd.isotropic(4).beta_coeffs.tolist() == [1, 0, 0, 0]
    g = gd.geometric(0.5, 10)
    assert g.tail(1) == pytest.approx(sum(0.5**k for k in range(10, 200)))
    with pytest.raises(ValidationError):
        gd.explicit_spectrum([1.0, 2.0])
    with pytest.raises(ValidationError):
        gd.explicit_spectrum([1.0, 0.5], beta=[1.0])
    with pytest.raises(ValidationError):
        gd.log_power(2.0, 10, offset=0)


def test_log_power_tail_matches_direct_sum():
    s = gd.log_power(2.0, 1000)
    longer = gd.log_power(2.0, 200000)
    direct = float(np.sum(longer.eigenvalues[1000:]))
    # the midpoint integral approximates the sum; the remainder beyond 2e5 is the longer tail
    assert s.tail(1) == pytest.approx(direct + longer.tail(1), rel=1e-3)


def test_sample_design_covariance_and_determinism():
    spec = gd.explicit_spectrum([4.0, 1.0, 0.25])
    a = gd.sample_design(spec, 20000, 0.0, seed=3)
    b = gd.sample_design(spec, 20000, 0.0, seed=3)
    assert np.array_equal(a.Z, b.Z)
    cov = a.Z.T @ a.Z / a.n
    assert np.allclose(np.diag(cov), [4.0, 1.0, 0.25], rtol=0.05)
    r = gd.sample_design(spec, 100, 0.1, kind="rademacher", seed=1)
    assert np.allclose(np.abs(r.Z), np.sqrt(spec.eigenvalues))


def test_ridge_fit_limits():
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((30, 10))
    y = rng.standard_normal(30)
    ols = np.linalg.lstsq(Z, y, rcond=None)[0]
    assert np.allclose(gd.ridge_fit((Z, y), 0.0), ols)
    assert np.allclose(gd.ridge_fit((Z, y), 1e-12), ols, atol=1e-8)
    assert np.linalg.norm(gd.ridge_fit((Z, y), 1e8)) < 1e-6
    Zw = rng.standard_normal((10, 30))
    b = gd.ridge_fit((Zw, y[:10]), 0.0)
    assert np.allclose(Zw @ b, y[:10])
    assert np.allclose(b, np.linalg.pinv(Zw) @ y[:10])
    with pytest.raises(SingularSystemError):
        gd.ridge_fit((np.ones((5, 2)), np.ones(5)), 0.0)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(5, 40), p=st.integers(2, 40), lam=st.floats(1e-4, 10.0))
def test_ridge_primal_dual_agree(n, p, lam):
    rng = np.random.default_rng(n * 100 + p)
    Z = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    direct = np.linalg.solve(Z.T @ Z / n + lam * np.eye(p), Z.T @ y / n)
    assert np.allclose(gd.ridge_fit((Z, y), lam), direct, rtol=1e-8, atol=1e-10)


def test_empirical_bias_variance_matches_monte_carlo_over_noise():
    spec = gd.power_law(1.0, 20, beta=np.linspace(1, 0.1, 20))
    base = gd.sample_design(spec, 15, 0.0, seed=4)
    lam = 0.05
    bias, var = gd.empirical_bias_variance(base, lam, tau=0.7)
    rng = np.random.default_rng(5)
    risks = []
    for _ in range(4000):
        y = base.Z @ spec.beta_coeffs + 0.7 * rng.standard_normal(base.n)
        risks.append(gd.excess_risk(gd.ridge_fit((base.Z, y), lam), spec.beta_coeffs, spec))
    assert np.mean(risks) == pytest.approx(bias + var, rel=0.03)


def test_small_exact_examples():
    s = gd.sample_design(gd.explicit_spectrum([1.0]), 3, 0.0, seed=7)
    assert np.array_equal(s.y, s.Z[:, 0] * s.spec.beta_coeffs[0])
    assert gd.ridge_fit((np.array([[2.0]]), np.array([4.0])), 0.0) == pytest.approx([2.0])
    assert np.allclose(gd.ridge_fit((np.array([[1.0, 1.0]]), np.array([2.0])), 0.0), [1.0, 1.0])
    assert gd.excess_risk([1.0, 2.0], [1.0, 2.0], np.ones(2)) == 0
    assert gd.excess_risk([3.0, 4.0], [0.0, 0.0], np.ones(2)) == pytest.approx(25.0)
    assert gd.excess_risk([1.0, 1.0], [0.0, 0.0], gd.explicit_spectrum([2.0, 1.0])) == pytest.approx(3.0)


def test_empirical_bias_variance_trivial_cases():
    spec = gd.explicit_spectrum([1.0, 0.5, 0.2])
    s = gd.sample_design(spec, 5, 0.0, seed=1)
    assert gd.empirical_bias_variance(s, 0.1)[1] == 0
    assert gd.empirical_bias_variance(s, 0.1, beta_star=np.zeros(3), tau=1.0)[0] == 0


def test_design_laws_by_monte_carlo():
    iso = gd.sample_design(gd.isotropic(2), 10000, 1.0, seed=2)
    assert np.max(np.abs(iso.Z.T @ iso.Z / iso.n - np.eye(2))) < 5 / np.sqrt(iso.n)
    rad = gd.sample_design(gd.explicit_spectrum([4.0, 1.0]), 10000, 0.0, kind="rademacher", seed=3)
    assert np.allclose(rad.Z.var(axis=0), [4.0, 1.0], rtol=0.05)


def test_ridge_is_continuous_in_lambda():
    rng = np.random.default_rng(6)
    Z, y = rng.standard_normal((12, 20)), rng.standard_normal(12)
    gaps = [np.linalg.norm(gd.ridge_fit((Z, y), 0.1 + h) - gd.ridge_fit((Z, y), 0.1)) for h in (1e-2, 1e-4, 1e-6)]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-5
