"""Gaussian and Rademacher linear designs, ridge estimators and their exact risks.

Covariates are rows ``z = Sigma^{1/2} g`` in the eigenbasis of the covariance,
so ``Sigma = diag(eigenvalues)`` and the target coefficients are given per
eigendirection.
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, linalg, special

from .errors import SingularSystemError, ValidationError

PINV_RTOL = 1e-10


@dataclass(frozen=True)
class SpectralModel:
    """Covariance spectrum (non-increasing, positive) with target coefficients.

    ``tail(q)`` optionally returns ``sum_{l > p} sigma_l^q`` for the part of a
    parametric spectrum beyond the truncation ``p``; it is used by the
    effective ranks. ``kind`` and ``params`` record how the list was built.
    """

    eigenvalues: np.ndarray
    beta_coeffs: np.ndarray
    normalized: bool = False
    kind: str = "explicit"
    params: tuple = ()
    tail: Callable = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        s = np.asarray(self.eigenvalues, dtype=float)
        b = np.asarray(self.beta_coeffs, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise ValidationError("spectrum must be a non-empty 1-d list")
        if np.any(s <= 0) or np.any(np.diff(s) > 1e-15 * s[0]):
            raise ValidationError("eigenvalues must be strictly positive and non-increasing")
        if b.shape != s.shape:
            raise ValidationError(f"beta has {b.size} coefficients for a spectrum of length {s.size}")
        if self.normalized and s[0] != 1.0:
            raise ValidationError("normalized spectrum must have sigma_1 = 1")
        object.__setattr__(self, "eigenvalues", s)
        object.__setattr__(self, "beta_coeffs", b)

    @property
    def p(self):
        return self.eigenvalues.size

    @property
    def tail_mass(self):
        """Trace mass beyond the truncation (0 for explicit spectra)."""
        return 0.0 if self.tail is None else float(self.tail(1))

    def with_beta(self, beta):
        return SpectralModel(self.eigenvalues, beta, self.normalized, self.kind, self.params, self.tail)


def _beta_or_default(beta, p):
    if beta is None:
        b = np.zeros(p)
        b[0] = 1.0
        return b
    return np.asarray(beta, dtype=float)


def explicit_spectrum(eigenvalues, beta=None, normalized=False):
    s = np.asarray(eigenvalues, dtype=float)
    return SpectralModel(s, _beta_or_default(beta, s.size), normalized)


def isotropic(p, beta=None):
    return SpectralModel(np.ones(p), _beta_or_default(beta, p), True, "isotropic", (p,))


def power_law(alpha, p_trunc, beta=None):
    """``sigma_k = k^{-alpha}``, k = 1..p_trunc, with the exact Hurwitz-zeta tail."""
    k = np.arange(1, p_trunc + 1, dtype=float)

    def tail(q):
        x = alpha * q
        return float(special.zeta(x, p_trunc + 1)) if x > 1 else math.inf

    return SpectralModel(k**-alpha, _beta_or_default(beta, p_trunc), True, "power-law", (alpha, p_trunc), tail)


def log_power(beta_exp, p_trunc, beta=None, offset=1):
    """``sigma_k proportional to 1/(m log(m)^beta_exp)`` with ``m = k + offset``, scaled to sigma_1 = 1.

    The offset keeps the logarithm away from zero at the head. The tail beyond
    ``p_trunc`` is the midpoint integral ``int_{p+1/2}^inf``, which is accurate
    to second order for this slowly varying summand.
    """
    if offset < 1:
        raise ValidationError("offset must be >= 1 so that log(k + offset) > 0")
    m = np.arange(1, p_trunc + 1, dtype=float) + offset
    raw = 1.0 / (m * np.log(m) ** beta_exp)
    scale = raw[0]

    def tail(q):
        # in u = log(m) the integrand is exp((1 - q) u) u^(-beta_exp q) / scale^q
        u0 = math.log(p_trunc + 0.5 + offset)
        if q == 1:
            if beta_exp <= 1:
                return math.inf
            return u0 ** (1 - beta_exp) / (beta_exp - 1) / scale
        if q < 1:
            return math.inf
        f = lambda u: math.exp((1 - q) * (u - u0)) * (u / u0) ** (-beta_exp * q)
        val, _ = integrate.quad(f, u0, np.inf, limit=200)
        return val * math.exp((1 - q) * u0) * u0 ** (-beta_exp * q) / scale**q

    return SpectralModel(raw / scale, _beta_or_default(beta, p_trunc), True, "log-power",
                         (beta_exp, p_trunc, offset), tail)


def geometric(ratio, p_trunc, beta=None, first=None):
    """``sigma_l = first * ratio^(l-1)``; tail summed in closed form."""
    first = 1.0 if first is None else first
    s = first * ratio ** np.arange(p_trunc, dtype=float)

    def tail(q):
        return first**q * ratio ** (q * p_trunc) / (1 - ratio**q)

    return SpectralModel(s, _beta_or_default(beta, p_trunc), first == 1.0, "geometric", (ratio, p_trunc), tail)


@dataclass(frozen=True)
class DesignSample:
    Z: np.ndarray
    y: np.ndarray
    noise: np.ndarray
    tau: float
    kind: str
    spec: SpectralModel

    @property
    def n(self):
        return self.Z.shape[0]


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_design(spec, n, tau, kind="gaussian", seed=None):
    """Draw ``n`` rows ``z`` with covariance ``diag(spec.eigenvalues)`` and ``y = Z beta + w``.

    ``kind='rademacher'`` uses independent signs times ``sigma_k^{1/2}``.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    if tau < 0:
        raise ValidationError("tau must be non-negative")
    rng = _rng(seed)
    p = spec.p
    if kind == "gaussian":
        g = rng.standard_normal((n, p))
    elif kind == "rademacher":
        g = rng.choice(np.array([-1.0, 1.0]), size=(n, p))
    else:
        raise ValidationError(f"unknown design kind {kind!r}")
    Z = g * np.sqrt(spec.eigenvalues)
    noise = tau * rng.standard_normal(n) if tau > 0 else np.zeros(n)
    return DesignSample(Z, Z @ spec.beta_coeffs + noise, noise, float(tau), kind, spec)


def _svd(Z):
    n = Z.shape[0]
    U, s, Vt = linalg.svd(Z / math.sqrt(n), full_matrices=False)
    keep = s > PINV_RTOL * (s[0] if s.size else 0.0)
    return U[:, keep], s[keep], Vt[keep]


def ridge_fit(sample, lam):
    """Ridge estimator ``(Z'Z/n + lam I)^{-1} Z'y/n``; ``lam = 0`` gives the min-norm solution.

    ``sample`` is a DesignSample or a pair ``(Z, y)``.
    """
    Z, y = (sample.Z, sample.y) if isinstance(sample, DesignSample) else sample
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = Z.shape
    if lam < 0:
        raise ValidationError("lambda must be non-negative")
    if lam == 0:
        U, s, Vt = _svd(Z)
        if p <= n and s.size < p:
            raise SingularSystemError(f"rank {s.size} < p = {p} at lambda = 0")
        return Vt.T @ ((U.T @ y) / (s * math.sqrt(n)))
    if p <= n:
        A = Z.T @ Z / n + lam * np.eye(p)
        return linalg.cho_solve(linalg.cho_factor(A), Z.T @ y / n)
    A = Z @ Z.T / n + lam * np.eye(n)
    return Z.T @ linalg.cho_solve(linalg.cho_factor(A), y) / n


def empirical_bias_variance(sample, lam, beta_star=None, tau=None):
    """Exact conditional bias and variance of ridge given the design.

    ``B = lam^2 <beta, S Sigma S beta>`` and ``V = tau^2/n Tr(S^2 (Z'Z/n) Sigma)``
    with ``S = (Z'Z/n + lam I)^{-1}``; at ``lam = 0`` the ridgeless limits
    (projection onto the null space of ``Z`` and the pseudoinverse) are used.
    """
    spec = sample.spec
    beta = spec.beta_coeffs if beta_star is None else np.asarray(beta_star, dtype=float)
    tau = sample.tau if tau is None else tau
    if beta.size != spec.p:
        raise ValidationError("beta_star does not match the spectrum")
    sig = spec.eigenvalues
    _, s, Vt = _svd(sample.Z)
    s2 = s * s
    vb = Vt @ beta
    shrink = lam / (s2 + lam) if lam > 0 else np.zeros_like(s2)
    # lam S beta = V diag(lam/(s^2+lam)) V'beta + (I - V V') beta
    resid = Vt.T @ (shrink * vb) + (beta - Vt.T @ vb)
    bias = float(np.dot(sig, resid * resid))
    weights = (Vt * Vt) @ sig  # v_i' Sigma v_i
    gain = s2 / (s2 + lam) ** 2
    var = tau**2 / sample.n * float(np.dot(gain, weights))
    return bias, var


def excess_risk(beta_hat, beta_star, spec):
    """``||beta_hat - beta_star||_Sigma^2``; ``spec`` is a SpectralModel or eigenvalue array."""
    sig = spec.eigenvalues if isinstance(spec, SpectralModel) else np.asarray(spec, dtype=float)
    diff = np.asarray(beta_hat, dtype=float) - np.asarray(beta_star, dtype=float)
    if diff.shape != sig.shape:
        raise ValidationError("dimension mismatch")
    return float(np.dot(sig, diff * diff))
