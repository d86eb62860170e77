"""Latent space model: observed features are a noisy linear image of a low-dimensional signal.

    x ~ N(0, I_d),  y = <theta, x> + xi,  z = W x + u,  u ~ N(0, I_p),  W'W = (p mu / d) I_d.

Ridge regresses ``y`` on ``z``. As ``p, n, d`` grow with ``gamma = p/n`` and
``psi = d/p`` fixed, the ridgeless excess risk over the best linear predictor
in ``z`` has a closed form through a scalar ``c0``. Positive ridge is handled by
passing the exact feature covariance to the deterministic equivalents.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg, optimize

from . import det_equiv
from .errors import NonConvergenceError, ValidationError
from .gaussian_design import SpectralModel, ridge_fit

GAMMA_GUARD = 0.05


@dataclass(frozen=True)
class LatentParams:
    psi: float
    gamma: float
    mu: float
    r_theta: float = 1.0
    tau: float = 0.0

    def __post_init__(self):
        if not 0 < self.psi < 1:
            raise ValidationError("psi = d/p must lie in (0, 1)")
        if self.gamma <= 0:
            raise ValidationError("gamma must be positive")
        if self.mu < 0 or self.tau < 0 or self.r_theta < 0:
            raise ValidationError("mu, tau and r_theta must be non-negative")

    @property
    def spike(self):
        """Eigenvalue ``1 + mu/psi`` of the feature covariance on the signal subspace."""
        return 1.0 + self.mu / self.psi

    @property
    def effective_noise(self):
        """``tau^2 + r^2/(1 + mu/psi)``: noise seen by the best linear predictor in z."""
        return self.tau**2 + self.r_theta**2 / self.spike


def _c0_equation(c, p):
    return (1 - p.psi) / (1 + c * p.gamma) + p.psi / (1 + c * p.spike * p.gamma) - (1 - 1 / p.gamma)


def solve_c0(params):
    """Unique non-negative root ``c0`` of the ridgeless closed form (requires gamma > 1)."""
    p = params
    if p.gamma <= 1:
        raise ValidationError("the ridgeless c0 branch needs gamma > 1")
    hi = 2.0 / (p.gamma * (p.gamma - 1)) + 1.0
    root, info = optimize.brentq(_c0_equation, 0.0, hi, args=(p,), xtol=1e-300,
                                 rtol=4 * np.finfo(float).eps, full_output=True)
    if not info.converged:
        raise NonConvergenceError("c0 root finding did not converge")
    return float(root)


class LatentRisk(NamedTuple):
    bias: float
    variance: float
    total: float


def latent_risk(params):
    """Ridgeless excess risk ``(B_lat, V_lat, B_lat + V_lat)``.

    For ``gamma > 1`` the closed form in ``c0`` is used; for ``gamma < 1`` the
    least-squares limit (zero bias, variance ``sigma^2 gamma/(1-gamma)``).
    ``|gamma - 1| < 0.05`` is refused.
    """
    p = params
    if abs(p.gamma - 1) < GAMMA_GUARD:
        raise ValidationError(f"gamma = {p.gamma} too close to the interpolation threshold")
    s2 = p.effective_noise
    if p.gamma < 1:
        v = s2 * p.gamma / (1 - p.gamma)
        return LatentRisk(0.0, v, v)
    c0 = solve_c0(p)
    k = p.spike
    g = p.gamma
    e1 = (1 - p.psi) / (1 + c0 * g) ** 2 + p.psi * k**2 / (1 + c0 * k * g) ** 2
    e2 = (1 - p.psi) / (1 + c0 * g) ** 2 + p.psi * k / (1 + c0 * k * g) ** 2
    amp = g * c0 * e1 / e2
    bias = (1 + amp) * (p.mu / p.psi) * p.r_theta**2 / (k * (1 + c0 * g * k) ** 2)
    var = s2 * amp
    return LatentRisk(bias, var, bias + var)


def latent_spectrum(d, p, mu, r_theta):
    """Feature covariance spectrum and best-linear-predictor coefficients in its eigenbasis.

    ``Sigma_z = I + W W'`` has ``d`` eigenvalues ``1 + p mu/d`` and ``p - d``
    ones. The projection coefficient ``Sigma_z^{-1} W theta`` lives in the
    spiked eigenspace; by degeneracy its mass can be spread evenly.
    """
    if p < d:
        raise ValidationError("need p >= d to build the partial isometry")
    spike = 1.0 + p * mu / d
    sig = np.concatenate([np.full(d, spike), np.ones(p - d)])
    beta_sq_norm = (p * mu / d) * r_theta**2 / spike**2
    beta = np.concatenate([np.full(d, math.sqrt(beta_sq_norm / d)), np.zeros(p - d)])
    return SpectralModel(sig, beta, False, "latent", (d, p, mu, r_theta))


def latent_theory(d, p, n, mu, r_theta, tau, lam):
    """Excess risk prediction at finite sizes.

    ``lam = 0`` uses the closed form at ``psi = d/p``, ``gamma = p/n``;
    ``lam > 0`` feeds the exact latent spectrum to the deterministic
    equivalents with effective noise ``tau^2 + r^2/(1 + mu p/d)``.
    """
    params = LatentParams(d / p, p / n, mu, r_theta, tau)
    if lam == 0:
        return latent_risk(params)
    spec = latent_spectrum(d, p, mu, r_theta)
    pred = det_equiv.predict_risk(spec, n, lam, math.sqrt(params.effective_noise))
    if not pred.valid:
        raise ValidationError("deterministic equivalent invalid for these sizes")
    return LatentRisk(pred.bias, pred.variance, pred.bias + pred.variance)


def latent_weights(d, p, mu, rng):
    """``W`` of shape (p, d) with ``W'W = (p mu / d) I_d`` from a seeded Gaussian QR."""
    if p < d:
        raise ValidationError("need p >= d to build the partial isometry")
    q, r = linalg.qr(rng.standard_normal((p, d)), mode="economic")
    q = q * np.sign(np.diag(r))
    return math.sqrt(p * mu / d) * q


def simulate_latent(d, p, n, mu, r_theta, tau, lam, seed, reps, risk="excess"):
    """Monte Carlo risk of ridge on latent-model data.

    ``risk='excess'`` returns ``||beta_hat - beta_eff||^2_{Sigma_z}`` (the
    quantity predicted by ``latent_theory``); ``risk='latent'`` returns
    ``E(<beta_hat, z> - <theta, x>)^2``, which adds ``r^2 - ||beta_eff||^2_{Sigma_z}``.

    Returns ``(mean, sem, per_replica)``.
    """
    if risk not in ("excess", "latent"):
        raise ValidationError("risk must be 'excess' or 'latent'")
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    vals = np.array([latent_replica(d, p, n, mu, r_theta, tau, lam, np.random.default_rng(s), risk)
                     for s in seq.spawn(reps)])
    sem = float(vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else float("nan")
    return float(vals.mean()), sem, vals


def latent_replica(d, p, n, mu, r, tau, lam, rng, risk):
    W = latent_weights(d, p, mu, rng)
    theta = rng.standard_normal(d)
    theta *= r / np.linalg.norm(theta) if r > 0 else 0.0
    X = rng.standard_normal((n, d))
    Z = X @ W.T + rng.standard_normal((n, p))
    y = X @ theta + tau * rng.standard_normal(n)
    beta_hat = ridge_fit((Z, y), lam)
    spike = 1.0 + p * mu / d
    beta_eff = W @ theta / spike
    diff = beta_hat - beta_eff
    # Sigma_z = I + W W'
    excess = float(diff @ diff + np.sum((W.T @ diff) ** 2))
    if risk == "excess":
        return excess
    return excess + r**2 - float(beta_eff @ beta_eff + np.sum((W.T @ beta_eff) ** 2))
