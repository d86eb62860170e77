"""Kernel ridge regression with inner-product kernels ``h(<x1, x2>/d)`` on the sphere of radius sqrt(d)."""

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import linalg

from . import function_space as fs
from .errors import SingularSystemError, ValidationError

PINV_RTOL = 1e-12
BAND_DELTA = 0.1


@dataclass(frozen=True)
class KernelSpec:
    """Inner-product kernel with its level decomposition at dimension ``d``.

    ``level_coeffs[k] = xi_{d,k}^2``; ``gamma_of_ell(ell) = sum_{k>ell} xi^2 B(d,k)``
    is computed as ``h(1) - sum_{k<=ell} xi^2 B(d,k)`` so that levels beyond
    ``k_max`` are included.
    """

    h: Callable
    d: int
    k_max: int = fs.K_MAX
    kinks: tuple = ()
    level_coeffs: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        if self.level_coeffs is None:
            xi2 = fs.kernel_level_coeffs(self.h, self.d, self.k_max, self.kinks)
            object.__setattr__(self, "level_coeffs", xi2)
        if np.any(self.level_coeffs < -1e-10):
            raise ValidationError("kernel has negative level coefficients (not PSD)")

    def at_one(self):
        return float(self.h(np.array(1.0)))

    def level_mass(self, k):
        return float(self.level_coeffs[k]) * fs.sphere_dim(self.d, k)

    def gamma_of_ell(self, ell):
        return self.at_one() - sum(self.level_mass(k) for k in range(ell + 1))


def _check_sphere(X, d):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != d:
        raise ValidationError(f"points must have shape (n, {d})")
    norms = np.linalg.norm(X, axis=1)
    if np.any(np.abs(norms - math.sqrt(d)) > 1e-8 * math.sqrt(d)):
        raise ValidationError("points must lie on the sphere of radius sqrt(d)")
    return X


def gram_of(h, d, X, Y=None):
    """``h(<x_i, y_j>/d)`` for any kernel function ``h`` on ``[-1, 1]``."""
    X = _check_sphere(X, d)
    G = X @ (X if Y is None else _check_sphere(Y, d)).T / d
    if np.any(np.abs(G) > 1 + 1e-8):
        raise ValidationError("inner products outside [-d, d]")
    K = h(np.clip(G, -1.0, 1.0))
    if Y is None:
        K = (K + K.T) / 2
        np.fill_diagonal(K, float(h(np.array(1.0))))
    return K


def kernel_matrix(spec, X, Y=None):
    """``K_ij = h(<x_i, x_j>/d)``; symmetric with exact diagonal ``h(1)`` when ``Y`` is omitted."""
    return gram_of(spec.h, spec.d, X, Y)


def solve_psd(K, y, lam):
    """``(K + lam I)^{-1} y``; at ``lam = 0`` refuses a numerically singular ``K``."""
    if lam > 0:
        return linalg.cho_solve(linalg.cho_factor(K + lam * np.eye(K.shape[0])), y)
    w, V = linalg.eigh(K)
    if w[0] <= PINV_RTOL * w[-1]:
        raise SingularSystemError(f"kernel matrix numerically singular at lambda = 0 (smallest eigenvalue {w[0]:.3e})")
    return V @ ((V.T @ y) / w)


def krr_fit(spec, X, y, lam):
    """Dual coefficients ``(lam I + K)^{-1} y``; ``lam = 0`` requires an invertible ``K``."""
    if lam < 0:
        raise ValidationError("lambda must be non-negative")
    return solve_psd(kernel_matrix(spec, X), np.asarray(y, dtype=float), lam)


def krr_fit_predict(spec, X, y, lam, X_test):
    coef = krr_fit(spec, X, y, lam)
    return kernel_matrix(spec, X_test, X) @ coef


class MCRisk(NamedTuple):
    mean: float
    sem: float
    values: np.ndarray
    train_error: float


def _summary(vals, train):
    vals = np.asarray(vals, dtype=float)
    sem = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else float("nan")
    return MCRisk(float(vals.mean()), sem, vals, float(np.max(train)) if len(train) else float("nan"))


def krr_replica(spec, target, n, lam, tau, n_test, rng):
    """One replica: ``(test excess risk, relative training residual)``."""
    d = spec.d
    X = fs.sample_sphere(n, d, rng)
    y = target(X) + tau * rng.standard_normal(n)
    Xt = fs.sample_sphere(n_test, d, rng)
    K = kernel_matrix(spec, X)
    coef = solve_psd(K, y, lam)
    pred = kernel_matrix(spec, Xt, X) @ coef
    risk = float(np.mean((target(Xt) - pred) ** 2))
    return risk, float(np.linalg.norm(y - K @ coef) / max(np.linalg.norm(y), 1e-300))


def krr_risk_mc(spec, target, n, lam, tau, n_test=2000, reps=10, seed=0):
    """Monte Carlo excess test error ``E(f*(x) - f_hat(x))^2`` over ``reps`` replicas.

    ``train_error`` reports the largest relative training residual
    ``||y - f_hat(X)|| / ||y||`` over replicas.
    """
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    out = [krr_replica(spec, target, n, lam, tau, n_test, np.random.default_rng(c)) for c in seq.spawn(reps)]
    return _summary([o[0] for o in out], [o[1] for o in out])


class Staircase(NamedTuple):
    ell: int
    regime: str
    risk: float
    lambda_note: str


def degree_band(d, n, delta=BAND_DELTA):
    """Level ``ell`` with ``d^(ell+delta) <= n <= d^(ell+1-delta)``, or ``(ell, 'near-threshold')``.

    ``n <= d^(1-delta)`` is band 0. ``n`` within a factor ``d^delta`` of
    ``B(d, k)`` for some ``k >= 1`` is also labelled near-threshold, since finite-d
    peaks sit at ``n`` close to the number of degree-k harmonics.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    x = math.log(n) / math.log(d)
    ell = int(math.floor(x - delta)) if x > 1 - delta else 0
    ell = max(ell, 0)
    in_band = ell + delta <= x <= ell + 1 - delta or (ell == 0 and x <= 1 - delta)
    near = any(abs(x - math.log(fs.sphere_dim(d, k)) / math.log(d)) < delta for k in range(1, ell + 3))
    return ell, "in-band" if in_band and not near else "near-threshold"


def staircase_prediction(target, d, n, delta=BAND_DELTA):
    """Plateau risk ``||P_{>ell} f*||^2`` with the regime label."""
    ell, regime = degree_band(d, n, delta)
    _, high = fs.projection_masses(target, ell)
    if regime == "near-threshold":
        regime = "near-threshold, prediction unreliable"
    return Staircase(ell, regime, high, "valid for lambda in [0, lambda*] with lambda* of order one")


def gegenbauer_gram(d, k, X, Y=None):
    """``Q_k(<x_i, y_j>)`` from pairwise inner products."""
    G = X @ (X if Y is None else Y).T
    return fs.gegenbauer_eval(d, k, np.clip(G, -d, d))


def kernel_split(spec, X, ell):
    """Low-frequency part ``sum_{k<=ell} xi^2 B Q_k-Gram`` and the remainder ``K - K_low``."""
    if spec.k_max < ell + 1:
        raise ValidationError("level coefficients must extend past ell")
    K = kernel_matrix(spec, X)
    low = np.zeros_like(K)
    for k in range(ell + 1):
        low += spec.level_mass(k) * gegenbauer_gram(spec.d, k, X)
    return low, K - low


def kernel_split_diagnostics(spec, X, ell):
    """``(sigma_min(K_low), ||K_high - gamma I||_op)`` with ``gamma = gamma_of_ell(ell)``.

    ``K_low`` has rank at most ``D = sum_{k<=ell} B(d,k)``; its smallest
    eigenvalue is taken on its range, i.e. the ``min(n, D)``-th largest.
    """
    low, high = kernel_split(spec, X, ell)
    g = spec.gamma_of_ell(ell)
    rank = min(low.shape[0], sum(fs.sphere_dim(spec.d, k) for k in range(ell + 1)))
    smin = float(linalg.eigvalsh(low)[::-1][rank - 1])
    w = linalg.eigvalsh(high - g * np.eye(high.shape[0]))
    return smin, float(max(abs(w[0]), abs(w[-1])))
