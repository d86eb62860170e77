"""Finite-width random-features (RF) and neural-tangent (NT) models on the sphere.

Inputs lie on the sphere of radius ``sqrt(d)`` and first-layer weights on the
unit sphere, so ``<w, x>`` is of order one. Feature maps:

    RF:  phi(x)_j = sigma(<w_j, x>) / sqrt(N)
    NT:  phi(x)_{(k, :)} = sigma'(<w_k, x>) x / sqrt(N d)
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg

from . import function_space as fs
from . import kernel_krr
from .errors import InvalidPredictionError, SingularSystemError, ValidationError

KINDS = ("RF", "NT", "combined")
PINV_RTOL = 1e-12
WHITEN_FLOOR = 1e-12


@dataclass(frozen=True)
class FeatureEnsemble:
    """First-layer weights ``W`` (N x d, unit rows), activation and model kind."""

    W: np.ndarray
    activation: fs.ActivationSpec
    kind: str = "RF"

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        if W.ndim != 2:
            raise ValidationError("W must be an N x d matrix")
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}")
        if np.any(np.abs(np.linalg.norm(W, axis=1) - 1) > 1e-8):
            raise ValidationError("first-layer weights must have unit norm")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "activation", fs.as_activation(self.activation))

    @property
    def N(self):
        return self.W.shape[0]

    @property
    def d(self):
        return self.W.shape[1]

    @property
    def n_params(self):
        return {"RF": self.N, "NT": self.N * self.d, "combined": self.N * (1 + self.d)}[self.kind]

    def with_kind(self, kind):
        return FeatureEnsemble(self.W, self.activation, kind)


def random_ensemble(N, d, activation, kind="RF", rng=None):
    """``N`` weights uniform on the unit sphere in ``R^d``."""
    rng = np.random.default_rng(rng)
    return FeatureEnsemble(fs.sample_sphere(N, d, rng, radius=1.0), activation, kind)


def _check_inputs(ens, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != ens.d:
        raise ValidationError(f"inputs must have shape (n, {ens.d})")
    return X


def rf_features(ens, X):
    X = _check_inputs(ens, X)
    return ens.activation.value(X @ ens.W.T) / math.sqrt(ens.N)


def nt_features(ens, X):
    """``n x (N d)`` matrix; columns ``k*d:(k+1)*d`` belong to neuron ``k``."""
    X = _check_inputs(ens, X)
    S = ens.activation.derivative(X @ ens.W.T)
    n = X.shape[0]
    return (S[:, :, None] * X[:, None, :]).reshape(n, ens.N * ens.d) / math.sqrt(ens.N * ens.d)


def build_features(ens, X):
    if ens.kind == "RF":
        return rf_features(ens, X)
    if ens.kind == "NT":
        return nt_features(ens, X)
    return np.hstack([rf_features(ens, X), nt_features(ens, X)])


def feature_gram(ens, X1, X2=None):
    """``Phi(X1) Phi(X2)^T`` without forming the NT design.

    RF: ``sigma(X1 W') sigma(X2 W')' / N``; NT: ``(X1 X2'/d) * (S1 S2'/N)`` with
    ``S = sigma'(X W')``.
    """
    X1 = _check_inputs(ens, X1)
    X2 = X1 if X2 is None else _check_inputs(ens, X2)
    act, N, d = ens.activation, ens.N, ens.d
    out = 0.0
    if ens.kind in ("RF", "combined"):
        out = out + act.value(X1 @ ens.W.T) @ act.value(X2 @ ens.W.T).T / N
    if ens.kind in ("NT", "combined"):
        out = out + (X1 @ X2.T / d) * (act.derivative(X1 @ ens.W.T) @ act.derivative(X2 @ ens.W.T).T / N)
    return out


class FitResult(NamedTuple):
    coefficients: np.ndarray
    lam: object
    residual_norm: float
    route: str


def _pseudo_solve_psd(A, b, what):
    w, V = linalg.eigh(A)
    if w[0] <= PINV_RTOL * max(w[-1], 1e-300):
        raise SingularSystemError(f"{what} numerically singular at lambda = 0 (smallest eigenvalue {w[0]:.3e})")
    return V @ ((V.T @ b) / w)


def ridge_fit_features(Phi, y, lam, route=None):
    """``argmin ||y - Phi b||^2 + lam ||b||^2``; ``lam = 0`` is the min-norm least-squares limit.

    ``route`` defaults to primal when ``p <= n`` and dual otherwise.
    """
    Phi = np.asarray(Phi, dtype=float)
    y = np.asarray(y, dtype=float)
    if lam < 0:
        raise ValidationError("lambda must be non-negative")
    n, p = Phi.shape
    if y.shape != (n,):
        raise ValidationError("y must have one entry per row of Phi")
    route = route or ("primal" if p <= n else "dual")
    if route == "primal":
        A = Phi.T @ Phi
        if lam > 0:
            b = linalg.cho_solve(linalg.cho_factor(A + lam * np.eye(p)), Phi.T @ y)
        else:
            b = _pseudo_solve_psd(A, Phi.T @ y, "Phi'Phi")
    elif route == "dual":
        G = Phi @ Phi.T
        if lam > 0:
            b = Phi.T @ linalg.cho_solve(linalg.cho_factor(G + lam * np.eye(n)), y)
        else:
            b = Phi.T @ _pseudo_solve_psd(G, y, "Phi Phi'")
    else:
        raise ValidationError("route must be 'primal' or 'dual'")
    return FitResult(b, lam, float(np.linalg.norm(y - Phi @ b)), route)


def combined_linearized_fit(X, y, ens, lam, s):
    """Joint fit of the RF block ``b1`` and the NT block ``b2``.

    Minimizes ``||y - Phi_RF b1 - Phi_NT b2||^2 / n + lam ||b1||^2 + (lam/s) ||b2||^2``.
    Substituting ``b2 = sqrt(s) c2`` turns it into plain ridge with penalty
    ``n lam`` on ``[Phi_RF, sqrt(s) Phi_NT]``.
    """
    if s <= 0:
        raise ValidationError("s must be positive")
    n = np.asarray(X).shape[0]
    P1 = rf_features(ens, X)
    P2 = nt_features(ens, X)
    fit = ridge_fit_features(np.hstack([P1, math.sqrt(s) * P2]), y, n * lam)
    b = fit.coefficients.copy()
    b[ens.N:] *= math.sqrt(s)
    return FitResult(b, (lam, lam / s), fit.residual_norm, fit.route)


def nt_kernels(ens, X, h_nt=None):
    """Empirical NT kernel ``K_N`` and its expectation over ``W`` at the same dimension.

    ``h_nt`` is ``h_NT^{(d)}`` (``finite_d_kernels(act, d)[1]`` by default).
    """
    X = _check_inputs(ens, X)
    if h_nt is None:
        h_nt = fs.finite_d_kernels(ens.activation, ens.d)[1]
    K_N = feature_gram(ens.with_kind("NT"), X)
    G = np.clip(X @ X.T / ens.d, -1.0, 1.0)
    K_inf = h_nt(G)
    K_inf = (K_inf + K_inf.T) / 2
    return (K_N + K_N.T) / 2, K_inf


def inverse_sqrt_psd(K, floor=WHITEN_FLOOR):
    w, V = linalg.eigh(K)
    if w[0] <= floor * w[-1]:
        raise InvalidPredictionError(
            f"kernel not positive definite: smallest eigenvalue {w[0]:.3e} below {floor:g} * largest; "
            f"event K >= gamma I fails for every gamma > {max(w[0], 0):.3e}")
    return (V / np.sqrt(w)) @ V.T


def concentration_diagnostic(K_N, K_inf):
    """``||K_inf^{-1/2} K_N K_inf^{-1/2} - I||_op``."""
    R = inverse_sqrt_psd(K_inf)
    M = R @ K_N @ R
    w = linalg.eigvalsh((M + M.T) / 2 - np.eye(M.shape[0]))
    return float(max(abs(w[0]), abs(w[-1])))


class ReplicaRisk(NamedTuple):
    risk: float
    train_error: float


def feature_replica(kind, activation, target, d, n, N, lam, tau, n_test, rng):
    """One replica of RF or NT ridge: fresh data, weights and noise from ``rng``.

    Uses the dual (kernel) form when the parameter count exceeds ``n``, so the
    NT design is never materialized in that case.
    """
    X = fs.sample_sphere(n, d, rng)
    ens = random_ensemble(N, d, activation, kind, rng)
    y = target(X) + tau * rng.standard_normal(n)
    Xt = fs.sample_sphere(n_test, d, rng)
    if ens.n_params <= n:
        fit = ridge_fit_features(build_features(ens, X), y, lam)
        pred = build_features(ens, Xt) @ fit.coefficients
        train = fit.residual_norm
    else:
        G = feature_gram(ens, X)
        G = (G + G.T) / 2
        alpha = (linalg.cho_solve(linalg.cho_factor(G + lam * np.eye(n)), y) if lam > 0
                 else _pseudo_solve_psd(G, y, "Phi Phi'"))
        pred = feature_gram(ens, Xt, X) @ alpha
        train = float(np.linalg.norm(y - G @ alpha))
    risk = float(np.mean((target(Xt) - pred) ** 2))
    return ReplicaRisk(risk, train / max(float(np.linalg.norm(y)), 1e-300))


def _feature_risk_mc(kind, activation, target, d, n, N, lam, tau, n_test, reps, seed):
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    out = [feature_replica(kind, activation, target, d, n, N, lam, tau, n_test, np.random.default_rng(c))
           for c in seq.spawn(reps)]
    return kernel_krr._summary([o.risk for o in out], [o.train_error for o in out])


def rf_risk_mc(activation, target, d, n, N, lam, tau, n_test=2000, reps=10, seed=0):
    """Monte Carlo excess test error of RF ridge; returns ``(mean, sem, values, train_error)``."""
    return _feature_risk_mc("RF", activation, target, d, n, N, lam, tau, n_test, reps, seed)


def nt_risk_mc(activation, target, d, n, N, lam, tau, n_test=2000, reps=10, seed=0):
    """Monte Carlo excess test error of NT ridge; returns ``(mean, sem, values, train_error)``."""
    return _feature_risk_mc("NT", activation, target, d, n, N, lam, tau, n_test, reps, seed)


class FeatureStaircase(NamedTuple):
    ell: int
    regime: str
    risk: float


def rf_staircase_prediction(target, d, n, N, delta=kernel_krr.BAND_DELTA):
    """Plateau risk ``||P_{>ell} f*||^2`` with ``ell = min(ell(n), ell(N))``.

    The regime is approximation-limited when ``N < n`` and statistics-limited
    otherwise; it is near-threshold when either size is out of band or
    ``max(N/n, n/N) < d^delta``.
    """
    l1, r1 = kernel_krr.degree_band(d, n, delta)
    l2, r2 = kernel_krr.degree_band(d, N, delta)
    ell = min(l1, l2)
    _, high = fs.projection_masses(target, ell)
    if "near" in r1 or "near" in r2 or max(N / n, n / N) < d**delta:
        regime = "near-threshold, prediction unreliable"
    elif N < n:
        regime = "underparametrized (approximation-limited)"
    else:
        regime = "overparametrized (statistics-limited)"
    return FeatureStaircase(ell, regime, high)


class PairedRisk(NamedTuple):
    nt_risk: float
    krr_risk: float
    nt_train_error: float


def nt_vs_krr_replica(activation, h_nt, target, d, n, N, lam, tau, n_test, rng):
    """NT ridge and KRR with the width-limit kernel ``h_nt`` on the same data and noise."""
    X = fs.sample_sphere(n, d, rng)
    y = target(X) + tau * rng.standard_normal(n)
    Xt = fs.sample_sphere(n_test, d, rng)
    ens = random_ensemble(N, d, activation, "NT", rng)
    ft = target(Xt)
    if ens.n_params <= n:
        Phi = nt_features(ens, X)
        fit = ridge_fit_features(Phi, y, lam, route="primal")
        nt = float(np.mean((ft - nt_features(ens, Xt) @ fit.coefficients) ** 2))
        nt_train = fit.residual_norm / max(np.linalg.norm(y), 1e-300)
    else:
        G = feature_gram(ens, X)
        G = (G + G.T) / 2
        alpha = (linalg.cho_solve(linalg.cho_factor(G + lam * np.eye(n)), y) if lam > 0
                 else _pseudo_solve_psd(G, y, "Phi Phi'"))
        nt = float(np.mean((ft - feature_gram(ens, Xt, X) @ alpha) ** 2))
        nt_train = float(np.linalg.norm(y - G @ alpha) / max(np.linalg.norm(y), 1e-300))
    coef = kernel_krr.solve_psd(kernel_krr.gram_of(h_nt, d, X), y, lam)
    krr = float(np.mean((ft - kernel_krr.gram_of(h_nt, d, Xt, X) @ coef) ** 2))
    return PairedRisk(nt, krr, nt_train)
