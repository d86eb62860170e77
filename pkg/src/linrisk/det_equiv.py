"""Deterministic equivalents for ridge regression under a linear-Gaussian model.

Given the spectrum ``sigma`` of the covariance, the target coefficients
``beta`` in its eigenbasis, ``n`` samples and ridge ``lam``, the effective
regularization ``lam_star`` solves

    n (1 - lam / lam_star) = sum_l sigma_l / (sigma_l + lam_star),

and bias (B) and variance (V) are trace functionals evaluated at ``lam_star``.
"""

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .errors import InvalidPredictionError, NonConvergenceError, ValidationError
from .gaussian_design import SpectralModel

FP_RTOL = 1e-12


def _parts(spec):
    if isinstance(spec, SpectralModel):
        return spec.eigenvalues, spec.beta_coeffs
    s = np.asarray(spec, dtype=float)
    return s, np.zeros_like(s)


@dataclass(frozen=True)
class EffectiveRegularization:
    lambda_star: float
    residual: float
    iterations: int


def solve_effective_reg(spec, n, lam):
    """Effective regularization ``lam_star`` by bracketed root finding.

    The map ``x -> n(1 - lam/x) - Tr Sigma (Sigma + x)^{-1}`` is strictly
    increasing, negative at ``max(lam, 1e-30)`` and positive at
    ``lam + sigma_1 p / n + 1``. For ``lam = 0`` and ``p <= n`` the value is 0
    by definition.
    """
    sig, _ = _parts(spec)
    if lam < 0:
        raise ValidationError("lambda must be non-negative")
    if n < 1:
        raise ValidationError("n must be >= 1")
    p = sig.size
    if lam == 0 and p <= n:
        return EffectiveRegularization(0.0, 0.0, 0)
    g = lambda x: n * (1.0 - lam / x) - float(np.sum(sig / (sig + x)))
    lo, hi = max(lam, 1e-30), lam + sig[0] * p / n + 1.0
    if g(lo) > 0:
        # lam > 0 and g(lam) = -Tr(...) < 0 always; only possible through underflow
        raise NonConvergenceError(f"fixed point bracket [{lo}, {hi}] does not change sign")
    root, info = optimize.brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                                 maxiter=500, full_output=True)
    if not info.converged:
        raise NonConvergenceError(f"fixed point did not converge in bracket [{lo}, {hi}]")
    return EffectiveRegularization(float(root), abs(g(root)) / n, int(info.iterations))


@dataclass(frozen=True)
class RiskPrediction:
    lam: float
    lambda_star: float
    bias: float
    variance: float
    omega_sq: float
    k_star: int
    trace_ratio: float
    valid: bool

    def to_record(self):
        r = asdict(self)
        r["lambda"] = r.pop("lam")
        del r["trace_ratio"]
        return r


def _traces(sig, beta, n, ls):
    T = float(np.sum(sig**2 / (sig + ls) ** 2))
    signal = ls**2 * float(np.sum(beta**2 * sig / (sig + ls) ** 2))
    return T, signal


def k_star_of(sig, ls):
    """``max{k : sigma_k >= lam_star}`` (1-based; 0 if none)."""
    return int(np.count_nonzero(sig >= ls))


def predict_risk(spec, n, lam, tau):
    """All deterministic-equivalent quantities at once; ``valid`` is False when ``T >= n``."""
    sig, beta = _parts(spec)
    ls = solve_effective_reg(spec, n, lam).lambda_star
    T, signal = _traces(sig, beta, n, ls)
    ratio = T / n
    ks = k_star_of(sig, ls)
    if ratio >= 1.0:
        nan = float("nan")
        return RiskPrediction(lam, ls, nan, nan, nan, ks, ratio, False)
    bias = signal / (1.0 - ratio)
    var = tau**2 * T / (n - T)
    omega_sq = (tau**2 + signal) / (1.0 - ratio)
    return RiskPrediction(lam, ls, bias, var, omega_sq, ks, ratio, True)


def _valid(pred):
    if not pred.valid:
        raise InvalidPredictionError(f"trace ratio Tr(Sigma^2 (Sigma+lam*)^-2)/n = {pred.trace_ratio} >= 1")
    return pred


def predicted_bias(spec, n, lam):
    return _valid(predict_risk(spec, n, lam, 0.0)).bias


def predicted_variance(spec, n, lam, tau):
    return _valid(predict_risk(spec, n, lam, tau)).variance


def sequence_model_noise(spec, n, lam, tau):
    return _valid(predict_risk(spec, n, lam, tau)).omega_sq


def sequence_model_risk(spec, n, lam, tau):
    """Risk of the Gaussian sequence model at noise level ``omega^2/n``, shrunk at ``lam_star``.

    Equals ``lam*^2 <beta, (Sigma+lam*)^{-2} Sigma beta> + omega^2/n Tr(Sigma^2 (Sigma+lam*)^{-2})``.
    """
    sig, beta = _parts(spec)
    pred = _valid(predict_risk(spec, n, lam, tau))
    T, signal = _traces(sig, beta, n, pred.lambda_star)
    return signal + pred.omega_sq * T / n


class EffectiveRanks(NamedTuple):
    r1: float
    r2: float
    r_bar: float
    b_k: float


def effective_ranks(spec, k):
    """``r_q(k) = sum_{l>k} (sigma_l / sigma_{k+1})^q`` for q = 1, 2, ``r_bar = r1^2/r2``, ``b_k``.

    ``k`` counts eigenvalues from 1 as in ``sigma_1 >= sigma_2 >= ...``; the
    tail rule of a parametric spectrum is added when present. ``b_0`` is NaN.
    """
    sig, _ = _parts(spec)
    tail = spec.tail if isinstance(spec, SpectralModel) else None
    p = sig.size
    if not 0 <= k < p:
        raise ValidationError(f"k = {k} outside [0, {p - 1}] of the explicit spectrum")
    head = sig[k]
    rest = sig[k:]
    t1 = tail(1) if tail else 0.0
    t2 = tail(2) if tail else 0.0
    r1 = (float(np.sum(rest)) + t1) / head
    r2 = (float(np.sum(rest**2)) + t2) / head**2
    b = float(sig[k - 1] / sig[k]) if k >= 1 else float("nan")
    return EffectiveRanks(r1, r2, r1 * r1 / r2, b)


class BenignReport(NamedTuple):
    lambda_star: float
    k_star: int
    V_bound: float
    B_bound: float
    n_sandwich: tuple
    sandwich_ok: bool
    k_star_over_n: float
    r_bar_over_n: float


def benign_bounds(spec, n, tau, c_star=2.0, lam=0.0):
    """Crude variance and bias bounds at the spectral cutoff ``k*``.

    Refuses (InvalidPredictionError) when ``Tr(Sigma^2 (Sigma+lam*)^{-2}) > n(1 - 1/c*)``.
    ``n_sandwich`` is ``(k*/2 + r1/(2 b), 2k* + 2 r1)``; the upper side is only
    asserted for ``lam <= lam*/2``.
    """
    if c_star <= 1:
        raise ValidationError("c_star must exceed 1")
    sig, beta = _parts(spec)
    ls = solve_effective_reg(spec, n, lam).lambda_star
    T, _ = _traces(sig, beta, n, ls)
    if T > n * (1 - 1 / c_star):
        raise InvalidPredictionError(f"trace condition fails: {T} > n(1 - 1/c*) = {n * (1 - 1 / c_star)}")
    ks = k_star_of(sig, ls)
    if ks >= sig.size:
        raise ValidationError("k* reaches the end of the explicit spectrum; extend the truncation")
    ranks = effective_ranks(spec, ks)
    V_bound = c_star * tau**2 * (ks / n + ranks.r2 / n)
    head = sig[:ks]
    sk = sig[ks - 1] if ks >= 1 else 0.0
    B_bound = c_star * (sk**2 * float(np.sum(beta[:ks] ** 2 / head)) + float(np.sum(beta[ks:] ** 2 * sig[ks:])))
    b = ranks.b_k if ks >= 1 else math.inf
    lower = ks / 2 + ranks.r1 / (2 * b)
    upper = 2 * ks + 2 * ranks.r1
    ok = lower <= n and (lam > ls / 2 or n <= upper)
    return BenignReport(ls, ks, V_bound, B_bound, (lower, upper), ok, ks / n, ranks.r_bar / n)


def spectrum_diagnostics(spec, n, lam=0.0):
    """Effective dimension ``d_Sigma`` (floored at n) and alignment ratio ``rho(lam)``.

    ``rho = <beta, Sigma (lam* + Sigma)^{-1} beta> / (||beta||^2 Tr Sigma (lam* + Sigma)^{-1})``.
    For ``lam* = 0`` the ratio is evaluated with ``lam*`` replaced by 0, i.e. ``||beta||^2/(p ||beta||^2)``.
    """
    sig, beta = _parts(spec)
    m = min(n, sig.size)
    tails = np.cumsum(sig[::-1])[::-1]
    d_sigma = max(float(n), float(np.max(tails[:m] / sig[:m])))
    nb = float(beta @ beta)
    if nb == 0:
        raise ValidationError("rho(lambda) is undefined for beta = 0")
    ls = solve_effective_reg(spec, n, lam).lambda_star
    frac = sig / (ls + sig)
    rho = float(np.sum(beta**2 * frac)) / (nb * float(np.sum(frac)))
    return d_sigma, rho


def bounded_varying_check(spec, psi, deltas=(0.1, 0.25, 0.5)):
    """Check ``sigma_{floor(delta i)} / sigma_i <= psi(delta)`` for every admissible i.

    ``psi`` is a caller-supplied function; returns ``{delta: (holds, worst_ratio)}``.
    """
    sig, _ = _parts(spec)
    out = {}
    for delta in deltas:
        i = np.arange(1, sig.size + 1)
        j = np.floor(delta * i).astype(int)
        ok = j >= 1
        ratio = sig[j[ok] - 1] / sig[i[ok] - 1]
        worst = float(ratio.max()) if ratio.size else 1.0
        out[delta] = (worst <= psi(delta), worst)
    return out


def dimension_free_condition(d_sigma, rho, n, gamma):
    """Truth value of ``d_Sigma <= rho^{1/6} n^{1+gamma}``; gamma is chosen by the caller."""
    return bool(d_sigma <= rho ** (1 / 6) * n ** (1 + gamma))
