"""Hermite and Gegenbauer machinery on the Gaussian line and on the sphere.

Conventions
-----------
* Gaussian expectations are with respect to ``G ~ N(0, 1)``; Hermite polynomials
  ``He_k`` are the probabilists' ones, ``E He_j(G) He_k(G) = k! 1{j=k}``.
* Points on the sphere have radius ``sqrt(d)``. ``nu_d`` is the law of
  ``u = <x, e_1>`` for such a point, with density proportional to
  ``(1 - u^2/d)^((d-3)/2)`` on ``[-sqrt(d), sqrt(d)]``.
* ``Q_k^{(d)}(t)`` is the degree-k Gegenbauer polynomial in the argument
  ``t = <x1, x2>`` (so ``t`` ranges over ``[-d, d]``), normalized by
  ``Q_k(d) = 1``.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss, hermeval, hermeder
from scipy import linalg
from scipy.interpolate import CubicSpline
from scipy.special import roots_jacobi, roots_legendre

from .errors import NonConvergenceError, ValidationError

GH_ORDER = 200
KINK_ORDER = 400
HALF_WIDTH = 12.0  # Gaussian mass beyond |x| > 12 is below 1e-32
K_MAX = 12


# ---------------------------------------------------------------------------
# one-dimensional Gaussian rules
# ---------------------------------------------------------------------------
_rule_cache = {}


def gauss_hermite_rule(order=GH_ORDER):
    """Nodes and probability weights for E f(G), G ~ N(0, 1)."""
    if order not in _rule_cache:
        x, w = hermegauss(order)
        _rule_cache[order] = (x, w / w.sum())
    return _rule_cache[order]


def _legendre_on(a, b, order):
    x, w = roots_legendre(order)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = (b - a) / 2
    return a + half * (x + 1), half * w


def gaussian_rule(kinks=(), order=None):
    """Quadrature rule for E f(G) that is accurate for piecewise-smooth f.

    Without kinks this is Gauss-Hermite with ``GH_ORDER`` nodes. With kinks the
    line is truncated to ``[-12, 12]`` and split at the kinks, each piece
    carrying a Gauss-Legendre rule weighted by the Gaussian density.
    """
    kinks = sorted(k for k in kinks if -HALF_WIDTH < k < HALF_WIDTH)
    if not kinks:
        return gauss_hermite_rule(order or GH_ORDER)
    order = order or KINK_ORDER
    edges = np.array([-HALF_WIDTH, *kinks, HALF_WIDTH])
    per_piece = max(order // (len(edges) - 1), 32)
    x, w = _legendre_on(edges[:-1], edges[1:], per_piece)
    x, w = x.ravel(), w.ravel()
    return x, w * np.exp(-x * x / 2) / math.sqrt(2 * math.pi)


def gaussian_expectation(f, kinks=(), order=None):
    x, w = gaussian_rule(kinks, order)
    return float(np.dot(w, f(x)))


def hermite_he(k_max, x):
    """Array of ``He_0(x), ..., He_{k_max}(x)`` by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    out = np.empty((k_max + 1,) + x.shape)
    out[0] = 1.0
    if k_max >= 1:
        out[1] = x
    for k in range(1, k_max):
        out[k + 1] = x * out[k] - k * out[k - 1]
    return out


def hermite_coeffs(f, k_max=K_MAX, kinks=(), check=True):
    """Hermite coefficients ``mu_k = E f(G) He_k(G)`` for k = 0..k_max.

    The rule is compared against a rule with doubled node count and a
    mismatch above 1e-9 (relative to ``sqrt(E f^2)``) raises.
    """
    x, w = gaussian_rule(kinks)
    vals = f(x)
    mu = hermite_he(k_max, x) @ (w * vals)
    if check:
        base = KINK_ORDER if kinks else GH_ORDER
        x2, w2 = gaussian_rule(kinks, order=2 * base if kinks else base + 100)
        mu2 = hermite_he(k_max, x2) @ (w2 * f(x2))
        scale = math.sqrt(max(float(np.dot(w, vals * vals)), 1e-300))
        # high-degree coefficients grow like sqrt(k!); compare on normalized scale
        norm = np.sqrt([math.factorial(k) for k in range(k_max + 1)])
        if np.max(np.abs(mu - mu2) / norm) > 1e-9 * max(scale, 1.0):
            raise NonConvergenceError("Hermite coefficients changed under node doubling")
    return mu


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------
class HermiteBars(NamedTuple):
    b0: float
    b1: float
    bstar_sq: float
    zeta: float


@dataclass(frozen=True)
class ActivationSpec:
    """Scalar activation with its weak derivative and cached Gaussian functionals.

    ``kinks`` lists the points where the value or the derivative fails to be
    smooth; quadratures split there.
    """

    name: str
    value: Callable
    derivative: Callable
    kinks: tuple = ()
    bounded: bool = False
    smooth: bool = True
    increasing: bool = False
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __call__(self, x):
        return self.value(x)

    def mu(self, k_max=K_MAX):
        key = ("mu", k_max)
        if key not in self._cache:
            self._cache[key] = hermite_coeffs(self.value, k_max, self.kinks)
        return self._cache[key]

    def mu_prime(self, k_max=K_MAX):
        key = ("mu_prime", k_max)
        if key not in self._cache:
            self._cache[key] = hermite_coeffs(self.derivative, k_max, self.kinks)
        return self._cache[key]

    def second_moment(self):
        if "m2" not in self._cache:
            self._cache["m2"] = gaussian_expectation(lambda x: self.value(x) ** 2, self.kinks)
        return self._cache["m2"]

    def derivative_second_moment(self):
        if "dm2" not in self._cache:
            self._cache["dm2"] = gaussian_expectation(lambda x: self.derivative(x) ** 2, self.kinks)
        return self._cache["dm2"]


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def _relu(x):
    return np.maximum(x, 0.0)


def _step(x):
    return (np.asarray(x) > 0).astype(float)


def _tanh_prime(x):
    return 1.0 - np.tanh(x) ** 2


def _softplus(x):
    return np.logaddexp(0.0, x)


_REGISTRY = {
    "identity": lambda: ActivationSpec("identity", lambda x: np.asarray(x, dtype=float),
                                       lambda x: np.ones_like(np.asarray(x, dtype=float)), increasing=True),
    "relu": lambda: ActivationSpec("relu", _relu, _step, kinks=(0.0,), smooth=False),
    "tanh": lambda: ActivationSpec("tanh", np.tanh, _tanh_prime, bounded=True, increasing=True),
    "sigmoid": lambda: ActivationSpec("sigmoid", _sigmoid, lambda x: _sigmoid(x) * (1 - _sigmoid(x)),
                                      bounded=True, increasing=True),
    "softplus": lambda: ActivationSpec("softplus", _softplus, _sigmoid, increasing=True),
    # every Hermite coefficient equals exp(1/2): the RF kernel exp(1 + t) satisfies genericity
    "exp": lambda: ActivationSpec("exp", np.exp, np.exp, increasing=True),
    "square_half": lambda: ActivationSpec("square_half", lambda x: 0.5 * np.asarray(x, dtype=float) ** 2,
                                          lambda x: np.asarray(x, dtype=float)),
    "he2": lambda: ActivationSpec("he2", lambda x: np.asarray(x, dtype=float) ** 2 - 1,
                                  lambda x: 2 * np.asarray(x, dtype=float)),
}


def get_activation(name):
    """Activation by registry name (identity, relu, tanh, sigmoid, softplus, exp, square_half, he2)."""
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ValidationError(f"unknown activation {name!r}; known: {sorted(_REGISTRY)}") from None


def activation_names():
    return sorted(_REGISTRY)


def hermite_series_activation(coeffs, name=None):
    """Polynomial ``sum_k coeffs[k] He_k(x)`` as an ActivationSpec."""
    c = np.asarray(coeffs, dtype=float)
    dc = hermeder(c) if len(c) > 1 else np.zeros(1)
    return ActivationSpec(name or f"hermite{list(c)}", lambda x: hermeval(x, c), lambda x: hermeval(x, dc))


def as_activation(phi):
    if isinstance(phi, ActivationSpec):
        return phi
    if isinstance(phi, str):
        return get_activation(phi)
    raise ValidationError("expected an ActivationSpec or registry name")


def residual_mass_bl(phi, ell):
    """Gaussian Hermite mass of ``phi`` above degree ``ell``, ``b_ell``.

    Computed through Parseval as ``E phi^2 - sum_{k<=ell} mu_k^2/k!``, which is
    exact up to quadrature error and needs no tail truncation.
    """
    phi = as_activation(phi)
    mu = phi.mu(max(ell, 1))
    low = sum(mu[k] ** 2 / math.factorial(k) for k in range(ell + 1))
    val = phi.second_moment() - low
    if val < -1e-10:
        raise NonConvergenceError(f"negative residual mass {val}")
    return max(val, 0.0)


def activation_tail_vl(act, ell):
    """``v_ell = sum_{k>=ell} mu_k(sigma')^2 / k!``, via Parseval on the derivative."""
    act = as_activation(act)
    mu = act.mu_prime(max(ell, 1))
    low = sum(mu[k] ** 2 / math.factorial(k) for k in range(ell))
    val = act.derivative_second_moment() - low
    if val < -1e-10:
        raise NonConvergenceError(f"negative derivative tail mass {val}")
    return max(val, 0.0)


def hermite_bars(act):
    """Mean, linear coefficient and nonlinear strength of an activation.

    Returns ``(b0, b1, bstar_sq, zeta)`` with ``zeta = b1 / bstar``; ``zeta`` is
    NaN for an affine activation (``bstar = 0``).
    """
    act = as_activation(act)
    mu = act.mu(1)
    b0, b1 = float(mu[0]), float(mu[1])
    bstar_sq = act.second_moment() - b0**2 - b1**2
    if bstar_sq < -1e-10:
        raise NonConvergenceError(f"negative nonlinear mass {bstar_sq}")
    bstar_sq = max(bstar_sq, 0.0)
    zeta = b1 / math.sqrt(bstar_sq) if bstar_sq > 1e-12 else float("nan")
    return HermiteBars(b0, b1, bstar_sq, zeta)


# ---------------------------------------------------------------------------
# bivariate Gaussian expectations and limit kernels
# ---------------------------------------------------------------------------
def gaussian_pair_expectation(F, var_u, cov, var_v, kinks_u=(), kinks_v=()):
    """``E F(u, v)`` for a centered Gaussian pair with the given covariance.

    ``F`` must broadcast over arrays. Kinks of ``F`` along ``u`` and ``v`` are
    honoured by splitting the inner and outer rules.
    """
    if var_u < 0 or var_v < 0 or cov * cov > var_u * var_v * (1 + 1e-12) + 1e-300:
        raise ValidationError("covariance is not positive semidefinite")
    if var_u == 0 and var_v == 0:
        return float(F(np.zeros(1), np.zeros(1))[0])
    if var_u == 0:
        return gaussian_pair_expectation(lambda a, b: F(b, a), var_v, cov, var_u, kinks_v, kinks_u)
    a = math.sqrt(var_u)
    b = cov / a
    c = math.sqrt(max(var_v - b * b, 0.0))
    ku = [k / a for k in kinks_u]
    if c <= 1e-14 * max(a, abs(b)):
        kv = [k / b for k in kinks_v] if b != 0 else []
        x, w = gaussian_rule(ku + kv)
        return float(np.dot(w, F(a * x, b * x)))
    g1, w1 = gaussian_rule(ku)
    if not kinks_v:
        g2, w2 = gaussian_rule()
        vals = F(a * g1[:, None], b * g1[:, None] + c * g2[None, :])
        return float(w1 @ vals @ w2)
    # inner kinks move with the outer node: v = b g1 + c g2 = k  <=>  g2 = (k - b g1)/c
    breaks = np.sort(np.clip((np.asarray(kinks_v)[None, :] - b * g1[:, None]) / c, -HALF_WIDTH, HALF_WIDTH), axis=1)
    edges = np.concatenate([np.full((len(g1), 1), -HALF_WIDTH), breaks, np.full((len(g1), 1), HALF_WIDTH)], axis=1)
    per_piece = max(KINK_ORDER // (edges.shape[1] - 1), 32)
    x, w = _legendre_on(edges[:, :-1], edges[:, 1:], per_piece)  # (n1, pieces, order)
    x = x.reshape(len(g1), -1)
    w = w.reshape(len(g1), -1) * np.exp(-x * x / 2) / math.sqrt(2 * math.pi)
    vals = F(a * g1[:, None], b * g1[:, None] + c * x)
    return float(np.dot(w1, np.sum(w * vals, axis=1)))


class TabulatedKernel:
    """Inner-product kernel ``h(t)`` on ``[-1, 1]`` tabulated in ``theta = arccos t``.

    Square-root behaviour at ``t = +-1`` (as for ReLU kernels) becomes smooth in
    ``theta``, so a cubic spline on a uniform ``theta`` grid is accurate to
    about 1e-9. Node values at ``t = +-1`` are exact.
    """

    def __init__(self, fun, n_nodes=513, name="kernel"):
        self.name = name
        theta = np.linspace(0.0, math.pi, n_nodes)
        t = np.cos(theta)
        t[0], t[-1] = 1.0, -1.0
        self.values = np.array([fun(float(ti)) for ti in t])
        self._spline = CubicSpline(theta, self.values)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(np.abs(t) > 1 + 1e-9):
            raise ValidationError("kernel argument outside [-1, 1]")
        return self._spline(np.arccos(np.clip(t, -1.0, 1.0)))

    @property
    def at_one(self):
        return float(self.values[0])


def limit_kernels(act, n_nodes=513):
    """Infinite-dimension RF and NT kernels of an activation.

    ``h_RF(t) = E sigma(G1) sigma(t G1 + sqrt(1-t^2) G2)`` and
    ``h_NT(t) = t E sigma'(G1) sigma'(t G1 + sqrt(1-t^2) G2)``.
    """
    act = as_activation(act)
    s, ds, k = act.value, act.derivative, act.kinks
    rf = lambda t: gaussian_pair_expectation(lambda u, v: s(u) * s(v), 1.0, t, 1.0, k, k)
    nt = lambda t: t * gaussian_pair_expectation(lambda u, v: ds(u) * ds(v), 1.0, t, 1.0, k, k)
    return TabulatedKernel(rf, n_nodes, f"h_RF[{act.name}]"), TabulatedKernel(nt, n_nodes, f"h_NT[{act.name}]")


# ---------------------------------------------------------------------------
# sphere: nu_d quadrature, Gegenbauer polynomials, dimensions
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class SphereQuadrature:
    """Nodes ``u`` on ``[-sqrt(d), sqrt(d)]`` and probability weights for ``nu_d``."""

    d: int
    nodes: np.ndarray
    weights: np.ndarray

    def expect(self, f):
        return float(np.dot(self.weights, f(self.nodes)))


def _jacobi_rule(order, a, b):
    """Gauss-Jacobi nodes and weights for ``(1-x)^a (1+x)^b``.

    scipy's Newton refinement breaks down for large exponents (d in the
    hundreds); Golub-Welsch on the Jacobi matrix is used then.
    """
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        x, w = roots_jacobi(order, a, b)
    if np.all(np.isfinite(x)) and np.all(np.isfinite(w)):
        return x, w
    n = np.arange(order, dtype=float)
    s = 2 * n + a + b
    diag = np.where(n == 0, (b - a) / (a + b + 2), (b * b - a * a) / np.maximum(s * (s + 2), 1e-300))
    m = n[1:]
    sm = 2 * m + a + b
    off = np.sqrt(4 * m * (m + a) * (m + b) * (m + a + b) / (sm**2 * (sm + 1) * (sm - 1)))
    x, V = linalg.eigh_tridiagonal(diag, off)
    log_mu0 = (a + b + 1) * math.log(2) + math.lgamma(a + 1) + math.lgamma(b + 1) - math.lgamma(a + b + 2)
    return x, V[0] ** 2 * math.exp(log_mu0)


def sphere_quadrature(d, order=None, kinks=()):
    """Quadrature for ``nu_d``.

    Gauss-Jacobi with exponent ``(d-3)/2`` integrates polynomials of degree
    ``2*order - 1`` exactly. Kinks (in the ``u`` variable) split the interval;
    end pieces keep the one-sided Jacobi weight, interior pieces use
    Gauss-Legendre times the density.
    """
    if d < 2:
        raise ValidationError("nu_d needs d >= 2")
    alpha = (d - 3) / 2
    rd = math.sqrt(d)
    cuts = sorted(k / rd for k in kinks if -rd < k < rd)
    if not cuts:
        order = order or 160
        x, w = _jacobi_rule(order, alpha, alpha)
        return SphereQuadrature(d, rd * x, w / w.sum())
    order = order or 200
    edges = [-1.0, *cuts, 1.0]
    xs, ws = [], []
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        half = (hi - lo) / 2
        if i == 0 and i == len(edges) - 2:
            raise AssertionError
        if i == 0:  # singular at -1: weight (1+x)^alpha on [lo, hi] ; y in [-1,1]
            y, wy = _jacobi_rule(order, 0.0, alpha)
            x = lo + half * (y + 1)
            w = wy * half ** (alpha + 1) * (1 - x) ** alpha
        elif i == len(edges) - 2:
            y, wy = _jacobi_rule(order, alpha, 0.0)
            x = lo + half * (y + 1)
            w = wy * half ** (alpha + 1) * (1 + x) ** alpha
        else:
            y, wy = roots_legendre(order)
            x = lo + half * (y + 1)
            w = wy * half * (1 - x * x) ** alpha
        xs.append(x)
        ws.append(w)
    x, w = np.concatenate(xs), np.concatenate(ws)
    # normalizing constant of (1-x^2)^alpha on [-1, 1]
    z = math.exp(math.lgamma(alpha + 1) * 2 - math.lgamma(2 * alpha + 2)) * 2 ** (2 * alpha + 1)
    return SphereQuadrature(d, rd * x, w / z)


def nu_expectation(f, d, kinks=(), tol=1e-10):
    """``E f(u)`` under ``nu_d`` with a node-doubling convergence check."""
    q1 = sphere_quadrature(d, kinks=kinks)
    q2 = sphere_quadrature(d, order=2 * len(q1.nodes) // max(len(kinks) + 1, 1), kinks=kinks)
    v1, v2 = q1.expect(f), q2.expect(f)
    if abs(v1 - v2) > tol * max(1.0, abs(v2)):
        raise NonConvergenceError(f"nu_d quadrature unconverged ({v1} vs {v2})")
    return v2


def sphere_dim(d, k):
    """Dimension ``B(d, k)`` of degree-k spherical harmonics in d variables (exact integer)."""
    if d < 2 or k < 0:
        raise ValidationError("sphere_dim needs d >= 2 and k >= 0")
    if k == 0:
        return 1
    return (2 * k + d - 2) * math.comb(k + d - 3, k - 1) // k


def gegenbauer_all(d, k_max, t):
    """``Q_0^{(d)}(t), ..., Q_{k_max}^{(d)}(t)`` stacked along axis 0.

    Uses the recurrence of the endpoint-normalized Gegenbauer family in
    ``x = t/d``:  ``(k+d-2) P_{k+1} = (2k+d-2) x P_k - k P_{k-1}``.
    """
    x = np.asarray(t, dtype=float) / d
    out = np.empty((k_max + 1,) + x.shape)
    out[0] = 1.0
    if k_max >= 1:
        out[1] = x
    for k in range(1, k_max):
        out[k + 1] = ((2 * k + d - 2) * x * out[k] - k * out[k - 1]) / (k + d - 2)
    return out


def gegenbauer_eval(d, k, t):
    """Degree-k Gegenbauer polynomial ``Q_k^{(d)}(t)``, ``t`` in ``[-d, d]``."""
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > d * (1 + 1e-12)):
        raise ValidationError("Gegenbauer argument outside [-d, d]")
    return gegenbauer_all(d, k, t)[k]


def kernel_level_coeffs(h, d, k_max=K_MAX, kinks=()):
    """Level eigenvalues ``xi_{d,k}^2`` of the kernel ``h(<x1,x2>/d)`` on the sphere.

    ``xi_{d,k}^2 = E_{u ~ nu_d} Q_k(sqrt(d) u) h(u / sqrt(d))``. ``kinks`` are
    points in ``[-1, 1]`` where ``h`` is not smooth.
    """
    rd = math.sqrt(d)
    q = sphere_quadrature(d, kinks=[k * rd for k in kinks])
    qk = gegenbauer_all(d, k_max, rd * q.nodes)
    return qk @ (q.weights * h(q.nodes / rd))


def genericity_report(xi2, d):
    """Scaled level coefficients ``c_{d,k} = xi_{d,k}^2 B(d,k)`` and positivity flags."""
    c = np.array([x * sphere_dim(d, k) for k, x in enumerate(xi2)])
    return {"c": c, "positive": c > 0, "all_positive": bool(np.all(c > 0))}


def sample_sphere(n, d, rng, radius=None):
    """``n`` i.i.d. uniform points on the sphere of radius ``sqrt(d)`` (or ``radius``)."""
    g = rng.standard_normal((n, d))
    r = math.sqrt(d) if radius is None else radius
    return g * (r / np.linalg.norm(g, axis=1, keepdims=True))


def sphere_pair_expectation(F, d, t, kinks_u=(), kinks_v=(), n_radial=48, n_angle=64):
    """``E_w F(<w, x1>, <w, x2>)`` for ``w`` uniform on the unit sphere.

    ``x1, x2`` have norm ``sqrt(d)`` and ``<x1, x2>/d = t``. Uses the polar law
    of the first two coordinates of ``w``: squared radius ``b ~ Beta(1, (d-2)/2)``
    and uniform angle. Angular pieces are split where either argument crosses
    a kink.
    """
    if d < 3:
        raise ValidationError("sphere_pair_expectation needs d >= 3")
    theta = math.acos(min(max(t, -1.0), 1.0))
    alpha = (d - 4) / 2
    y, wy = _jacobi_rule(n_radial, alpha, 0.0)
    b = (1 + y) / 2
    wy = wy / wy.sum()
    radius = np.sqrt(d * b)
    total = 0.0
    ya, wa = roots_legendre(n_angle)
    for rho, wr in zip(radius, wy):
        cuts = [0.0, 2 * math.pi]
        for k in kinks_u:
            if abs(k) < rho:
                a0 = math.acos(k / rho)
                cuts += [a0, 2 * math.pi - a0]
        for k in kinks_v:
            if abs(k) < rho:
                a0 = math.acos(k / rho)
                cuts += [(theta + a0) % (2 * math.pi), (theta - a0) % (2 * math.pi)]
        cuts = np.unique(np.array(cuts))
        lo, hi = cuts[:-1], cuts[1:]
        half = (hi - lo)[:, None] / 2
        phi = lo[:, None] + half * (ya + 1)
        w = half * wa
        vals = F(rho * np.cos(phi), rho * np.cos(phi - theta))
        total += wr * float(np.sum(w * vals)) / (2 * math.pi)
    return total


def finite_d_kernels(act, d, n_nodes=513):
    """Exact-d RF and NT kernels for weights uniform on the unit sphere.

    ``h_RF^{(d)}(t) = E_w sigma(<w,x1>) sigma(<w,x2>)`` and
    ``h_NT^{(d)}(t) = t E_w sigma'(<w,x1>) sigma'(<w,x2>)``, ``t = <x1,x2>/d``.
    """
    act = as_activation(act)
    s, ds, k = act.value, act.derivative, act.kinks
    rf = lambda t: sphere_pair_expectation(lambda u, v: s(u) * s(v), d, t, k, k)
    nt = lambda t: t * sphere_pair_expectation(lambda u, v: ds(u) * ds(v), d, t, k, k)
    return (TabulatedKernel(rf, n_nodes, f"h_RF^({d})[{act.name}]"),
            TabulatedKernel(nt, n_nodes, f"h_NT^({d})[{act.name}]"))


# ---------------------------------------------------------------------------
# targets
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TargetFunction:
    """Target ``f*`` on the sphere of radius ``sqrt(d)``.

    kind ``linear``: ``<beta, x>``; ``ridge``: ``phi(<w_star, x>)`` with unit
    ``w_star``; ``harmonic``: ``sum_j c_j Q_{k_j}(sqrt(d) <v_j, x>)`` with unit
    directions ``v_j``.
    """

    kind: str
    d: int
    beta: np.ndarray = None
    phi: ActivationSpec = None
    w_star: np.ndarray = None
    degrees: np.ndarray = None
    coefs: np.ndarray = None
    directions: np.ndarray = None
    seed: int = None

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        if self.kind == "linear":
            return X @ self.beta
        if self.kind == "ridge":
            return self.phi.value(X @ self.w_star)
        proj = math.sqrt(self.d) * (X @ self.directions.T)
        out = np.zeros(X.shape[0])
        for j, (k, c) in enumerate(zip(self.degrees, self.coefs)):
            out += c * gegenbauer_eval(self.d, int(k), proj[:, j])
        return out

    def norm_sq(self):
        if self.kind == "linear":
            return float(self.beta @ self.beta)
        if self.kind == "ridge":
            return nu_expectation(lambda u: self.phi.value(u) ** 2, self.d, self.phi.kinks)
        return float(np.sum(self.degree_masses(int(self.degrees.max()))))

    def degree_masses(self, k_max=K_MAX):
        """``||P_k f||^2`` for k = 0..k_max."""
        d = self.d
        m = np.zeros(k_max + 1)
        if self.kind == "linear":
            if k_max >= 1:
                m[1] = float(self.beta @ self.beta)
            return m
        if self.kind == "ridge":
            rd = math.sqrt(d)
            q = sphere_quadrature(d, kinks=self.phi.kinks)
            coef = gegenbauer_all(d, k_max, rd * q.nodes) @ (q.weights * self.phi.value(q.nodes))
            return np.array([sphere_dim(d, k) * coef[k] ** 2 for k in range(k_max + 1)])
        gram = self.directions @ self.directions.T
        for k in range(k_max + 1):
            idx = np.flatnonzero(self.degrees == k)
            if idx.size:
                qk = gegenbauer_eval(d, k, np.clip(d * gram[np.ix_(idx, idx)], -d, d))
                m[k] = float(self.coefs[idx] @ qk @ self.coefs[idx]) / sphere_dim(d, k)
        return m


def linear_target(beta):
    beta = np.asarray(beta, dtype=float)
    return TargetFunction("linear", beta.size, beta=beta)


def ridge_target(phi, w_star):
    w = np.asarray(w_star, dtype=float)
    if abs(np.linalg.norm(w) - 1) > 1e-10:
        raise ValidationError("ridge target direction must have unit norm")
    return TargetFunction("ridge", w.size, phi=as_activation(phi), w_star=w)


def harmonic_target(d, degrees, coefs, directions):
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    if dirs.shape != (len(degrees), d):
        raise ValidationError("need one direction per harmonic term")
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    return TargetFunction("harmonic", d, degrees=np.asarray(degrees, dtype=int),
                          coefs=np.asarray(coefs, dtype=float), directions=dirs)


def gp_target(d, degree_weights, m, seed):
    """Realization of a rotationally invariant random target.

    Degree ``k`` receives ``m`` Gegenbauer ridge terms along independent random
    directions with coefficient variance ``F_k^2 B(d,k) / m``, so that
    ``E ||P_k f||^2 = F_k^2``.
    """
    rng = np.random.default_rng(seed)
    degrees, coefs, dirs = [], [], []
    for k, f2 in enumerate(degree_weights):
        if f2 <= 0:
            continue
        scale = math.sqrt(f2 * sphere_dim(d, k) / m)
        for _ in range(m):
            degrees.append(k)
            coefs.append(scale * rng.standard_normal())
            dirs.append(rng.standard_normal(d))
    t = harmonic_target(d, degrees, coefs, dirs)
    return TargetFunction("harmonic", d, degrees=t.degrees, coefs=t.coefs, directions=t.directions, seed=seed)


def projection_masses(target, ell, k_max=None):
    """``(||P_{<=ell} f||^2, ||P_{>ell} f||^2)``; the high part is ``||f||^2`` minus the low part."""
    low = float(np.sum(target.degree_masses(max(ell, 1) if k_max is None else k_max)[: ell + 1]))
    high = target.norm_sq() - low
    if high < -1e-9 * max(1.0, low):
        raise NonConvergenceError("projection masses exceed the total norm")
    return low, max(high, 0.0)
