"""Mean-field two-layer networks learning a ridge function.

Network ``f(x) = (1/N) sum_i a_i sigma(<w_i, x>)``, target
``f*(x) = phi(<w_star, x>)`` with unit ``w_star`` and covariates ``x ~ N(0, I_d)``.
With ``sigma_i = sigma(<w_i, x>)`` the potentials are

    V(a, w) = -a E phi(<w_star, x>) sigma(<w, x>),
    U(theta_1, theta_2) = a_1 a_2 E sigma(<w_1, x>) sigma(<w_2, x>),

and the population risk is ``R = E f*^2 / 2 + mean_i V_i + mean_ij U_ij / 2``.
Every Gaussian expectation reduces to a pair ``(u, v)`` with a 2x2
covariance and is computed by tensor Gauss-Hermite quadrature.

Three dynamics are provided:

- ``particle``: the finite-N gradient flow of the empirical measure;
- ``symmetrized``: full coordinates, each particle standing for its orbit under
  rotations fixing ``w_star`` (the measure stays rotation invariant);
- ``reduced``: the same flow in the invariant coordinates ``(a, s, r)`` with
  ``s = <w_star, w>`` and ``r = ||P_perp w||``.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import roots_jacobi

from . import function_space as fs
from .errors import NonConvergenceError, ValidationError

GH_ORDER = 32
COS_ORDER = 24
R_FLOOR = 1e-8
EIG_RTOL = 1e-12
CHUNK = 2048
MONOTONE_SLACK = 1e-10
MAX_HALVINGS = 40
DIVERGENCE_BOUND = 1e6


@dataclass(frozen=True)
class MeanFieldProblem:
    """Activation, ridge target, noise and initialization law.

    The second-layer initial law is ``N(a_init, a_spread^2)`` (a point mass
    when ``a_spread = 0``); first-layer weights start from ``N(0, gamma^2 I_d / d)``.
    ``covariates`` selects the law used by Monte Carlo routes and SGD; the
    potentials are always Gaussian.
    """

    activation: fs.ActivationSpec
    target: fs.ActivationSpec
    w_star: np.ndarray
    tau: float = 0.0
    a_init: float = 1.0
    a_spread: float = 0.0
    gamma: float = 0.1
    covariates: str = "gaussian"
    order: int = GH_ORDER
    cos_order: int = COS_ORDER

    def __post_init__(self):
        act = fs.as_activation(self.activation)
        tgt = fs.as_activation(self.target)
        if act.kinks or tgt.kinks:
            raise ValidationError("mean-field quadrature needs smooth activation and target")
        w = np.asarray(self.w_star, dtype=float)
        if w.ndim != 1 or abs(np.linalg.norm(w) - 1) > 1e-10:
            raise ValidationError("w_star must be a unit vector")
        if w.size < 3:
            raise ValidationError("need d >= 3")
        if self.covariates not in ("gaussian", "sphere"):
            raise ValidationError("covariates must be 'gaussian' or 'sphere'")
        if self.gamma < 0 or self.a_spread < 0 or self.tau < 0:
            raise ValidationError("gamma, a_spread and tau must be non-negative")
        object.__setattr__(self, "activation", act)
        object.__setattr__(self, "target", tgt)
        object.__setattr__(self, "w_star", w)

    @property
    def d(self):
        return self.w_star.size

    def target_second_moment(self):
        return self.target.second_moment()


def make_problem(activation="tanh", d=20, target=None, **kw):
    """Problem with ``w_star = e_1`` and ``phi = sigma`` unless ``target`` is given."""
    w = np.zeros(d)
    w[0] = 1.0
    return MeanFieldProblem(activation, activation if target is None else target, w, **kw)


@dataclass(frozen=True)
class ParticleEnsemble:
    """Particles ``(a_i, w_i)`` at time ``t``."""

    a: np.ndarray
    W: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        W = np.asarray(self.W, dtype=float)
        if a.ndim != 1 or W.shape[0] != a.size:
            raise ValidationError("need one second-layer weight per row of W")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "W", W)

    @property
    def N(self):
        return self.a.size

    def reduce(self, w_star):
        s = self.W @ w_star
        r = np.linalg.norm(self.W - np.outer(s, w_star), axis=1)
        return ReducedEnsemble(self.a, s, r, self.t)

    def permuted(self, perm):
        return ParticleEnsemble(self.a[perm], self.W[perm], self.t)


@dataclass(frozen=True)
class ReducedEnsemble:
    """Invariant coordinates ``(a, s, r)`` per particle at time ``t``."""

    a: np.ndarray
    s: np.ndarray
    r: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        arrs = [np.asarray(x, dtype=float) for x in (self.a, self.s, self.r)]
        if len({x.shape for x in arrs}) != 1 or arrs[0].ndim != 1:
            raise ValidationError("a, s, r must be 1-d arrays of equal length")
        if np.any(arrs[2] < 0):
            raise ValidationError("r must be non-negative")
        for name, x in zip("asr", arrs):
            object.__setattr__(self, name, x)

    @property
    def N(self):
        return self.a.size


def init_particles(problem, N, rng):
    rng = np.random.default_rng(rng)
    a = problem.a_init + problem.a_spread * rng.standard_normal(N)
    W = problem.gamma / math.sqrt(problem.d) * rng.standard_normal((N, problem.d))
    return ParticleEnsemble(a, W)


def init_reduced(problem, N, rng):
    """``P_A x N(0, gamma^2/d) x (gamma/sqrt(d)) chi_{d-1}``."""
    rng = np.random.default_rng(rng)
    d, g = problem.d, problem.gamma
    a = problem.a_init + problem.a_spread * rng.standard_normal(N)
    s = g / math.sqrt(d) * rng.standard_normal(N)
    r = g / math.sqrt(d) * np.sqrt(rng.chisquare(d - 1, N))
    return ReducedEnsemble(a, s, r)


# ---------------------------------------------------------------------------
# pair quadrature
# ---------------------------------------------------------------------------
def _tensor_rule(order):
    x, w = hermegauss(order)
    w = w / w.sum()
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    return X1.ravel(), X2.ravel(), np.outer(w, w).ravel()


_RULES = {}


def _rule(order):
    if order not in _RULES:
        _RULES[order] = _tensor_rule(order)
    return _RULES[order]


def pair_moments(F, G, dG, var_u, cov, var_v, order=GH_ORDER):
    """Batched ``E F(u) G(v)`` and gradient coefficients for Gaussian ``(u, v)``.

    With ``u = <m_u, x>``, ``v = <m_v, x>`` and ``x ~ N(0, I)``, returns
    ``(value, c_u, c_v)`` such that ``E F(u) G'(v) x = c_u m_u + c_v m_v``.
    The coefficients are ``C^+ E[(u, v) F(u) G'(v)]``, which stays exact
    for the singular covariances of parallel or vanishing vectors.
    """
    vu, c, vv = np.broadcast_arrays(*(np.asarray(z, dtype=float) for z in (var_u, cov, var_v)))
    shape = vu.shape
    vu, c, vv = vu.ravel(), c.ravel(), vv.ravel()
    x1, x2, wq = _rule(order)
    val = np.empty(vu.size)
    cu = np.empty(vu.size)
    cv = np.empty(vu.size)
    for lo in range(0, vu.size, CHUNK):
        sl = slice(lo, lo + CHUNK)
        C = np.stack([np.stack([vu[sl], c[sl]], -1), np.stack([c[sl], vv[sl]], -1)], -2)
        lam, Q = np.linalg.eigh(C)
        lam = np.where(lam > EIG_RTOL * np.maximum(lam[:, -1:], 1e-300), lam, 0.0)
        root = np.sqrt(lam)
        inv_root = np.divide(1.0, root, out=np.zeros_like(root), where=root > 0)
        # z = Q diag(root) xi
        u = (Q[:, 0, 0] * root[:, 0])[:, None] * x1 + (Q[:, 0, 1] * root[:, 1])[:, None] * x2
        v = (Q[:, 1, 0] * root[:, 0])[:, None] * x1 + (Q[:, 1, 1] * root[:, 1])[:, None] * x2
        Fu = F(u)
        val[sl] = (Fu * G(v)) @ wq
        h = Fu * dG(v)
        e1 = (h * x1) @ wq * inv_root[:, 0]
        e2 = (h * x2) @ wq * inv_root[:, 1]
        cu[sl] = Q[:, 0, 0] * e1 + Q[:, 0, 1] * e2
        cv[sl] = Q[:, 1, 0] * e1 + Q[:, 1, 1] * e2
    return val.reshape(shape), cu.reshape(shape), cv.reshape(shape)


def _self_terms(problem, s, q):
    """Target overlap ``T = E phi(u*) sigma(v)`` and ``E phi(u*) sigma'(v) x = g* w_star + g w``."""
    act, tgt = problem.activation, problem.target
    return pair_moments(tgt.value, act.value, act.derivative, np.ones_like(q), s, q, problem.order)


def _pair_terms(problem, q1, c12, q2):
    """``S = E sigma(u1) sigma(u2)`` and ``E sigma'(u1) sigma(u2) x = alpha w1 + beta w2``."""
    act = problem.activation
    S, beta, alpha = pair_moments(act.value, act.value, act.derivative, q2, c12, q1, problem.order)
    return S, alpha, beta


def potential_V(problem, a, w):
    w = np.asarray(w, dtype=float)
    T, _, _ = _self_terms(problem, np.array(w @ problem.w_star), np.array(w @ w))
    return float(-a * T)


def potential_U(problem, a1, w1, a2, w2):
    w1, w2 = np.asarray(w1, dtype=float), np.asarray(w2, dtype=float)
    S, _, _ = _pair_terms(problem, np.array(w1 @ w1), np.array(w1 @ w2), np.array(w2 @ w2))
    return float(a1 * a2 * S)


def grad_V(problem, a, w):
    """``(dV/da, dV/dw)``."""
    w = np.asarray(w, dtype=float)
    T, gs, g = _self_terms(problem, np.array(w @ problem.w_star), np.array(w @ w))
    return float(-T), -a * (float(gs) * problem.w_star + float(g) * w)


def grad_U(problem, a1, w1, a2, w2):
    """Gradient of ``U(theta_1, theta_2)`` with respect to ``theta_1 = (a1, w1)``."""
    w1, w2 = np.asarray(w1, dtype=float), np.asarray(w2, dtype=float)
    S, al, be = _pair_terms(problem, np.array(w1 @ w1), np.array(w1 @ w2), np.array(w2 @ w2))
    return float(a2 * S), a1 * a2 * (float(al) * w1 + float(be) * w2)


# ---------------------------------------------------------------------------
# drifts and risks
# ---------------------------------------------------------------------------
class _State(NamedTuple):
    risk: float
    da: np.ndarray
    dw: np.ndarray  # (N, d) for full coordinates, (N, 2) as (ds, dr) for reduced


def _particle_state(problem, ens):
    a, W, N = ens.a, ens.W, ens.N
    ws = problem.w_star
    s = W @ ws
    Gm = W @ W.T
    q = np.diag(Gm).copy()
    T, gs, g = _self_terms(problem, s, q)
    S, al, be = _pair_terms(problem, q[:, None], Gm, q[None, :])
    aS = S @ a / N
    risk = 0.5 * problem.target_second_moment() - float(a @ T) / N + 0.5 * float(a @ S @ a) / N**2
    da = T - aS
    # -grad of Psi w.r.t. w_i: a_i [g*_i w* + g_i w_i - (1/N) sum_j a_j (alpha_ij w_i + beta_ij w_j)]
    pull = (gs[:, None] * ws[None, :] + g[:, None] * W
            - ((al @ a)[:, None] * W + (be * a[None, :]) @ W) / N)
    return _State(risk, da, a[:, None] * pull)


def _cos_rule(problem):
    """Cosine between independent uniform directions orthogonal to ``w_star``: density ``(1-c^2)^{(d-4)/2}``."""
    alpha = (problem.d - 4) / 2
    c, w = roots_jacobi(problem.cos_order, alpha, alpha)
    return c, w / w.sum()


def _orbit_terms(problem, s, r):
    """Orbit-averaged pair quantities ``E_c S``, ``E_c alpha``, ``E_c beta``, ``E_c beta c``."""
    c, wc = _cos_rule(problem)
    q = s * s + r * r
    c12 = (s[:, None] * s[None, :])[..., None] + (r[:, None] * r[None, :])[..., None] * c
    S, al, be = _pair_terms(problem, q[:, None, None], c12, q[None, :, None])
    return S @ wc, al @ wc, be @ wc, (be * c) @ wc


def _reduced_core(problem, a, s, r):
    N = a.size
    q = s * s + r * r
    T, gs, g = _self_terms(problem, s, q)
    S, al, be, bec = _orbit_terms(problem, s, r)
    risk = 0.5 * problem.target_second_moment() - float(a @ T) / N + 0.5 * float(a @ S @ a) / N**2
    da = T - S @ a / N
    return risk, da, T, gs, g, al, be, bec


def _reduced_state(problem, red):
    a, s, r, N = red.a, red.s, red.r, red.N
    risk, da, _, gs, g, al, be, bec = _reduced_core(problem, a, s, r)
    ds = a * (gs + g * s - ((al @ a) * s + (be * a[None, :]) @ s) / N)
    dr = a * (g * r - ((al @ a) * r + (bec * a[None, :]) @ r) / N)
    return _State(risk, da, np.stack([ds, dr], axis=1))


def _symmetrized_state(problem, ens):
    a, W, N = ens.a, ens.W, ens.N
    ws = problem.w_star
    s = W @ ws
    P = W - np.outer(s, ws)
    r = np.linalg.norm(P, axis=1)
    risk, da, _, gs, g, al, be, bec = _reduced_core(problem, a, s, r)
    unit = P / np.maximum(r, R_FLOOR)[:, None]
    pull = (gs[:, None] * ws[None, :] + g[:, None] * W
            - ((al @ a)[:, None] * W + ((be * a[None, :]) @ s)[:, None] * ws[None, :]
               + ((bec * a[None, :]) @ r)[:, None] * unit) / N)
    return _State(risk, da, a[:, None] * pull)


def _state(problem, ens, mode):
    if mode == "particle":
        return _particle_state(problem, ens)
    if mode == "symmetrized":
        return _symmetrized_state(problem, ens)
    if mode == "reduced":
        return _reduced_state(problem, ens)
    raise ValidationError("mode must be 'particle', 'symmetrized' or 'reduced'")


def _advance(ens, st, dt):
    if isinstance(ens, ReducedEnsemble):
        return ReducedEnsemble(ens.a + dt * st.da, ens.s + dt * st.dw[:, 0],
                               np.abs(ens.r + dt * st.dw[:, 1]), ens.t + dt)
    return ParticleEnsemble(ens.a + dt * st.da, ens.W + dt * st.dw, ens.t + dt)


def population_risk(ens, problem, route="quadrature", mode=None, n_mc=20000, seed=0):
    """Population risk ``E (f* - f)^2 / 2``.

    ``route='quadrature'`` uses the potential expansion and returns a float.
    ``route='mc'`` averages over fresh Gaussian covariates and returns
    ``(mean, sem)``. ``mode`` is ``particle`` (default for full ensembles) or
    ``symmetrized`` (default for reduced ensembles, where it is the only option).
    """
    if isinstance(ens, ReducedEnsemble):
        mode = "reduced"
    mode = mode or "particle"
    if route == "quadrature":
        if mode == "reduced":
            return _reduced_core(problem, ens.a, ens.s, ens.r)[0]
        return _state(problem, ens, mode).risk
    if route != "mc":
        raise ValidationError("route must be 'quadrature' or 'mc'")
    rng = np.random.default_rng(seed)
    vals = 0.5 * (_mc_residual(problem, ens, mode, rng, n_mc)) ** 2
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_mc))


def _mc_residual(problem, ens, mode, rng, n_mc):
    d, act, tgt = problem.d, problem.activation, problem.target
    if mode == "particle":
        X = rng.standard_normal((n_mc, d))
        return tgt.value(X @ problem.w_star) - act.value(X @ ens.W.T) @ ens.a / ens.N
    red = ens if isinstance(ens, ReducedEnsemble) else ens.reduce(problem.w_star)
    # x = g1 w_star + rho e, rho ~ chi_{d-1}; orbit average over the cosine between e and P_perp w
    g1 = rng.standard_normal(n_mc)
    rho = np.sqrt(rng.chisquare(d - 1, n_mc))
    c, wc = _cos_rule(problem)
    pre = red.s[None, :, None] * g1[:, None, None] + red.r[None, :, None] * rho[:, None, None] * c
    f = (act.value(pre) @ wc) @ red.a / red.N
    return tgt.value(g1) - f


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------
class FlowRecord(NamedTuple):
    t: float
    risk: float
    mean_a: float
    mean_s: float
    mean_r: float


def _record(ens, risk, w_star):
    red = ens if isinstance(ens, ReducedEnsemble) else ens.reduce(w_star)
    return FlowRecord(float(ens.t), float(risk), float(red.a.mean()), float(red.s.mean()), float(red.r.mean()))


def particle_flow_step(ens, problem, dt, mode="particle"):
    """One forward-Euler step of the gradient flow; ``mode`` as in ``population_risk``."""
    if dt <= 0:
        raise ValidationError("dt must be positive")
    if isinstance(ens, ReducedEnsemble):
        mode = "reduced"
    return _advance(ens, _state(problem, ens, mode), dt)


def reduced_flow_step(red, problem, dt):
    return particle_flow_step(red, problem, dt, "reduced")


@dataclass
class Trajectory:
    records: list = field(default_factory=list)
    states: list = field(default_factory=list)
    halvings: int = 0

    @property
    def final(self):
        return self.states[-1]

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])


def run_flow(ens, problem, dt, steps, mode="particle", backtrack=True, keep_states=False):
    """Euler integration for ``steps`` steps.

    With ``backtrack`` a step that raises the risk by more than
    ``1e-10 * max(1, risk)`` is retried with half the step size, and the
    smaller step size is kept from then on.
    """
    if isinstance(ens, ReducedEnsemble):
        mode = "reduced"
    st = _state(problem, ens, mode)
    traj = Trajectory([_record(ens, st.risk, problem.w_star)], [ens])
    for _ in range(steps):
        for _ in range(MAX_HALVINGS + 1):
            nxt = _advance(ens, st, dt)
            nst = _state(problem, nxt, mode)
            if not backtrack or nst.risk <= st.risk + MONOTONE_SLACK * max(1.0, st.risk):
                break
            dt /= 2
            traj.halvings += 1
        else:
            raise NonConvergenceError("step size backtracking failed to decrease the risk")
        ens, st = nxt, nst
        traj.records.append(_record(ens, st.risk, problem.w_star))
        if keep_states:
            traj.states.append(ens)
    if not keep_states:
        traj.states.append(ens)
    return traj


def online_sgd(problem, ens, eta, steps, seed, record_every=None, data=None):
    """SGD with step ``eta`` on single samples; time advances by ``eta`` per step.

    Fresh samples are drawn each step (``data=None``); with ``data=(X, y)`` a
    uniformly random training point is used instead. Records the quadrature
    population risk every ``record_every`` steps (default: ``steps``).
    """
    if eta < 0:
        raise ValidationError("eta must be non-negative")
    rng = np.random.default_rng(seed)
    act, tgt, d = problem.activation, problem.target, problem.d
    a, W = ens.a.copy(), ens.W.copy()
    N = a.size
    every = record_every or steps
    traj = Trajectory([_record(ens, population_risk(ens, problem), problem.w_star)], [ens])
    for k in range(1, steps + 1):
        if data is None:
            x = rng.standard_normal(d)
            if problem.covariates == "sphere":
                x *= math.sqrt(d) / np.linalg.norm(x)
            y = tgt.value(x @ problem.w_star) + problem.tau * rng.standard_normal()
        else:
            i = rng.integers(data[0].shape[0])
            x, y = data[0][i], data[1][i]
        pre = W @ x
        err = y - float(a @ act.value(pre)) / N
        ga = err * act.value(pre)
        gW = (err * a * act.derivative(pre))[:, None] * x[None, :]
        a = a + eta * ga
        W = W + eta * gW
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(W))) or \
                max(np.abs(a).max(), np.abs(W).max()) > DIVERGENCE_BOUND:
            raise NonConvergenceError(f"SGD diverged at step {k} (parameter magnitude above {DIVERGENCE_BOUND:g})")
        if k % every == 0 or k == steps:
            cur = ParticleEnsemble(a.copy(), W.copy(), ens.t + eta * k)
            traj.records.append(_record(cur, population_risk(cur, problem), problem.w_star))
            traj.states.append(cur)
    return traj


# ---------------------------------------------------------------------------
# single neuron
# ---------------------------------------------------------------------------
class SingleNeuronResult(NamedTuple):
    w_hat: np.ndarray
    risk: float
    risk_curve: np.ndarray
    max_pairwise_distance: float
    iterations: int


def single_neuron_excess_risk(act, w_star, w):
    """``E (sigma(<w_star, x>) - sigma(<w, x>))^2`` for ``x`` uniform on the sphere of radius ``sqrt(d)``."""
    d = w_star.size
    nw = float(np.linalg.norm(w))
    if nw == 0:
        return fs.nu_expectation(lambda u: (act.value(u) - act.value(0.0)) ** 2, d)
    t = float(w @ w_star) / nw
    F = lambda u, v: (act.value(u) - act.value(nw * v)) ** 2
    return fs.sphere_pair_expectation(F, d, t)


def single_neuron_gd(act, d, n, tau, seed, n_inits=5, init_scale=1.0, lr=0.5, max_iter=20000, gtol=1e-11,
                     inits=None):
    """Full-batch gradient descent on ``mean_i (y_i - sigma(<w, x_i>))^2`` from several inits.

    Data: ``x_i`` uniform on the sphere of radius ``sqrt(d)``, ``w_star = e_1``,
    ``y_i = sigma(<w_star, x_i>) + tau * noise``. Inits are Gaussian with norm
    ``init_scale`` unless ``inits`` (one row per run) is given. Each run stops
    when the gradient norm is below ``gtol``.
    """
    act = fs.as_activation(act)
    if act.kinks or not act.bounded or not act.increasing:
        raise ValidationError("single-neuron GD needs a bounded, smooth, strictly increasing activation")
    rng = np.random.default_rng(seed)
    w_star = np.zeros(d)
    w_star[0] = 1.0
    X = fs.sample_sphere(n, d, rng)
    y = act.value(X @ w_star) + tau * rng.standard_normal(n)
    finals, curves, iters = [], [], 0
    starts = None if inits is None else np.atleast_2d(np.asarray(inits, dtype=float))
    if starts is not None and starts.shape[1] != d:
        raise ValidationError(f"inits must have {d} columns")
    for k in range(n_inits if starts is None else starts.shape[0]):
        if starts is None:
            w = rng.standard_normal(d)
            w *= init_scale / np.linalg.norm(w)
        else:
            w = starts[k].copy()
        curve = []
        for it in range(max_iter):
            pre = X @ w
            res = y - act.value(pre)
            grad = -2.0 * X.T @ (res * act.derivative(pre)) / n
            if it % 50 == 0:
                curve.append(float(np.mean(res**2)))
            if np.linalg.norm(grad) <= gtol:
                break
            w = w - lr * grad
        else:
            raise NonConvergenceError(f"GD did not reach gradient norm {gtol:g} in {max_iter} iterations")
        iters = max(iters, it)
        finals.append(w)
        curves.append(np.array(curve))
    F = np.array(finals)
    dist = max((float(np.linalg.norm(F[i] - F[j])) for i in range(len(F)) for j in range(i)), default=0.0)
    w_hat = F.mean(axis=0)
    return SingleNeuronResult(w_hat, single_neuron_excess_risk(act, w_star, w_hat), curves[0], dist, iters)
