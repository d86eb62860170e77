"""Independent oracles for the derived reference values used by the test-suite.

Nothing here imports the package. Values are computed with mpmath at high
precision (quadrature, bisection, Gram-Schmidt on exact moments) or by
brute-force counting, then frozen into ``tests/data/frozen.json``.

Run once with ``python tests/oracles/build_frozen.py``; the JSON is committed.
"""

import json
import math
from pathlib import Path

import mpmath as mp

mp.mp.dps = 30
OUT = Path(__file__).resolve().parents[1] / "data" / "frozen.json"


# ----------------------------------------------------------------- fixed point
def bisect(fun, lo, hi, iters=200):
    flo = fun(lo)
    for _ in range(iters):
        mid = (lo + hi) / 2
        fm = fun(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def lambda_star(sig, n, lam):
    g = lambda x: n * (1 - lam / x) - mp.fsum(s / (s + x) for s in sig)
    lo = max(lam, mp.mpf("1e-30"))
    hi = lam + sig[0] * len(sig) / n + 1
    return bisect(g, lo, hi)


def prediction(sig, beta2, n, lam, tau):
    ls = lambda_star(sig, n, lam)
    T = mp.fsum(s**2 / (s + ls) ** 2 for s in sig)
    num = ls**2 * mp.fsum(b * s / (s + ls) ** 2 for s, b in zip(sig, beta2))
    bias = num / (1 - T / n)
    var = tau**2 * T / (n - T)
    return ls, bias, var


def det_equiv_values():
    p, n = 300, 100
    sig = [mp.mpf(k) ** mp.mpf("-1.5") for k in range(1, p + 1)]
    beta2 = [mp.mpf(1) / k for k in range(1, p + 1)]
    out = {}
    for lam in ["0", "0.01", "1"]:
        ls, b, v = prediction(sig, beta2, n, mp.mpf(lam), mp.mpf("0.5"))
        out[lam] = {"lambda_star": float(ls), "bias": float(b), "variance": float(v)}
    golden = lambda_star([mp.mpf(1)] * 50, 50, mp.mpf(1))
    return {"powerlaw_corpus": out, "golden_bisection": float(golden)}


# --------------------------------------------------------------- latent space
def latent_values():
    def c0_of(psi, gamma, mu):
        k = 1 + mu / psi
        f = lambda c: (1 - psi) / (1 + c * gamma) + psi / (1 + c * k * gamma) - (1 - 1 / gamma)
        return bisect(lambda c: -f(c), mp.mpf(0), mp.mpf(1e6))

    psi, gamma, mu, r, tau = mp.mpf("0.5"), mp.mpf(2), mp.mpf(1), mp.mpf(1), mp.mpf("0.3")
    c0 = c0_of(psi, gamma, mu)
    k = 1 + mu / psi
    e1 = (1 - psi) / (1 + c0 * gamma) ** 2 + psi * k**2 / (1 + c0 * k * gamma) ** 2
    e2 = (1 - psi) / (1 + c0 * gamma) ** 2 + psi * k / (1 + c0 * k * gamma) ** 2
    s2 = tau**2 + r**2 / k
    bias = (1 + gamma * c0 * e1 / e2) * (mu / psi) * r**2 / (k * (1 + c0 * gamma * k) ** 2)
    var = s2 * gamma * c0 * e1 / e2
    # same quantity through the two-level spectrum of the feature covariance
    psi_f, gamma_f = 0.5, 2.0
    d, p = 200, 400
    n = int(p / gamma_f)
    lev = 1 + float(mu) * p / d
    sig = [mp.mpf(lev)] * d + [mp.mpf(1)] * (p - d)
    beta_norm2 = (float(mu) * p / d) * float(r) ** 2 / lev  # Sigma-weighted
    beta2 = [mp.mpf(beta_norm2 / lev / d)] * d + [mp.mpf(0)] * (p - d)
    ls, b2, v2 = prediction(sig, beta2, n, mp.mpf(0), mp.sqrt(s2))
    return {
        "c0_psi0.5_gamma2_mu1": float(c0),
        "c0_mu0_gamma2": float(c0_of(mp.mpf("0.5"), mp.mpf(2), mp.mpf(0))),
        "risk_psi0.5_gamma2_mu1_r1_tau0.3": {"bias": float(bias), "variance": float(var)},
        "spectrum_route": {"bias": float(b2), "variance": float(v2), "lambda_star": float(ls),
                           "one_over_c0_gamma": float(1 / (c0 * gamma))},
    }


# ----------------------------------------------------------- Gaussian integrals
def gauss(f, breaks=(0,)):
    pts = [-mp.inf, *breaks, mp.inf]
    return mp.quad(lambda x: f(x) * mp.exp(-x * x / 2) / mp.sqrt(2 * mp.pi), pts)


def he(k, x):
    a, b = mp.mpf(1), x
    if k == 0:
        return a
    for j in range(1, k):
        a, b = b, x * b - j * a
    return b


def hermite_values():
    relu = lambda x: x if x > 0 else mp.mpf(0)
    step = lambda x: mp.mpf(1) if x > 0 else mp.mpf(0)
    tanh = mp.tanh
    sech2 = lambda x: mp.sech(x) ** 2
    out = {}
    out["relu_mu"] = [float(gauss(lambda x: relu(x) * he(k, x))) for k in range(9)]
    out["tanh_mu"] = [float(gauss(lambda x: tanh(x) * he(k, x), ())) for k in range(9)]
    out["tanh_prime_mu"] = [float(gauss(lambda x: sech2(x) * he(k, x), ())) for k in range(9)]
    out["tanh_sq"] = float(gauss(lambda x: tanh(x) ** 2, ()))
    out["tanh_b1"] = out["tanh_sq"] - out["tanh_mu"][0] ** 2 - out["tanh_mu"][1] ** 2
    out["relu_b1"] = float(mp.mpf(1) / 2 - 1 / (2 * mp.pi) - mp.mpf(1) / 4)
    out["step_v0"] = float(gauss(lambda x: step(x) ** 2))
    out["relu_bstar_sq"] = float(mp.mpf(1) / 4 - 1 / (2 * mp.pi))
    # limiting ReLU kernels (arc-cosine closed forms) on a t grid
    ts = [-0.9, -0.5, 0.0, 0.3, 0.7, 0.95]
    out["t_grid"] = ts
    out["relu_hrf"] = [float((mp.sqrt(1 - t**2) + (mp.pi - mp.acos(t)) * t) / (2 * mp.pi)) for t in ts]
    out["relu_hnt"] = [float(t * (mp.pi - mp.acos(t)) / (2 * mp.pi)) for t in ts]

    # tanh limit kernel by 2-D quadrature
    def hrf_tanh(t):
        t = mp.mpf(t)
        c = mp.sqrt(1 - t * t)
        inner = lambda g1: gauss(lambda g2: tanh(t * g1 + c * g2), ())
        return gauss(lambda g1: tanh(g1) * inner(g1), ())

    out["tanh_hrf"] = [float(hrf_tanh(t)) for t in (-0.5, 0.3, 0.7)]
    return out


# ------------------------------------------------------------- sphere machinery
def nu_moment(d, m):
    # E u^m for u = sqrt(d) x1, x uniform on the unit sphere in R^d
    if m % 2:
        return mp.mpf(0)
    j = m // 2
    val = mp.mpf(1)
    for i in range(j):
        val *= mp.mpf(2 * i + 1) / (d + 2 * i)
    return val * mp.mpf(d) ** j


def gram_schmidt_gegenbauer(d, kmax):
    """Orthogonal polynomials from exact moments, normalized to value 1 at d."""
    # moments of t = sqrt(d) u, the variable the polynomials are written in
    mom = [nu_moment(d, m) * mp.mpf(d) ** (mp.mpf(m) / 2) for m in range(2 * kmax + 2)]
    inner = lambda a, b: mp.fsum(a[i] * b[j] * mom[i + j] for i in range(len(a)) for j in range(len(b)))
    basis = []
    for k in range(kmax + 1):
        v = [mp.mpf(0)] * k + [mp.mpf(1)]
        for q in basis:
            c = inner(v, q) / inner(q, q)
            v = [vi - c * (q[i] if i < len(q) else 0) for i, vi in enumerate(v)]
        basis.append(v)
    out = []
    for v in basis:
        at_d = mp.fsum(c * mp.mpf(d) ** i for i, c in enumerate(v))
        v = [c / at_d for c in v]
        out.append((v, inner(v, v)))
    return out


def sphere_dim_bruteforce(d, k):
    return math.comb(k + d - 1, d - 1) - (math.comb(k + d - 3, d - 1) if k >= 2 else 0)


def sphere_values():
    out = {"sphere_dim": {}, "gegenbauer": {}}
    for d in (3, 5, 20, 25):
        out["sphere_dim"][str(d)] = [sphere_dim_bruteforce(d, k) for k in range(8)]
    t_pts = [-3.0, -0.7, 0.0, 1.3, 4.0]
    for d in (5, 20):
        polys = gram_schmidt_gegenbauer(d, 5)
        out["gegenbauer"][str(d)] = {
            "t": t_pts,
            "values": [[float(mp.fsum(c * mp.mpf(t) ** i for i, c in enumerate(v))) for t in t_pts] for v, _ in polys],
            "norm_sq": [float(nn) for _, nn in polys],
        }

    # level coefficients of the ReLU arc-cosine kernel at d = 25 by direct nu_d quadrature
    def nu_expect(d, f):
        dens = lambda u: (1 - u * u / d) ** (mp.mpf(d - 3) / 2)
        z = mp.quad(dens, [-mp.sqrt(d), mp.sqrt(d)])
        return mp.quad(lambda u: f(u) * dens(u), [-mp.sqrt(d), 0, mp.sqrt(d)]) / z

    d = 25
    polys = gram_schmidt_gegenbauer(d, 4)
    q = lambda k, t: mp.fsum(c * t**i for i, c in enumerate(polys[k][0]))
    hrf = lambda t: (mp.sqrt(max(1 - t * t, 0)) + (mp.pi - mp.acos(t)) * t) / (2 * mp.pi)
    out["relu_hrf_xi2_d25"] = [float(nu_expect(d, lambda u: q(k, mp.sqrt(d) * u) * hrf(u / mp.sqrt(d)))) for k in range(5)]

    # finite-d masses of the three-Hermite ridge target at d = 20
    d = 20
    polys = gram_schmidt_gegenbauer(d, 6)
    qd = lambda k, t: mp.fsum(c * t**i for i, c in enumerate(polys[k][0]))
    phi = lambda u: mp.sqrt(mp.mpf(4) / 10) * he(1, u) + mp.sqrt(mp.mpf(2) / 10) * he(2, u) + mp.sqrt(mp.mpf(1) / 120) * he(4, u)
    masses = []
    for k in range(7):
        coef = nu_expect(d, lambda u: phi(u) * qd(k, mp.sqrt(d) * u))
        masses.append(float(sphere_dim_bruteforce(d, k) * coef**2))
    out["three_hermite_masses_d20"] = masses
    out["three_hermite_norm_d20"] = float(nu_expect(d, lambda u: phi(u) ** 2))
    out["he2_high_mass_d25"] = float(mp.mpf(2 * 25 - 2) / (25 + 2))
    return out


# --------------------------------------------------------- mean-field potentials
def meanfield_values():
    # V(a,s,r) = -a E tanh(G1) tanh(s G1 + r G2);  U for given covariance
    def V(a, s, r):
        inner = lambda g1: gauss(lambda g2: mp.tanh(s * g1 + r * g2), ())
        return -a * gauss(lambda g1: mp.tanh(g1) * inner(g1), ())

    def U(a1, a2, q1, q2, c):
        l11 = mp.sqrt(q1)
        l21 = c / l11
        l22 = mp.sqrt(q2 - l21**2)
        inner = lambda g1: gauss(lambda g2: mp.tanh(l21 * g1 + l22 * g2), ())
        return a1 * a2 * gauss(lambda g1: mp.tanh(l11 * g1) * inner(g1), ())

    return {
        "V_tanh": {"a": 1.3, "s": 0.6, "r": 0.8, "value": float(V(mp.mpf("1.3"), mp.mpf("0.6"), mp.mpf("0.8")))},
        "U_tanh": {"a1": 0.7, "a2": -1.1, "q1": 1.5, "q2": 0.6, "c": 0.4,
                   "value": float(U(mp.mpf("0.7"), mp.mpf("-1.1"), mp.mpf("1.5"), mp.mpf("0.6"), mp.mpf("0.4")))},
        "half_tanh_sq": float(gauss(lambda x: mp.tanh(x) ** 2, ()) / 2),
    }


def main():
    frozen = {
        "det_equiv": det_equiv_values(),
        "latent": latent_values(),
        "hermite": hermite_values(),
        "sphere": sphere_values(),
        "mean_field": meanfield_values(),
    }
    OUT.write_text(json.dumps(frozen, indent=1, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
