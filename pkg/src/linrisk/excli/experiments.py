"""Experiment definitions: a grid of points, one replica function, one aggregation per point.

Each experiment supplies ``plan(params) -> [point]``, ``replica(params, point, rng) -> value``
and ``finish(params, point, values) -> [row]``, where ``values`` holds the
successful replica results in replica-index order.
"""

import json
import math
from functools import lru_cache

import numpy as np

from .. import det_equiv, feature_models, function_space as fs, gaussian_design as gd
from .. import kernel_krr, latent_space, mean_field
from ..errors import ValidationError


def mean_sem(values):
    """Mean and standard error with a fixed (index-order, pairwise) reduction."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    m = float(np.sum(v) / v.size)
    if v.size < 2:
        return m, float("nan")
    return m, float(math.sqrt(np.sum((v - m) ** 2) / (v.size - 1) / v.size))


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------
def build_spectrum(spec, beta):
    kind = spec.get("kind")
    try:
        if kind == "isotropic":
            model = gd.isotropic(int(spec["p"]))
        elif kind == "power_law":
            model = gd.power_law(float(spec["alpha"]), int(spec["p"]))
        elif kind == "log_power":
            model = gd.log_power(float(spec.get("beta_exp", 2.0)), int(spec["p"]), offset=int(spec.get("offset", 1)))
        elif kind == "geometric":
            model = gd.geometric(float(spec["ratio"]), int(spec["p"]))
        elif kind == "explicit":
            model = gd.explicit_spectrum(spec["eigenvalues"])
        else:
            raise ValidationError(f"field 'params.spectrum.kind': unknown spectrum {kind!r}")
    except KeyError as exc:
        raise ValidationError(f"field 'params.spectrum.{exc.args[0]}': required for {kind}") from None
    return model.with_beta(build_beta(beta, model.p))


def build_beta(beta, p):
    kind = beta.get("kind", "e1")
    if kind == "e1":
        b = np.zeros(p)
        b[0] = 1.0
    elif kind == "isotropic":
        b = np.full(p, 1.0 / math.sqrt(p))
    elif kind == "power":
        b = np.arange(1, p + 1, dtype=float) ** (-float(beta.get("exponent", 1.0)) / 2)
    elif kind == "explicit":
        b = np.asarray(beta["values"], dtype=float)
    else:
        raise ValidationError(f"field 'params.beta.kind': unknown kind {kind!r}")
    if b.size != p:
        raise ValidationError("field 'params.beta.values': length must match the spectrum")
    return b


def build_target(spec, d):
    kind = spec.get("kind")
    unit = np.zeros(d)
    unit[0] = 1.0
    if kind == "zero":
        return fs.linear_target(np.zeros(d))
    if kind == "linear":
        return fs.linear_target(unit * float(spec.get("norm", 1.0)))
    if kind == "ridge":
        return fs.ridge_target(fs.get_activation(spec.get("phi", "he2")), unit)
    if kind == "hermite_ridge":
        return fs.ridge_target(fs.hermite_series_activation(spec["coeffs"]), unit)
    raise ValidationError(f"field 'params.target.kind': unknown target {kind!r}")


@lru_cache(maxsize=None)
def kernel_function(kind, activation, d):
    """``rf``/``nt``: width limits at infinite dimension; ``rf_d``/``nt_d``: at dimension ``d``."""
    act = fs.get_activation(activation)
    if kind in ("rf", "nt"):
        pair = fs.limit_kernels(act)
    elif kind in ("rf_d", "nt_d"):
        pair = fs.finite_d_kernels(act, d)
    else:
        raise ValidationError(f"field 'params.kernel': unknown kernel {kind!r}")
    return pair[0] if kind.startswith("rf") else pair[1]


@lru_cache(maxsize=None)
def kernel_spec(kind, activation, d):
    return kernel_krr.KernelSpec(kernel_function(kind, activation, d), d)


def _positive_int(name, x):
    if x < 1:
        raise ValidationError(f"field 'params.{name}': must be >= 1")
    return int(x)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------
def _predict_plan(p):
    return [{"lambda": lam} for lam in p["lambdas"]]


def _predict_replica(p, pt, rng):
    spec = build_spectrum(p["spectrum"], p["beta"])
    return det_equiv.predict_risk(spec, p["n"], pt["lambda"], p["tau"]).to_record()


def _predict_finish(p, pt, vals):
    return [dict(vals[0])]


def _ridge_plan(p):
    return [{"lambda": lam} for lam in p["lambdas"]]


def _ridge_replica(p, pt, rng):
    spec = build_spectrum(p["spectrum"], p["beta"])
    sample = gd.sample_design(spec, p["n"], p["tau"], p["design"], rng)
    return gd.excess_risk(gd.ridge_fit(sample, pt["lambda"]), spec.beta_coeffs, spec)


def _ridge_finish(p, pt, vals):
    spec = build_spectrum(p["spectrum"], p["beta"])
    pred = det_equiv.predict_risk(spec, p["n"], pt["lambda"], p["tau"])
    m, s = mean_sem(vals)
    return [{"lambda": pt["lambda"], "theory_bias": pred.bias, "theory_variance": pred.variance,
             "theory_risk": pred.bias + pred.variance, "mc_risk": m, "mc_sem": s}]


def _latent_plan(p):
    return [{"gamma": g, "p": int(round(g * p["n"]))} for g in p["gammas"]]


def _latent_replica(p, pt, rng):
    return latent_space.latent_replica(p["d"], pt["p"], p["n"], p["mu"], p["r_theta"], p["tau"], p["lambda"],
                                       rng, p["risk"])


def _latent_finish(p, pt, vals):
    th = latent_space.latent_theory(p["d"], pt["p"], p["n"], p["mu"], p["r_theta"], p["tau"], p["lambda"])
    offset = p["r_theta"] ** 2 / (1 + pt["p"] * p["mu"] / p["d"]) if p["risk"] == "latent" else 0.0
    m, s = mean_sem(vals)
    return [{"gamma": pt["gamma"], "p": pt["p"], "n": p["n"], "theory_bias": th.bias,
             "theory_variance": th.variance, "theory_risk": th.total + offset, "mc_risk": m, "mc_sem": s}]


def _krr_plan(p):
    return [{"n": _positive_int("ns", n)} for n in p["ns"]]


def _krr_replica(p, pt, rng):
    spec = kernel_spec(p["kernel"], p["activation"], p["d"])
    target = build_target(p["target"], p["d"])
    return kernel_krr.krr_replica(spec, target, pt["n"], p["lambda"], p["tau"], p["n_test"], rng)


def _krr_finish(p, pt, vals):
    target = build_target(p["target"], p["d"])
    st = kernel_krr.staircase_prediction(target, p["d"], pt["n"])
    m, s = mean_sem([v[0] for v in vals])
    train = max((v[1] for v in vals), default=float("nan"))
    return [{"d": p["d"], "n": pt["n"], "lambda": p["lambda"], "ell": st.ell, "regime": st.regime,
             "theory_risk": st.risk, "mc_risk": m, "mc_sem": s, "train_error": train}]


def _rf_plan(p):
    return [{"N": max(1, int(round(r * p["n"])))} for r in p["N_over_n"]]


def _rf_replica(p, pt, rng):
    target = build_target(p["target"], p["d"])
    return feature_models.feature_replica("RF", fs.get_activation(p["activation"]), target, p["d"], p["n"],
                                          pt["N"], p["lambda"], p["tau"], p["n_test"], rng)


def _rf_finish(p, pt, vals):
    target = build_target(p["target"], p["d"])
    st = feature_models.rf_staircase_prediction(target, p["d"], p["n"], pt["N"])
    m, s = mean_sem([v.risk for v in vals])
    return [{"d": p["d"], "n": p["n"], "N": pt["N"], "lambda": p["lambda"], "mc_risk": m, "mc_sem": s,
             "theory": st.risk, "regime": st.regime}]


def _conc_plan(p):
    return [{"N": max(1, int(round(m * p["n"] / p["d"])))} for m in p["N_over_n_over_d"]]


def _conc_replica(p, pt, rng):
    d, n = p["d"], p["n"]
    h_nt = kernel_function("nt_d", p["activation"], d)
    X = fs.sample_sphere(n, d, rng)
    ens = feature_models.random_ensemble(pt["N"], d, p["activation"], "NT", rng)
    K_N, K_inf = feature_models.nt_kernels(ens, X, h_nt)
    return feature_models.concentration_diagnostic(K_N, K_inf), float(np.linalg.eigvalsh(K_inf)[0])


def _conc_finish(p, pt, vals):
    diag = np.array([v[0] for v in vals])
    gam = np.array([v[1] for v in vals])
    return [{"d": p["d"], "n": p["n"], "N": pt["N"], "diag_opnorm": float(np.median(diag)) if diag.size else math.nan,
             "gamma_event": float(np.median(gam)) if gam.size else math.nan}]


def _ntk_plan(p):
    return [{"N": max(1, int(round(r * p["n"] / p["d"])))} for r in p["Nd_over_n"]]


def _ntk_replica(p, pt, rng):
    target = build_target(p["target"], p["d"])
    h_nt = kernel_function("nt_d", p["activation"], p["d"])
    return feature_models.nt_vs_krr_replica(fs.get_activation(p["activation"]), h_nt, target, p["d"], p["n"],
                                            pt["N"], p["lambda"], p["tau"], p["n_test"], rng)


def _ntk_finish(p, pt, vals):
    m, s = mean_sem([v.nt_risk for v in vals])
    km, ks = mean_sem([v.krr_risk for v in vals])
    return [{"d": p["d"], "n": p["n"], "N": pt["N"], "lambda": p["lambda"], "mc_risk": m, "mc_sem": s,
             "theory": km, "theory_sem": ks, "regime": "overparametrized" if pt["N"] * p["d"] > p["n"]
             else "underparametrized"}]


def _mf_problem(p):
    return mean_field.make_problem(p["activation"], p["d"], p["target"] or None, tau=p["tau"],
                                   gamma=p["gamma"], a_init=p["a_init"])


def _mf_plan(p):
    if p["mode"] not in ("sgd", "particle", "reduced"):
        raise ValidationError("field 'params.mode': must be sgd, particle or reduced")
    return [{}]


def _mf_replica(p, pt, rng):
    prob = _mf_problem(p)
    every = max(1, p["record_every"])
    if p["mode"] == "sgd":
        ens = mean_field.init_particles(prob, p["N"], rng)
        traj = mean_field.online_sgd(prob, ens, p["eta"], p["steps"], rng, record_every=every)
        return traj.records, traj.final
    ens = (mean_field.init_reduced(prob, p["N"], rng) if p["mode"] == "reduced"
           else mean_field.init_particles(prob, p["N"], rng))
    traj = mean_field.run_flow(ens, prob, p["dt"], p["steps"], mode=p["mode"])
    recs = [r for k, r in enumerate(traj.records) if k % every == 0 or k == len(traj.records) - 1]
    return recs, traj.final


def _state_dict(ens):
    if isinstance(ens, mean_field.ReducedEnsemble):
        return {"t": ens.t, "a": ens.a.tolist(), "s": ens.s.tolist(), "r": ens.r.tolist()}
    return {"t": ens.t, "a": ens.a.tolist(), "W": ens.W.tolist()}


def _mf_finish(p, pt, vals):
    if p["state_out"]:
        doc = {"mode": p["mode"], "d": p["d"], "N": p["N"],
               "replicas": [dict(replica=rep, **_state_dict(final)) for rep, (_, final) in vals]}
        try:
            with open(p["state_out"], "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2)
        except OSError as exc:
            raise ValidationError(f"field 'params.state_out': cannot write {p['state_out']}: {exc}") from None
    rows = []
    for rep, (recs, _) in vals:
        for r in recs:
            rows.append({"replica": rep, "t": r.t, "risk": r.risk, "mean_a": r.mean_a, "mean_s": r.mean_s,
                         "mean_r": r.mean_r})
    return rows


def _sn_plan(p):
    return [{"n": _positive_int("ns", n)} for n in p["ns"]]


def _sn_replica(p, pt, rng):
    return mean_field.single_neuron_gd(p["activation"], p["d"], pt["n"], p["tau"], rng, n_inits=p["n_inits"])


def _sn_finish(p, pt, vals):
    m, s = mean_sem([v.risk for v in vals])
    guard = p["guard_c"] * math.sqrt(p["d"] * math.log(pt["n"]) / pt["n"])
    dist = max((v.max_pairwise_distance for v in vals), default=math.nan)
    return [{"d": p["d"], "n": pt["n"], "risk": m, "risk_sem": s, "guard": guard,
             "max_pairwise_distance": dist, "iterations": max((v.iterations for v in vals), default=0)}]


REGISTRY = {
    "predict-risk": (_predict_plan, _predict_replica, _predict_finish,
                     ["lambda", "lambda_star", "bias", "variance", "omega_sq", "k_star", "valid"]),
    "simulate-ridge": (_ridge_plan, _ridge_replica, _ridge_finish,
                       ["lambda", "theory_bias", "theory_variance", "theory_risk", "mc_risk", "mc_sem"]),
    "latent": (_latent_plan, _latent_replica, _latent_finish,
               ["gamma", "p", "n", "theory_bias", "theory_variance", "theory_risk", "mc_risk", "mc_sem"]),
    "krr-staircase": (_krr_plan, _krr_replica, _krr_finish,
                      ["d", "n", "lambda", "ell", "regime", "theory_risk", "mc_risk", "mc_sem", "train_error"]),
    "rf-double-descent": (_rf_plan, _rf_replica, _rf_finish,
                          ["d", "n", "N", "lambda", "mc_risk", "mc_sem", "theory", "regime"]),
    "nt-concentration": (_conc_plan, _conc_replica, _conc_finish, ["d", "n", "N", "diag_opnorm", "gamma_event"]),
    "nt-vs-krr": (_ntk_plan, _ntk_replica, _ntk_finish,
                  ["d", "n", "N", "lambda", "mc_risk", "mc_sem", "theory", "theory_sem", "regime"]),
    "meanfield": (_mf_plan, _mf_replica, _mf_finish, ["replica", "t", "risk", "mean_a", "mean_s", "mean_r"]),
    "single-neuron": (_sn_plan, _sn_replica, _sn_finish,
                      ["d", "n", "risk", "risk_sem", "guard", "max_pairwise_distance", "iterations"]),
}

# experiments whose finish step needs replica indices alongside values
INDEXED = {"meanfield"}
