"""Ridgeless and ridge risk of isotropic linear regression across p/n.

Prints the deterministic-equivalent bias and variance next to a Monte Carlo
estimate. The ridgeless curve spikes at p = n; a small ridge removes the spike.

    python demos/ridge_double_descent.py
"""

import numpy as np

from linrisk import det_equiv as de
from linrisk import gaussian_design as gd

N_SAMPLES, TAU, REPS = 200, 0.5, 10


def mc_risk(spec, lam, seed):
    vals = []
    for rng in (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(REPS)):
        sample = gd.sample_design(spec, N_SAMPLES, TAU, seed=rng)
        vals.append(gd.excess_risk(gd.ridge_fit(sample, lam), spec.beta_coeffs, spec))
    return np.mean(vals), np.std(vals, ddof=1) / np.sqrt(REPS)


def main():
    print(f"{'p/n':>6} {'lambda':>7} {'theory':>9} {'mc':>9} {'sem':>7}")
    for ratio in (0.5, 0.8, 1.25, 2.0, 4.0):
        spec = gd.isotropic(int(ratio * N_SAMPLES))
        for lam in (0.0, 0.1):
            pred = de.predict_risk(spec, N_SAMPLES, lam, TAU)
            mean, sem = mc_risk(spec, lam, seed=int(100 * ratio))
            print(f"{ratio:6.2f} {lam:7.2f} {pred.bias + pred.variance:9.4f} {mean:9.4f} {sem:7.4f}")


if __name__ == "__main__":
    main()
