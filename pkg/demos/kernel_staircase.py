"""Staircase of kernel ridge regression on the sphere.

A ridge target with degree-1 and degree-2 components is fitted by the random
features kernel of the exponential activation in d = 20. As n passes d, the
linear part is learned and the risk drops to the mass above degree one; the
second drop needs n of order d^2.

    python demos/kernel_staircase.py
"""

import numpy as np

from linrisk import function_space as fs
from linrisk import kernel_krr as kk

D = 20


def main():
    spec = kk.KernelSpec(fs.limit_kernels("exp")[0], D)
    w = np.eye(D)[0]
    target = fs.ridge_target(fs.hermite_series_activation([0.0, 0.8, 0.42]), w)
    print(f"{'n':>6} {'ell':>4} {'plateau':>9} {'mc':>9} {'sem':>7}  regime")
    for n in (10, 40, 100, 300, 800):
        pl = kk.staircase_prediction(target, D, n)
        mc = kk.krr_risk_mc(spec, target, n, 0.0, 0.2, n_test=1000, reps=4, seed=n)
        print(f"{n:6d} {pl.ell:4d} {pl.risk:9.4f} {mc.mean:9.4f} {mc.sem:7.4f}  {pl.regime}")


if __name__ == "__main__":
    main()
