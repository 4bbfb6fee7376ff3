"""Box resistance of a long-range walk on a Poisson line sample.

Prints the median profile over a few seeds and fitted growth laws for
three jump exponents.  Takes about half a minute.
"""

import warnings

from rwre.network import poly_kernel
from rwre.pointproc import sample_ppp
from rwre.resistance import box_resistance_profile, fit_growth, median_profile

N_LIST = [32, 64, 128, 256, 512, 1024]


def profile(alpha, seeds=4):
    runs = []
    for s in range(seeds):
        pts = sample_ppp(1.0, 2.0 * N_LIST[-1], seed=s)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            runs.append(box_resistance_profile(pts, poly_kernel(1, alpha), pts.nearest_index([0.0]), N_LIST))
    return median_profile(runs)


def main():
    for alpha, model in ((3.0, "power"), (1.5, "power"), (1.0, "log")):
        med = profile(alpha)
        fit = fit_growth(med, model)
        print(f"alpha={alpha}")
        for n, R in med:
            print(f"  n={int(n):5d}  R={R:.4f}")
        print(f"  {model} fit slope {fit.slope:.3f}")


if __name__ == "__main__":
    main()
