"""Shell-sum bands and the resolvent integral classification."""

from rwre.certificates import band_sweep, kappa_limit, spitzer_integral

if __name__ == "__main__":
    for family in ("squares", "circles"):
        for alpha in (0.5, 1.0, 2.0):
            br = band_sweep(family, alpha, max_n=40)
            print(f"{family:8s} alpha={alpha}: a_fit={br.a_fit:.2f} violations={br.violations}/{br.count}")
    for d, alpha in ((1, 0.5), (1, 1.0), (2, 1.0), (2, 2.0)):
        print(f"d={d} alpha={alpha}: {spitzer_integral(d, alpha).classification}")
    est = kappa_limit(1, 1.0)
    print(f"small-theta constant, d=1 alpha=1: {est.estimate:.5f}")
