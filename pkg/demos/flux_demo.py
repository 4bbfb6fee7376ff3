"""Explicit unit fluxes to infinity and their energy certificates."""

import warnings

from rwre.flux import WindowWarning, circle_flux, energy, flux_1d, renewal_limit, renewal_sequence
from rwre.network import poly_kernel
from rwre.pointproc import sample_ppp

if __name__ == "__main__":
    for delta in (1.2, 1.5, 1.8):
        seq = renewal_sequence(delta, 100_000, method="fft")
        print(f"delta={delta}: n^(2-delta) f(n) = {seq.scaled()[-1]:.5f}, limit {renewal_limit(delta):.5f}")

    pts = sample_ppp(1.0, 5000.0, seed=1)
    fl = flux_1d(pts, 1.3)
    cert = energy(poly_kernel(1, 0.5), fl, 2000)
    print(f"line flux: divergence error {fl.check():.1e}, verdict {cert.verdict}, "
          f"energy <= {cert.total_bound:.4f}")

    for delta in (1.9, 1.6):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", WindowWarning)
            cf = circle_flux(80, delta, 1.5, theta_samples=8)
        cert = energy(None, cf)
        print(f"circle flux delta={delta}: recursion error {cf.recursion_error():.1e}, "
              f"verdict {cert.verdict}, window warning {bool(caught)}")
