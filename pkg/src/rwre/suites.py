"""End-to-end experiment suites with pass/fail checks.

Each suite takes a flat parameter dict (defaults below, every value
echoed into the report) and returns a :class:`Report` holding the raw
measurements, the fitted law or certificate, and its checks.
"""

import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import certificates, flux, reduction
from ._rng import child_seeds
from .network import poly_kernel
from .pointproc import PointSet, ProcessSpec, lattice_set, sample_ppp
from .resistance import box_resistance_profile, fit_growth, median_profile

__all__ = ["Check", "Report", "SUITES", "DEFAULTS", "run_theorem_suite", "emit_plots"]


@dataclass
class Check:
    name: str
    value: float
    lower: float | None
    upper: float | None

    @property
    def passed(self) -> bool:
        if self.value is None or (isinstance(self.value, float) and math.isnan(self.value)):
            return False
        ok = True
        if self.lower is not None:
            ok &= self.value >= self.lower
        if self.upper is not None:
            ok &= self.value <= self.upper
        return bool(ok)

    def line(self) -> str:
        lo = "-inf" if self.lower is None else f"{self.lower:g}"
        hi = "inf" if self.upper is None else f"{self.upper:g}"
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.value:.6g} in [{lo}, {hi}]"


@dataclass
class Report:
    name: str
    params: dict
    columns: list
    rows: list
    checks: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    certificate: dict | None = None
    curves: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        return "\n".join(c.line() for c in self.checks)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": self.params, "columns": self.columns,
                "rows": self.rows, "fits": self.fits, "certificate": self.certificate,
                "curves": self.curves,
                "checks": [{"name": c.name, "value": c.value, "lower": c.lower, "upper": c.upper,
                            "passed": c.passed} for c in self.checks]}


def _dyadic(lo, hi):
    out, n = [], int(lo)
    while n <= hi:
        out.append(n)
        n *= 2
    return out


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- growth of the box resistance --------------------------------------------

def _growth_1d_seed(args):
    alpha, n_list, child, budget = args
    nmax = n_list[-1]
    pts = sample_ppp(1.0, 2.0 * nmax, child, dim=1)
    x = pts.nearest_index([0.0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        prof = box_resistance_profile(pts, poly_kernel(1, alpha), x, n_list, node_budget=budget)
    return prof


def growth_1d(p) -> Report:
    """Median box resistance over seeds on a unit-intensity line process."""
    alpha = float(p["alpha"])
    n_list = _dyadic(p["n_min"], p["n_max"])
    seeds = child_seeds(p["seed"], "growth_1d", int(p["seeds"]))
    profiles = _map(_growth_1d_seed, [(alpha, n_list, s, int(p["node_budget"])) for s in seeds],
                    int(p.get("jobs", 1)))
    rows = [(k, e.n, e.R, e.residual, e.method) for k, prof in enumerate(profiles) for e in prof]
    med = median_profile(profiles)
    rep = Report("growth-1d", dict(p), ["seed", "n", "R", "residual", "method"], rows)
    rep.curves["median"] = med
    if alpha > 1:
        fit = fit_growth(med, "power")
        rep.fits["power"] = fit._asdict() if hasattr(fit, "_asdict") else vars(fit)
        rep.checks.append(Check("power-law exponent", fit.slope, p["exponent_lo"], p["exponent_hi"]))
    else:
        lo = float(p.get("ratio_n_min", n_list[0]))
        ratios = [r / math.log(n) for n, r in med if n >= lo]
        rep.fits["log"] = vars(fit_growth(med, "log"))
        rep.checks.append(Check("max/min of R_n / log n", max(ratios) / min(ratios), None, p["ratio_max"]))
    return rep


def _growth_2d_seed(args):
    kind, alpha, n_list, child, cut = args
    B = n_list[-1] + math.ceil(cut) + 1
    if kind == "lattice":
        pts = lattice_set(2, B)
        x = pts.index_of([0.0, 0.0])
    else:
        pts = sample_ppp(1.0, B, child, dim=2)
        x = pts.nearest_index([0.0, 0.0])
    return box_resistance_profile(pts, poly_kernel(2, alpha), x, n_list, rho_cut=cut)


def growth_2d(p) -> Report:
    """Box resistance on the planar lattice and on planar Poisson samples (sparse, cut edges)."""
    alpha, cut = float(p["alpha"]), float(p["rho_cut"])
    n_list = _dyadic(p["n_min"], p["n_max"])
    seeds = child_seeds(p["seed"], "growth_2d", int(p["seeds"]))
    tasks = [("lattice", alpha, n_list, None, cut)] + [("ppp", alpha, n_list, s, cut) for s in seeds]
    profiles = _map(_growth_2d_seed, tasks, int(p.get("jobs", 1)))
    rows = [("lattice" if k == 0 else f"ppp{k - 1}", e.n, e.R, e.residual, e.method)
            for k, prof in enumerate(profiles) for e in prof]
    rep = Report("growth-2d", dict(p), ["sample", "n", "R", "residual", "method"], rows)
    for label, prof in (("lattice", [(e.n, e.R) for e in profiles[0]]), ("ppp", median_profile(profiles[1:]))):
        rep.curves[label] = prof
        ratios = [r / math.log(n) for n, r in prof]
        rep.fits[label] = vars(fit_growth(prof, "log"))
        rep.checks.append(Check(f"{label}: max/min of R_n / log n", max(ratios) / min(ratios), None,
                                p["ratio_max"]))
    if p.get("chain_check", True):
        _chain_checks(p, rep)
    return rep


def chain_bound_rows(kind, alpha, n_list, box, seed):
    """Dense box resistances next to the chain lower bound from the cube reduction.

    Returns rows ``(n, R_n, chain_bound)``.  Lattice inputs sum the chain up
    to ``n + 1``; Poisson inputs up to ``n`` because points within half a
    unit outside the box share the outermost cubes of the box.
    """
    kern = poly_kernel(2, alpha)
    if kind == "lattice":
        pts = lattice_set(2, box)
        coarse = reduction.cube_collapse(pts, 1, kern, radius=box)
        coarse = reduction.coarse_from_field(coarse.counts, coarse.c, alpha, add_origin=False)
        x = pts.index_of([0.0, 0.0])
    else:
        raw = sample_ppp(1.0, box, seed, dim=2)
        coarse = reduction.cube_collapse(raw, 1, kern, radius=box)
        pts = PointSet(2, np.vstack([raw.points, [[0.0, 0.0]]]), raw.box_half_width)
        x = pts.index_of([0.0, 0.0])
    chain = reduction.series_split(reduction.shell_collapse_2d(coarse))
    prof = box_resistance_profile(pts, kern, x, n_list, node_budget=(2 * max(n_list) + 3) ** 2 + 16)
    out = []
    for e in prof:
        n = int(e.n)
        bound = reduction.chain_resistance(chain, n) if kind == "lattice" else \
            float(np.sum(1.0 / chain.phi[:n]))
        out.append((n, e.R, bound))
    return out


def _chain_checks(p, rep):
    a2 = float(p["chain_alpha"])
    n_list = [int(n) for n in p["chain_n"]]
    box = int(p["chain_box"])
    worst = math.inf
    rows = []
    for kind, seed in (("lattice", None), ("ppp", p["seed"])):
        for n, R, b in chain_bound_rows(kind, a2, n_list, box, seed):
            worst = min(worst, R - b)
            rows.append((kind, n, R, b))
    rep.curves["chain"] = rows
    rep.checks.append(Check("min(R_n - chain bound)", worst, 0.0, None))
    probe = reduction.phi_moment_probe(ProcessSpec("ppp", dim=2, intensity=1.0), a2,
                                       [int(i) for i in p["moment_i"]], int(p["moment_trials"]),
                                       seed=p["seed"])
    means = [r.mean_ratio for r in probe]
    moms = [r.moment_ratio for r in probe]
    rep.curves["moments"] = [tuple(r) for r in probe]
    rep.checks.append(Check("mean(phi_i)/(i log i) max/min", max(means) / min(means), None,
                            p["moment_spread"]))
    rep.checks.append(Check("m4(phi_i)/i^2 max/min", max(moms) / min(moms), None, p["moment_spread"]))


# -- renewal sequence -------------------------------------------------------

def renewal(p) -> Report:
    """``n^(2-delta) f(n)`` at ``n_max`` against the stated limit and the exact one."""
    rows = []
    rep = Report("renewal", dict(p), ["delta", "n", "scaled", "gamma_ratio", "exact_limit"], rows)
    for d in p["deltas"]:
        seq = flux.renewal_sequence(float(d), int(p["n_max"]), method=p["method"])
        val = float(seq.scaled()[-1])
        lim, exact = flux.gamma_ratio_limit(d), flux.renewal_limit(d)
        rows.append((d, int(p["n_max"]), val, lim, exact))
        rep.checks.append(Check(f"delta={d}: relative gap to Gamma(2-delta)/Gamma(delta-1)",
                                abs(val - lim) / lim, None, p["rtol"]))
    return rep


# -- fluxes -------------------------------------------------------------------

def flux_1d(p) -> Report:
    """Renewal flux on a unit-intensity line sample; divergence and energy certificate."""
    alpha, delta = float(p["alpha"]), float(p["delta"])
    N = int(p["N"])
    pts = sample_ppp(1.0, float(p["extent"]) * 2 * N, p["seed"], dim=1)
    fl = flux.flux_1d(pts, delta)
    div = fl.check()
    cert = flux.energy(poly_kernel(1, alpha), fl, 2 * N, levels=[N, 2 * N])
    (n1, e1), (n2, e2) = cert.partial_sums
    rel = abs(e2 - e1) / e2
    rep = Report("flux-1d", dict(p), ["level", "partial_energy"], [(n1, e1), (n2, e2)])
    rep.certificate = {"verdict": cert.verdict, "tail_bound": cert.tail_bound,
                       "total_bound": cert.total_bound, **cert.details}
    rep.checks += [
        Check("max divergence error", div, None, p["div_tol"]),
        Check("relative change of partial energy N -> 2N", rel, None, p["energy_rtol"]),
        Check("tail bound finite", float(math.isfinite(cert.tail_bound)), 1.0, None),
    ]
    return rep


def flux_circles(p) -> Report:
    """Rotation-averaged circle flux; shell recursion, growth slope and energy verdicts."""
    alpha, delta = float(p["alpha"]), float(p["delta"])
    nmax = int(p["n_max"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", flux.WindowWarning)
        cf = flux.circle_flux(nmax, delta, alpha, int(p["theta_samples"]), p["seed"])
    cert = flux.energy(None, cf)
    lo, hi = int(p["slope_lo"]), int(p["slope_hi"])
    n = np.arange(lo, hi + 1)
    slope = float(np.polyfit(np.log(n), np.log(cf.shell_totals[lo:hi + 1]), 1)[0])
    target = delta - 2
    rows = [(k, float(cf.shell_totals[k]), float(cf.recursion[k]), float(cf.shell_energy[k]))
            for k in range(nmax + 1)]
    rep = Report("flux-circles", dict(p), ["n", "shell_total", "renewal", "shell_energy"], rows)
    rep.certificate = {"verdict": cert.verdict, "tail_bound": cert.tail_bound,
                       "partial_sums": cert.partial_sums, **cert.details}
    rep.checks += [
        Check("shell recursion relative error", cf.recursion_error(), None, p["recursion_tol"]),
        Check("relative error of f_n slope vs delta-2", abs(slope - target) / abs(target), None,
              p["slope_rtol"]),
        Check("energy certified finite", float(cert.verdict == "finite-certified"), 1.0, None),
    ]
    rep.fits["shell_slope"] = {"slope": slope, "target": target}
    cdelta = p.get("contra_delta")
    if cdelta is not None:
        with warnings.catch_warnings(record=True) as caught2:
            warnings.simplefilter("always", flux.WindowWarning)
            cf2 = flux.circle_flux(nmax, float(cdelta), alpha, int(p["theta_samples"]), p["seed"])
        cert2 = flux.energy(None, cf2)
        flagged = any(issubclass(w.category, flux.WindowWarning) for w in caught2)
        rep.checks.append(Check(f"delta={cdelta} flagged non-certified",
                                float(flagged and cert2.verdict != "finite-certified"), 1.0, None))
        rep.fits["contrapositive"] = {"verdict": cert2.verdict, **cert2.details}
    rep.fits["window_warnings"] = len(caught)
    return rep


# -- appendix checks --------------------------------------------------------

_TABLE = {(1, 0.5): "CONVERGENT", (1, 1.0): "DIVERGENT", (1, 1.5): "DIVERGENT",
          (2, 1.0): "CONVERGENT", (2, 2.0): "DIVERGENT", (2, 3.0): "DIVERGENT"}


def log_growth_exponent(ns, values) -> float:
    """Exponent ``beta`` of ``I_n ~ A (log n)^beta + B``, from the increments along a dyadic grid."""
    ns = np.asarray(ns, dtype=float)
    v = np.asarray(values, dtype=float)
    inc = np.diff(v)
    mid = np.sqrt(ns[1:] * ns[:-1])
    return 1.0 + float(np.polyfit(np.log(np.log(mid)), np.log(inc), 1)[0])


def harmonic(p) -> Report:
    """Recurrence classifications by the resolvent integral and growth of the truncated bound."""
    rows = []
    rep = Report("harmonic", dict(p), ["d", "alpha", "t", "integral"], rows)
    for (d, a), expected in _TABLE.items():
        res = certificates.spitzer_integral(d, a)
        rows.extend((d, a, t, v) for t, v in res.values)
        rep.checks.append(Check(f"d={d} alpha={a} classified {expected}",
                                float(res.classification == expected), 1.0, None))
    ns = _dyadic(p["n_min"], p["n_max"])
    for a in (1.0, 1.5):
        vals = [certificates.truncated_bound(1, a, n) for n in ns]
        rep.curves[f"truncated_d1_a{a}"] = list(zip(ns, vals))
        if a == 1.0:
            beta = log_growth_exponent(ns, vals)
            rep.fits["d1_a1_log_coefficient"] = vars(fit_growth(list(zip(ns, vals)), "log"))
            rep.checks.append(Check("d=1 alpha=1 log-growth exponent", beta, 1 - p["log_tol"], 1 + p["log_tol"]))
        else:
            fit = fit_growth(list(zip(ns, vals)), "power")
            rep.fits["d1_a1.5_power"] = vars(fit)
            rep.checks.append(Check("d=1 alpha=1.5 power exponent", fit.slope, 0.5 - p["power_tol"],
                                    0.5 + p["power_tol"]))
    return rep


def shells(p) -> Report:
    """Normalized shell sums swept over all pairs of shells."""
    rows = []
    rep = Report("shells", dict(p), ["family", "alpha", "a_fit", "violations", "count"], rows)
    for fam in p["families"]:
        for a in p["alphas"]:
            br = certificates.band_sweep(fam, float(a), int(p["max_n"]), float(p["band"]))
            rows.append((fam, a, br.a_fit, br.violations, br.count))
            rep.checks.append(Check(f"{fam} alpha={a}: fitted band constant", br.a_fit, None, p["band"]))
            rep.checks.append(Check(f"{fam} alpha={a}: violations of [1/{p['band']}, {p['band']}]",
                                    float(br.violations), None, 0.0))
    return rep


DEFAULTS = {
    "growth-1d": {"alpha": 3.0, "seeds": 16, "n_min": 64, "n_max": 4096, "seed": 0, "node_budget": 9000,
                  "exponent_lo": 0.8, "exponent_hi": 1.2, "ratio_max": 2.0, "ratio_n_min": 128},
    "growth-2d": {"alpha": 3.0, "seeds": 4, "n_min": 16, "n_max": 256, "seed": 0, "rho_cut": 3.0,
                  "ratio_max": 2.0, "chain_check": True, "chain_alpha": 2.0, "chain_n": [4, 8, 16, 24, 30],
                  "chain_box": 34, "moment_i": [8, 16, 32, 64], "moment_trials": 50, "moment_spread": 5.0},
    "renewal": {"deltas": [1.2, 1.5, 1.8], "n_max": 100000, "method": "fft", "rtol": 0.05},
    "flux-1d": {"alpha": 0.5, "delta": 1.3, "N": 10000, "extent": 1.25, "seed": 0,
                "div_tol": 1e-12, "energy_rtol": 0.01},
    "flux-circles": {"alpha": 1.5, "delta": 1.9, "n_max": 200, "theta_samples": 8, "seed": 0,
                     "slope_lo": 50, "slope_hi": 200, "slope_rtol": 0.1, "recursion_tol": 1e-10,
                     "contra_delta": 1.6},
    "harmonic": {"n_min": 64, "n_max": 1048576, "log_tol": 0.2, "power_tol": 0.1},
    "shells": {"families": ["squares", "circles"], "alphas": [0.5, 1.0, 2.0], "max_n": 200, "band": 10.0},
}

# exponent windows per alpha for the line suite
_GROWTH_1D_WINDOWS = {3.0: (0.8, 1.2), 1.5: (0.35, 0.65)}

SUITES = {
    "growth-1d": growth_1d,
    "growth-2d": growth_2d,
    "renewal": renewal,
    "flux-1d": flux_1d,
    "flux-circles": flux_circles,
    "harmonic": harmonic,
    "shells": shells,
}


def resolve_params(name: str, config: dict | None = None) -> dict:
    """Defaults for ``name`` overridden by ``config``; unknown keys are rejected."""
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    params = dict(DEFAULTS[name])
    config = dict(config or {})
    if name == "growth-1d" and "alpha" in config:
        lo, hi = _GROWTH_1D_WINDOWS.get(float(config["alpha"]), (params["exponent_lo"], params["exponent_hi"]))
        params["exponent_lo"], params["exponent_hi"] = lo, hi
    extra = set(config) - set(params) - {"jobs"}
    if extra:
        raise ValueError(f"unknown parameters for {name}: {sorted(extra)}")
    params.update(config)
    return params


def run_theorem_suite(name: str, config: dict | None = None) -> Report:
    """Run one suite; the report echoes every parameter used."""
    if config is not None and not isinstance(config, dict):
        raise TypeError("config must be a dict")
    params = resolve_params(name, config)
    start = time.perf_counter()
    rep = SUITES[name](params)
    rep.timings[name] = time.perf_counter() - start
    return rep


def emit_plots(report: Report | None, models=("fit",)) -> str:
    """Plot-ready CSV: ``series,x,y`` plus one column per model curve.

    Empty reports give the header only.
    """
    from .io import csv_text

    header = ["series", "x", "y"] + list(models)
    rows = []
    if report is not None:
        for series, pts in report.curves.items():
            if not pts or len(pts[0]) != 2:
                continue
            fit = report.fits.get(series) or report.fits.get("power") or report.fits.get("log")
            for x, y in pts:
                model = math.nan
                if fit and "slope" in fit and "model" in fit:
                    if fit["model"] == "power":
                        model = math.exp(fit["intercept"]) * x ** fit["slope"]
                    elif fit["model"] == "log":
                        model = fit["intercept"] + fit["slope"] * math.log(x)
                rows.append([series, x, y] + [model] * len(models))
    return csv_text(header, rows)
