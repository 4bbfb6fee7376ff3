"""Command line interface: ``rwre <subcommand> ...``.

Exit codes: 0 success or all checks passed, 1 a check failed, 2 usage
error, 3 numerical failure.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from scipy import sparse

from . import certificates, flux, reduction, suites
from .comparison import Flux, cells, lift_energy_bound, lift_flux, nearest_point_map
from .io import (ExperimentManifest, digest, read_config, read_csv, read_points, write_csv,
                 write_points)
from .network import build_network, poly_kernel, stretched_exp_kernel
from .pointproc import ProcessSpec, sample, sample_ppp
from .resistance import SolverError, box_resistance_profile, effective_resistance, fit_growth

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _out(args, name) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _floats(text):
    return [float(t) for t in str(text).split(",") if t]


def cmd_sample(args, cfg):
    if args.kind == "ppp":
        spec = ProcessSpec("ppp", dim=args.dim, intensity=args.intensity)
    elif args.kind == "crystal":
        spec = ProcessSpec("diluted_crystal", dilution=args.dilution, basis=np.eye(args.dim))
    elif args.kind == "percolation":
        spec = ProcessSpec("percolation_cluster", dim=args.dim, dilution=args.dilution)
    else:
        spec = ProcessSpec(args.kind, dim=args.dim, n_max=int(args.box))
    pts = sample(spec, args.box, args.seed)
    path = write_points(_out(args, args.output), pts, seed=args.seed)
    print(f"{len(pts)} points -> {path}")
    return EXIT_OK


def _network_kernel(args, dim):
    if args.kernel == "stretched_exp":
        if args.beta is None:
            raise UsageError("--kernel stretched_exp needs --beta")
        return stretched_exp_kernel(dim, args.beta)
    return poly_kernel(dim, args.alpha)


def cmd_build(args, cfg):
    pts = read_points(args.points)
    net = build_network(pts, _network_kernel(args, pts.dim), args.rho_cut, node_budget=args.node_budget)
    i, j, c = net.edges()
    path = write_csv(_out(args, args.output), ["i", "j", "conductance"], zip(i, j, c))
    print(f"{len(c)} edges -> {path}")
    return EXIT_OK


def cmd_resist(args, cfg):
    pts = read_points(args.points)
    x = pts.nearest_index(np.zeros(pts.dim))
    prof = box_resistance_profile(pts, _network_kernel(args, pts.dim), x, _floats(args.n_list),
                                  rho_cut=args.rho_cut, node_budget=args.node_budget)
    rows = [(args.seed, e.n, e.R, e.residual, e.method) for e in prof]
    path = write_csv(_out(args, args.output), ["seed", "n", "R", "residual", "method"], rows)
    print(f"profile -> {path}")
    return EXIT_OK


def cmd_reduce(args, cfg):
    pts = read_points(args.points)
    stages = [t.strip() for t in args.pipeline.split(",") if t.strip()]
    if not stages or stages[0] != "cube" or any(t not in ("cube", "shell", "split") for t in stages):
        raise UsageError("pipeline must start with cube and use only cube, shell, split")
    coarse = reduction.cube_collapse(pts, args.L, poly_kernel(pts.dim, args.alpha), radius=args.radius)
    if stages == ["cube"]:
        rows = [tuple(int(c) for c in s) + (int(coarse.gamma_at(s)),) for s in coarse.sites]
        header = [f"u{k}" for k in range(pts.dim)] + ["gamma"]
        path = write_csv(_out(args, args.output), header, rows)
        print(f"{len(rows)} sites -> {path}")
        return EXIT_OK
    layered = reduction.shell_collapse_2d(coarse) if pts.dim == 2 else reduction.fold_pairs_1d(coarse)
    if "split" not in stages:
        K = layered.K if pts.dim == 2 else reduction._folded_K(layered)
        i, j = np.nonzero(np.triu(K, k=1))
        path = write_csv(_out(args, args.output), ["a", "b", "conductance"], zip(i, j, K[i, j]))
        print(f"layered network -> {path}")
        return EXIT_OK
    chain = reduction.series_split(layered)
    partial = np.cumsum(1.0 / chain.phi)
    rows = [(i + 1, phi, partial[i]) for i, phi in enumerate(chain.phi)]
    path = write_csv(_out(args, args.output), ["i", "phi", "partial_chain_resistance"], rows)
    if args.n is not None:
        print(f"chain bound at n={args.n}: {reduction.chain_resistance(chain, args.n):.12g}")
    print(f"chain of {len(chain)} links -> {path}")
    return EXIT_OK


def _unit_current(net, src, sink):
    res = effective_resistance(net, src, sink)
    v = res.R * (1.0 - res.potential)  # voltage R at the source, 0 on the sink
    m = sparse.triu(sparse.csr_array(net.matrix()), k=1).tocoo()
    vals = m.data * (v[m.row] - v[m.col])
    return Flux(sparse.coo_array((vals, (m.row, m.col)), shape=(net.node_count,) * 2), src, sink), res.R


def cmd_lift(args, cfg):
    fine, coarse = read_points(args.s0), read_points(args.s)
    if fine.dim != coarse.dim:
        raise UsageError("--s0 and --s have different dimensions")
    kern = _network_kernel(args, fine.dim)
    src = fine.nearest_index(np.zeros(fine.dim))
    sink = np.flatnonzero(np.abs(fine.points).max(axis=1) > args.n)
    if args.flux:
        header, rows = read_csv(args.flux)
        data = np.array(rows, dtype=float).reshape(-1, 3)
        i, j = data[:, 0].astype(int), data[:, 1].astype(int)
        inner = j >= 0
        outflow = np.bincount(i[~inner], weights=data[~inner, 2], minlength=len(fine))
        mat = sparse.coo_array((data[inner, 2], (i[inner], j[inner])), shape=(len(fine),) * 2)
        f, R = Flux(mat, src, sink, outflow), None
    else:
        if sink.size == 0:
            raise UsageError("no points of --s0 outside the box of half-width --n")
        net = build_network(fine, kern, args.rho_cut, node_budget=args.node_budget)
        f, R = _unit_current(net, src, sink)
    nmap = nearest_point_map(fine, coarse)
    part = cells(nmap)
    theta = lift_flux(f, nmap, part)
    energy, bound = lift_energy_bound(f, theta, nmap, part, kern)
    out = {"source_resistance": R, "lifted_energy": energy, "schwarz_bound": bound,
           "flux_check": theta.check(atol=1e-9), "max_cell": int(part.counts.max())}
    i, j, vals = theta.edges()
    write_csv(_out(args, "lifted_flux.csv"), ["x_index", "y_index", "value"], zip(i, j, vals))
    _out(args, args.output).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def cmd_flux(args, cfg):
    if args.mode == "renewal":
        n = args.n or 10000
        pts = read_points(args.points) if args.points else sample_ppp(1.0, 2.5 * n, args.seed)
        fl = flux.flux_1d(pts, args.delta)
        cert = flux.energy(poly_kernel(1, args.alpha), fl, 2 * n, levels=[n, 2 * n])
        cert.details["divergence_error"] = fl.check()
        f = fl.to_flux()
    else:
        n = args.n or 200
        cf = flux.circle_flux(n, args.delta, args.alpha, args.theta_samples, args.seed,
                             keep_values=args.export_flux)
        cert = flux.energy(None, cf)
        rows = [(k, cf.shell_totals[k], cf.recursion[k], cf.shell_energy[k]) for k in range(n + 1)]
        write_csv(_out(args, "circle_shells.csv"), ["n", "shell_total", "renewal", "shell_energy"], rows)
        f = cf.to_flux() if args.export_flux else None
    if f is not None and args.export_flux:
        i, j, vals = f.edges()
        out_i = np.flatnonzero(f.outflow)
        rows = list(zip(i, j, vals)) + [(k, -1, f.outflow[k]) for k in out_i]
        write_csv(_out(args, "flux.csv"), ["x_index", "y_index", "value"], rows)
    path = _out(args, args.output)
    path.write_text(cert.to_json() + "\n")
    print(f"{cert.verdict}; certificate -> {path}")
    return EXIT_OK


def cmd_appendix(args, cfg):
    if args.check == "shells":
        fams = [args.family] if args.family else ["squares", "circles"]
        rows, ok = [], True
        for fam in fams:
            br = certificates.band_sweep(fam, args.alpha, args.max_n, args.band)
            rows.append((fam, args.alpha, br.a_fit, br.violations, br.count))
            ok &= br.violations == 0
        write_csv(_out(args, args.output or "shells.csv"), ["family", "alpha", "a_fit", "violations", "count"], rows)
        for r in rows:
            print(",".join(str(v) for v in r))
        return EXIT_OK if ok else EXIT_FAIL
    if args.check == "spitzer":
        res = certificates.spitzer_integral(args.d, args.alpha)
        write_csv(_out(args, args.output or "spitzer.csv"), ["t", "integral"], res.values)
        print(res.classification)
        return EXIT_OK
    if args.check == "kappa":
        k = certificates.kappa_limit(args.d, args.alpha)
        print(json.dumps({"estimate": k.estimate, "trend": k.trend}))
        return EXIT_OK
    if args.check == "truncated":
        ns = [int(n) for n in _floats(args.n_list)]
        rows = [(n, certificates.truncated_bound(args.d, args.alpha, n)) for n in ns]
        write_csv(_out(args, args.output or "truncated.csv"), ["n", "integral"], rows)
        for n, v in rows:
            print(f"{n},{v!r}")
        return EXIT_OK
    raise UsageError(f"unknown check {args.check!r}")


_SUITE_ARGS = ("alpha", "delta", "seeds", "n_max")


def _write_report(rep, args, seeds):
    csv_path = write_csv(_out(args, f"{rep.name}.csv"), rep.columns, rep.rows)
    body = rep.to_dict()
    body.pop("rows")
    json_path = _out(args, f"{rep.name}_report.json")
    json_path.write_text(json.dumps(body, indent=2, sort_keys=True, default=float) + "\n")
    man = ExperimentManifest({"suite": {"name": rep.name}, "params": rep.params}, seeds)
    man.digests = {csv_path.name: digest(csv_path)}
    man.timings = dict(rep.timings)
    man.write(_out(args, "manifest.ini"))
    return csv_path


def cmd_run(args, cfg):
    if args.manifest:
        man = ExperimentManifest.read(args.manifest)
        name = man.config["suite"]["name"]
        params = {k: v for k, v in man.config["params"].items()}
    else:
        if not args.suite:
            raise UsageError("run needs a suite name or --manifest")
        name = args.suite
        params = dict(cfg.get(name, {}))
        for key in _SUITE_ARGS:
            val = getattr(args, key, None)
            if val is not None:
                params[key] = val
        if "seed" in suites.DEFAULTS.get(name, {}):
            params.setdefault("seed", args.seed)
    if "jobs" in params or args.jobs > 1:
        params["jobs"] = args.jobs
    rep = suites.run_theorem_suite(name, params)
    _write_report(rep, args, [rep.params.get("seed")])
    print(rep.summary())
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_fit(args, cfg):
    header, rows = read_csv(args.profile)
    n_col, r_col = header.index("n"), header.index("R")
    by_n = {}
    for row in rows:
        by_n.setdefault(row[n_col], []).append(row[r_col])
    prof = [(n, float(np.median(v))) for n, v in sorted(by_n.items())]
    fit = fit_growth(prof, args.model)
    print(json.dumps(vars(fit), default=float, sort_keys=True))
    return EXIT_OK


def cmd_plots(args, cfg):
    data = json.loads(Path(args.report).read_text())
    rep = suites.Report(data["name"], data["params"], data["columns"], [], [],
                        data.get("fits", {}), data.get("certificate"),
                        {k: [tuple(p) for p in v] for k, v in data.get("curves", {}).items()})
    path = _out(args, args.output)
    path.write_text(suites.emit_plots(rep))
    print(f"plot data -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress):
        g = argparse.ArgumentParser(add_help=False)
        # subcommands repeat the flags without defaults so either position works
        dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g.add_argument("--seed", type=int, default=dflt(0))
        g.add_argument("--jobs", type=int, default=dflt(1))
        g.add_argument("--out-dir", default=dflt("."))
        g.add_argument("--config", default=dflt(None), help="key = value file with one section per subcommand")
        return g

    top, common = global_flags(False), global_flags(True)

    p = argparse.ArgumentParser(prog="rwre", parents=[top],
                                description="Resistance, reduction and flux experiments on random point sets.")
    sub = p.add_subparsers(dest="command")

    s = sub.add_parser("sample", parents=[common], help="sample a point set")
    s.add_argument("--kind", choices=["ppp", "crystal", "percolation", "lattice", "circles"], default="ppp")
    s.add_argument("--dim", type=int, default=1)
    s.add_argument("--lambda", "--intensity", dest="intensity", type=float, default=1.0)
    s.add_argument("--dilution", type=float, default=0.5)
    s.add_argument("--box", type=float, required=True)
    s.add_argument("--out", "--output", dest="output", default="points.csv")
    s.set_defaults(func=cmd_sample)

    def kernel_args(q, alpha=1.5):
        q.add_argument("--kernel", choices=["poly", "stretched_exp"], default="poly")
        q.add_argument("--alpha", type=float, default=alpha)
        q.add_argument("--beta", type=float, default=None, help="stretched exponential exponent")
        q.add_argument("--cut", "--rho-cut", dest="rho_cut", type=float, default=None)
        q.add_argument("--node-budget", type=int, default=5000)

    b = sub.add_parser("build", parents=[common], help="conductance edge list of a point set")
    b.add_argument("--points", required=True)
    kernel_args(b)
    b.add_argument("--out", "--output", dest="output", default="edges.csv")
    b.set_defaults(func=cmd_build)

    r = sub.add_parser("resist", parents=[common], help="box resistance profile")
    r.add_argument("--points", required=True)
    r.add_argument("--n", "--n-list", dest="n_list", required=True, help="comma separated box half-widths")
    kernel_args(r)
    r.add_argument("--out", "--output", dest="output", default="profile.csv")
    r.set_defaults(func=cmd_resist)

    red = sub.add_parser("reduce", parents=[common], help="cube/shell/chain reduction")
    red.add_argument("--points", required=True)
    red.add_argument("--L", type=int, default=1, help="cube side")
    red.add_argument("--alpha", type=float, default=2.0)
    red.add_argument("--pipeline", default="cube,shell,split")
    red.add_argument("--n", type=int, default=None, help="also print the chain bound at this n")
    red.add_argument("--radius", type=int, default=None)
    red.add_argument("--out", "--output", dest="output", default="chain.csv")
    red.set_defaults(func=cmd_reduce)

    li = sub.add_parser("lift", parents=[common], help="lift a flux on one point set onto another")
    li.add_argument("--s0", required=True, help="points carrying the flux")
    li.add_argument("--s", required=True, help="target points")
    li.add_argument("--flux", default=None, help="flux CSV x_index,y_index,value on --s0 (y_index -1: out-flow)")
    li.add_argument("--n", type=float, default=8.0, help="flux source box half-width when no --flux is given")
    kernel_args(li, alpha=3.0)
    li.add_argument("--out", "--output", dest="output", default="lift.json")
    li.set_defaults(func=cmd_lift)

    f = sub.add_parser("flux", parents=[common], help="explicit flux and energy certificate")
    f.add_argument("--mode", choices=["renewal", "circles"], required=True)
    f.add_argument("--delta", type=float, required=True)
    f.add_argument("--alpha", type=float, required=True)
    f.add_argument("--nmax", "--n", dest="n", type=int, default=None,
                   help="rows summed (renewal, default 10000) or outer circle (circles, default 200)")
    f.add_argument("--points", default=None)
    f.add_argument("--theta-samples", type=int, default=8)
    f.add_argument("--export-flux", action="store_true", help="also write flux.csv")
    f.add_argument("--out", "--output", dest="output", default="certificate.json")
    f.set_defaults(func=cmd_flux)

    a = sub.add_parser("appendix", parents=[common], help="shell-sum bands and harmonic-analysis checks")
    a.add_argument("--check", choices=["shells", "spitzer", "kappa", "truncated"], required=True)
    a.add_argument("--family", choices=["squares", "circles"], default=None)
    a.add_argument("--alpha", type=float, required=True)
    a.add_argument("--d", type=int, default=1)
    a.add_argument("--max-n", type=int, default=200)
    a.add_argument("--band", type=float, default=10.0)
    a.add_argument("--n-list", default="16,32,64,128,256,512,1024")
    a.add_argument("--out", "--output", dest="output", default=None)
    a.set_defaults(func=cmd_appendix)

    ru = sub.add_parser("run", parents=[common], help="run an experiment suite against its thresholds")
    ru.add_argument("suite", nargs="?", choices=sorted(suites.SUITES))
    ru.add_argument("--manifest", default=None, help="repeat the run recorded in a manifest")
    ru.add_argument("--alpha", type=float, default=None)
    ru.add_argument("--delta", type=float, default=None)
    ru.add_argument("--seeds", type=int, default=None)
    ru.add_argument("--nmax", dest="n_max", type=int, default=None)
    ru.set_defaults(func=cmd_run)

    fi = sub.add_parser("fit", parents=[common], help="fit a growth law to a profile CSV")
    fi.add_argument("--in", "--profile", dest="profile", required=True)
    fi.add_argument("--model", default="power",
                    choices=["power", "log", "n_over_log", "n_over_sqrtlog", "loglog"])
    fi.set_defaults(func=cmd_fit)

    pl = sub.add_parser("plots", parents=[common], help="plot-ready CSV from a suite report")
    pl.add_argument("--report", required=True)
    pl.add_argument("--out", "--output", dest="output", default="plot.csv")
    pl.set_defaults(func=cmd_plots)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = read_config(args.config) if args.config else {}
        section = cfg.get(args.command, {})
        # config values fill options the command line left at their defaults
        for key, val in section.items():
            attr = key.replace("-", "_")
            if hasattr(args, attr) and getattr(args, attr) == parser_default(parser, args.command, attr):
                setattr(args, attr, val)
        return args.func(args, cfg)
    except (UsageError, ValueError, TypeError, FileNotFoundError, KeyError) as exc:
        print(f"rwre: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, certificates.QuadratureError, np.linalg.LinAlgError, FloatingPointError,
            ArithmeticError) as exc:
        print(f"rwre: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def parser_default(parser, command, attr):
    for action in parser._subparsers._group_actions:
        sub = action.choices.get(command)
        if sub is not None:
            val = sub.get_default(attr)
            if val is not argparse.SUPPRESS:
                return val
    return parser.get_default(attr)


if __name__ == "__main__":
    sys.exit(main())
