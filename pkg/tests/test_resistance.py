import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from rwre.network import ResistorNetwork, build_network, poly_kernel
from rwre.pointproc import PointSet, lattice_set, sample_ppp
from rwre.resistance import (SolverError, box_resistance_profile, dirichlet_upper_conductance,
                             effective_resistance, fit_growth, grounded_solve, mc_visits,
                             median_profile, thomson_upper_resistance, trial_function,
                             trial_increment_check)


def pinv_resistance(c, source, sink):
    """Oracle: short the sink into one node and use the Laplacian pseudo-inverse."""
    n = len(c)
    keep = [i for i in range(n) if i not in set(sink)]
    m = len(keep) + 1
    agg = np.zeros((n, m))
    for k, i in enumerate(keep):
        agg[i, k] = 1
    agg[list(sink), -1] = 1
    cc = agg.T @ c @ agg
    np.fill_diagonal(cc, 0)
    lap = np.diag(cc.sum(axis=1)) - cc
    e = np.zeros(m)
    e[keep.index(source)] = 1
    e[-1] = -1
    return float(e @ np.linalg.pinv(lap) @ e)


def random_net(rng, n, density=0.6):
    c = rng.uniform(0.1, 2.0, (n, n)) * (rng.uniform(size=(n, n)) < density)
    c = np.triu(c, 1)
    c = c + c.T
    # keep it connected through a path
    for i in range(n - 1):
        c[i, i + 1] = c[i + 1, i] = max(c[i, i + 1], 0.05)
    return c


def test_single_edge():
    net = ResistorNetwork(np.array([[0.0, 0.3], [0.3, 0.0]]))
    assert effective_resistance(net, 0, [1]).R == pytest.approx(1 / 0.3, rel=1e-14)


def test_triangle():
    tri = np.ones((3, 3)) - np.eye(3)
    assert effective_resistance(ResistorNetwork(tri), 0, [1, 2]).R == pytest.approx(0.5, rel=1e-14)


def test_path_with_long_edge():
    c = np.array([[0, 1, 0.25], [1, 0, 1], [0.25, 1, 0]], dtype=float)
    assert effective_resistance(ResistorNetwork(c), 0, [2]).R == pytest.approx(4 / 3, rel=1e-14)


def test_source_in_sink_rejected():
    tri = np.ones((3, 3)) - np.eye(3)
    with pytest.raises(ValueError):
        effective_resistance(ResistorNetwork(tri), 0, [0, 1])


def test_against_pseudo_inverse():
    rng = np.random.default_rng(0)
    for _ in range(20):
        c = random_net(rng, 25)
        sink = list(rng.choice(np.arange(1, 25), size=4, replace=False))
        res = effective_resistance(ResistorNetwork(c), 0, sink)
        assert res.R == pytest.approx(pinv_resistance(c, 0, sink), rel=1e-10)
        assert res.residual < 1e-10


def test_cg_matches_dense():
    rng = np.random.default_rng(1)
    for n in (50, 200, 500):
        c = random_net(rng, n, density=0.1)
        a = effective_resistance(ResistorNetwork(c), 0, [n - 1], method="dense_solve")
        b = effective_resistance(ResistorNetwork(sparse.csr_array(c)), 0, [n - 1], method="cg")
        assert b.method == "cg"
        assert abs(a.R - b.R) / a.R < 1e-8


def test_cg_budget_error_carries_residual():
    rng = np.random.default_rng(2)
    c = random_net(rng, 400, density=0.02)
    lap = sparse.csr_array(np.diag(c.sum(axis=1) + 1e-9) - c)
    b = np.zeros(400)
    b[0] = 1.0
    with pytest.raises(SolverError) as info:
        grounded_solve(lap, b, tol=1e-30, method="cg")
    assert info.value.residual > 0


def test_potential_boundary_values():
    rng = np.random.default_rng(3)
    c = random_net(rng, 15)
    res = effective_resistance(ResistorNetwork(c), 2, [7, 9])
    assert res.potential[2] == pytest.approx(0.0, abs=1e-14)
    assert np.all(res.potential[[7, 9]] == 1.0)
    assert np.all((res.potential >= -1e-12) & (res.potential <= 1 + 1e-12))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rayleigh_monotonicity(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 30))
    c = random_net(rng, n)
    sink = list(rng.choice(np.arange(1, n), size=int(rng.integers(1, n // 2 + 1)), replace=False))
    before = effective_resistance(ResistorNetwork(c), 0, sink).R
    i, j = rng.choice(n, size=2, replace=False)
    c2 = c.copy()
    c2[i, j] = c2[j, i] = c[i, j] + rng.uniform(0.01, 3.0)
    after = effective_resistance(ResistorNetwork(c2), 0, sink).R
    assert after <= before * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dual_sandwich(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 20))
    c = random_net(rng, n)
    sink = [n - 1]
    net = ResistorNetwork(c)
    res = effective_resistance(net, 0, sink)
    # any admissible trial potential gives a conductance upper bound
    h = rng.uniform(size=n)
    h[0], h[n - 1] = 0.0, 1.0
    assert 1.0 / dirichlet_upper_conductance(net, h, 0, sink) <= res.R * (1 + 1e-10)
    # optimum attained at the solver's potential
    assert dirichlet_upper_conductance(net, res.potential, 0, sink) == pytest.approx(1 / res.R, rel=1e-9)
    # the current flow attains the flow bound; a path flow gives a larger one
    v = res.R * (1 - res.potential)
    cur = c * (v[:, None] - v[None, :])
    assert thomson_upper_resistance(net, cur, 0, sink) == pytest.approx(res.R, rel=1e-9)
    path = np.zeros((n, n))
    for k in range(n - 1):
        path[k, k + 1], path[k + 1, k] = 1.0, -1.0
    assert thomson_upper_resistance(net, path, 0, sink) >= res.R * (1 - 1e-12)


def test_indicator_trial_energy_is_source_weight():
    rng = np.random.default_rng(4)
    c = random_net(rng, 10)
    h = np.ones(10)
    h[0] = 0.0
    assert dirichlet_upper_conductance(ResistorNetwork(c), h, 0, [9]) == pytest.approx(c[0].sum(), rel=1e-13)


def test_trial_boundary_violation():
    c = np.ones((3, 3)) - np.eye(3)
    with pytest.raises(ValueError):
        dirichlet_upper_conductance(ResistorNetwork(c), [0.5, 0.5, 1.0], 0, [2])


def test_radial_trial_bound_on_lattice():
    pts = lattice_set(1, 40)
    net = build_network(pts, poly_kernel(1, 1.0))
    x = pts.index_of([0.0])
    n = 20
    sink = np.flatnonzero(np.abs(pts.points[:, 0]) > n)
    tf = trial_function(1.0, 40)
    h = tf.radial_trial(pts.points, n)
    h[sink] = 1.0
    R = effective_resistance(net, x, sink).R
    assert 1.0 / dirichlet_upper_conductance(net, h, x, sink) <= R


def test_lattice_profile_matches_pseudo_inverse():
    pts = lattice_set(1, 8)
    kern = poly_kernel(1, 1.0)
    x = pts.index_of([0.0])
    prof = box_resistance_profile(pts, kern, x, [2, 4])
    c = build_network(pts, kern).to_dense()
    for e in prof:
        sink = list(np.flatnonzero(np.abs(pts.points[:, 0]) > e.n))
        assert e.R == pytest.approx(pinv_resistance(c, x, sink), rel=1e-10)


def test_profile_single_exterior_point():
    pts = PointSet(1, np.array([[-2.0], [0.0], [1.0], [5.0]]), 5.0)
    (e,) = box_resistance_profile(pts, poly_kernel(1, 1.0), 1, [4])
    c = build_network(pts, poly_kernel(1, 1.0)).to_dense()
    assert e.R == pytest.approx(pinv_resistance(c, 1, [3]), rel=1e-12)


def test_profile_monotone_and_skips_empty_exterior():
    pts = sample_ppp(1.0, 100.0, seed=6)
    x = pts.nearest_index([0.0])
    with pytest.warns(RuntimeWarning):
        prof = box_resistance_profile(pts, poly_kernel(1, 1.5), x, [4, 8, 16, 32, 64, 200])
    assert [e.n for e in prof] == [4, 8, 16, 32, 64]
    Rs = [e.R for e in prof]
    assert all(a <= b for a, b in zip(Rs, Rs[1:]))


def test_profile_truncated_is_upper_bound():
    pts = sample_ppp(1.0, 15.0, seed=7, dim=2)
    x = pts.nearest_index([0.0, 0.0])
    full = box_resistance_profile(pts, poly_kernel(2, 1.0), x, [4, 8])
    cut = box_resistance_profile(pts, poly_kernel(2, 1.0), x, [4, 8], rho_cut=3.0)
    for a, b in zip(full, cut):
        assert b.R >= a.R


def test_mc_two_nodes():
    net = ResistorNetwork(np.array([[0.0, 2.0], [2.0, 0.0]]))
    mean, se = mc_visits(net, 0, [1], 100, seed=0)
    assert mean == 1.0 and se == 0.0


def test_mc_identity_on_ppp_networks():
    for s in range(20):
        pts = sample_ppp(1.0, 25.0, seed=100 + s)
        kern = poly_kernel(1, 1.5)
        net = build_network(pts, kern)
        x = pts.nearest_index([0.0])
        sink = np.flatnonzero(np.abs(pts.points[:, 0]) > 10)
        R = effective_resistance(net, x, sink).R
        mean, se = mc_visits(net, x, sink, 4000, seed=s)
        w = net.weights[x]
        assert abs(mean / w - R) <= 3 * se / w + 1e-12, s


def test_trial_function_invariants():
    for alpha in (1.0, 1.5, 2.0, 3.0):
        tf = trial_function(alpha, 2000)
        assert tf.g[0] == 1.0
        assert tf.f[0] == 0.0
        assert np.all(np.diff(tf.f) > 0)
        assert np.all(np.diff(tf.g) <= 0)
        assert tf.error <= 1e-8


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([1.0, 1.3, 2.0, 2.7]), st.integers(0, 1999), st.integers(0, 1999))
def test_trial_concavity_bound(alpha, i, j):
    tf = _TRIALS[alpha]
    i, j = min(i, j), max(i, j)
    assert tf.f[j] - tf.f[i] <= tf.g[i] * (j - i) * (1 + 1e-12) + 1e-15


_TRIALS = {a: trial_function(a, 2000) for a in (1.0, 1.3, 2.0, 2.7)}


def test_trial_function_asymptotics():
    tf1 = trial_function(1.0, 10_000)
    assert tf1.f[10_000] / tf1.f[1000] == pytest.approx(math.log(1e4) / math.log(1e3), rel=0.15)
    tf3 = trial_function(3.0, 20_000)
    assert (tf3.f[20_000] / 20_000) / (tf3.f[10_000] / 10_000) == pytest.approx(1.0, abs=0.01)


def test_trial_function_alpha_below_one():
    with pytest.raises(NotImplementedError):
        trial_function(0.5, 10)


def test_trial_function_against_quad():
    from scipy.integrate import quad
    tf = trial_function(1.5, 50)
    g = lambda t: 1.0 / (1.0 + (t if t <= 1 else 1 + (t ** 0.5 - 1) / 0.5))
    ref, _ = quad(g, 0, 50, points=[1.0], epsabs=0, epsrel=1e-13, limit=200)
    assert tf.f[50] == pytest.approx(ref, rel=1e-10)


def test_increment_sums_bounded_ratio():
    for alpha in (1.0, 2.0):
        rows = trial_increment_check(alpha, [0, 10, 100, 1000])
        assert math.isfinite(rows[0].X) and rows[0].X > 0
        ratios = [r.ratio for r in rows[1:]]
        assert max(ratios) / min(ratios) <= 5
        assert all(r.tail >= 0 for r in rows)


def test_fit_growth_synthetic():
    ns = [2.0 ** k for k in range(4, 12)]
    assert fit_growth([(n, n) for n in ns], "power").slope == pytest.approx(1.0, abs=1e-9)
    assert fit_growth([(n, math.log(n)) for n in ns], "log").slope == pytest.approx(1.0, abs=1e-9)
    assert fit_growth([(n, n / math.log(n)) for n in ns], "n_over_log").slope == pytest.approx(1.0, abs=1e-9)
    assert fit_growth([(n, math.log(math.log(n))) for n in ns], "loglog").slope == pytest.approx(1.0, abs=1e-9)
    fit = fit_growth([(n, 3 * n ** 0.5) for n in ns], "power")
    assert fit.residual < 1e-12 and fit.n_range == (16.0, 2048.0)


def test_fit_growth_errors():
    with pytest.raises(ValueError):
        fit_growth([(1, 1), (2, 2), (4, 4)], "power")
    with pytest.raises(ValueError):
        fit_growth([(2, 1), (4, -1), (8, 3), (16, 4)], "power")
    with pytest.raises(ValueError):
        fit_growth([(2, 1), (4, 2), (8, 3), (16, 4)], "cubic")


def test_median_profile():
    a = [(1, 1.0), (2, 5.0)]
    b = [(1, 3.0), (2, 1.0)]
    c = [(1, 2.0), (2, 2.0)]
    assert median_profile([a, b, c]) == [(1, 2.0), (2, 2.0)]


def test_lattice_alpha_15_exponent():
    pts = lattice_set(1, 4200)
    x = pts.index_of([0.0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        prof = box_resistance_profile(pts, poly_kernel(1, 1.5), x, [64, 128, 256, 512, 1024, 2048, 4096],
                                      node_budget=9000)
    fit = fit_growth([(e.n, e.R) for e in prof], "power")
    assert 0.35 <= fit.slope <= 0.65
