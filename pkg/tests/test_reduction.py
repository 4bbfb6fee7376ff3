import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rwre.network import build_network, poly_kernel
from rwre.pointproc import PointSet, ProcessSpec, lattice_set, sample_ppp
from rwre.reduction import (ChainNetwork, chain_resistance, coarse_constant, coarse_from_field,
                            cube_collapse, fold_pairs_1d, phi_chain_fft, phi_moment_probe,
                            series_split, series_split_bruteforce, shell_collapse_2d, shell_sizes)
from rwre.resistance import effective_resistance


def R_from_sites(net, sites, n):
    sup = np.abs(sites).max(axis=1)
    src = int(np.flatnonzero(sup == 0)[0])
    return effective_resistance(net, src, np.flatnonzero(sup > n)).R


def test_lattice_cube_collapse():
    co = cube_collapse(lattice_set(2, 4), 1, poly_kernel(2, 2.0))
    expected = np.ones((9, 9), dtype=int)
    expected[4, 4] = 2
    assert np.array_equal(co.gamma, expected)


def test_ppp_mean_multiplicity():
    co = cube_collapse(sample_ppp(1.0, 1000.0, seed=1), 1, poly_kernel(1, 1.0), radius=999)
    assert abs(co.counts.mean() - 1.0) <= 0.1
    assert co.gamma.sum() == co.counts.sum() + 1


def test_empty_cube():
    pts = PointSet(1, [[-2.0], [2.0]], 3.0)
    co = cube_collapse(pts, 1, poly_kernel(1, 1.0), radius=3)
    assert co.gamma_at([1]) == 0
    assert co.gamma_at([0]) == 1
    net, sites = co.to_network()
    assert sorted(sites.ravel().tolist()) == [-2, 0, 2]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 2), st.floats(0.5, 3.0), st.integers(0, 10_000))
def test_coarse_constant_dominates_kernel(d, alpha, seed):
    kern = poly_kernel(d, alpha)
    c = coarse_constant(kern, alpha)
    rng = np.random.default_rng(seed)
    w = rng.integers(-6, 7, size=d)
    if not np.any(w):
        w[0] = 1
    x = rng.uniform(-0.5, 0.5, size=(500, d))
    y = w + rng.uniform(-0.5, 0.5, size=(500, d))
    phi = kern(np.linalg.norm(x - y, axis=1))
    assert np.all(phi <= 1.0 / (c * np.linalg.norm(w) ** (d + alpha)) * (1 + 1e-12))


def test_coarse_is_below_original_on_lattice():
    pts = lattice_set(2, 7)
    kern = poly_kernel(2, 2.0)
    net = build_network(pts, kern)
    co = cube_collapse(pts, 1, kern)
    co = coarse_from_field(co.counts, co.c, 2.0, add_origin=False)
    cnet, sites = co.to_network()
    for n in (2, 4, 6):
        sink = np.flatnonzero(np.abs(pts.points).max(axis=1) > n)
        R = effective_resistance(net, pts.index_of([0.0, 0.0]), sink).R
        assert R_from_sites(cnet, sites, n) <= R


def test_pipeline_stages_non_increasing():
    rng = np.random.default_rng(3)
    for _ in range(5):
        field = rng.poisson(1.0, size=(15, 15))
        co = coarse_from_field(field, 1.3, 2.0)
        cnet, sites = co.to_network()
        shells = shell_collapse_2d(co)
        chain = series_split(shells)
        snet = shells.to_network()
        for n in (2, 4, 6):
            Rc = R_from_sites(cnet, sites, n)
            Rs = effective_resistance(snet, 0, list(range(n + 1, shells.radius + 1))).R
            assert Rs <= Rc * (1 + 1e-12)
            assert chain_resistance(chain, n) <= Rs * (1 + 1e-12)


def test_fold_symmetric_field():
    co = coarse_from_field(np.ones(11, dtype=int), 1.0, 1.0, add_origin=False)
    fo = fold_pairs_1d(co)
    assert fo.gamma[0] == 1 and np.all(fo.gamma[1:] == 2)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=7, max_size=21).filter(lambda v: len(v) % 2 == 1))
def test_fold_conserves_mass(vals):
    co = coarse_from_field(np.array(vals), 1.0, 1.0)
    assert fold_pairs_1d(co).gamma.sum() == co.gamma.sum()


def test_fold_lowers_resistance():
    rng = np.random.default_rng(4)
    field = rng.poisson(1.0, size=41)
    co = coarse_from_field(field, 1.0, 1.5)
    fo = fold_pairs_1d(co)
    cnet, sites = co.to_network()
    fnet, fsites = fo.to_network()
    for n in (5, 10, 15):
        Rf = R_from_sites(fnet, fsites, n)
        assert Rf <= R_from_sites(cnet, sites, n) * (1 + 1e-12)


def test_fold_rejects_planar():
    with pytest.raises(NotImplementedError):
        fold_pairs_1d(coarse_from_field(np.ones((3, 3), dtype=int), 1.0, 2.0))


def test_shell_sizes_and_wire_count():
    r = 9
    axis = np.arange(-r, r + 1)
    norm = np.maximum(np.abs(axis)[:, None], np.abs(axis)[None, :])
    assert np.array_equal(shell_sizes(r), np.bincount(norm.ravel()))
    gam = np.ones_like(norm)
    for a in range(1, 5):
        for b in range(a + 1, 6):
            wires = gam[norm == a].sum() * gam[norm == b].sum()
            assert wires == 64 * a * b


def test_shell_collapse_rejects_line():
    with pytest.raises(NotImplementedError):
        shell_collapse_2d(coarse_from_field(np.ones(5, dtype=int), 1.0, 1.0))


def test_two_shell_chain():
    co = coarse_from_field(np.ones((3, 3), dtype=int), 1.7, 2.0, add_origin=False)
    chain = series_split(shell_collapse_2d(co))
    ring = [(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1) if (i, j) != (0, 0)]
    expected = sum(1.0 / (1.7 * math.hypot(i, j) ** 4) for i, j in ring)
    assert len(chain) == 1
    assert chain.phi[0] == pytest.approx(expected, rel=1e-14)


def _enumerate_phi(field, c, alpha):
    r = (field.shape[0] - 1) // 2
    sites = [(x, y) for x in range(-r, r + 1) for y in range(-r, r + 1)]
    phi = np.zeros(r)
    for u in sites:
        for v in sites:
            a, b = max(map(abs, u)), max(map(abs, v))
            if b <= a:
                continue
            g = field[u[0] + r, u[1] + r] * field[v[0] + r, v[1] + r]
            rho = c * math.hypot(u[0] - v[0], u[1] - v[1]) ** (2 + alpha)
            phi[a:b] += (b - a) * g / rho
    return phi


def test_series_split_matches_enumeration():
    rng = np.random.default_rng(5)
    for r in (3, 6, 10):
        field = rng.poisson(1.0, size=(2 * r + 1,) * 2)
        co = coarse_from_field(field, 0.9, 2.0)
        fast = series_split(shell_collapse_2d(co)).phi
        assert np.allclose(fast, _enumerate_phi(co.gamma, 0.9, 2.0), rtol=1e-12, atol=0)
        assert np.allclose(fast, series_split_bruteforce(co).phi, rtol=1e-12, atol=0)
        fft_phi = phi_chain_fft(co.gamma, 0.9, 2.0, range(1, r + 1))
        assert np.allclose(fft_phi, fast, rtol=1e-9, atol=0)


def test_chain_bound_against_dense_lattice():
    pts = lattice_set(2, 14)
    kern = poly_kernel(2, 2.0)
    net = build_network(pts, kern)
    co = cube_collapse(pts, 1, kern)
    co = coarse_from_field(co.counts, co.c, 2.0, add_origin=False)
    chain = series_split(shell_collapse_2d(co))
    x = pts.index_of([0.0, 0.0])
    for n in (2, 5, 9, 12):
        sink = np.flatnonzero(np.abs(pts.points).max(axis=1) > n)
        assert chain_resistance(chain, n) <= effective_resistance(net, x, sink).R


def test_phi_growth_for_unit_field():
    r = 64
    field = np.ones((2 * r + 1,) * 2, dtype=np.int64)
    field[r, r] += 1
    c = coarse_constant(poly_kernel(2, 2.0), 2.0)
    i = np.array([4, 8, 16, 32])
    phi = phi_chain_fft(field, c, 2.0, i)
    ratio = phi / (i * np.log(i))
    assert ratio.max() / ratio.min() <= 3


def test_chain_resistance_examples():
    ones = ChainNetwork(np.ones(10))
    assert chain_resistance(ones, 3) == 4.0
    assert chain_resistance(ChainNetwork(np.array([2.0, 5.0])), 0) == 0.5
    with pytest.raises(ValueError):
        chain_resistance(ones, 10)


@given(st.lists(st.floats(0.1, 10.0), min_size=3, max_size=40), st.data())
def test_chain_resistance_additive(phi, data):
    chain = ChainNetwork(np.array(phi))
    n = data.draw(st.integers(1, len(phi) - 1))
    m = data.draw(st.integers(0, n))
    tail = float(np.sum(1.0 / np.array(phi)[m + 1:n + 1]))
    assert chain_resistance(chain, n) == pytest.approx(chain_resistance(chain, m) + tail, rel=1e-12)


def test_chain_partial_sums_log_log():
    i = np.arange(2, 200_001, dtype=float)
    chain = ChainNetwork(np.concatenate([[1.0], i * np.log(i)]))
    for n in (1000, 10_000, 100_000):
        s = chain_resistance(chain, n - 1) - 1.0
        assert abs(s - (math.log(math.log(n)) - math.log(math.log(2)))) < 1.0


def test_moment_probe_deterministic_field():
    rows = phi_moment_probe(ProcessSpec("lattice", dim=2, n_max=64), 2.0, [4, 8], 3)
    assert all(r.fourth_moment == pytest.approx(0.0, abs=1e-12 * r.mean ** 4) for r in rows)


def test_moment_probe_ratios_bounded():
    spec = ProcessSpec("ppp", dim=2, intensity=1.0)
    r3 = phi_moment_probe(spec, 3.0, [8, 16, 32, 64], 20, seed=1)
    means = [r.mean_ratio for r in r3]
    assert max(means) / min(means) <= 5
    # the fourth-moment estimate needs more draws than the mean
    r2 = phi_moment_probe(spec, 2.0, [8, 16, 32, 64], 50, seed=2)
    moms = [r.moment_ratio for r in r2]
    assert max(moms) / min(moms) <= 5


def test_moment_probe_requires_plane():
    with pytest.raises(NotImplementedError):
        phi_moment_probe(ProcessSpec("ppp", dim=1, intensity=1.0), 2.0, [4], 2)
