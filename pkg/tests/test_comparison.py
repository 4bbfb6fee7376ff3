import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from rwre.comparison import (Flux, ball_event_probe, cells, lift_energy_bound, lift_flux,
                             nearest_point_map, nearest_point_map_bruteforce, pushdown_potential)
from rwre.network import build_network, poly_kernel
from rwre.pointproc import PointSet, lattice_set, sample_ppp
from rwre.resistance import effective_resistance


def unit_current(net, src, sink):
    res = effective_resistance(net, src, sink)
    v = res.R * (1.0 - res.potential)
    m = sparse.triu(sparse.csr_array(net.matrix()), k=1).tocoo()
    vals = m.data * (v[m.row] - v[m.col])
    return Flux(sparse.coo_array((vals, (m.row, m.col)), shape=(net.node_count,) * 2), src, sink), res.R


def box_sink(pts, n):
    return np.flatnonzero(np.abs(pts.points).max(axis=1) > n)


def test_nearest_map_identity():
    pts = sample_ppp(1.0, 20.0, seed=1, dim=2)
    nmap = nearest_point_map(pts, pts)
    assert np.array_equal(nmap.assignment, np.arange(len(pts)))
    assert not nmap.ties.any()


def test_nearest_map_tie_goes_to_lower_point():
    nmap = nearest_point_map(PointSet(1, [[0.0]], 2.0), PointSet(1, [[-1.0], [1.0]], 2.0))
    assert nmap.assignment[0] == 0
    assert nmap.ties[0]


def test_nearest_map_tie_on_lattice():
    # every half-integer point is equidistant from two integers
    S0 = PointSet(1, np.arange(-4.5, 5.0).reshape(-1, 1), 6.0)
    S = lattice_set(1, 5)
    nmap = nearest_point_map(S0, S)
    assert nmap.ties.all()
    assert np.array_equal(S.points[nmap.assignment, 0], S0.points[:, 0] - 0.5)


def test_nearest_map_matches_bruteforce():
    rng = np.random.default_rng(7)
    for k in range(100):
        d = 1 + k % 2
        S0 = sample_ppp(1.0, 8.0, seed=int(rng.integers(1 << 30)), dim=d)
        if k % 3 == 0:
            S0 = lattice_set(d, 6 if d == 2 else 8)
        S = sample_ppp(0.7, 8.0, seed=int(rng.integers(1 << 30)), dim=d)
        if len(S) == 0:
            continue
        a, b = nearest_point_map(S0, S), nearest_point_map_bruteforce(S0, S)
        assert np.array_equal(a.assignment, b.assignment)
        assert np.array_equal(a.ties, b.ties)


def test_nearest_map_empty_target():
    with pytest.raises(ValueError):
        nearest_point_map(lattice_set(1, 2), PointSet(1, np.empty((0, 1)), 2.0))


def test_cells_partition():
    S0 = lattice_set(1, 3)
    S = PointSet(1, [[-2.2], [0.4], [2.9]], 4.0)
    part = cells(nearest_point_map(S0, S))
    assert part.counts.tolist() == [3, 2, 2]
    assert [sorted(c.tolist()) for c in part.members] == [[0, 1, 2], [3, 4], [5, 6]]
    assert part.total == len(S0)


def test_cells_can_be_empty():
    S0 = PointSet(1, [[0.0], [0.1]], 5.0)
    S = PointSet(1, [[0.0], [4.0]], 5.0)
    part = cells(nearest_point_map(S0, S))
    assert part.counts.tolist() == [2, 0]


def test_lift_onto_same_set_is_identity():
    pts = lattice_set(1, 8)
    kern = poly_kernel(1, 3.0)
    net = build_network(pts, kern)
    f, _ = unit_current(net, pts.index_of([0.0]), box_sink(pts, 5))
    nmap = nearest_point_map(pts, pts)
    theta = lift_flux(f, nmap, cells(nmap))
    assert abs(theta.values - f.values).max() <= 1e-15
    assert theta.source == f.source and theta.sink == f.sink


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 2))
def test_lifted_flux_is_unit_flux(seed, d):
    S0 = lattice_set(d, 8 if d == 1 else 4)
    S = sample_ppp(1.0, 5.0, seed=seed, dim=d)
    if len(S) < 2:
        return
    kern = poly_kernel(d, 3.0)
    f, _ = unit_current(build_network(S0, kern), S0.index_of(np.zeros(d)), box_sink(S0, 2))
    assert f.check() <= 1e-9
    nmap = nearest_point_map(S0, S)
    theta = lift_flux(f, nmap, cells(nmap))
    div = theta.divergence()
    if theta.source in theta.sink:
        return
    assert abs(div[theta.source] - 1.0) <= 1e-9
    rest = np.ones(len(S), dtype=bool)
    rest[[theta.source, *theta.sink]] = False
    assert np.all(np.abs(div[rest]) <= 1e-9)


def test_lift_exterior_outflow_is_collected():
    S0 = lattice_set(1, 2)
    vals = np.zeros((5, 5))
    vals[2, 3] = 1.0
    out = np.zeros(5)
    out[3] = 1.0
    f = Flux(vals, 2, (), out)
    assert f.check() == 0.0
    nmap = nearest_point_map(S0, PointSet(1, [[0.0], [1.4]], 3.0))
    theta = lift_flux(f, nmap)
    assert theta.outflow.tolist() == [0.0, 1.0]
    assert theta.check() == 0.0


def test_schwarz_energy_inequality():
    d, kern = 1, poly_kernel(1, 3.0)
    S0 = lattice_set(d, 12)
    f, R = unit_current(build_network(S0, kern), S0.index_of([0.0]), box_sink(S0, 8))
    for seed in range(10):
        S = sample_ppp(1.0, 13.0, seed=seed)
        nmap = nearest_point_map(S0, S)
        part = cells(nmap)
        theta = lift_flux(f, nmap, part)
        energy, bound = lift_energy_bound(f, theta, nmap, part, kern)
        assert energy <= bound * (1 + 1e-12)


def test_lift_rejects_mismatched_flux():
    f = Flux(np.zeros((3, 3)), 0)
    nmap = nearest_point_map(lattice_set(1, 2), lattice_set(1, 2))
    with pytest.raises(ValueError):
        lift_flux(f, nmap)


def test_pushdown_on_same_set_is_plain_energy():
    S0 = lattice_set(1, 6)
    kern = poly_kernel(1, 2.0)
    psi = np.clip(1 - np.abs(S0.points[:, 0]) / 4, 0, 1)
    res = pushdown_potential(psi, S0, S0, kern, 3)
    c = build_network(S0, kern).to_dense()
    plain = 0.5 * np.sum(c * (psi[:, None] - psi[None, :]) ** 2)
    assert res.energy == pytest.approx(plain, rel=1e-12)
    assert res.aggregate == pytest.approx(plain, rel=1e-12)


def test_pushdown_bounds_conductance():
    S0 = lattice_set(1, 10)
    kern = poly_kernel(1, 2.0)
    psi = np.clip(1 - np.abs(S0.points[:, 0]) / 6, 0, 1)
    for seed in range(5):
        S = sample_ppp(1.0, 10.0, seed=seed)
        res = pushdown_potential(psi, S0, S, kern, 6)
        assert res.energy == pytest.approx(res.aggregate, rel=1e-10)
        net = build_network(res.points, kern)
        R = effective_resistance(net, res.source, res.sink).R
        assert 1.0 / R <= res.energy * (1 + 1e-10)


def test_pushdown_rejects_bad_potential():
    S0 = lattice_set(1, 4)
    kern = poly_kernel(1, 2.0)
    psi = np.ones(len(S0))
    with pytest.raises(ValueError):
        pushdown_potential(psi, S0, S0, kern, 2)
    with pytest.raises(ValueError):
        pushdown_potential(np.ones(3), S0, S0, kern, 2)


def test_ball_event_hand_instance():
    S = PointSet(1, [[0.5], [3.6], [-3.4]], 5.0)
    probe = ball_event_probe(S, [0.0], 1.0)
    assert probe.event and probe.nearest_within and probe.cell_within
    assert S.points[probe.nearest, 0] == 0.5
    assert probe.cell_radius == pytest.approx(2.05)
    assert not probe.violation


def test_ball_event_missing_ball():
    S = PointSet(1, [[0.5], [3.6]], 5.0)
    assert not ball_event_probe(S, [0.0], 1.0).event


def test_ball_event_box_too_small():
    with pytest.raises(ValueError):
        ball_event_probe(PointSet(1, [[0.5]], 2.0), [0.0], 1.0)


def test_ball_event_never_violated_1d():
    rng = np.random.default_rng(11)
    events = 0
    for k in range(10_000):
        S = sample_ppp(1.0, 12.0, seed=k)
        probe = ball_event_probe(S, rng.uniform(-1, 1, size=1), float(rng.uniform(0.3, 2.0)))
        events += probe.event
        assert not probe.violation
    assert events > 1000


def test_ball_event_never_violated_2d():
    rng = np.random.default_rng(12)
    events = 0
    for k in range(300):
        S = sample_ppp(1.0, 14.0, seed=k, dim=2)
        probe = ball_event_probe(S, rng.uniform(-1, 1, size=2), float(rng.uniform(0.5, 1.5)))
        events += probe.event
        assert not probe.violation
    assert events > 30
