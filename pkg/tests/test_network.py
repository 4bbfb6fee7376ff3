import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rwre.network import (JumpKernel, build_network, collapse, kernel_eval, poly_kernel,
                          stretched_exp_kernel)
from rwre.pointproc import PointSet, sample_ppp


def line(*xs):
    return PointSet(1, np.array(xs, dtype=float).reshape(-1, 1), max(abs(x) for x in xs) + 1)


def test_kernel_values():
    assert kernel_eval(poly_kernel(1, 1.0), 2.0) == 0.25
    assert kernel_eval(poly_kernel(1, 1.0), 0.5) == 1.0
    assert kernel_eval(poly_kernel(2, 2.0), 10.0) == pytest.approx(1e-4, rel=1e-15)
    assert kernel_eval(stretched_exp_kernel(1, 1.0), 1e-300) == pytest.approx(1.0)


def test_kernel_domain():
    with pytest.raises(ValueError):
        kernel_eval(poly_kernel(1, 1.0), 0.0)
    with pytest.raises(ValueError):
        kernel_eval(poly_kernel(1, 1.0), -1.0)
    with pytest.raises(ValueError):
        JumpKernel("poly", dim=1, alpha=-1.0)


@given(st.floats(1e-3, 1e3), st.floats(0.1, 4.0), st.integers(1, 3))
def test_kernel_in_unit_interval_and_monotone(t, alpha, d):
    k = poly_kernel(d, alpha)
    v1, v2 = kernel_eval(k, t), kernel_eval(k, 1.01 * t)
    assert 0 < v2 <= v1 <= 1
    assert v1 == pytest.approx(min(1.0, t ** (-(d + alpha))), rel=1e-14)


def test_two_points():
    net = build_network(line(0, 2), poly_kernel(1, 1.0))
    assert net.conductance(0, 1) == 0.25
    assert np.allclose(net.weights, [0.25, 0.25])


def test_three_collinear_points():
    net = build_network(line(0, 1, 2), poly_kernel(1, 1.0))
    assert net.conductance(0, 1) == 1.0
    assert net.conductance(1, 2) == 1.0
    assert net.conductance(0, 2) == 0.25


def test_duplicate_points_rejected():
    with pytest.raises(ValueError):
        PointSet(1, [[0.0], [0.0]], 1.0)


def test_truncated_is_edge_subset():
    pts = sample_ppp(1.0, 40.0, seed=3)
    full = build_network(pts, poly_kernel(1, 1.5)).to_dense()
    cut = build_network(pts, poly_kernel(1, 1.5), rho_cut=4.0)
    c = cut.to_dense()
    assert np.all((c == 0) | (c == full))
    assert cut.truncation["dropped_max"] > 0
    dropped = full.sum(axis=1) - c.sum(axis=1)
    assert cut.truncation["dropped_max"] == pytest.approx(dropped.max(), rel=1e-10)


def test_lazy_matches_dense():
    pts = sample_ppp(1.0, 30.0, seed=5, dim=2)
    a = build_network(pts, poly_kernel(2, 1.0))
    b = build_network(pts, poly_kernel(2, 1.0), lazy=True)
    assert np.array_equal(a.to_dense(), b.to_dense())


def test_symmetry_and_reversibility():
    pts = sample_ppp(1.0, 60.0, seed=8)
    net = build_network(pts, poly_kernel(1, 0.7))
    c = net.to_dense()
    assert np.array_equal(c, c.T)
    w = net.weights
    p = c / w[:, None]
    lhs, rhs = w[:, None] * p, (w[:, None] * p).T
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=0)
    assert np.all(w > 0)


def test_collapse_singleton_is_isomorphic():
    net = build_network(line(0, 1, 3), poly_kernel(1, 1.0))
    red, _ = collapse(net, [[1]])
    perm = [0, 2, 1]
    assert np.allclose(red.to_dense(), net.to_dense()[np.ix_(perm, perm)])


def test_collapse_triangle():
    tri = np.ones((3, 3)) - np.eye(3)
    from rwre.network import ResistorNetwork
    red, cmap = collapse(ResistorNetwork(tri), [[1, 2]])
    assert red.node_count == 2
    assert red.conductance(0, 1) == 2.0


def test_collapse_all_but_one():
    net = build_network(sample_ppp(1.0, 10.0, seed=1), poly_kernel(1, 1.0))
    n = net.node_count
    red, _ = collapse(net, [list(range(1, n))])
    assert red.conductance(0, 1) == pytest.approx(net.weights[0], rel=1e-13)


def test_collapse_overlapping_groups():
    net = build_network(line(0, 1, 2, 3), poly_kernel(1, 1.0))
    with pytest.raises(ValueError):
        collapse(net, [[0, 1], [1, 2]])


@settings(max_examples=40, deadline=None)
@given(st.integers(6, 25), st.data())
def test_collapse_associativity(n, data):
    rng = np.random.default_rng(n)
    pts = PointSet(1, np.sort(rng.uniform(-20, 20, n)).reshape(-1, 1), 20.0)
    net = build_network(pts, poly_kernel(1, 1.0))
    perm = data.draw(st.permutations(range(n)))
    k1 = data.draw(st.integers(1, n // 2))
    k2 = data.draw(st.integers(1, n - k1 - 1))
    g1, g2 = sorted(perm[:k1]), sorted(perm[k1:k1 + k2])
    seq1, m1 = collapse(net, [g1])
    g2_new = sorted(set(int(m1.assignment[v]) for v in g2))
    seq2, _ = collapse(seq1, [g2_new])
    once, _ = collapse(net, [g1, g2])
    assert np.allclose(seq2.to_dense(), once.to_dense(), rtol=1e-13, atol=0)
