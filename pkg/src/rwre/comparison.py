"""Comparison between a reference network and a random one.

A reference set ``S0`` (typically a lattice) is mapped to the random set
``S`` by sending every point to its nearest neighbour in ``S``.  Unit
fluxes on ``S0`` can then be transported to ``S`` and potentials on ``S0``
pulled back to ``S u S0``, giving energy bounds in both directions.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.spatial import Voronoi, cKDTree

from .network import JumpKernel
from .pointproc import PointSet

__all__ = [
    "Flux",
    "NearestPointMap",
    "CellPartition",
    "nearest_point_map",
    "nearest_point_map_bruteforce",
    "cells",
    "lift_flux",
    "lift_energy_bound",
    "PushdownResult",
    "pushdown_potential",
    "BallProbe",
    "ball_event_probe",
]


class Flux:
    """Antisymmetric edge function on ``node_count`` nodes.

    Parameters
    ----------
    values : sparse matrix
        ``values[x, y] = f(x, y)``; antisymmetrized on construction from
        the strictly upper triangle.
    source : int
    sink : iterable of int
        May be empty when the flux runs to infinity.
    outflow : ndarray, optional
        Flow from each node to the exterior of the finite sample, counted
        in the divergence.  This is how a flux to infinity is represented
        on a finite box.
    """

    def __init__(self, values, source: int, sink=(), outflow=None):
        mat = sparse.csr_array(values, dtype=float)
        upper = sparse.triu(mat, k=1)
        lower = sparse.tril(mat, k=-1)
        if lower.nnz and upper.nnz:
            if abs(upper + lower.T).max() > 1e-12 * max(1.0, abs(upper).max()):
                raise ValueError("flux values are not antisymmetric")
        elif lower.nnz:
            upper = -lower.T
        upper = sparse.csr_array(upper)
        self.values = sparse.csr_array(upper - upper.T)
        self.node_count = mat.shape[0]
        self.source = int(source)
        self.sink = tuple(sorted(int(s) for s in sink))
        self.outflow = np.zeros(self.node_count) if outflow is None else np.asarray(outflow, dtype=float)

    def divergence(self) -> np.ndarray:
        """Net out-flow ``sum_y f(x, y)`` plus the exterior out-flow."""
        return np.asarray(self.values.sum(axis=1)).ravel() + self.outflow

    def check(self, atol: float = 1e-12) -> float:
        """Largest violation of the unit-flux constraints.

        Divergence one at the source, zero off source and sink, and
        non-positive on the sink.
        """
        div = self.divergence()
        bad = abs(div[self.source] - 1.0)
        mask = np.ones(self.node_count, dtype=bool)
        mask[self.source] = False
        mask[list(self.sink)] = False
        if mask.any():
            bad = max(bad, float(np.abs(div[mask]).max()))
        if self.sink:
            bad = max(bad, float(np.maximum(div[list(self.sink)], 0).max()))
        return float(bad)

    def energy(self, resistance) -> float:
        """``1/2 sum f(x, y)^2 r(x, y)`` over edges carrying flow.

        ``resistance(i, j)`` takes index arrays and returns resistances.
        The exterior out-flow is not included.
        """
        m = sparse.triu(self.values, k=1).tocoo()
        if m.nnz == 0:
            return 0.0
        return float(np.sum(m.data ** 2 * resistance(m.row, m.col)))

    def edges(self):
        m = sparse.triu(self.values, k=1).tocoo()
        return m.row, m.col, m.data


@dataclass(frozen=True)
class NearestPointMap:
    """``assignment[k]`` is the index in ``target`` closest to ``source.points[k]``.

    ``ties`` flags the sources whose nearest target was not unique.
    """

    source: PointSet
    target: PointSet
    assignment: np.ndarray
    ties: np.ndarray = field(repr=False)


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    sq = np.zeros(np.broadcast_shapes(a.shape[:-1], b.shape[:-1]))
    for k in range(a.shape[-1]):
        diff = a[..., k] - b[..., k]
        sq = sq + diff * diff
    return sq


def nearest_point_map(S0: PointSet, S: PointSet) -> NearestPointMap:
    """Nearest point of ``S`` for every point of ``S0``.

    Candidates within a relative ``1e-9`` of the k-d tree distance are
    compared exactly on squared distances; equal distances go to the
    lexicographically lowest point, which is the lowest index because
    point sets are sorted.
    """
    if len(S) == 0:
        raise ValueError("target set is empty")
    tree = cKDTree(S.points)
    dist, _ = tree.query(S0.points)
    assignment = np.empty(len(S0), dtype=np.int64)
    ties = np.zeros(len(S0), dtype=bool)
    radius = dist * (1 + 1e-9) + 1e-12
    for k, cand in enumerate(tree.query_ball_point(S0.points, radius)):
        cand = np.sort(np.asarray(cand, dtype=np.int64))
        sq = _sqdist(S0.points[k][None, :], S.points[cand])
        best = sq.min()
        hit = cand[sq == best]
        assignment[k] = hit[0]
        ties[k] = len(hit) > 1
    return NearestPointMap(S0, S, assignment, ties)


def nearest_point_map_bruteforce(S0: PointSet, S: PointSet) -> NearestPointMap:
    """Reference implementation scanning all pairs."""
    if len(S) == 0:
        raise ValueError("target set is empty")
    assignment = np.empty(len(S0), dtype=np.int64)
    ties = np.zeros(len(S0), dtype=bool)
    for k, x in enumerate(S0.points):
        sq = _sqdist(x[None, :], S.points)
        hit = np.flatnonzero(sq == sq.min())
        assignment[k] = hit[0]
        ties[k] = len(hit) > 1
    return NearestPointMap(S0, S, assignment, ties)


@dataclass(frozen=True)
class CellPartition:
    """Cells ``V_u`` (indices into the source set) of every target point ``u``."""

    members: tuple
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def cells(nmap: NearestPointMap) -> CellPartition:
    n_target = len(nmap.target)
    order = np.argsort(nmap.assignment, kind="stable")
    counts = np.bincount(nmap.assignment, minlength=n_target)
    splits = np.split(order, np.cumsum(counts)[:-1])
    return CellPartition(tuple(splits), counts)


def lift_flux(f: Flux, nmap: NearestPointMap, partition: CellPartition | None = None) -> Flux:
    """Transport ``f`` on the source set to ``theta(u, v) = sum_{V_u x V_v} f``.

    The new source is the image of ``f.source``; sinks map to the cells
    containing them and the exterior out-flow is collected per cell.
    """
    if f.node_count != len(nmap.source):
        raise ValueError("flux and map live on different sets")
    n = len(nmap.target)
    a = nmap.assignment
    rows, cols, vals = f.edges()
    keep = a[rows] != a[cols]
    theta = sparse.coo_array((vals[keep], (a[rows[keep]], a[cols[keep]])), shape=(n, n)).tocsr()
    theta = sparse.csr_array(theta - theta.T)
    # Flux() antisymmetrizes from the upper triangle; pass the full matrix's upper part
    outflow = np.bincount(a, weights=f.outflow, minlength=n)
    sink = sorted({int(a[s]) for s in f.sink})
    lifted = Flux(sparse.triu(theta, k=1), int(a[f.source]), sink, outflow)
    return lifted


def lift_energy_bound(f: Flux, theta: Flux, nmap: NearestPointMap, partition: CellPartition,
                      kernel: JumpKernel):
    """Both sides of the Schwarz bound for a lifted flux.

    Returns
    -------
    energy : float
        ``1/2 sum theta(u, v)^2 r(u, v)`` on the target set.
    bound : float
        ``1/2 sum f(x, y)^2 N(phi x) N(phi y) r(phi x, phi y)`` over pairs in
        different cells.
    """
    pts = nmap.target.points

    def resistance(i, j):
        return 1.0 / kernel(np.sqrt(_sqdist(pts[i], pts[j])))

    energy = theta.energy(resistance)
    rows, cols, vals = f.edges()
    a = nmap.assignment
    u, v = a[rows], a[cols]
    keep = u != v
    weight = partition.counts[u[keep]] * partition.counts[v[keep]]
    bound = float(np.sum(vals[keep] ** 2 * weight * resistance(u[keep], v[keep])))
    return energy, bound


@dataclass(frozen=True)
class PushdownResult:
    """Dirichlet energy of the pulled back potential and the cell aggregate.

    ``points`` is the merged set ``S u S0``; ``g`` the potential on it and
    ``pullback[k]`` the reference point carrying merged point ``k``.
    """

    energy: float
    aggregate: float
    points: PointSet
    g: np.ndarray
    pullback: np.ndarray
    source: int
    sink: np.ndarray


def pushdown_potential(psi: np.ndarray, S0: PointSet, S: PointSet, kernel: JumpKernel,
                       n: float, origin=None) -> PushdownResult:
    """Upper bound on the conductance of ``S u S0`` from a potential on ``S0``.

    ``psi`` must equal one at ``origin`` (default: the point of ``S0`` at
    zero) and vanish on ``S0`` outside ``[-n, n]^d``.  The potential
    ``g(u) = psi(phi'(u))`` uses the nearest reference point ``phi'(u)``.
    Its Dirichlet energy bounds the conductance between the origin and the
    merged points whose reference point lies outside the box.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (len(S0),):
        raise ValueError("psi must give one value per reference point")
    o = S0.index_of(np.zeros(S0.dim) if origin is None else origin)
    outside = np.abs(S0.points).max(axis=1) > n
    if psi[o] != 1.0 or np.any(psi[outside] != 0.0):
        raise ValueError("psi must be 1 at the origin and 0 outside the box")
    if np.any(psi < 0) or np.any(psi > 1):
        raise ValueError("psi values must lie in [0, 1]")
    merged = np.vstack([S0.points, S.points]) if len(S) else S0.points
    merged = np.unique(merged, axis=0)
    tilde = PointSet(S0.dim, merged, max(S0.box_half_width, S.box_half_width))
    back = nearest_point_map(tilde, S0).assignment
    g = psi[back]
    coords = tilde.points
    energy = 0.0
    for start in range(0, len(coords), 1024):
        rows = slice(start, min(start + 1024, len(coords)))
        dist = np.sqrt(_sqdist(coords[rows, None, :], coords[None, :, :]))
        with np.errstate(divide="ignore"):
            c = np.where(dist > 0, kernel(np.where(dist > 0, dist, 1.0)), 0.0)
        energy += float(np.sum(c * (g[rows, None] - g[None, :]) ** 2))
    energy *= 0.5
    # aggregate over reference pairs: sum (psi_x - psi_y)^2 sum_{V'_x x V'_y} phi
    m = len(S0)
    agg_c = np.zeros((m, m))
    for start in range(0, len(coords), 1024):
        rows = np.arange(start, min(start + 1024, len(coords)))
        dist = np.sqrt(_sqdist(coords[rows, None, :], coords[None, :, :]))
        with np.errstate(divide="ignore"):
            c = np.where(dist > 0, kernel(np.where(dist > 0, dist, 1.0)), 0.0)
        block = np.zeros((len(rows), m))
        np.add.at(block.T, back, c.T)
        np.add.at(agg_c, back[rows], block)
    aggregate = 0.5 * float(np.sum(agg_c * (psi[:, None] - psi[None, :]) ** 2))
    src = tilde.index_of(S0.points[o])
    sink = np.flatnonzero(outside[back])
    return PushdownResult(energy, aggregate, tilde, g, back, src, sink)


@dataclass(frozen=True)
class BallProbe:
    """Outcome of the ball-event check at ``(x, t)``.

    ``event`` is whether all ``2d + 1`` balls meet the set.  The two
    conclusions are only meaningful when it holds; ``cell_radius`` is the
    largest distance from ``x`` to the Voronoi cell of the nearest point.
    """

    event: bool
    nearest_within: bool
    cell_within: bool
    nearest: int
    cell_radius: float

    @property
    def violation(self) -> bool:
        return self.event and not (self.nearest_within and self.cell_within)


def _cell_radius(points: np.ndarray, u: int, x: np.ndarray) -> float:
    d = points.shape[1]
    if d == 1:
        p = points[:, 0]
        lo = -np.inf if u == 0 else 0.5 * (p[u - 1] + p[u])
        hi = np.inf if u == len(p) - 1 else 0.5 * (p[u] + p[u + 1])
        return float(max(abs(lo - x[0]), abs(hi - x[0])))
    if len(points) <= d + 1:
        return float("inf")
    vor = Voronoi(points)
    region = vor.regions[vor.point_region[u]]
    if not region or -1 in region:
        return float("inf")
    verts = vor.vertices[region]
    return float(np.sqrt(_sqdist(verts, x[None, :])).max())


def ball_event_probe(S: PointSet, x, t: float) -> BallProbe:
    """Check the ball event around ``x`` and its two consequences.

    The event asks that ``B(x, t)`` and the balls ``B(x +- 3 sqrt(d) t e_i, t)``
    all contain points of ``S``.  Under it, the nearest point ``u`` of ``x``
    must satisfy ``|u - x| < t`` and the Voronoi cell of ``u`` must lie
    within distance ``9 d sqrt(d) t`` of ``x``.
    """
    x = np.asarray(x, dtype=float).reshape(S.dim)
    d = S.dim
    pts = S.points
    if len(pts) == 0:
        return BallProbe(False, False, False, -1, float("inf"))
    centers = [x]
    for i in range(d):
        e = np.zeros(d)
        e[i] = 3.0 * np.sqrt(d) * t
        centers += [x + e, x - e]
    if np.any(np.abs(np.array(centers)).max(axis=1) + t > S.box_half_width):
        raise ValueError("balls do not fit inside the sampled box")
    event = all(np.any(_sqdist(pts, c[None, :]) < t * t) for c in centers)
    sq = _sqdist(pts, x[None, :])
    u = int(np.flatnonzero(sq == sq.min())[0])
    near = bool(np.sqrt(sq[u]) < t)
    radius = _cell_radius(pts, u, x)
    return BallProbe(bool(event), near, bool(radius <= 9 * d * np.sqrt(d) * t), u, radius)
