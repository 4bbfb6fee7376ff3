"""Long-range resistor networks on point sets.

Every pair of points ``x != y`` is joined by a resistor of conductance
``phi(|x - y|)``.  Networks are stored as dense arrays up to a node budget
and as sparse matrices when a cutoff radius is given.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree
from scipy.special import gamma

from .pointproc import PointSet

__all__ = [
    "JumpKernel",
    "poly_kernel",
    "stretched_exp_kernel",
    "kernel_eval",
    "ResistorNetwork",
    "CollapseMap",
    "build_network",
    "collapse",
    "DEFAULT_NODE_BUDGET",
]

DEFAULT_NODE_BUDGET = 5000


@dataclass(frozen=True)
class JumpKernel:
    """Conductance as a function of distance.

    ``kind`` is ``"poly"`` for ``min(1, t**-(dim + alpha))``, ``"stretched_exp"``
    for ``exp(-t**beta)`` or ``"custom"`` for a user supplied vectorized
    callable with values in ``(0, 1]``.
    """

    kind: str
    dim: int = 1
    alpha: float | None = None
    beta: float | None = None
    func: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind == "poly":
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("poly kernel needs alpha > 0")
        elif self.kind == "stretched_exp":
            if self.beta is None or self.beta <= 0:
                raise ValueError("stretched_exp kernel needs beta > 0")
        elif self.kind == "custom":
            if self.func is None:
                raise ValueError("custom kernel needs func")
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    @property
    def builtin(self) -> bool:
        return self.kind != "custom"

    @property
    def exponent(self) -> float:
        """Decay exponent ``dim + alpha`` of the polynomial kernel."""
        return self.dim + self.alpha

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "poly":
            with np.errstate(divide="ignore"):
                return np.minimum(1.0, t ** (-self.exponent))
        if self.kind == "stretched_exp":
            return np.exp(-(t ** self.beta))
        out = np.asarray(self.func(t), dtype=float)
        if np.any(out <= 0) or np.any(out > 1):
            raise ValueError("custom kernel values must lie in (0, 1]")
        return out

    def tail_mass(self, rho: float, intensity: float = 1.0) -> float:
        """Expected conductance beyond distance ``rho`` for a unit-intensity
        homogeneous configuration, ``intensity * int_{|z|>rho} phi(|z|) dz``."""
        surface = 2 * np.pi ** (self.dim / 2) / gamma(self.dim / 2)
        if self.kind == "poly":
            r = max(rho, 1.0)
            inner = 0.0 if rho >= 1 else surface * (1.0 - rho ** self.dim) / self.dim
            return intensity * (inner + surface * r ** (-self.alpha) / self.alpha)
        if self.kind == "stretched_exp":
            from scipy.special import gammaincc
            s = self.dim / self.beta
            return intensity * surface / self.beta * gamma(s) * gammaincc(s, rho ** self.beta)
        raise ValueError("tail mass is only available for built-in kernels")

    def in_integrable_class(self) -> bool:
        """Whether ``int_0^inf t^(d-1) phi(t) dt`` is finite (advisory)."""
        if self.kind == "poly":
            return self.alpha > 0
        if self.kind == "stretched_exp":
            return True
        raise ValueError("membership is only decided for built-in kernels")


def poly_kernel(dim: int, alpha: float) -> JumpKernel:
    return JumpKernel("poly", dim=dim, alpha=alpha)


def stretched_exp_kernel(dim: int, beta: float) -> JumpKernel:
    return JumpKernel("stretched_exp", dim=dim, beta=beta)


def kernel_eval(kernel: JumpKernel, t):
    """Kernel value at distance ``t > 0``.

    >>> float(kernel_eval(poly_kernel(1, 1.0), 2.0))
    0.25
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0)):
        raise ValueError("kernel is defined for t > 0 only")
    out = kernel(t_arr)
    return float(out) if out.ndim == 0 else out


def _distances(coords: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Euclidean distances from ``coords[rows]`` to all points.

    Summation over coordinates is written out so every entry is computed by
    the same sequence of floating point operations regardless of the block.
    """
    sq = np.zeros((len(rows), len(coords)))
    for k in range(coords.shape[1]):
        diff = coords[rows, k][:, None] - coords[None, :, k]
        sq += diff * diff
    return np.sqrt(sq)


def _kernel_rows(coords: np.ndarray, kernel: JumpKernel, rows: np.ndarray) -> np.ndarray:
    dist = _distances(coords, rows)
    dist[np.arange(len(rows)), rows] = np.inf
    out = kernel(dist)
    out[np.arange(len(rows)), rows] = 0.0
    return out


@dataclass(frozen=True)
class CollapseMap:
    """Result of shorting node groups.

    ``assignment[i]`` is the reduced node carrying old node ``i``;
    ``groups`` lists the shorted groups in the order they were given, and
    ``group_nodes[g]`` is the reduced index of group ``g``.
    """

    assignment: np.ndarray
    groups: tuple
    group_nodes: np.ndarray


class ResistorNetwork:
    """Weighted undirected graph with conductances ``c(i, j) >= 0``.

    Parameters
    ----------
    matrix : ndarray or scipy sparse array, optional
        Symmetric conductance matrix with zero diagonal.
    coords, kernel : optional
        Alternatively, points and kernel for lazy evaluation.  Lazy networks
        compute rows on demand and materialize to the exact same values as
        a materialized build.
    assignment : ndarray of int, optional
        Map from original point index to node index.  Defaults to identity.
    """

    def __init__(self, matrix=None, *, coords=None, kernel=None, assignment=None,
                 rho_cut=None, truncation=None):
        if (matrix is None) == (coords is None):
            raise ValueError("give either a matrix or coords and a kernel")
        self._matrix = matrix
        self._coords = None if coords is None else np.asarray(coords, dtype=float)
        self._kernel = kernel
        n = matrix.shape[0] if matrix is not None else len(self._coords)
        self.node_count = n
        self.assignment = np.arange(n) if assignment is None else np.asarray(assignment)
        self.rho_cut = rho_cut
        self.truncation = truncation
        self._weights = None

    @property
    def is_sparse(self) -> bool:
        return self._matrix is not None and sparse.issparse(self._matrix)

    @property
    def is_lazy(self) -> bool:
        return self._matrix is None

    def rows(self, idx) -> np.ndarray:
        """Dense conductance rows for the node indices ``idx``."""
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        if self.is_lazy:
            return _kernel_rows(self._coords, self._kernel, idx)
        if self.is_sparse:
            return self._matrix[idx].toarray()
        return np.array(self._matrix[idx])

    def conductance(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        return float(self.rows([i])[0, j])

    def to_dense(self, block: int = 512) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix.toarray() if self.is_sparse else np.array(self._matrix)
        out = np.empty((self.node_count, self.node_count))
        for start in range(0, self.node_count, block):
            rows = np.arange(start, min(start + block, self.node_count))
            out[rows] = _kernel_rows(self._coords, self._kernel, rows)
        return out

    def matrix(self):
        """Conductance matrix, dense ndarray or sparse CSR array."""
        if self._matrix is None:
            return self.to_dense()
        return self._matrix

    @property
    def weights(self) -> np.ndarray:
        """Row sums ``w(i) = sum_j c(i, j)``."""
        if self._weights is None:
            if self.is_lazy:
                w = np.empty(self.node_count)
                for start in range(0, self.node_count, 512):
                    rows = np.arange(start, min(start + 512, self.node_count))
                    w[rows] = _kernel_rows(self._coords, self._kernel, rows).sum(axis=1)
            else:
                w = np.asarray(self._matrix.sum(axis=1)).ravel()
            self._weights = w
        return self._weights

    def transition_rows(self, idx) -> np.ndarray:
        return self.rows(idx) / self.weights[np.atleast_1d(idx)][:, None]

    def edges(self):
        """Upper-triangular edge list ``(i, j, c)`` with ``c > 0``."""
        m = sparse.triu(sparse.csr_array(self.matrix()), k=1).tocoo()
        return m.row, m.col, m.data

    def __repr__(self):
        mode = "lazy" if self.is_lazy else ("sparse" if self.is_sparse else "dense")
        return f"ResistorNetwork(nodes={self.node_count}, mode={mode}, rho_cut={self.rho_cut})"


def build_network(points: PointSet, kernel: JumpKernel, rho_cut: float | None = None,
                  *, lazy: bool = False, node_budget: int = DEFAULT_NODE_BUDGET) -> ResistorNetwork:
    """Complete (or distance-truncated) resistor network on ``points``.

    Parameters
    ----------
    rho_cut : float, optional
        Drop every edge longer than ``rho_cut``.  The network then records
        ``truncation``, a dict with the largest dropped conductance per node
        (exact when the point count is within ``node_budget``, otherwise
        the homogeneous-intensity estimate from :meth:`JumpKernel.tail_mass`).
        Mandatory above ``node_budget`` nodes.
    lazy : bool
        Store points and kernel instead of the dense matrix.
    """
    n = len(points)
    if n < 2:
        raise ValueError("a network needs at least two points")
    coords = points.points
    if kernel.kind == "custom" and rho_cut is not None:
        raise ValueError("truncation requires a built-in decaying kernel")
    if kernel.dim != points.dim and kernel.kind == "poly":
        raise ValueError("kernel dimension does not match the point set")
    if np.any(np.all(np.diff(coords, axis=0) == 0, axis=1)):
        raise ValueError("duplicate points: conductance undefined at distance 0")
    if rho_cut is None:
        if n > node_budget:
            raise ValueError(f"{n} nodes exceed the dense budget {node_budget}; give rho_cut")
        if lazy:
            return ResistorNetwork(coords=coords, kernel=kernel)
        return ResistorNetwork(ResistorNetwork(coords=coords, kernel=kernel).to_dense())

    tree = cKDTree(coords)
    pairs = tree.query_pairs(rho_cut, output_type="ndarray")
    i, j = pairs[:, 0], pairs[:, 1]
    diff = coords[i] - coords[j]
    sq = np.zeros(len(i))
    for k in range(coords.shape[1]):
        sq += diff[:, k] * diff[:, k]
    c = kernel(np.sqrt(sq))
    mat = sparse.csr_array(
        (np.concatenate([c, c]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n)
    )
    mat.sum_duplicates()
    if n <= node_budget:
        full = ResistorNetwork(coords=coords, kernel=kernel).weights
        dropped = full - np.asarray(mat.sum(axis=1)).ravel()
        trunc = {"rho_cut": rho_cut, "dropped_max": float(dropped.max()),
                 "dropped_total": float(dropped.sum() / 2), "method": "exact"}
    else:
        volume = (2.0 * points.box_half_width) ** points.dim
        lam = n / volume if volume > 0 else 1.0
        trunc = {"rho_cut": rho_cut, "dropped_max": float(kernel.tail_mass(rho_cut, lam)),
                 "dropped_total": None, "method": "intensity_estimate"}
    return ResistorNetwork(mat, rho_cut=rho_cut, truncation=trunc)


def _aggregation(n: int, groups) -> CollapseMap:
    owner = np.full(n, -1)
    for g, members in enumerate(groups):
        members = np.asarray(list(members), dtype=np.int64)
        if members.size == 0:
            raise ValueError("empty collapse group")
        if members.min() < 0 or members.max() >= n:
            raise ValueError("group member out of range")
        if np.any(owner[members] >= 0) or len(np.unique(members)) != len(members):
            raise ValueError("collapse groups must be disjoint")
        owner[members] = g
    free = np.flatnonzero(owner < 0)
    assignment = np.empty(n, dtype=np.int64)
    assignment[free] = np.arange(len(free))
    group_nodes = len(free) + np.arange(len(groups))
    assignment[owner >= 0] = group_nodes[owner[owner >= 0]]
    return CollapseMap(assignment, tuple(tuple(int(v) for v in g) for g in groups), group_nodes)


def collapse(network: ResistorNetwork, groups) -> tuple[ResistorNetwork, CollapseMap]:
    """Short each group of nodes into a single node.

    Untouched nodes keep their relative order and come first; the group
    nodes follow in the order given.  Parallel conductances add and edges
    inside a group are discarded.
    """
    cmap = _aggregation(network.node_count, groups)
    m = cmap.group_nodes[-1] + 1 if len(groups) else network.node_count
    agg = sparse.csr_array(
        (np.ones(network.node_count), (np.arange(network.node_count), cmap.assignment)),
        shape=(network.node_count, m),
    )
    mat = network.matrix()
    if sparse.issparse(mat):
        reduced = (agg.T @ mat @ agg).tocsr()
        reduced = ((reduced + reduced.T) * 0.5).tocsr()
        reduced.setdiag(0.0)
        reduced.eliminate_zeros()
    else:
        half = np.asarray(agg.T @ mat)
        reduced = np.asarray(agg.T @ half.T)
        reduced = (reduced + reduced.T) * 0.5
        np.fill_diagonal(reduced, 0.0)
    out = ResistorNetwork(reduced, assignment=cmap.assignment[network.assignment],
                          rho_cut=network.rho_cut, truncation=network.truncation)
    return out, cmap
