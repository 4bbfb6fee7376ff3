"""Effective resistance to a shorted exterior and its certificates.

The two-terminal problem is solved on the grounded Laplacian: after the
sink set is shorted into one node, its row and column are deleted and
``L v = e_source`` is solved, giving ``R = v[source]``.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy import integrate, sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import cg
from scipy.spatial import cKDTree
from scipy.special import expi

from ._rng import stream
from .network import JumpKernel, ResistorNetwork, _distances
from .pointproc import PointSet

__all__ = [
    "SolverError",
    "ResistanceResult",
    "effective_resistance",
    "grounded_solve",
    "ProfileEntry",
    "box_resistance_profile",
    "median_profile",
    "dirichlet_upper_conductance",
    "thomson_upper_resistance",
    "TrialFunction",
    "trial_function",
    "trial_increment_check",
    "mc_visits",
    "ScalingFit",
    "fit_growth",
    "DENSE_THRESHOLD",
]

DENSE_THRESHOLD = 2000
DEFAULT_TOL = 1e-10


class SolverError(RuntimeError):
    """Iterative solve did not reach the tolerance within its budget."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass
class ResistanceResult:
    """Effective resistance between ``source`` and the shorted ``sink``."""

    source: int
    sink: tuple
    R: float
    residual: float
    method: str
    potential: np.ndarray | None = field(default=None, repr=False)

    @property
    def conductance(self) -> float:
        return 1.0 / self.R


def _pcg(L, b, tol, budget):
    diag = L.diagonal()
    inv = 1.0 / diag
    precond = sparse.linalg.LinearOperator(L.shape, matvec=lambda r: inv * r, dtype=float)
    x, info = cg(L, b, rtol=tol, atol=0.0, maxiter=budget, M=precond)
    residual = float(np.linalg.norm(b - L @ x) / np.linalg.norm(b))
    if info != 0 or residual > 10 * tol:
        raise SolverError(f"PCG did not converge in {budget} iterations", residual)
    return x, residual


def grounded_solve(lap, b, *, tol=DEFAULT_TOL, method="auto"):
    """Solve the SPD grounded Laplacian system ``lap @ x = b``.

    ``method`` is ``"dense_solve"``, ``"cg"`` or ``"auto"``.  Automatic
    selection uses a dense Cholesky solve for dense input or fewer than
    :data:`DENSE_THRESHOLD` unknowns and Jacobi-preconditioned CG otherwise,
    with an iteration budget of ``10 sqrt(N)``.

    Returns
    -------
    x : ndarray
    residual : float
        Relative residual ``|b - lap x| / |b|``.
    method : str
    """
    n = lap.shape[0]
    if method == "auto":
        method = "dense_solve" if (not sparse.issparse(lap) or n < DENSE_THRESHOLD) else "cg"
    if method == "dense_solve":
        dense = lap.toarray() if sparse.issparse(lap) else lap
        x = scipy.linalg.solve(dense, b, assume_a="pos", check_finite=False)
        residual = float(np.linalg.norm(b - dense @ x) / np.linalg.norm(b))
        return x, residual, method
    if method != "cg":
        raise ValueError(f"unknown method {method!r}")
    mat = lap if sparse.issparse(lap) else sparse.csr_array(lap)
    budget = max(1, int(math.ceil(10 * math.sqrt(n))))
    x, residual = _pcg(mat, b, tol, budget)
    return x, residual, method


def _reachable(mat, source):
    graph = mat if sparse.issparse(mat) else sparse.csr_array(mat)
    order = csgraph.breadth_first_order(graph, source, directed=False, return_predecessors=False)
    mask = np.zeros(mat.shape[0], dtype=bool)
    mask[order] = True
    return mask


def _two_terminal(cond, sink_cond, source, *, tol, method):
    """Resistance from ``source`` to a sink joined to node ``i`` by ``sink_cond[i]``.

    ``cond`` holds the conductances among non-sink nodes.  Nodes not
    connected to the source through ``cond`` are irrelevant and dropped.
    """
    keep = _reachable(cond, source)
    if not keep.all():
        idx = np.flatnonzero(keep)
        cond = cond[idx][:, idx] if not sparse.issparse(cond) else cond[idx][:, idx]
        sink_cond = sink_cond[idx]
        source = int(np.searchsorted(idx, source))
    else:
        idx = None
    if not np.any(sink_cond > 0):
        raise ValueError("sink is not connected to the source")
    if sparse.issparse(cond):
        w = np.asarray(cond.sum(axis=1)).ravel() + sink_cond
        lap = (sparse.diags_array(w) - cond).tocsr()
    else:
        lap = -cond
        lap[np.diag_indices_from(lap)] = cond.sum(axis=1) + sink_cond
    b = np.zeros(lap.shape[0])
    b[source] = 1.0
    v, residual, used = grounded_solve(lap, b, tol=tol, method=method)
    R = float(v[source])
    potential = 1.0 - v / R
    if idx is not None:
        full = np.ones(len(keep))
        full[idx] = potential
        potential = full
    return R, residual, used, potential


def effective_resistance(network: ResistorNetwork, source: int, sink_group, tol: float = DEFAULT_TOL,
                         method: str = "auto") -> ResistanceResult:
    """Effective resistance between ``source`` and the shorted ``sink_group``.

    The returned ``potential`` is the minimizer of the Dirichlet energy
    with value 0 at the source and 1 on the sink, indexed like the network
    nodes.
    """
    sink = np.unique(np.asarray(list(sink_group), dtype=np.int64))
    if sink.size == 0:
        raise ValueError("sink group is empty")
    if source in set(sink.tolist()):
        raise ValueError("source lies in the sink group")
    n = network.node_count
    rest = np.setdiff1d(np.arange(n), sink)
    mat = network.matrix()
    if sparse.issparse(mat):
        mat = sparse.csr_array(mat)
        cond = mat[rest][:, rest]
        sink_cond = np.asarray(mat[rest][:, sink].sum(axis=1)).ravel()
    else:
        cond = mat[np.ix_(rest, rest)]
        sink_cond = mat[np.ix_(rest, sink)].sum(axis=1)
    src = int(np.searchsorted(rest, source))
    R, residual, used, pot = _two_terminal(cond, sink_cond, src, tol=tol, method=method)
    potential = np.ones(n)
    potential[rest] = pot
    return ResistanceResult(int(source), tuple(sink.tolist()), R, residual, used, potential)


class ProfileEntry(NamedTuple):
    n: float
    R: float
    residual: float
    method: str


def _exterior_sums(coords_in, coords_out, kernel, rho_cut, block=1024):
    """Total conductance from each interior point to the sampled exterior."""
    out = np.zeros(len(coords_in))
    if len(coords_out) == 0:
        return out
    if rho_cut is not None:
        pairs = cKDTree(coords_in).sparse_distance_matrix(cKDTree(coords_out), rho_cut,
                                                          output_type="coo_matrix")
        diff = coords_in[pairs.row] - coords_out[pairs.col]
        dist = np.sqrt(np.sum(diff * diff, axis=1))
        return np.bincount(pairs.row, weights=kernel(dist), minlength=len(coords_in))
    for start in range(0, len(coords_in), block):
        rows = np.arange(start, min(start + block, len(coords_in)))
        both = np.vstack([coords_in[rows], coords_out])
        dist = _distances(both, np.arange(len(rows)))[:, len(rows):]
        out[rows] = kernel(dist).sum(axis=1)
    return out


def box_resistance_profile(points: PointSet, kernel: JumpKernel, x: int, n_list, *,
                           rho_cut: float | None = None, tol: float = DEFAULT_TOL,
                           method: str = "auto", node_budget: int | None = None):
    """Resistance from point ``x`` to the points outside ``[-n, n]^d``.

    For each ``n`` the exterior points of the sample are shorted into one
    sink.  Values of ``n`` whose exterior is empty are skipped with a
    warning.

    Parameters
    ----------
    x : int
        Index of the source point in ``points``; it must lie in every box.
    rho_cut : float, optional
        Use a sparse network without edges longer than ``rho_cut``.
    node_budget : int, optional
        Largest interior handled with the complete dense network.  Defaults
        to :data:`rwre.network.DEFAULT_NODE_BUDGET`.

    Returns
    -------
    list of ProfileEntry
        ``(n, R, residual, method)`` for each retained ``n``.
    """
    from .network import DEFAULT_NODE_BUDGET, build_network

    budget = DEFAULT_NODE_BUDGET if node_budget is None else node_budget
    n_list = [float(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    coords = points.points
    sup = np.abs(coords).max(axis=1)
    if sup[x] > n_list[0]:
        raise ValueError("source must lie inside the smallest box")
    retained = [n for n in n_list if np.any(sup > n)]
    for n in n_list:
        if n not in retained:
            warnings.warn(f"exterior of [-{n:g}, {n:g}]^d is empty in the sample; skipped",
                          RuntimeWarning, stacklevel=2)
    if not retained:
        return []
    n_top = retained[-1]
    inside = np.flatnonzero(sup <= n_top)
    outside = np.flatnonzero(sup > n_top)
    if rho_cut is None and len(inside) > budget:
        raise ValueError(f"{len(inside)} interior nodes exceed the dense budget {budget}; give rho_cut")
    sub = PointSet(points.dim, coords[inside], points.box_half_width)
    net = build_network(sub, kernel, rho_cut,
                        node_budget=budget if rho_cut is not None else max(budget, len(inside)))
    cond_all = net.matrix()
    base_sink = _exterior_sums(coords[inside], coords[outside], kernel, rho_cut)
    sup_in = sup[inside]
    src_all = int(np.searchsorted(inside, x))
    results = []
    for n in retained:
        keep = np.flatnonzero(sup_in <= n)
        drop = np.flatnonzero(sup_in > n)
        if sparse.issparse(cond_all):
            cond_all = sparse.csr_array(cond_all)
            cond = cond_all[keep][:, keep]
            extra = np.asarray(cond_all[keep][:, drop].sum(axis=1)).ravel() if drop.size else 0.0
        else:
            cond = cond_all[np.ix_(keep, keep)] if drop.size else cond_all.copy()
            extra = cond_all[np.ix_(keep, drop)].sum(axis=1) if drop.size else 0.0
        sink_cond = base_sink[keep] + extra
        src = int(np.searchsorted(keep, src_all))
        R, residual, used, _ = _two_terminal(cond, sink_cond, src, tol=tol, method=method)
        results.append(ProfileEntry(n, R, residual, used))
        del cond
    return results


def median_profile(profiles):
    """Median of ``R`` across per-seed profiles sharing the same ``n`` grid."""
    grids = [tuple(e[0] for e in p) for p in profiles]
    if len(set(grids)) != 1:
        raise ValueError("profiles must share the same n values")
    values = np.array([[e[1] for e in p] for p in profiles])
    return [(n, float(r)) for n, r in zip(grids[0], np.median(values, axis=0))]


def _energy(network: ResistorNetwork, h: np.ndarray) -> float:
    mat = network.matrix()
    if sparse.issparse(mat):
        m = sparse.triu(sparse.csr_array(mat), k=1).tocoo()
        return float(np.sum(m.data * (h[m.row] - h[m.col]) ** 2))
    total = 0.0
    for start in range(0, len(h), 1024):
        rows = slice(start, min(start + 1024, len(h)))
        total += float(np.sum(mat[rows] * (h[rows, None] - h[None, :]) ** 2))
    return 0.5 * total


def _as_node_values(network, trial):
    if callable(trial):
        return np.array([trial(i) for i in range(network.node_count)], dtype=float)
    h = np.asarray(trial, dtype=float)
    if h.shape != (network.node_count,):
        raise ValueError("trial must give one value per node")
    return h


def dirichlet_upper_conductance(network: ResistorNetwork, trial, source: int, sink_group) -> float:
    """Dirichlet energy ``1/2 sum c(y, z)(h(y) - h(z))^2`` of a trial potential.

    The trial must vanish at ``source`` and equal one on ``sink_group``.
    Its energy bounds the effective conductance from above, so the inverse
    is a lower bound on the resistance.
    """
    h = _as_node_values(network, trial)
    sink = np.asarray(list(sink_group), dtype=np.int64)
    if h[source] != 0.0 or np.any(h[sink] != 1.0):
        raise ValueError("trial must be 0 at the source and 1 on the sink")
    if np.any(h < 0) or np.any(h > 1):
        raise ValueError("trial values must lie in [0, 1]")
    return _energy(network, h)


def thomson_upper_resistance(network: ResistorNetwork, flow, source: int, sink_group,
                             atol: float = 1e-9) -> float:
    """Energy ``1/2 sum f(y, z)^2 / c(y, z)`` of a unit flow from ``source``.

    ``flow`` is an antisymmetric node-by-node array.  It must have net
    out-flow one at the source, zero at every other non-sink node, and
    vanish on edges of zero conductance.  Its energy bounds the effective
    resistance from above.
    """
    f = np.asarray(flow.toarray() if sparse.issparse(flow) else flow, dtype=float)
    if not np.allclose(f, -f.T, atol=atol, rtol=0):
        raise ValueError("flow must be antisymmetric")
    div = f.sum(axis=1)
    sink = set(int(s) for s in sink_group)
    interior = [i for i in range(len(div)) if i != source and i not in sink]
    if abs(div[source] - 1.0) > atol or np.any(np.abs(div[interior]) > atol):
        raise ValueError("flow is not a unit flow from the source to the sink")
    c = network.to_dense()
    support = f != 0
    if np.any(support & (c <= 0)):
        raise ValueError("flow uses an edge of zero conductance")
    return 0.5 * float(np.sum(f[support] ** 2 / c[support]))


@dataclass(frozen=True)
class TrialFunction:
    """Tabulated ``f(k)`` and ``g(k)`` for ``k = 0..n_max``.

    ``g(t) = 1 / (1 + int_0^t min(1, s^(1-alpha)) ds)`` and ``f`` is its
    primitive with ``f(0) = 0``.  ``error`` bounds the relative quadrature
    error of the table.
    """

    alpha: float
    f: np.ndarray
    g: np.ndarray
    error: float

    @property
    def n_max(self) -> int:
        return len(self.f) - 1

    def g_eval(self, t):
        return _g(self.alpha, np.asarray(t, dtype=float))

    def f_eval(self, x):
        """``f`` at real arguments ``0 <= x <= n_max``."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(x > self.n_max):
            raise ValueError("argument outside the tabulated range")
        k = np.floor(x).astype(np.int64)
        frac = x - k
        nodes, weights = np.polynomial.legendre.leggauss(20)
        t = k[..., None] + frac[..., None] * (nodes + 1.0) / 2.0
        part = (frac[..., None] / 2.0 * weights * _g(self.alpha, t)).sum(axis=-1)
        return self.f[k] + part

    def radial_trial(self, points: np.ndarray, n: float) -> np.ndarray:
        """Potential ``min(1, f(|x|_inf) / f(n))`` for points given as coordinates."""
        r = np.minimum(np.abs(np.atleast_2d(points)).max(axis=1), n)
        return np.minimum(1.0, self.f_eval(r) / self.f_eval(n))


def _inner_integral(alpha, t):
    if alpha == 2:
        tail = np.log(np.maximum(t, 1.0))
    else:
        tail = (np.maximum(t, 1.0) ** (2.0 - alpha) - 1.0) / (2.0 - alpha)
    return np.where(t <= 1.0, t, 1.0 + tail)


def _g(alpha, t):
    return 1.0 / (1.0 + _inner_integral(alpha, t))


def trial_function(alpha: float, n_max: int, rtol: float = 1e-8) -> TrialFunction:
    """Tabulate the resistance trial function on ``0..n_max``.

    ``g`` is evaluated from its closed form and ``f`` by composite
    Gauss-Legendre quadrature over unit intervals, where ``g`` is smooth.
    The per-interval error is estimated by comparing 10- and 20-point
    rules; a :class:`RuntimeError` is raised if the relative error of the
    table exceeds ``rtol``.
    """
    if alpha < 1:
        raise NotImplementedError("trial function is defined for alpha >= 1")
    n_max = int(n_max)
    k = np.arange(n_max, dtype=float)
    pieces = {}
    for order in (10, 20):
        nodes, weights = np.polynomial.legendre.leggauss(order)
        acc = np.zeros(n_max)
        for node, weight in zip(nodes, weights):
            acc += 0.5 * weight * _g(alpha, k + 0.5 * (node + 1.0))
        pieces[order] = acc
    f = np.concatenate([[0.0], np.cumsum(pieces[20])])
    err_abs = np.concatenate([[0.0], np.cumsum(np.abs(pieces[20] - pieces[10]))])
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(f > 0, err_abs / f, 0.0)
    error = float(rel.max()) if n_max else 0.0
    if error > rtol:
        raise RuntimeError(f"quadrature error {error:.2e} exceeds {rtol:.0e}")
    g = _g(alpha, np.arange(n_max + 1, dtype=float))
    f.setflags(write=False)
    g.setflags(write=False)
    return TrialFunction(float(alpha), f, g, error)


def _f_majorant(alpha, x0, f0):
    """Upper bound for ``f`` on ``[x0, inf)`` given ``f(x0) = f0`` (``x0 >= 1``)."""
    if alpha == 1:
        return lambda x: np.log1p(x)
    if alpha == 2:
        c = math.exp(-2.0)
        return lambda x: f0 + c * (expi(2.0 + np.log(x)) - expi(2.0 + math.log(x0)))
    # 1/g(t) = (t^(2-a) + 3 - 2a)/(2-a) for t >= 1
    slack = max(0.0, 2 * alpha - 3) * x0 ** (alpha - 2)
    kappa = 1.0 / (1.0 - slack)
    coef = kappa * (2.0 - alpha) / (alpha - 1.0)
    return lambda x: f0 + coef * (x ** (alpha - 1.0) - x0 ** (alpha - 1.0))


def _increment_tail(alpha, i, j_max, major, fi, span=600.0):
    """Bound on ``sum_{k > j_max} k^(-1-alpha) (f_{i+k} - f_i)^2``.

    With ``t = e^L`` the bound ``int t^(-1-alpha) (F(i+t+1) - f_i)^2 dt``
    becomes ``int (F - f_i)^2 t^(-alpha) dL``, integrated numerically over
    ``span`` units of ``L`` and closed analytically beyond.
    """
    lo = math.log(j_max)
    hi = lo + span

    def integrand(L):
        t = math.exp(L)
        return ((major(i + t + 1.0) - fi) * t ** (-alpha / 2.0)) ** 2

    body, _ = integrate.quad(integrand, lo, hi, limit=400)
    if alpha == 1:
        # (log(1 + x))^2 / t <= (L + 1)^2 e^(-L) for t >= e^hi >> i
        rest = (hi * hi + 4 * hi + 5) * math.exp(-hi)
    elif alpha == 2:
        # F(x) / t <= 1.01 / (L + 2) once L is large
        rest = 1.0201 / (hi + 2.0)
    else:
        coef = (2.0 - alpha) / (alpha - 1.0) / (1.0 - max(0.0, 2 * alpha - 3) * j_max ** (alpha - 2))
        rest = (1.01 * coef) ** 2 * math.exp((alpha - 2.0) * hi) / (2.0 - alpha)
    return body + rest


class IncrementRow(NamedTuple):
    i: int
    X: float
    ratio: float
    tail: float


def trial_increment_check(alpha: float, i_list, j_max: int = 10**6, trial: TrialFunction | None = None):
    """Weighted increment sums ``X_i = sum_{j>i} (j-i)^(-1-alpha) (f_j - f_i)^2``.

    The sum over ``j - i <= j_max`` is explicit; the remainder is bounded by
    ``int_{j_max}^inf t^(-1-alpha) (F(i + t + 1) - f_i)^2 dt`` with ``F`` a
    closed-form majorant of ``f``.  ``X`` includes that bound, which is also
    reported as ``tail``.

    Returns
    -------
    list of IncrementRow
        ``(i, X_i, X_i / g(i), tail)``.
    """
    if not 1 <= alpha <= 2:
        raise ValueError("alpha must lie in [1, 2]")
    i_list = [int(i) for i in i_list]
    top = max(i_list) + j_max
    tf = trial if trial is not None and trial.n_max >= top else trial_function(alpha, top)
    k = np.arange(1, j_max + 1, dtype=float)
    weight = k ** (-1.0 - alpha)
    rows = []
    for i in i_list:
        inc = tf.f[i + 1:i + j_max + 1] - tf.f[i]
        head = float(np.sum(weight * inc * inc))
        x0 = float(i + j_max)
        major = _f_majorant(alpha, x0, float(tf.f[i + j_max]))
        tail = _increment_tail(alpha, i, j_max, major, float(tf.f[i]))
        X = head + tail
        rows.append(IncrementRow(i, X, X / float(tf.g[i]), tail))
    return rows


def mc_visits(network: ResistorNetwork, source: int, sink_group, walkers: int, seed,
              chunk: int = 4096, max_steps: int = 10**7):
    """Monte Carlo count of visits to ``source`` before the walk enters the sink.

    The walk jumps with ``p(x, y) = c(x, y) / w(x)``.  The visit at time
    zero is counted, so ``mean / w(source)`` estimates the effective
    resistance.

    Returns
    -------
    (mean, standard_error)
    """
    if walkers < 1:
        raise ValueError("walkers must be >= 1")
    sink_mask = np.zeros(network.node_count, dtype=bool)
    sink_mask[np.asarray(list(sink_group), dtype=np.int64)] = True
    c = network.to_dense()
    cum = np.cumsum(c / c.sum(axis=1, keepdims=True), axis=1)
    # pin everything from the last positive entry on to exactly one, so u < 1
    # can never select a node of zero transition probability
    last = c.shape[1] - 1 - np.argmax((c > 0)[:, ::-1], axis=1)
    cum[np.arange(c.shape[1])[None, :] >= last[:, None]] = 1.0
    rng = stream(seed, "mc_visits")
    counts = np.empty(walkers)
    for start in range(0, walkers, chunk):
        m = min(chunk, walkers - start)
        pos = np.full(m, source)
        visits = np.ones(m)
        alive = np.arange(m)
        steps = 0
        while alive.size:
            u = rng.random(alive.size)
            nxt = (cum[pos[alive]] <= u[:, None]).sum(axis=1)
            pos[alive] = nxt
            visits[alive] += nxt == source
            alive = alive[~sink_mask[nxt]]
            steps += 1
            if steps > max_steps:
                raise RuntimeError("walk did not reach the sink")
        counts[start:start + m] = visits
    mean = float(counts.mean())
    se = float(counts.std(ddof=1) / math.sqrt(walkers)) if walkers > 1 else float("nan")
    return mean, se


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares growth law fitted on transformed axes."""

    model: str
    slope: float
    intercept: float
    residual: float
    n_range: tuple

    @property
    def exponent(self) -> float:
        return self.slope


_MODELS = {
    # model: (x transform, y transform)
    "power": (np.log, lambda n, r: np.log(r)),
    "log": (np.log, lambda n, r: r),
    "n_over_log": (lambda n: n, lambda n, r: r * np.log(n)),
    "n_over_sqrtlog": (lambda n: n, lambda n, r: r * np.sqrt(np.log(n))),
    "loglog": (lambda n: np.log(np.log(n)), lambda n, r: r),
}


def fit_growth(profile, model: str) -> ScalingFit:
    """Fit a growth law to ``(n, R_n)`` pairs.

    ``power`` regresses ``log R`` on ``log n``; ``log`` regresses ``R`` on
    ``log n``; ``n_over_log`` regresses ``R log n`` on ``n``;
    ``n_over_sqrtlog`` regresses ``R sqrt(log n)`` on ``n``; ``loglog``
    regresses ``R`` on ``log log n``.  At least four points spanning two
    octaves are required.
    """
    if model not in _MODELS:
        raise ValueError(f"unknown model {model!r}")
    data = np.array([(float(p[0]), float(p[1])) for p in profile])
    if len(data) < 4:
        raise ValueError("need at least four profile points")
    n, r = data[:, 0], data[:, 1]
    if np.any(r <= 0):
        raise ValueError("resistance values must be positive")
    if n.min() <= 1 or n.max() / n.min() < 4:
        raise ValueError("profile must span at least two octaves of n > 1")
    fx, fy = _MODELS[model]
    x, y = fx(n), fy(n, r)
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    residual = float(np.linalg.norm(design @ coef - y))
    return ScalingFit(model, float(coef[0]), float(coef[1]), residual, (float(n.min()), float(n.max())))
