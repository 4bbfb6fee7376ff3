"""Reduction of a long-range network to a nearest-neighbour chain.

Pipeline: short every unit cube into a lattice site carrying a
multiplicity, then (in d = 1) fold ``v`` and ``-v`` together or (in d = 2)
short each sup-norm shell, and finally split every long wire into a series
of unit steps.  Each stage can only lower the resistance from the origin
to the outside of a box, so the chain gives a lower bound

    R_n >= sum_{i=1}^{n+1} 1 / phi_i.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import fft

from ._rng import child_seeds, stream
from .network import JumpKernel, ResistorNetwork
from .pointproc import PointSet, ProcessSpec, sample

__all__ = [
    "CoarseNetwork",
    "ShellNetwork",
    "ChainNetwork",
    "coarse_constant",
    "cube_collapse",
    "coarse_from_field",
    "fold_pairs_1d",
    "shell_collapse_2d",
    "series_split",
    "series_split_bruteforce",
    "chain_resistance",
    "phi_moment_probe",
    "MomentRow",
    "phi_chain_fft",
    "shell_sizes",
]


def _offsets(dim: int, radius: int) -> np.ndarray:
    axis = np.arange(-radius, radius + 1)
    return np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)


def coarse_constant(kernel: JumpKernel, alpha: float | None = None, L: float = 1.0,
                    reach: int | None = None) -> float:
    """Largest ``c`` with ``1 / (c |w|^(d+alpha)) >= phi(|x - y|)`` for all cube pairs.

    ``x`` and ``y`` range over cubes of side ``L`` centred at ``uL`` and
    ``vL`` with ``w = u - v != 0``.  The kernel is non-increasing, so the
    worst pair sits at the smallest distance between the cubes.  For the
    polynomial kernel the ratio tends to one as ``|w|`` grows and the
    minimum is attained within sup-norm 8; other kernels are scanned up to
    ``reach`` (default 64).
    """
    alpha = kernel.alpha if alpha is None else alpha
    if alpha is None:
        raise ValueError("alpha is needed for the coarse resistance law")
    d = kernel.dim
    if reach is None:
        reach = 8 if kernel.kind == "poly" else 64
    w = _offsets(d, reach)
    w = w[np.any(w != 0, axis=1)]
    gap = np.sqrt(np.sum((np.maximum(np.abs(w) - 1, 0) * L) ** 2, axis=1))
    with np.errstate(divide="ignore"):
        phi_max = np.where(gap > 0, kernel(np.where(gap > 0, gap, 1.0)), 1.0)
    norm = np.sqrt(np.sum(w.astype(float) ** 2, axis=1))
    return float(np.min(1.0 / (phi_max * norm ** (d + alpha))))


@dataclass(frozen=True)
class CoarseNetwork:
    """Lattice sites with multiplicities joined by ``Gamma_u Gamma_v`` parallel wires.

    ``gamma`` is a dense array indexed by ``site + radius`` on the grid
    ``{-radius..radius}^dim``, or on ``{0..radius}`` for folded networks.
    Each wire between ``u != v`` has resistance ``c |u - v|^(dim + alpha)``.
    ``counts`` holds the raw point counts per cube (before the origin
    increment) when the network came from a point set.
    """

    dim: int
    gamma: np.ndarray
    radius: int
    c: float
    alpha: float
    folded: bool = False
    counts: np.ndarray | None = None

    @property
    def sites(self) -> np.ndarray:
        if self.folded:
            return np.arange(self.radius + 1).reshape(-1, 1)
        return _offsets(self.dim, self.radius)

    def gamma_at(self, u) -> float:
        idx = tuple(np.asarray(u) + (0 if self.folded else self.radius))
        return self.gamma[idx]

    def wire_conductance(self, u, v) -> float:
        diff = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
        dist = float(np.sqrt(np.sum(diff * diff)))
        return 1.0 / (self.c * dist ** (self.dim + self.alpha))

    def to_network(self):
        """Resistor network on the occupied sites.

        Returns
        -------
        network : ResistorNetwork
        sites : ndarray
            Site coordinates of the network nodes.
        """
        sites = self.sites
        gam = self.gamma.reshape(-1).astype(float)
        keep = gam > 0
        sites, gam = sites[keep], gam[keep]
        diff = sites[:, None, :].astype(float) - sites[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        np.fill_diagonal(dist, 1.0)
        cond = gam[:, None] * gam[None, :] / (self.c * dist ** (self.dim + self.alpha))
        np.fill_diagonal(cond, 0.0)
        return ResistorNetwork(cond), sites


def _cube_index(points: np.ndarray, L: float) -> np.ndarray:
    # Q_v is the closed cube of side L centred at vL; ties on faces go to the upper cube
    return np.floor(points / L + 0.5).astype(np.int64)


def cube_collapse(points: PointSet, L: int = 1, kernel: JumpKernel | None = None, *,
                  alpha: float | None = None, radius: int | None = None) -> CoarseNetwork:
    """Short the points of every cube ``Q_v`` of side ``L`` into the site ``v``.

    ``Gamma_v`` is the number of points in ``Q_v``, plus one at the origin.
    ``radius`` (default: covering every point) fixes the site grid.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if kernel is None:
        if alpha is None:
            raise ValueError("give a kernel or alpha")
        kernel = JumpKernel("poly", dim=points.dim, alpha=alpha)
    alpha = kernel.alpha if alpha is None else alpha
    idx = _cube_index(points.points, L)
    if radius is None:
        radius = int(np.abs(idx).max()) if len(idx) else 0
    inside = np.all(np.abs(idx) <= radius, axis=1)
    counts = np.zeros((2 * radius + 1,) * points.dim, dtype=np.int64)
    np.add.at(counts, tuple((idx[inside] + radius).T), 1)
    gamma = counts.copy()
    gamma[(radius,) * points.dim] += 1
    return CoarseNetwork(points.dim, gamma, radius, coarse_constant(kernel, alpha, L), alpha,
                         counts=counts)


def coarse_from_field(gamma: np.ndarray, c: float, alpha: float, *, add_origin: bool = True) -> CoarseNetwork:
    """Coarse network from a given multiplicity field on a centred grid."""
    gamma = np.asarray(gamma)
    radius = (gamma.shape[0] - 1) // 2
    if any(s != 2 * radius + 1 for s in gamma.shape):
        raise ValueError("field must live on a centred cubic grid")
    if np.any(gamma < 0) or not np.issubdtype(gamma.dtype, np.integer):
        raise ValueError("multiplicities must be non-negative integers")
    gam = gamma.copy()
    if add_origin:
        gam[(radius,) * gamma.ndim] += 1
    return CoarseNetwork(gamma.ndim, gam, radius, c, alpha)


def fold_pairs_1d(coarse: CoarseNetwork) -> CoarseNetwork:
    """Short each pair ``{v, -v}`` into the node ``|v|`` (d = 1).

    Every wire between the folded nodes ``i < j`` is assigned the smallest
    resistance it could have, ``c |i - j|^(1 + alpha)``.
    """
    if coarse.dim != 1 or coarse.folded:
        raise NotImplementedError("folding applies to unfolded one-dimensional networks")
    r = coarse.radius
    g = coarse.gamma
    folded = g[r:].copy()
    folded[1:] += g[:r][::-1]
    return CoarseNetwork(1, folded, r, coarse.c, coarse.alpha, folded=True)


@dataclass(frozen=True)
class ShellNetwork:
    """One-dimensional long-range network over shells ``0..radius``.

    ``K[a, b]`` is the total conductance of all wires between shells ``a``
    and ``b``; ``multiplicity[a]`` lists how many sites each shell holds.
    """

    K: np.ndarray
    multiplicity: np.ndarray

    @property
    def radius(self) -> int:
        return len(self.multiplicity) - 1

    def to_network(self) -> ResistorNetwork:
        return ResistorNetwork(self.K.copy())


def shell_sizes(radius: int) -> np.ndarray:
    """Sizes ``|F_a|`` of the sup-norm spheres of ``Z^2``: 1 then ``8a``."""
    return np.array([1] + [8 * a for a in range(1, radius + 1)])


def shell_collapse_2d(coarse: CoarseNetwork, block: int = 2048) -> ShellNetwork:
    """Short every sup-norm sphere ``F_a`` of a planar coarse network."""
    if coarse.dim != 2:
        raise NotImplementedError("shell collapse is implemented for d = 2")
    sites = coarse.sites
    gam = coarse.gamma.reshape(-1).astype(float)
    shell = np.abs(sites).max(axis=1)
    occupied = np.flatnonzero(gam > 0)
    sites, gam, shell = sites[occupied].astype(float), gam[occupied], shell[occupied]
    r = coarse.radius
    onehot = np.zeros((len(shell), r + 1))
    onehot[np.arange(len(shell)), shell] = 1.0
    K = np.zeros((r + 1, r + 1))
    expo = (coarse.dim + coarse.alpha) / 2.0
    for start in range(0, len(shell), block):
        rows = slice(start, min(start + block, len(shell)))
        dx = sites[rows, 0][:, None] - sites[None, :, 0]
        dy = sites[rows, 1][:, None] - sites[None, :, 1]
        sq = dx * dx + dy * dy
        with np.errstate(divide="ignore"):
            wire = np.where(sq > 0, 1.0 / (coarse.c * sq ** expo), 0.0)
        wire *= gam[rows, None] * gam[None, :]
        K += onehot[rows].T @ (wire @ onehot)
    np.fill_diagonal(K, 0.0)
    K = 0.5 * (K + K.T)
    return ShellNetwork(K, shell_sizes(r))


@dataclass(frozen=True)
class ChainNetwork:
    """Nearest-neighbour chain with link conductances ``phi[i-1] = phi_i``."""

    phi: np.ndarray

    def __len__(self):
        return len(self.phi)

    def resistances(self) -> np.ndarray:
        return 1.0 / self.phi


def _folded_K(coarse: CoarseNetwork) -> np.ndarray:
    g = coarse.gamma.astype(float)
    i = np.arange(len(g), dtype=float)
    dist = np.abs(i[:, None] - i[None, :])
    np.fill_diagonal(dist, 1.0)
    K = g[:, None] * g[None, :] / (coarse.c * dist ** (1 + coarse.alpha))
    np.fill_diagonal(K, 0.0)
    return K


def series_split(shells) -> ChainNetwork:
    """Split each wire between layers ``a < b`` into ``b - a`` unit steps.

    ``phi_i = sum_{a < i <= b} (b - a) K[a, b]`` for ``i = 1..radius``.
    Accepts a :class:`ShellNetwork` or a folded :class:`CoarseNetwork`.
    """
    if isinstance(shells, CoarseNetwork):
        if not shells.folded:
            raise ValueError("series splitting needs a layered (folded or shell) network")
        K = _folded_K(shells)
    else:
        K = shells.K
    m = K.shape[0]
    a = np.arange(m)
    span = np.triu(a[None, :] - a[:, None], k=1)
    weighted = np.triu(K, k=1) * span
    # phi_i = sum over a <= i-1, b >= i: a 2-D prefix/suffix sum of the weighted matrix
    suffix_cols = np.cumsum(weighted[:, ::-1], axis=1)[:, ::-1]
    phi = np.array([suffix_cols[:i, i].sum() for i in range(1, m)])
    if np.any(phi <= 0):
        raise ValueError("chain has a link of zero conductance")
    return ChainNetwork(phi)


def series_split_bruteforce(coarse: CoarseNetwork) -> ChainNetwork:
    """Direct enumeration of ``sum_{u, v} (|v| - |u|) Gamma_u Gamma_v / rho_{u,v}``.

    Loops over site pairs one at a time; for small boxes only.
    """
    sites = [tuple(s) for s in coarse.sites]
    norm = (lambda s: abs(s[0])) if coarse.folded else (lambda s: max(abs(x) for x in s))
    r = coarse.radius
    phi = np.zeros(r)
    for u in sites:
        gu = float(coarse.gamma_at(u))
        if gu == 0:
            continue
        for v in sites:
            a, b = norm(u), norm(v)
            if b <= a:
                continue
            gv = float(coarse.gamma_at(v))
            if gv == 0:
                continue
            term = (b - a) * gu * gv * coarse.wire_conductance(u, v)
            for i in range(a + 1, b + 1):
                phi[i - 1] += term
    return ChainNetwork(phi)


def chain_resistance(chain: ChainNetwork, n: int) -> float:
    """``sum_{i=1}^{n+1} 1 / phi_i``."""
    if n + 1 > len(chain) or n < 0:
        raise ValueError(f"chain has {len(chain)} links, need {n + 1}")
    return float(np.sum(1.0 / chain.phi[:n + 1]))


def _drift_kernel(radius: int, c: float, alpha: float):
    w = np.arange(-2 * radius, 2 * radius + 1, dtype=float)
    sq = w[:, None] ** 2 + w[None, :] ** 2
    with np.errstate(divide="ignore"):
        k = np.where(sq > 0, 1.0 / (c * sq ** ((2 + alpha) / 2.0)), 0.0)
    return k


def phi_chain_fft(gamma: np.ndarray, c: float, alpha: float, i_list) -> np.ndarray:
    """``phi_i`` of a planar field for the requested ``i`` via FFT convolutions.

    Uses ``(b - a) = |v| - |u|`` to write each ``phi_i`` as two
    convolutions of the outer field with the wire law, read on the inner
    shells.
    """
    r = (gamma.shape[0] - 1) // 2
    axis = np.arange(-r, r + 1)
    norm = np.maximum(np.abs(axis)[:, None], np.abs(axis)[None, :])
    k = _drift_kernel(r, c, alpha)
    shape = (fft.next_fast_len(6 * r + 1, real=True),) * 2
    k_hat = fft.rfft2(k, shape)
    g = gamma.astype(float)
    out = []
    for i in i_list:
        inner = norm < i
        outer = ~inner
        conv = []
        for field in (g * outer * norm, g * outer):
            full = fft.irfft2(fft.rfft2(field, shape) * k_hat, shape)
            conv.append(full[2 * r:4 * r + 1, 2 * r:4 * r + 1])
        out.append(float(np.sum((g * inner) * conv[0]) - np.sum((g * inner * norm) * conv[1])))
    return np.array(out)


class MomentRow(NamedTuple):
    i: int
    mean: float
    fourth_moment: float
    mean_ratio: float
    moment_ratio: float


def _omega(i: int, alpha: float) -> float:
    return i * math.log(i) if alpha == 2 else float(i)


def phi_moment_probe(spec: ProcessSpec, alpha: float, i_list, trials: int, seed=0, *,
                     radius: int | None = None, kernel: JumpKernel | None = None):
    """Monte Carlo mean and fourth central moment of the chain conductances.

    For a Poisson process the multiplicities are drawn directly as an
    i.i.d. Poisson field; a lattice gives the constant field one; other
    processes are sampled and counted per unit cube.  ``radius`` is the
    half-width of the field (default ``2 max(i_list)``), beyond which the
    wires are dropped.

    Returns
    -------
    list of MomentRow
        ``mean / omega_i`` uses ``omega_i = i log i`` at ``alpha = 2`` and
        ``omega_i = i`` for ``alpha > 2``.
    """
    if spec.dim != 2:
        raise NotImplementedError("the probe is defined for d = 2")
    if alpha < 2:
        raise ValueError("alpha must be >= 2")
    i_list = [int(i) for i in i_list]
    r = 2 * max(i_list) if radius is None else int(radius)
    if max(i_list) > r:
        raise ValueError("radius must reach the largest i")
    kern = JumpKernel("poly", dim=2, alpha=alpha) if kernel is None else kernel
    c = coarse_constant(kern, alpha)
    side = 2 * r + 1
    samples = np.empty((trials, len(i_list)))
    for t, child in enumerate(child_seeds(seed, "phi_moment", trials)):
        if spec.kind == "ppp":
            field = stream(child, "field").poisson(spec.intensity, size=(side, side))
        elif spec.kind == "lattice":
            field = np.ones((side, side), dtype=np.int64)
        else:
            pts = sample(spec, r + 0.5, child)
            field = cube_collapse(pts, 1, kern, radius=r).counts
        field = field.astype(np.int64)
        field[r, r] += 1
        samples[t] = phi_chain_fft(field, c, alpha, i_list)
    mean = samples.mean(axis=0)
    m4 = np.mean((samples - mean) ** 4, axis=0)
    return [MomentRow(i, float(mu), float(q), float(mu / _omega(i, alpha)), float(q / i ** 2))
            for i, mu, q in zip(i_list, mean, m4)]
