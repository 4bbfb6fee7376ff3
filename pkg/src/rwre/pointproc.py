"""Point configurations in finite boxes.

Samplers for the homogeneous Poisson process, randomly shifted and
diluted crystals, the largest cluster of Bernoulli site percolation, and
the deterministic lattice and concentric-circle sets.  Every sampler is a
pure function of its parameters and seed.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from ._rng import child_seeds, stream

__all__ = [
    "PointSet",
    "ProcessSpec",
    "sample_ppp",
    "sample_diluted_crystal",
    "sample_percolation_cluster",
    "circle_set",
    "lattice_set",
    "sample",
    "estimate_psi",
]

KINDS = ("ppp", "diluted_crystal", "percolation_cluster", "lattice", "circles")


def _lex_order(points: np.ndarray) -> np.ndarray:
    if points.shape[0] == 0:
        return np.arange(0)
    # np.lexsort uses the last key as primary
    return np.lexsort(points.T[::-1])


def _seed_label(seed):
    if isinstance(seed, np.random.SeedSequence):
        return f"{seed.entropy}:{'/'.join(map(str, seed.spawn_key))}"
    return int(seed)


@dataclass(frozen=True, eq=False)
class PointSet:
    """Finite, lexicographically sorted set of distinct points in a closed box.

    Parameters
    ----------
    dim : int
        Ambient dimension.
    points : ndarray of shape (n, dim)
        Coordinates.  They are sorted lexicographically on construction
        and the array is made read-only.
    box_half_width : float
        All points lie in ``[-B, B]^dim``.
    provenance : dict
        Process kind, parameters and seed.
    """

    dim: int
    points: np.ndarray
    box_half_width: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1 and self.dim == 1:
            pts = pts.reshape(-1, 1)
        if pts.size == 0:
            pts = pts.reshape(0, self.dim)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError(f"points must have shape (n, {self.dim}), got {pts.shape}")
        if self.box_half_width < 0:
            raise ValueError("box_half_width must be non-negative")
        pts = pts[_lex_order(pts)]
        if len(pts) > 1:
            if np.any(np.all(np.diff(pts, axis=0) == 0, axis=1)):
                raise ValueError("points must be distinct")
        if len(pts) and np.abs(pts).max() > self.box_half_width:
            raise ValueError("points outside the stated box")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def kind(self):
        return self.provenance.get("kind", "custom")

    def index_of(self, x) -> int:
        """Index of the point equal to ``x`` (exact match)."""
        x = np.asarray(x, dtype=float).reshape(self.dim)
        hits = np.flatnonzero(np.all(self.points == x, axis=1))
        if hits.size == 0:
            raise KeyError(f"{x} is not in the point set")
        return int(hits[0])

    def nearest_index(self, x) -> int:
        """Index of the point closest to ``x`` (lowest index on ties)."""
        x = np.asarray(x, dtype=float).reshape(self.dim)
        d2 = np.sum((self.points - x) ** 2, axis=1)
        return int(np.argmin(d2))

    def restrict(self, half_width: float) -> "PointSet":
        """Points inside ``[-half_width, half_width]^dim``."""
        keep = np.all(np.abs(self.points) <= half_width, axis=1)
        return PointSet(self.dim, self.points[keep],
                        min(half_width, self.box_half_width), dict(self.provenance))


@dataclass(frozen=True)
class ProcessSpec:
    """Parameters of a point process.

    Only the fields required by ``kind`` may be set: ``intensity`` for
    ``ppp``; ``dilution`` and ``basis`` for ``diluted_crystal``;
    ``dilution`` for ``percolation_cluster``; ``n_max`` for ``lattice``
    and ``circles``.  ``dim`` is inferred from ``basis`` when given.
    """

    kind: str
    dim: int = 1
    intensity: float | None = None
    dilution: float | None = None
    basis: tuple | None = None
    n_max: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown process kind {self.kind!r}")
        required = {
            "ppp": {"intensity"},
            "diluted_crystal": {"dilution", "basis"},
            "percolation_cluster": {"dilution"},
            "lattice": {"n_max"},
            "circles": {"n_max"},
        }[self.kind]
        for name in ("intensity", "dilution", "basis", "n_max"):
            present = getattr(self, name) is not None
            if present != (name in required):
                state = "requires" if name in required else "does not take"
                raise ValueError(f"kind {self.kind!r} {state} parameter {name!r}")
        if self.basis is not None:
            b = np.atleast_2d(np.asarray(self.basis, dtype=float))
            object.__setattr__(self, "basis", tuple(map(tuple, b)))
            object.__setattr__(self, "dim", b.shape[0])
        if self.kind == "circles":
            object.__setattr__(self, "dim", 2)
        if self.intensity is not None and self.intensity <= 0:
            raise ValueError("intensity must be positive")
        if self.dilution is not None and not 0 < self.dilution <= 1:
            raise ValueError("dilution must lie in (0, 1]")

    def params(self) -> dict:
        out = {"dim": self.dim}
        for name in ("intensity", "dilution", "basis", "n_max"):
            value = getattr(self, name)
            if value is not None:
                out[name] = [list(r) for r in value] if name == "basis" else value
        return out


def sample_ppp(lam: float, box_half_width: float, seed, dim: int = 1) -> PointSet:
    """Homogeneous Poisson process of intensity ``lam`` in ``[-B, B]^dim``.

    Examples
    --------
    >>> len(sample_ppp(1.0, 0.0, seed=3))
    0
    """
    if lam <= 0:
        raise ValueError("intensity must be positive")
    if box_half_width < 0:
        raise ValueError("box_half_width must be non-negative")
    rng = stream(seed, "ppp")
    volume = (2.0 * box_half_width) ** dim
    count = rng.poisson(lam * volume)
    pts = rng.uniform(-box_half_width, box_half_width, size=(count, dim))
    prov = {"kind": "ppp", "params": {"dim": dim, "intensity": lam}, "seed": _seed_label(seed)}
    return PointSet(dim, pts, float(box_half_width), prov)


def sample_diluted_crystal(spec: ProcessSpec, box_half_width: float, seed,
                           shift=None) -> PointSet:
    """Randomly shifted crystal with independent site dilution.

    The lattice ``{basis @ k : k in Z^d}`` is translated by a vector drawn
    uniformly from the elementary cell ``basis @ [0, 1)^d`` and each point
    in the box is kept with probability ``spec.dilution``.

    Parameters
    ----------
    shift : array_like, optional
        Override the random translation.  Intended for tests.
    """
    if spec.kind != "diluted_crystal":
        raise ValueError("spec.kind must be 'diluted_crystal'")
    basis = np.asarray(spec.basis, dtype=float)
    d = basis.shape[0]
    if basis.shape != (d, d) or abs(np.linalg.det(basis)) < 1e-14 * max(1.0, np.abs(basis).max()) ** d:
        raise ValueError("basis must be a nonsingular square matrix")
    rng = stream(seed, "diluted_crystal")
    u = rng.uniform(0.0, 1.0, size=d)
    v = basis @ u if shift is None else np.asarray(shift, dtype=float).reshape(d)
    inv = np.linalg.inv(basis)
    # integer coordinates reaching the box, with one cell of slack
    reach = np.abs(inv).sum(axis=1) * (box_half_width + np.abs(v).max())
    ranges = [np.arange(-int(np.ceil(r)) - 1, int(np.ceil(r)) + 2) for r in reach]
    grid = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, d)
    pts = grid @ basis.T + v
    pts = pts[np.all(np.abs(pts) <= box_half_width, axis=1)]
    pts = pts[_lex_order(pts)]
    keep = rng.uniform(size=len(pts)) < spec.dilution
    prov = {"kind": "diluted_crystal", "params": spec.params(), "seed": _seed_label(seed)}
    return PointSet(d, pts[keep], float(box_half_width), prov)


def sample_percolation_cluster(p: float, box_half_width: float, seed, dim: int = 2) -> PointSet:
    """Largest nearest-neighbour cluster of site percolation on ``Z^d`` in the box.

    Ties between equally large clusters go to the one containing the
    lexicographically smallest site.
    """
    if dim < 2:
        raise NotImplementedError("site percolation has no supercritical phase in d = 1")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    m = int(np.floor(box_half_width))
    side = 2 * m + 1
    rng = stream(seed, "percolation")
    occupied = rng.uniform(size=(side,) * dim) < p
    labels, count = ndimage.label(occupied)
    prov = {"kind": "percolation_cluster", "params": {"dim": dim, "dilution": p},
            "seed": _seed_label(seed)}
    if count == 0:
        return PointSet(dim, np.zeros((0, dim)), float(box_half_width), prov)
    sizes = np.bincount(labels.ravel())[1:]
    # labels are assigned in raster (lexicographic) order, so argmax breaks ties as documented
    best = int(np.argmax(sizes)) + 1
    sites = np.argwhere(labels == best) - m
    return PointSet(dim, sites.astype(float), float(box_half_width), prov)


def circle_set(n_max: int) -> PointSet:
    """Union of the circles ``C_n = {n exp(2 pi i k / (n+1)) : 0 <= k <= n}``.

    Points are returned as planar coordinates.  Use :func:`circle_coordinates`
    for the (shell, angle index) layout.
    """
    n_max = int(n_max)
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    pts = circle_coordinates(n_max)[0]
    prov = {"kind": "circles", "params": {"dim": 2, "n_max": n_max}, "seed": None}
    return PointSet(2, pts, float(max(n_max, 0)), prov)


def circle_coordinates(n_max: int):
    """Planar coordinates of the circle set in shell order.

    Returns
    -------
    points : ndarray of shape ((n_max+1)(n_max+2)/2, 2)
    shell : ndarray of int
        Radius index ``n`` of each point.
    k : ndarray of int
        Angular index within the shell.
    """
    shell = np.concatenate([np.full(n + 1, n) for n in range(n_max + 1)])
    k = np.concatenate([np.arange(n + 1) for n in range(n_max + 1)])
    angle = 2.0 * np.pi * k / (shell + 1)
    pts = np.column_stack([shell * np.cos(angle), shell * np.sin(angle)])
    # the origin and the k = 0 ray are exact; clean signed zeros
    pts[pts == 0] = 0.0
    return pts, shell, k


def lattice_set(d: int, n: int) -> PointSet:
    """``Z^d`` intersected with ``[-n, n]^d``."""
    axis = np.arange(-n, n + 1, dtype=float)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    prov = {"kind": "lattice", "params": {"dim": d, "n_max": int(n)}, "seed": None}
    return PointSet(d, grid, float(n), prov)


def sample(spec: ProcessSpec, box_half_width: float, seed=0) -> PointSet:
    """Draw a configuration of ``spec`` in ``[-B, B]^dim``."""
    if spec.kind == "ppp":
        return sample_ppp(spec.intensity, box_half_width, seed, dim=spec.dim)
    if spec.kind == "diluted_crystal":
        return sample_diluted_crystal(spec, box_half_width, seed)
    if spec.kind == "percolation_cluster":
        return sample_percolation_cluster(spec.dilution, box_half_width, seed, dim=spec.dim)
    if spec.kind == "lattice":
        return lattice_set(spec.dim, min(spec.n_max, int(np.floor(box_half_width))))
    return circle_set(min(spec.n_max, int(np.floor(box_half_width)))).restrict(box_half_width)


def estimate_psi(spec: ProcessSpec, radii, trials: int, centers, box_half_width: float,
                 seed=0):
    """Monte Carlo hole probabilities ``P(S has no point in B(x, t))``.

    Each trial draws a fresh configuration, and all radii are evaluated on
    the same draws, so the estimate is non-increasing in ``t``.  The ball
    is open, hence ``t = 0`` always gives probability one.

    Returns
    -------
    list of (t, psi_hat, standard_error)
        ``psi_hat`` is the maximum over ``centers`` of the empirical void
        frequency and the standard error is the binomial one for that
        centre.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < 0):
        raise ValueError("radii must be non-negative")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[1] != spec.dim:
        raise ValueError("centers must be dim-vectors")
    margin = box_half_width - np.abs(centers).max(axis=1)
    if radii.size and radii.max() > margin.min():
        raise ValueError("radius exceeds the box margin around a center")
    empty = np.zeros((len(centers), len(radii)), dtype=np.int64)
    for child in child_seeds(seed, "psi", trials):
        pts = sample(spec, box_half_width, child)
        if len(pts) == 0:
            empty += 1
            continue
        dist = cKDTree(pts.points).query(centers)[0]
        empty += dist[:, None] >= radii[None, :]
    freq = empty / trials
    best = freq.max(axis=0)
    se = np.sqrt(best * (1.0 - best) / trials)
    return [(float(t), float(q), float(s)) for t, q, s in zip(radii, best, se)]
