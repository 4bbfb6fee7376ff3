"""Numerical checks of the shell-sum bounds and of the harmonic-analysis criteria.

Shell sums ``Z_n(x) = sum_{y in E_n} |y - x|^(-2-alpha)`` are computed
exactly on circles ``C_n`` (``n + 1`` equally spaced points of radius
``n``) and on square shells ``D_n = {z in Z^2 : |z|_inf = n}``.

The characteristic function of ``p(x) = c / (1 + |x|^(d+alpha))`` on
``Z^d`` is evaluated as an exact lattice sum over a smoothly weighted
ball plus the continuum integral of the complementary weight; by Poisson
summation the aliasing error of the latter is far below double precision
for the default radius.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

__all__ = [
    "ShellSum",
    "shell_points",
    "shell_sum",
    "BandReport",
    "band_sweep",
    "CharFn",
    "char_fn",
    "characteristic_function",
    "KappaEstimate",
    "kappa_limit",
    "SpitzerResult",
    "spitzer_integral",
    "truncated_bound",
    "QuadratureError",
]


class QuadratureError(RuntimeError):
    """The resolvent quadrature did not reach its tolerance."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


# -- shell sums ------------------------------------------------------------

@dataclass(frozen=True)
class ShellSum:
    family: str
    m: int
    n: int
    alpha: float
    x: tuple
    value: float


def shell_points(family: str, n: int) -> np.ndarray:
    if n < 0:
        raise ValueError("shell index must be non-negative")
    if family == "circles":
        ang = 2 * np.pi * np.arange(n + 1) / (n + 1)
        pts = np.column_stack([n * np.cos(ang), n * np.sin(ang)])
        pts[pts == 0] = 0.0
        return pts
    if family == "squares":
        if n == 0:
            return np.zeros((1, 2))
        t = np.arange(-n, n + 1)
        side = np.full_like(t, n)
        pts = np.concatenate([
            np.column_stack([side, t]), np.column_stack([-side, t]),
            np.column_stack([t[1:-1], side[1:-1]]), np.column_stack([t[1:-1], -side[1:-1]]),
        ])
        return pts.astype(float)
    raise ValueError(f"unknown family {family!r}")


def _on_shell(family, m, x):
    x = np.asarray(x, dtype=float)
    if family == "circles":
        return abs(math.hypot(x[0], x[1]) - m) <= 1e-9 * max(1, m)
    return bool(np.all(x == np.round(x)) and max(abs(x[0]), abs(x[1])) == m)


def shell_sum(family: str, m: int, n: int, alpha: float, x) -> ShellSum:
    """Exact ``Z_n(x)`` for ``x`` on shell ``m``.

    For circles ``x`` may be any point of radius ``m``; for squares it
    must be a lattice point with sup-norm ``m``.
    """
    if m == n:
        raise ValueError("m and n must differ")
    if family not in ("circles", "squares"):
        raise ValueError(f"unknown family {family!r}")
    x = np.asarray(x, dtype=float).reshape(2)
    if not _on_shell(family, m, x):
        raise ValueError(f"x = {tuple(x)} is not on shell {m}")
    y = shell_points(family, n)
    d2 = np.sum((y - x) ** 2, axis=1)
    value = float(math.fsum(d2 ** (-(2 + alpha) / 2)))
    return ShellSum(family, int(m), int(n), float(alpha), tuple(x), value)


@dataclass
class BandReport:
    """Normalized shell sums over a sweep of ``(m, n)``.

    The ratio is ``Z_n(x) (n-m)^(1+alpha)`` for ``m < n`` and
    ``Z_n(x) m (m-n)^(1+alpha) / n`` for ``m > n``; ``a_fit`` is the
    smallest ``a`` with every ratio in ``[1/a, a]``.
    """

    family: str
    alpha: float
    max_n: int
    a_fit: float
    band: float
    violations: int
    count: int
    lower: dict = field(default_factory=dict)
    upper: dict = field(default_factory=dict)


class _SquareTable:
    """Prefix sums of ``(a^2 + u^2)^(-s/2)`` over ``u >= 0`` for the square sides."""

    def __init__(self, s, size):
        a = np.arange(size + 1, dtype=float)[:, None]
        u = np.arange(size + 1, dtype=float)[None, :]
        with np.errstate(divide="ignore"):
            term = (a * a + u * u) ** (-s / 2)
        term[0, 0] = 0.0
        self.term = term
        self.prefix = np.cumsum(term, axis=1)

    def _half(self, a, j):
        # sum_{u=0}^{j}, zero for j < 0
        out = self.prefix[a, np.maximum(j, 0)]
        return np.where(j < 0, 0.0, out)

    def segment(self, a, u1, u2):
        """``sum_{u=u1}^{u2}`` elementwise on integer arrays."""
        pos = self._half(a, u2) - self._half(a, u1 - 1)
        neg = self._half(a, -u1) - self._half(a, -u2 - 1)
        mid = self._half(a, u2) + self._half(a, -u1) - self.term[a, 0]
        return np.where(u1 >= 0, pos, np.where(u2 <= 0, neg, mid))


def _square_sums(table, x, n, s):
    """``Z_n(x)`` for lattice points ``x`` (rows) and one square shell ``n >= 1``."""
    x1, x2 = x[:, 0].astype(int), x[:, 1].astype(int)
    total = (table.segment(np.abs(n - x1), -n - x2, n - x2)
             + table.segment(np.abs(n + x1), -n - x2, n - x2)
             + table.segment(np.abs(n - x2), -n - x1, n - x1)
             + table.segment(np.abs(n + x2), -n - x1, n - x1))
    for c1 in (-n, n):
        for c2 in (-n, n):
            total -= ((x1 - c1) ** 2 + (x2 - c2) ** 2) ** (-s / 2)
    return total


def _circle_sums(m, n, s):
    a = 2 * np.pi * np.arange(m + 1) / (m + 1)
    b = 2 * np.pi * np.arange(n + 1) / (n + 1)
    sq = np.cos(a)[:, None] * np.cos(b)[None, :]
    sq += np.sin(a)[:, None] * np.sin(b)[None, :]
    sq *= -2.0 * m * n
    sq += m * m + n * n
    np.log(sq, out=sq)
    sq *= -s / 2
    np.exp(sq, out=sq)
    return sq.sum(axis=1)


def band_sweep(family: str, alpha: float, max_n: int = 200, band: float = 10.0) -> BandReport:
    """Sweep all ``m != n`` in ``0..max_n`` (``n >= 1`` when ``m > n``).

    ``violations`` counts ratios outside ``[1/band, band]``.
    """
    s = 2 + alpha
    ratios_lo, ratios_hi = {}, {}
    lo_all, hi_all, bad, count = math.inf, 0.0, 0, 0
    table = _SquareTable(s, 2 * max_n + 1) if family == "squares" else None
    for m in range(max_n + 1):
        xs = shell_points(family, m)
        for n in range(max_n + 1):
            if n == m or (m > n and n == 0):
                continue
            if family == "circles":
                z = _circle_sums(m, n, s)
            elif family == "squares":
                z = _square_sums(table, xs, n, s)
            else:
                raise ValueError(f"unknown family {family!r}")
            if m < n:
                r = z * (n - m) ** (1 + alpha)
                key = "below"
            else:
                r = z * m * (m - n) ** (1 + alpha) / n
                key = "above"
            lo, hi = float(r.min()), float(r.max())
            ratios_lo[key] = min(ratios_lo.get(key, math.inf), lo)
            ratios_hi[key] = max(ratios_hi.get(key, 0.0), hi)
            lo_all, hi_all = min(lo_all, lo), max(hi_all, hi)
            bad += int(np.sum((r < 1 / band) | (r > band)))
            count += r.size
    a_fit = max(hi_all, 1.0 / lo_all)
    return BandReport(family, float(alpha), int(max_n), a_fit, float(band), bad, count,
                      ratios_lo, ratios_hi)


# -- characteristic function --------------------------------------------------

_J0_SWITCH = 30.0


def _cutoff(r, r0, sigma):
    """Smooth weight dropping from 1 to 0 around ``r0`` over a width ``sigma``."""
    return 0.5 * special.erfc((r - r0) / sigma)


class CharFn:
    """``phi(theta) = sum_x p(x) e^{i x.theta}`` for ``p(x) = c / (1 + |x|^(d+alpha))``.

    Parameters
    ----------
    d : {1, 2}
    alpha : float
    radius : float
        Centre of the smooth split between the lattice sum and the
        continuum far field.
    """

    def __init__(self, d: int, alpha: float, radius: float = 64.0, sigma: float = 4.0):
        if d not in (1, 2):
            raise ValueError("d must be 1 or 2")
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        self.d, self.alpha = int(d), float(alpha)
        self.s = self.d + self.alpha
        self.radius, self.sigma = float(radius), float(sigma)
        self._r_in = self.radius + 7 * self.sigma
        self._r_out = max(self.radius - 7 * self.sigma, 2.0)
        k = int(math.ceil(self._r_in))
        ax = np.arange(-k, k + 1, dtype=float)
        if self.d == 1:
            pts = ax[:, None]
        else:
            pts = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
        r = np.sqrt(np.sum(pts * pts, axis=1))
        keep = r <= self._r_in
        pts, r = pts[keep], r[keep]
        w = _cutoff(r, self.radius, self.sigma) / (1.0 + r ** self.s)
        # drop the origin and fold x with -x: the lattice sum is real
        half = (pts[:, 0] > 0) | ((pts[:, 0] == 0) & (pts[:, -1] > 0))
        self._pts = pts[half]
        self._w = 2.0 * w[half]
        self._w0 = float(w[r == 0][0])
        far_mass = self._mu_integral(self._r_out, None, lambda r: 1.0 - _cutoff(r, self.radius, self.sigma))
        self.mass = float(math.fsum(self._w) + self._w0 + far_mass)
        self.c = 1.0 / self.mass
        self.far_mass = self.c * far_mass

    # measure of the sphere of radius r in R^d
    def _mu(self, r):
        return 2.0 if self.d == 1 else 2 * np.pi * r

    def _g(self, r):
        return 1.0 / (1.0 + r ** self.s)

    def _g_tail(self, a):
        """``int_a^inf g(r) mu(r) dr`` by the series in ``r^(-s)`` (``a > 1``)."""
        m = self.d - 1
        pref = 2.0 if self.d == 1 else 2 * np.pi
        total, j = 0.0, 1
        while True:
            term = a ** (m + 1 - j * self.s) / (j * self.s - m - 1)
            total += (-1) ** (j - 1) * term
            if term < 1e-18 * abs(total) or j > 200:
                return pref * total
            j += 1

    def _mu_integral(self, lo, hi, weight):
        """``int_lo^hi weight(r) g(r) mu(r) dr`` with ``hi=None`` meaning the cutoff end plus the tail."""
        top = self._r_in if hi is None else hi
        val, _ = integrate.quad(lambda r: weight(r) * self._g(r) * self._mu(r), lo, top,
                                limit=200, epsabs=0, epsrel=1e-13)
        if hi is None:
            val += self._g_tail(top)
        return val

    def _far(self, xi):
        """Continuum far-field part of ``1 - phi`` (without the factor ``c``)."""
        if xi == 0:
            return 0.0
        far_w = lambda r: (1.0 - _cutoff(r, self.radius, self.sigma)) * self._g(r) * self._mu(r)
        a_split = max(self._r_in, _J0_SWITCH / xi)
        if self.d == 1:
            damp = lambda r: 2.0 * np.sin(r * xi / 2) ** 2
        else:
            def damp(r):
                z = r * xi
                return z * z / 4 - z ** 4 / 64 if z < 1e-3 else 1.0 - special.j0(z)
        # near part of the far field: weight times (1 - K(r xi)), no cancellation
        edges = [self._r_out, self._r_in]
        if a_split > self._r_in:
            edges.extend(np.geomspace(self._r_in, a_split, 8)[1:])
        # about four periods per piece where the damping factor oscillates
        period = 8 * np.pi / xi
        fine = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            pieces = max(1, int(math.ceil((hi - lo) / period)))
            fine.extend(np.linspace(lo, hi, pieces + 1)[:-1])
        fine.append(edges[-1])
        val = 0.0
        for lo, hi in zip(fine[:-1], fine[1:]):
            v, _ = integrate.quad(lambda r: far_w(r) * damp(r), lo, hi, limit=200,
                                  epsabs=1e-17, epsrel=1e-11)
            val += v
        # beyond a_split: weight is g exactly
        val += self._g_tail(a_split)
        if self.d == 1:
            osc, _ = integrate.quad(lambda r: 2.0 * self._g(r), a_split, np.inf, weight="cos", wvar=xi)
        else:
            # Hankel asymptotics of J0 for z >= 30, two terms each
            amp = lambda r: 2 * np.pi * r * self._g(r) * np.sqrt(2.0 / (np.pi * r * xi)) / np.sqrt(2.0)

            def p0(r):
                z = r * xi
                return 1.0 - 9.0 / (128 * z * z)

            def q0(r):
                z = r * xi
                return -1.0 / (8 * z) + 75.0 / (1024 * z ** 3)
            oc, _ = integrate.quad(lambda r: amp(r) * (p0(r) + q0(r)), a_split, np.inf, weight="cos", wvar=xi)
            os_, _ = integrate.quad(lambda r: amp(r) * (p0(r) - q0(r)), a_split, np.inf, weight="sin", wvar=xi)
            osc = oc + os_
        return val - osc

    def one_minus(self, theta) -> np.ndarray:
        """``1 - phi(theta)`` for ``theta`` of shape ``(k, d)`` (or ``(k,)`` when ``d = 1``)."""
        th = np.asarray(theta, dtype=float)
        if self.d == 1:
            th = th.reshape(-1, 1)
        th = th.reshape(-1, self.d)
        out = np.empty(len(th))
        step = max(1, 2_000_000 // max(len(self._w), 1))
        for start in range(0, len(th), step):
            blk = th[start:start + step]
            arg = blk @ self._pts.T
            out[start:start + step] = 2.0 * (np.sin(arg / 2) ** 2) @ self._w
        norms = np.sqrt(np.sum(th * th, axis=1))
        uniq, inv = np.unique(norms, return_inverse=True)
        far = np.array([self._far(float(u)) for u in uniq])
        return self.c * (out + far[inv])

    def __call__(self, theta) -> np.ndarray:
        return 1.0 - self.one_minus(theta)


_CHAR_CACHE = {}


def characteristic_function(d: int, alpha: float, radius: float = 64.0) -> CharFn:
    """Cached :class:`CharFn`; the normalization is computed once per ``(d, alpha, radius)``."""
    key = (int(d), float(alpha), float(radius))
    if key not in _CHAR_CACHE:
        _CHAR_CACHE[key] = CharFn(d, alpha, radius)
    return _CHAR_CACHE[key]


def char_fn(d: int, alpha: float, theta, trunc_radius: float = 64.0):
    """Value of the characteristic function at ``theta`` (scalar or array of points)."""
    fn = characteristic_function(d, alpha, trunc_radius)
    th = np.asarray(theta, dtype=float)
    vals = fn(th)
    if th.ndim == 0 or (d == 2 and th.ndim == 1):
        return float(vals[0])
    return vals


@dataclass
class KappaEstimate:
    """Extrapolated limit of the small-``theta`` ratio and the raw sequence."""

    d: int
    alpha: float
    estimate: float
    thetas: np.ndarray
    ratios: np.ndarray
    extrapolated: np.ndarray
    trend: float


def kappa_limit(d: int, alpha: float, k_range=(4, 24), log_correction=None) -> KappaEstimate:
    """Limit of ``(1 - phi(theta)) / |theta|^alpha`` along ``theta = 2^-k e_1``.

    For ``alpha = 2`` the denominator is ``|theta|^2 log(1/|theta|)``
    unless ``log_correction=False``.  Corrections behave like
    ``|theta|^(2 - alpha)`` for ``alpha < 2`` and like ``1 / log(1/|theta|)``
    at ``alpha = 2``; one Richardson step removes the leading one.
    ``trend`` is the relative change of the last two extrapolated values.
    """
    if alpha > 2:
        raise NotImplementedError("the small-theta limit is only stated for alpha <= 2")
    if log_correction is None:
        log_correction = alpha == 2
    fn = characteristic_function(d, alpha)
    ks = np.arange(k_range[0], k_range[1] + 1)
    th = 2.0 ** (-ks.astype(float))
    pts = np.zeros((len(th), d))
    pts[:, 0] = th
    om = fn.one_minus(pts)
    denom = th ** alpha * (np.log(1 / th) if log_correction else 1.0)
    ratio = om / denom
    if alpha < 2:
        q = 2.0 ** (2 - alpha)
        extr = (q * ratio[1:] - ratio[:-1]) / (q - 1)
    elif log_correction:
        # r(L) = kappa + b / L with L = log(1/theta): eliminate b pairwise
        L = np.log(1 / th)
        extr = (L[1:] * ratio[1:] - L[:-1] * ratio[:-1]) / (L[1:] - L[:-1])
    else:
        extr = ratio[1:].copy()
    trend = float(abs(extr[-1] - extr[-2]) / abs(extr[-1]))
    return KappaEstimate(int(d), float(alpha), float(extr[-1]), th, ratio, extr, trend)


# -- resolvent integrals ------------------------------------------------------

_GL_HI = np.polynomial.legendre.leggauss(20)
_GL_LO = np.polynomial.legendre.leggauss(10)
_ANGLES = np.polynomial.legendre.leggauss(12)


def _radial_nodes(lo, hi):
    """Gauss nodes in ``log r`` on ``[lo, hi]`` for both rules: (r, w_hi, w_lo)."""
    a, b = math.log(lo), math.log(hi)
    out = []
    for x, w in (_GL_HI, _GL_LO):
        u = 0.5 * (b - a) * x + 0.5 * (a + b)
        out.append((np.exp(u), 0.5 * (b - a) * w * np.exp(u)))
    return out


class _Resolvent:
    """Dyadic radial decomposition of ``int dtheta / (shift + t (1 - phi))``.

    In two dimensions the square is split into the disc ``|theta| < pi``,
    whose dyadic annuli share radial nodes across angles so the far field
    is evaluated once per radius, and the four corner regions.
    """

    def __init__(self, fn: CharFn, levels: int = 60):
        self.fn = fn
        self.levels = levels
        if fn.d == 2:
            x, w = _ANGLES
            self.omega = (x + 1) * np.pi / 8  # octant [0, pi/4]
            self.omega_w = w * np.pi / 8
            self._corner = None
        self._cache = {}

    def _polar(self, r, w):
        """Octant points for radii ``r``; weights include the Jacobian and symmetry factor."""
        om = self.omega
        pts = np.stack([np.outer(r, np.cos(om)), np.outer(r, np.sin(om))], axis=-1).reshape(-1, 2)
        wt = (8 * np.outer(w * r, self.omega_w)).ravel()
        return pts, wt

    def _values(self, k):
        if k in self._cache:
            return self._cache[k]
        fn = self.fn
        lo, hi = np.pi * 2.0 ** (-k - 1), np.pi * 2.0 ** (-k)
        res = []
        for r, w in _radial_nodes(lo, hi):
            if fn.d == 1:
                res.append((2 * w, fn.one_minus(r)))
            else:
                pts, wt = self._polar(r, w)
                res.append((wt, fn.one_minus(pts)))
        self._cache[k] = res
        return res

    def _corners(self):
        if self._corner is None:
            res = []
            for rule in (_GL_HI, _GL_LO):
                ws, vs = [], []
                x, wr = rule
                for om, ow in zip(self.omega, self.omega_w):
                    rmax = np.pi / math.cos(om)
                    r = 0.5 * (rmax - np.pi) * x + 0.5 * (rmax + np.pi)
                    w = 0.5 * (rmax - np.pi) * wr
                    pts = np.column_stack([r * math.cos(om), r * math.sin(om)])
                    ws.append(8 * ow * w * r)
                    vs.append(self.fn.one_minus(pts))
                res.append((np.concatenate(ws), np.concatenate(vs)))
            self._corner = res
        return self._corner

    def integral(self, shift: float, t: float = 1.0, rtol: float = 1e-7):
        """Returns (value, error estimate, diagnostics)."""
        total, err = 0.0, 0.0
        if self.fn.d == 2:
            (w_hi, v_hi), (w_lo, v_lo) = self._corners()
            total = float(np.sum(w_hi / (shift + t * v_hi)))
            err = abs(total - float(np.sum(w_lo / (shift + t * v_lo))))
        rest = math.inf
        for k in range(self.levels):
            (w_hi, v_hi), (w_lo, v_lo) = self._values(k)
            hi = float(np.sum(w_hi / (shift + t * v_hi)))
            lo = float(np.sum(w_lo / (shift + t * v_lo)))
            total += hi
            err += abs(hi - lo)
            # the remaining inner disc contributes at most its volume / shift
            r_in = np.pi * 2.0 ** (-k - 1)
            rest = (2 * r_in if self.fn.d == 1 else np.pi * r_in ** 2) / shift
            if rest < rtol * 1e-2 * total and k >= 4:
                return total, err + rest, {"levels": k + 1}
        diag = {"levels": self.levels, "remaining_bound": rest, "value": total}
        raise QuadratureError("dyadic levels exhausted before the inner disc became negligible", diag)


_RESOLVENTS = {}


def _resolvent(d, alpha):
    key = (int(d), float(alpha))
    if key not in _RESOLVENTS:
        _RESOLVENTS[key] = _Resolvent(characteristic_function(d, alpha))
    return _RESOLVENTS[key]


@dataclass
class SpitzerResult:
    d: int
    alpha: float
    values: list
    classification: str
    ratios: list
    errors: list


def spitzer_integral(d: int, alpha: float, t_list=None, rtol: float = 1e-7) -> SpitzerResult:
    """``int_{[-pi,pi)^d} dtheta / (1 - t phi(theta))`` along ``t -> 1``.

    Classified ``CONVERGENT`` when the last two values differ by less
    than 1% relative, otherwise ``DIVERGENT``.
    """
    if t_list is None:
        t_list = [1 - 10.0 ** (-k) for k in range(2, 7)]
    t_list = [float(t) for t in t_list]
    if any(not 0 < t < 1 for t in t_list) or any(b <= a for a, b in zip(t_list, t_list[1:])):
        raise ValueError("t_list must increase inside (0, 1)")
    res = _resolvent(d, alpha)
    vals, errs = [], []
    for t in t_list:
        v, e, diag = res.integral(1.0 - t, t, rtol)
        if e > 1e-3 * v:
            raise QuadratureError("resolvent quadrature error above tolerance", {"t": t, "value": v, "error": e, **diag})
        vals.append(v)
        errs.append(e)
    ratios = [b / a for a, b in zip(vals, vals[1:])]
    cls = "CONVERGENT" if abs(ratios[-1] - 1.0) < 0.01 else "DIVERGENT"
    return SpitzerResult(int(d), float(alpha), list(zip(t_list, vals)), cls, ratios, errs)


def truncated_bound(d: int, alpha: float, n) -> float:
    """``int dtheta / (n^-alpha + 1 - phi(theta))``; the bound up to its constant."""
    if not ((d == 1 and alpha >= 1) or (d == 2 and alpha == 2)):
        raise ValueError("the truncated bound is only used in the recurrent regime")
    v, _, _ = _resolvent(d, alpha).integral(float(n) ** (-alpha), 1.0)
    return v
