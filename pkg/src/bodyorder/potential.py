"""Green's functions, equilibrium measures and interpolation nodes for a
finite union of disjoint real intervals.

For ``E = [e_1, e_2] u ... u [e_{2m-1}, e_{2m}]`` the complex Green's function
is the Schwarz-Christoffel integral

    G(z) = int_{max E}^z P(t) / prod_k sqrt(t - e_k) dt

with ``P`` monic of degree ``m - 1``.  The coefficients of ``P`` are fixed by
requiring the integral over every gap to vanish, which is a linear system.
``g_E = Re G`` vanishes on ``E`` and the equilibrium density is
``|P(x)| / (pi * sqrt(prod_k |x - e_k|))``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

__all__ = [
    "IntervalSet",
    "GreenParams",
    "EquilibriumCDF",
    "solve_gap_params",
    "green_value",
    "equilibrium_cdf",
    "fejer_points",
    "leja_points",
    "asymptotic_rate",
    "capacity",
    "node_log_polynomial",
    "gap_residuals",
]

_QUAD = dict(epsabs=1e-14, epsrel=1e-12, limit=400)
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
CDF_PANELS = 4096


@dataclass(frozen=True)
class IntervalSet:
    endpoints: tuple[float, ...]

    def __post_init__(self):
        e = tuple(float(x) for x in self.endpoints)
        if len(e) < 2 or len(e) % 2:
            raise ValueError("need an even, non-zero number of endpoints")
        if any(not math.isfinite(x) for x in e):
            raise ValueError("endpoints must be finite")
        if any(b <= a for a, b in zip(e, e[1:])):
            raise ValueError(f"endpoints must be strictly increasing: {e}")
        object.__setattr__(self, "endpoints", e)

    @classmethod
    def from_intervals(cls, intervals) -> "IntervalSet":
        return cls(tuple(x for iv in intervals for x in iv))

    @classmethod
    def parse(cls, text: str) -> "IntervalSet":
        """Parse ``"[-1,-0.2]U[0.2,1]"``."""
        parts = [p.strip() for p in re.split(r"[Uu∪]", text.strip()) if p.strip()]
        intervals = []
        for p in parts:
            m = re.fullmatch(r"\[\s*([^,\]]+)\s*,\s*([^,\]]+)\s*\]", p)
            if m is None:
                raise ValueError(f"cannot parse interval {p!r}")
            intervals.append((float(m.group(1)), float(m.group(2))))
        if not intervals:
            raise ValueError("empty interval set")
        return cls.from_intervals(intervals)

    def __str__(self) -> str:
        return "U".join(f"[{a:g},{b:g}]" for a, b in self.intervals)

    @property
    def intervals(self) -> list[tuple[float, float]]:
        e = self.endpoints
        return [(e[i], e[i + 1]) for i in range(0, len(e), 2)]

    @property
    def gaps(self) -> list[tuple[float, float]]:
        e = self.endpoints
        return [(e[i], e[i + 1]) for i in range(1, len(e) - 1, 2)]

    @property
    def m(self) -> int:
        return len(self.endpoints) // 2

    def contains(self, x, tol: float = 0.0):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (x >= a - tol) & (x <= b + tol)
        return out

    def grid(self, n_total: int) -> np.ndarray:
        """Roughly ``n_total`` points spread over E proportionally to length,
        endpoints included."""
        lengths = np.array([b - a for a, b in self.intervals])
        counts = np.maximum(2, np.round(n_total * lengths / lengths.sum()).astype(int))
        return np.concatenate([np.linspace(a, b, c) for (a, b), c in zip(self.intervals, counts)])


def _others(e: np.ndarray, skip) -> np.ndarray:
    keep = np.ones(e.size, dtype=bool)
    keep[list(skip)] = False
    return e[keep]


def _absprod_rsqrt(x, e):
    """``1 / sqrt(prod |x - e_k|)`` over the given endpoints."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * np.sum(np.log(np.abs(x[..., None] - e)), axis=-1))


@dataclass(frozen=True)
class GreenParams:
    intervals: IntervalSet
    numerator_coeffs: tuple[float, ...]
    condition: float = 1.0

    @property
    def endpoints(self) -> np.ndarray:
        return np.array(self.intervals.endpoints)

    @property
    def poly(self) -> np.ndarray:
        """Ascending coefficients of the monic numerator ``P``."""
        return np.array(self.numerator_coeffs + (1.0,))

    def P(self, z):
        return np.polynomial.polynomial.polyval(z, self.poly)

    def dG(self, z):
        """``G'(z)`` on the principal branch of each ``sqrt(z - e_k)``."""
        z = np.asarray(z, dtype=complex)
        denom = np.prod(np.sqrt(z[..., None] - self.endpoints), axis=-1)
        return self.P(z) / denom

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.abs(self.P(x)) * _absprod_rsqrt(x, self.endpoints) / np.pi

    @property
    def roots(self) -> np.ndarray:
        if len(self.numerator_coeffs) == 0:
            return np.array([])
        return np.sort(np.real(np.polynomial.polynomial.polyroots(self.poly)))

    @cached_property
    def cdf(self) -> "EquilibriumCDF":
        return equilibrium_cdf(self)


def _alg_integral(f, a, b, left=-0.5, right=-0.5):
    val, _ = integrate.quad(f, a, b, weight="alg", wvar=(left, right), **_QUAD)
    return val


def gap_residuals(params: GreenParams) -> np.ndarray:
    """Gap integrals of ``P / sqrt(prod |x - e_k|)``; zero when solved."""
    e = params.endpoints
    out = []
    for i, (a, b) in enumerate(params.intervals.gaps):
        rest = _others(e, (2 * i + 1, 2 * i + 2))
        out.append(_alg_integral(lambda x: params.P(x) * _absprod_rsqrt(x, rest), a, b))
    return np.array(out)


def solve_gap_params(E: IntervalSet) -> GreenParams:
    """Solve for the numerator of ``G'`` so that ``Re G`` vanishes on all of E."""
    m = E.m
    if m == 1:
        return GreenParams(E, ())
    e = np.array(E.endpoints)
    A = np.empty((m - 1, m - 1))
    rhs = np.empty(m - 1)
    for i, (a, b) in enumerate(E.gaps):
        rest = _others(e, (2 * i + 1, 2 * i + 2))
        for j in range(m):
            val = _alg_integral(lambda x: x**j * _absprod_rsqrt(x, rest), a, b)
            if j < m - 1:
                A[i, j] = val
            else:
                rhs[i] = -val
    cond = float(np.linalg.cond(A))
    if not cond < 1e12:
        raise np.linalg.LinAlgError(f"gap system is ill-conditioned (cond = {cond:.2e})")
    c = np.linalg.solve(A, rhs)
    return GreenParams(E, tuple(float(x) for x in c), cond)


def _real_green(params: GreenParams, x: float) -> float:
    E = params.intervals
    e = params.endpoints
    if E.contains(x):
        return 0.0
    if x > e[-1]:
        rest = e[:-1]
        f = lambda t: abs(params.P(t)) * _absprod_rsqrt(t, rest)
        return _outer_integral(f, e[-1], x - e[-1])
    if x < e[0]:
        rest = e[1:]
        f = lambda t: abs(params.P(t)) * _absprod_rsqrt(t, rest)
        return _outer_integral(lambda s: f(2 * e[0] - s), e[0], e[0] - x)
    i = int(np.searchsorted(e, x)) - 1  # x in (e[i], e[i+1]), i odd
    # P changes sign inside the gap, so integrate it signed; the gap integral
    # vanishes, so start from whichever gap end is nearer
    near = i if x - e[i] <= e[i + 1] - x else i + 1
    d = abs(x - e[near])
    if d < 1e-10 * (e[-1] - e[0]):
        # leading term of int c / sqrt|t - e| dt, relative error O(d)
        c = params.P(e[near]) * _absprod_rsqrt(e[near], _others(e, (near,)))
        return float(abs(2.0 * c * math.sqrt(d)))
    if near == i:
        rest = _others(e, (i,))
        f = lambda t: params.P(t) * _absprod_rsqrt(t, rest)
        return abs(_alg_integral(f, e[i], x, -0.5, 0.0))
    rest = _others(e, (i + 1,))
    f = lambda t: params.P(t) * _absprod_rsqrt(t, rest)
    return abs(_alg_integral(f, x, e[i + 1], 0.0, -0.5))


def _outer_integral(f, start, length):
    """``int_start^{start+length} f(t) / sqrt(t - start) dt`` for large lengths."""
    head = min(length, 1.0)
    val = _alg_integral(f, start, start + head, -0.5, 0.0)
    if length > head:
        # t - start = e^u keeps the slowly decaying tail well resolved
        g = lambda u: f(start + math.exp(u)) * math.exp(0.5 * u)
        tail, _ = integrate.quad(g, math.log(head), math.log(length), **_QUAD)
        val += tail
    return val


def green_value(params: GreenParams, z) -> float:
    """``g_E(z)``: zero on E, harmonic off E, ``~ log|z|`` at infinity."""
    z = complex(z)
    x, y = z.real, abs(z.imag)
    base = _real_green(params, x)
    if y == 0.0:
        return base
    # vertical leg x -> x + iy with t = s^2 absorbing endpoint singularities
    f = lambda s: -2.0 * s * params.dG(x + 1j * s * s).imag
    smax = math.sqrt(y)
    pts = [p for p in (0.1, 1.0, 10.0, 100.0) if p < smax]
    val, _ = integrate.quad(f, 0.0, smax, points=pts or None, **_QUAD)
    return base + val


@dataclass(frozen=True)
class EquilibriumCDF:
    """Tabulated cumulative mass of the equilibrium measure.

    Interval ``i`` is parametrised by ``x = mid - half * cos(theta)`` so the
    endpoint square-root singularities disappear; ``tables[i][j]`` is the mass
    between the left end of interval ``i`` and ``theta_j``.
    """

    params: GreenParams
    thetas: np.ndarray
    tables: tuple[np.ndarray, ...]
    offsets: np.ndarray = field(repr=False)

    @property
    def interval_masses(self) -> np.ndarray:
        return np.array([t[-1] for t in self.tables])

    @property
    def total_mass(self) -> float:
        return float(self.interval_masses.sum())

    def _theta_integrand(self, i: int, theta):
        a, b = self.params.intervals.intervals[i]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        x = mid - half * np.cos(theta)
        rest = _others(self.params.endpoints, (2 * i, 2 * i + 1))
        return np.abs(self.params.P(x)) * _absprod_rsqrt(x, rest) / np.pi

    def _mass_to_theta(self, i: int, theta: float) -> float:
        th = self.thetas
        j = min(int(np.searchsorted(th, theta, side="right")) - 1, th.size - 2)
        j = max(j, 0)
        lo = th[j]
        if theta == lo:
            return float(self.tables[i][j])
        half = 0.5 * (theta - lo)
        nodes = lo + half * (_GL_X + 1.0)
        return float(self.tables[i][j] + half * np.dot(_GL_W, self._theta_integrand(i, nodes)))

    def __call__(self, x: float) -> float:
        """``omega_E((-inf, x])``."""
        ivs = self.params.intervals.intervals
        for i, (a, b) in enumerate(ivs):
            if x < a:
                return float(self.offsets[i])
            if x <= b:
                # half-angle form stays accurate next to both endpoints
                theta = 2.0 * math.atan2(math.sqrt(x - a), math.sqrt(b - x))
                return float(self.offsets[i] + self._mass_to_theta(i, theta))
        return self.total_mass

    def quantile(self, level: float, tol: float = 1e-14) -> float:
        """Smallest ``x`` in E with ``cdf(x) >= level``, by bisection."""
        ivs = self.params.intervals.intervals
        level = float(level)
        if level <= 0.0:
            return ivs[0][0]
        i = int(np.searchsorted(self.offsets[1:], level, side="left"))
        i = min(i, len(ivs) - 1)
        target = level - self.offsets[i]
        if target >= self.tables[i][-1]:
            return ivs[i][1]
        lo, hi = 0.0, math.pi
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if self._mass_to_theta(i, mid) < target:
                lo = mid
            else:
                hi = mid
        a, b = ivs[i]
        return 0.5 * (a + b) - 0.5 * (b - a) * math.cos(0.5 * (lo + hi))


def equilibrium_cdf(params: GreenParams, panels: int = CDF_PANELS) -> EquilibriumCDF:
    thetas = np.linspace(0.0, math.pi, panels + 1)
    half = 0.5 * (thetas[1] - thetas[0])
    nodes = (thetas[:-1, None] + half * (_GL_X[None, :] + 1.0))
    stub = EquilibriumCDF(params, thetas, (), np.zeros(1))
    tables = []
    for i in range(params.intervals.m):
        vals = stub._theta_integrand(i, nodes)
        chunk = half * (vals @ _GL_W)
        tables.append(np.concatenate([[0.0], np.cumsum(chunk)]))
    offsets = np.concatenate([[0.0], np.cumsum([t[-1] for t in tables])])
    return EquilibriumCDF(params, thetas, tuple(tables), offsets)


def fejer_points(params: GreenParams, n: int) -> np.ndarray:
    """Equilibrium-measure quantiles at levels ``j / (n - 1)``, endpoints
    included; on a single interval these are the Chebyshev extreme points."""
    if n < 2:
        raise ValueError("need n >= 2 Fejer points")
    cdf = params.cdf
    total = cdf.total_mass
    lo, hi = params.endpoints[0], params.endpoints[-1]
    pts = [lo]
    pts += [cdf.quantile(total * j / (n - 1)) for j in range(1, n - 1)]
    pts.append(hi)
    return np.array(pts)


def leja_points(params: GreenParams, n: int, grid_resolution: int = 2000) -> np.ndarray:
    """Greedy Leja sequence on a discretisation of E, started at ``max E``."""
    if n < 1:
        raise ValueError("need n >= 1")
    grids = []
    for a, b in params.intervals.intervals:
        t = np.linspace(0.0, math.pi, grid_resolution)
        grids.append(0.5 * (a + b) - 0.5 * (b - a) * np.cos(t))
    grid = np.unique(np.concatenate(grids))
    if n > grid.size:
        raise ValueError("grid_resolution too small for the requested number of points")
    logprod = np.zeros(grid.size)
    chosen = [grid.size - 1]
    for _ in range(n - 1):
        with np.errstate(divide="ignore"):
            logprod += np.log(np.abs(grid - grid[chosen[-1]]))
        logprod[chosen] = -np.inf
        chosen.append(int(np.argmax(logprod)))
    return grid[chosen]


def asymptotic_rate(params: GreenParams, obs) -> float:
    """Predicted exponential rate ``g_E`` at the observable's nearest singularity."""
    anchor = getattr(obs, "singularity_anchor", None)
    if anchor is None:
        raise ValueError("observable has no finite singularity (entire function)")
    anchor = complex(anchor)
    if anchor.imag == 0 and params.intervals.contains(anchor.real):
        raise ValueError("singularity lies inside E; no exponential rate")
    return green_value(params, anchor)


def capacity(params: GreenParams, x0: float | None = None) -> float:
    """Logarithmic capacity from the equilibrium potential at ``x0`` in E."""
    ivs = params.intervals.intervals
    if x0 is None:
        a, b = ivs[0]
        x0 = 0.5 * (a + b)
    if not params.intervals.contains(x0):
        raise ValueError("probe point must lie in E")
    e = params.endpoints
    U = 0.0
    for i, (a, b) in enumerate(ivs):
        rest = _others(e, (2 * i, 2 * i + 1))
        base = lambda t: np.abs(params.P(t)) * _absprod_rsqrt(t, rest) / np.pi
        if a < x0 < b:
            fl = lambda t: -base(t) / math.sqrt(b - t)
            fr = lambda t: -base(t) / math.sqrt(t - a)
            vl, _ = integrate.quad(fl, a, x0, weight="alg-logb", wvar=(-0.5, 0.0), **_QUAD)
            vr, _ = integrate.quad(fr, x0, b, weight="alg-loga", wvar=(0.0, -0.5), **_QUAD)
            U += vl + vr
        else:
            U += _alg_integral(lambda t: -np.log(np.abs(x0 - t)) * base(t), a, b)
    return math.exp(-U)


def node_log_polynomial(nodes, z) -> np.ndarray:
    """``log |prod_j (z - x_j)|``."""
    z = np.asarray(z, dtype=complex)
    return np.sum(np.log(np.abs(z[..., None] - np.asarray(nodes))), axis=-1)
