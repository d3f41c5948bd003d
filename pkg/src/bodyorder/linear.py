"""Linear (interpolation-based) body-ordered approximation.

Polynomial interpolants are applied to the Hamiltonian through its
eigendecomposition, which for a fixed node set is a linear functional of the
moments ``[H^k]_ll`` and therefore decomposes into cluster contributions by
inclusion-exclusion.  Chebyshev projection, the kernel polynomial method and
the vacuum cluster expansion live here too for comparison.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from scipy import fft

from .lattice import Configuration, HoppingModel, restrict
from .spectral import EigenDecomposition, eig, local_observable, moments

__all__ = [
    "InterpolationSet",
    "Interpolant",
    "ChebSeries",
    "DampingKernel",
    "interp_build",
    "interp_eval",
    "matrix_interpolant",
    "cheb_project",
    "cheb_interp",
    "bernstein_bound",
    "kpm_moments",
    "kpm_estimate",
    "body_order_component",
    "body_order_expansion",
    "vacuum_potential",
    "vacuum_sum",
    "vacuum_moment",
    "nodes_to_csv",
    "nodes_from_csv",
    "ClusterTooLargeError",
]

MAX_CLUSTER = 5
MAX_VACUUM_SITES = 12
MAX_VACUUM_ORDER = 5


class ClusterTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class InterpolationSet:
    """Nodes with barycentric weights (normalised so the largest is one)."""

    nodes: np.ndarray
    barycentric_weights: np.ndarray

    def __len__(self) -> int:
        return self.nodes.size

    @property
    def degree(self) -> int:
        return self.nodes.size - 1


def interp_build(nodes) -> InterpolationSet:
    x = np.asarray(nodes, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty node set")
    span = max(float(np.ptp(x)), 1.0 if x.size == 1 else 0.0)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    if np.any(np.abs(diff) <= 1e-12 * span):
        raise ValueError("duplicate interpolation nodes")
    # log-space products survive hundreds of nodes on short intervals
    logw = -np.sum(np.log(np.abs(diff)), axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    w = sign * np.exp(logw - logw.max())
    x.setflags(write=False)
    w.setflags(write=False)
    return InterpolationSet(x, w)


class Interpolant:
    """Polynomial interpolant of ``obs`` on ``X`` in barycentric form."""

    def __init__(self, X: InterpolationSet, obs=None, values=None):
        self.X = X
        if values is None:
            values = obs(X.nodes)
        self.values = np.asarray(values)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("observable not finite at the nodes")

    def __call__(self, z):
        x, w, f = self.X.nodes, self.X.barycentric_weights, self.values
        z = np.asarray(z)
        zz = np.atleast_1d(z)
        diff = zz[:, None] - x[None, :]
        exact = diff == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            c = w / diff
            out = (c @ f) / c.sum(axis=1)
        hit = exact.any(axis=1)
        if hit.any():
            out = out.astype(np.result_type(out, f))
            out[hit] = f[np.argmax(exact[hit], axis=1)]
        return out.reshape(z.shape) if z.ndim else out[0]

    def derivative(self, z):
        x, w, f = self.X.nodes, self.X.barycentric_weights, self.values
        z = np.asarray(z)
        zz = np.atleast_1d(z)
        p = np.atleast_1d(self(zz))
        out = np.empty(zz.shape, dtype=np.result_type(p, f))
        for i, zi in enumerate(zz):
            d = zi - x
            k = np.flatnonzero(d == 0)
            if k.size:
                k = k[0]
                mask = np.arange(x.size) != k
                out[i] = np.sum(w[mask] / w[k] * (f[mask] - f[k]) / (x[k] - x[mask]))
            else:
                c = w / d
                out[i] = np.sum(c * (p[i] - f) / d) / c.sum()
        return out.reshape(z.shape) if z.ndim else out[0]


def interp_eval(X: InterpolationSet, obs, z):
    return Interpolant(X, obs)(z)


def matrix_interpolant(ed: EigenDecomposition, X: InterpolationSet, obs, site: int) -> float:
    """``[I_X obs (H)]_ll`` through the spectral decomposition."""
    return _apply_through_spectrum(ed, Interpolant(X, obs), site)


def _apply_through_spectrum(ed: EigenDecomposition, p, site: int) -> float:
    w = ed.eigenvectors[ed.row(site)] ** 2
    return float(np.real(np.dot(p(ed.eigenvalues), w)))


# -- Chebyshev machinery ---------------------------------------------------------

@dataclass(frozen=True)
class ChebSeries:
    interval: tuple[float, float]
    coefficients: np.ndarray

    def to_unit(self, z):
        a, b = self.interval
        return (2.0 * np.asarray(z) - (a + b)) / (b - a)

    def __call__(self, z):
        return np.polynomial.chebyshev.chebval(self.to_unit(z), self.coefficients)

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def damped(self, kernel: "DampingKernel") -> "ChebSeries":
        d = kernel.coefficients(self.degree)
        return ChebSeries(self.interval, self.coefficients * d)


def _from_unit(interval, t):
    a, b = interval
    return 0.5 * (a + b) + 0.5 * (b - a) * t


def cheb_project(obs, N: int, interval=(-1.0, 1.0), n_quad: int | None = None) -> ChebSeries:
    """Truncated Chebyshev series by Gauss-Chebyshev quadrature."""
    M = n_quad or 2 * (N + 1)
    theta = np.pi * (np.arange(M) + 0.5) / M
    f = obs(_from_unit(interval, np.cos(theta)))
    c = 2.0 / M * np.cos(np.outer(np.arange(N + 1), theta)) @ f
    c[0] *= 0.5
    return ChebSeries(tuple(interval), np.real_if_close(c))


def cheb_interp(obs, N: int, interval=(-1.0, 1.0)) -> ChebSeries:
    """Interpolant at the Chebyshev extreme points ``cos(j pi / N)``."""
    if N == 0:
        return ChebSeries(tuple(interval), np.atleast_1d(np.asarray(obs(_from_unit(interval, 1.0)), dtype=float)))
    x = np.cos(np.pi * np.arange(N + 1) / N)
    f = np.asarray(obs(_from_unit(interval, x)))
    c = fft.dct(f, type=1) / N
    c[0] *= 0.5
    c[-1] *= 0.5
    return ChebSeries(tuple(interval), c)


def _ellipse_sup(obs, rho: float, interval, n_samples: int) -> float:
    t = np.linspace(0.0, 2.0 * np.pi, n_samples, endpoint=False)
    w = 0.5 * (rho * np.exp(1j * t) + np.exp(-1j * t) / rho)
    return float(np.max(np.abs(obs(_from_unit(interval, w)))))


def bernstein_bound(obs, N: int, interval=(-1.0, 1.0), rho: float | None = None, n_samples: int = 2000) -> float:
    """``6 ||obs||_{E_rho} rho^{-N} / (rho - 1)`` for the Chebyshev projection
    error on ``interval``.

    The sup-norm on the Bernstein ellipse ``E_rho`` is sampled.  Without an
    explicit ``rho`` the bound is minimised over a grid of ellipses strictly
    inside the one through the observable's singularity.
    """
    if rho is not None:
        if not rho > 1:
            raise ValueError("rho must exceed 1")
        return 6.0 * _ellipse_sup(obs, rho, interval, n_samples) * rho ** (-N) / (rho - 1.0)
    anchor = getattr(obs, "singularity_anchor", None)
    if anchor is None:
        raise ValueError("observable has no finite singularity; pass rho explicitly")
    a, b = interval
    w = (2.0 * complex(anchor) - (a + b)) / (b - a)
    r = w + np.sqrt(w - 1) * np.sqrt(w + 1)
    rho_max = max(abs(r), 1.0 / abs(r))
    if not rho_max > 1 + 1e-12:
        raise ValueError("singularity on the interval; no Bernstein ellipse")
    grid = 1.0 + (rho_max - 1.0) * np.linspace(0.02, 0.995, 200)
    return min(bernstein_bound(obs, N, interval, float(r_), n_samples) for r_ in grid)


@dataclass(frozen=True)
class DampingKernel:
    """KPM damping; ``kind`` is ``"none"``, ``"fejer"`` or ``"jackson"``."""

    kind: str = "none"

    def __post_init__(self):
        if self.kind not in ("none", "fejer", "jackson"):
            raise ValueError(f"unknown damping kernel {self.kind!r}")

    def coefficients(self, M: int) -> np.ndarray:
        n = np.arange(M + 1)
        if self.kind == "none" or M == 0:
            return np.ones(M + 1)
        if self.kind == "fejer":
            return 1.0 - n / M
        q = np.pi / (M + 2)
        return ((M + 2 - n) * np.cos(q * n) + np.sin(q * n) / np.tan(q)) / (M + 2)


def _spectral_bounds(mat: np.ndarray) -> tuple[float, float]:
    lam = np.linalg.eigvalsh(mat)
    return float(lam[0]), float(lam[-1])


def kpm_moments(H, site: int, M: int, interval) -> np.ndarray:
    """``[T_n(A)]_ll`` for the affinely rescaled ``A`` with ``interval -> [-1, 1]``."""
    mat = getattr(H, "matrix", H)
    row = H.row(site) if hasattr(H, "row") else site
    a, b = interval
    A = (2.0 * mat - (a + b) * np.eye(mat.shape[0])) / (b - a)
    e = np.zeros(mat.shape[0])
    e[row] = 1.0
    mu = np.empty(M + 1)
    v_prev, v = e, A @ e
    mu[0] = 1.0
    if M >= 1:
        mu[1] = v[row]
    for n in range(2, M + 1):
        v_prev, v = v, 2.0 * (A @ v) - v_prev
        mu[n] = v[row]
    return mu


def kpm_estimate(
    H, site: int, obs, M: int, kernel: DampingKernel = DampingKernel(), delta: float = 0.01, interval=None
) -> float:
    """Damped Chebyshev estimate ``sum_n d_n c_n [T_n(H)]_ll``.

    Unless ``interval`` is given the exact spectral range is padded so that
    it maps into ``[-1 + delta, 1 - delta]``.
    """
    mat = getattr(H, "matrix", H)
    if interval is None:
        lo, hi = _spectral_bounds(mat)
        mid, rad = 0.5 * (lo + hi), max(0.5 * (hi - lo), 1e-12)
        rad /= 1.0 - delta
        interval = (mid - rad, mid + rad)
    else:
        lo, hi = _spectral_bounds(mat)
        a, b = interval
        if lo < a or hi > b:
            raise ValueError("spectrum outside the KPM interval [-1, 1] after scaling")
    series = cheb_project(obs, M, interval, n_quad=max(2 * (M + 1), 512))
    mu = kpm_moments(H, site, M, interval)
    d = kernel.coefficients(M)
    return float(np.real(np.sum(d * series.coefficients * mu)))


# -- body-order decomposition --------------------------------------------------------

def _restricted_value(config, model, center, subset, func):
    ham = restrict(config, model, center, subset)
    return func(eig(ham), center)


def _inclusion_exclusion(config, model, center, K, func, cache=None):
    K = tuple(sorted(K))
    total = 0.0
    for r in range(len(K) + 1):
        sign = -1.0 if (len(K) - r) % 2 else 1.0
        for sub in combinations(K, r):
            if cache is not None and sub in cache:
                val = cache[sub]
            else:
                val = _restricted_value(config, model, center, sub, func)
                if cache is not None:
                    cache[sub] = val
            total += sign * val
    return total


def _check_cluster(center, K, n):
    if center in K:
        raise ValueError("center must not belong to the cluster")
    if len(K) > MAX_CLUSTER:
        raise ClusterTooLargeError(f"cluster of {len(K)} neighbours exceeds the guard of {MAX_CLUSTER}")


def body_order_component(
    config: Configuration, model: HoppingModel, X: InterpolationSet, obs, site: int, K: Iterable[int], cache=None
) -> float:
    """Cluster contribution ``V_K`` of the interpolated observable."""
    K = tuple(sorted(set(K)))
    _check_cluster(site, K, len(config))
    p = Interpolant(X, obs)
    func = lambda ed, c: _apply_through_spectrum(ed, p, c)
    return _inclusion_exclusion(config, model, site, K, func, cache)


def body_order_expansion(
    config: Configuration, model: HoppingModel, X: InterpolationSet, obs, site: int, max_neighbours: int | None = None
) -> float:
    """Sum of ``V_K`` over all clusters with at most ``max_neighbours`` sites
    besides ``site``, in a fixed enumeration order."""
    others = [k for k in range(len(config)) if k != site]
    top = len(others) if max_neighbours is None else min(max_neighbours, len(others))
    cache: dict = {}
    total = 0.0
    for n in range(top + 1):
        for K in combinations(others, n):
            total += body_order_component(config, model, X, obs, site, K, cache)
    return total


# -- vacuum cluster expansion ----------------------------------------------------

def _vacuum_guard(config, N):
    if len(config) > MAX_VACUUM_SITES:
        raise ClusterTooLargeError(f"vacuum expansion limited to {MAX_VACUUM_SITES} sites")
    if N > MAX_VACUUM_ORDER and N != len(config):
        raise ClusterTooLargeError(f"vacuum expansion limited to order {MAX_VACUUM_ORDER}")
    if N < 1:
        raise ValueError("order N must be >= 1")


def vacuum_potential(config: Configuration, model: HoppingModel, obs, site: int, K: Iterable[int]) -> float:
    """Exact-observable cluster potential ``V^(n)`` for the neighbours ``K``."""
    K = tuple(sorted(set(K)))
    _check_cluster(site, K, len(config))
    return _inclusion_exclusion(config, model, site, K, lambda ed, c: local_observable(ed, obs, c))


def _vacuum_coefficient(n_others: int, size: int, N: int) -> int:
    # sum over supersets K of K' with |K| <= N - 1 of (-1)^{|K| - |K'|}
    free = n_others - size
    return sum((-1) ** i * math.comb(free, i) for i in range(0, N - size))


def _vacuum_reduce(config, site, N, func):
    others = [k for k in range(len(config)) if k != site]
    total = 0.0
    for size in range(min(N - 1, len(others)) + 1):
        coef = _vacuum_coefficient(len(others), size, N)
        if coef == 0:
            continue
        for sub in combinations(others, size):
            total += coef * func(sub)
    return total


def vacuum_sum(config: Configuration, model: HoppingModel, obs, site: int, N: int) -> float:
    """Vacuum cluster expansion truncated to clusters of at most ``N`` atoms."""
    _vacuum_guard(config, N)
    func = lambda sub: _restricted_value(config, model, site, sub, lambda ed, c: local_observable(ed, obs, c))
    return _vacuum_reduce(config, site, N, func)


def vacuum_moment(config: Configuration, model: HoppingModel, site: int, j: int, N: int) -> float:
    """``j``-th moment of the signed vacuum measure of order ``N``."""
    _vacuum_guard(config, N)

    def func(sub):
        ham = restrict(config, model, site, sub)
        return moments(ham, site, max(j, 1))[j]

    return _vacuum_reduce(config, site, N, func)


# -- node I/O ----------------------------------------------------------------------

def nodes_to_csv(nodes: Sequence[float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node"])
    for x in nodes:
        w.writerow([repr(float(x))])
    return buf.getvalue()


def nodes_from_csv(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    if rows and rows[0][0].strip() == "node":
        rows = rows[1:]
    return np.array([float(r[0]) for r in rows])
