"""Exact reference machinery: diagonalisation, observables, LDOS, derivatives."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lattice import Configuration, Hamiltonian, HoppingModel, hamiltonian_derivative

__all__ = [
    "SingularityError",
    "DegenerateOccupationError",
    "MetallicError",
    "EigenDecomposition",
    "FermiDirac",
    "GrandPotential",
    "Resolvent",
    "Polynomial",
    "SpectrumSummary",
    "SpectralMeasure",
    "eig",
    "observable_eval",
    "local_observable",
    "moments",
    "ldos",
    "summarize_spectrum",
    "divided_differences",
    "observable_derivative",
    "potential_jacobian",
]

SINGULARITY_TOL = 1e-10
OCCUPATION_TOL = 1e-12
DD_TOL = 1e-8


class SingularityError(ArithmeticError):
    """Observable evaluated on (or within tolerance of) a pole or branch cut."""


class DegenerateOccupationError(SingularityError):
    """Zero-temperature occupation is ambiguous: mu coincides with an eigenvalue."""


class MetallicError(ValueError):
    """No spectral gap at the chemical potential."""


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sites: tuple[int, ...] = ()

    def row(self, site: int) -> int:
        return self.sites.index(site) if self.sites else site

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))


def eig(H) -> EigenDecomposition:
    """Full eigendecomposition with a fixed sign convention.

    Eigenvalues ascend; each eigenvector has its first non-negligible
    component positive.
    """
    if isinstance(H, Hamiltonian):
        mat, sites = H.matrix, H.sites
    else:
        mat = np.asarray(H, dtype=float)
        sites = tuple(range(mat.shape[0]))
    if not np.all(np.isfinite(mat)):
        raise ValueError("Hamiltonian has non-finite entries")
    lam, psi = np.linalg.eigh(mat)
    tol = 1e-12 * max(1.0, np.abs(psi).max())
    first = np.argmax(np.abs(psi) > tol, axis=0)
    signs = np.sign(psi[first, np.arange(psi.shape[1])])
    signs[signs == 0] = 1.0
    psi = psi * signs
    lam.setflags(write=False)
    psi.setflags(write=False)
    return EigenDecomposition(lam, psi, tuple(sites))


# -- observables --------------------------------------------------------------

def _check_poles(x, beta):
    # poles of 1/(1 + e^x) sit at x = i*pi*(2k + 1)
    x = np.asarray(x)
    if not np.iscomplexobj(x):
        return
    k = np.round((x.imag / np.pi - 1.0) / 2.0)
    dist = np.abs(x - 1j * np.pi * (2 * k + 1)) / beta
    if np.any(dist < SINGULARITY_TOL):
        raise SingularityError("evaluation point on a Fermi-Dirac pole")


@dataclass(frozen=True)
class FermiDirac:
    """Fermi-Dirac occupation; ``beta = inf`` is the sharp step."""

    beta: float
    mu: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def singularity_anchor(self) -> complex:
        if math.isinf(self.beta):
            return complex(self.mu, 0.0)
        return complex(self.mu, math.pi / self.beta)

    def __call__(self, z):
        z = np.asarray(z)
        if math.isinf(self.beta):
            if np.iscomplexobj(z) and np.any(z.imag != 0):
                raise SingularityError("zero-temperature step is not analytic off the axis")
            z = np.real(z)
            return np.where(z < self.mu, 1.0, np.where(z > self.mu, 0.0, 0.5))
        x = self.beta * (z - self.mu)
        _check_poles(x, self.beta)
        with np.errstate(over="ignore"):
            pos = np.real(x) > 0
            ex = np.exp(np.where(pos, -x, x))
            return np.where(pos, ex / (1.0 + ex), 1.0 / (1.0 + ex))

    def derivative(self, z):
        if math.isinf(self.beta):
            return np.zeros(np.shape(z))
        f = self(z)
        return -self.beta * f * (1.0 - f)


def _softplus(y):
    """``log(1 + e^y)`` without overflow."""
    pos = np.real(y) > 0
    safe = np.where(pos, -y, y)
    return np.where(pos, y, 0) + np.log1p(np.exp(safe))


@dataclass(frozen=True)
class GrandPotential:
    """Grand-potential site-energy function ``(2/beta) log(1 - F(z))``."""

    beta: float
    mu: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def singularity_anchor(self) -> complex:
        return FermiDirac(self.beta, self.mu).singularity_anchor

    def __call__(self, z):
        z = np.asarray(z)
        if math.isinf(self.beta):
            if np.iscomplexobj(z) and np.any(z.imag != 0):
                raise SingularityError("zero-temperature grand potential is not analytic off the axis")
            x = np.real(z) - self.mu
            return np.where(x < 0, 2.0 * x, 0.0)
        x = self.beta * (z - self.mu)
        _check_poles(x, self.beta)
        if np.iscomplexobj(x):
            # branch cut of log(1 + e^{-x}) runs vertically through mu
            if np.any((np.abs(np.real(x)) < SINGULARITY_TOL * self.beta) & (np.abs(np.imag(x)) >= np.pi)):
                raise SingularityError("evaluation point on the grand-potential branch cut")
        # log(1 - F) = -log(1 + e^{-x})
        return -2.0 / self.beta * _softplus(-x)

    def derivative(self, z):
        # d/dz (2/beta) log(1 - F) = 2 F
        return 2.0 * FermiDirac(self.beta, self.mu)(np.asarray(z))


@dataclass(frozen=True)
class Resolvent:
    z: complex

    def __post_init__(self):
        if complex(self.z).imag == 0:
            raise ValueError("resolvent needs a non-real spectral parameter")

    @property
    def singularity_anchor(self) -> complex:
        return complex(self.z)

    def __call__(self, x):
        x = np.asarray(x)
        d = self.z - x
        if np.any(np.abs(d) < SINGULARITY_TOL):
            raise SingularityError("evaluation at the resolvent pole")
        return 1.0 / d

    def derivative(self, x):
        return 1.0 / (self.z - np.asarray(x)) ** 2


@dataclass(frozen=True)
class Polynomial:
    """Power series ``sum_k c_k z^k`` (entire)."""

    coefficients: tuple[float, ...]

    singularity_anchor = None

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(np.asarray(z), self.coefficients)

    def derivative(self, z):
        d = np.polynomial.polynomial.polyder(self.coefficients)
        return np.polynomial.polynomial.polyval(np.asarray(z), d)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1


def observable_eval(obs, z):
    """Evaluate ``obs`` at ``z``; a scalar input gives a scalar back."""
    val = obs(z)
    return val.item() if np.ndim(val) == 0 else val


def _check_occupation(obs, lam):
    if isinstance(obs, (FermiDirac, GrandPotential)) and math.isinf(obs.beta):
        span = max(1.0, float(np.max(np.abs(lam))))
        if np.any(np.abs(lam - obs.mu) < OCCUPATION_TOL * span):
            raise DegenerateOccupationError(f"mu = {obs.mu} coincides with an eigenvalue")


def local_observable(ed: EigenDecomposition, obs, site: int) -> float:
    """``O_l = sum_s O(lambda_s) |psi_s[l]|^2``."""
    _check_occupation(obs, ed.eigenvalues)
    w = ed.eigenvectors[ed.row(site)] ** 2
    return float(np.real(np.dot(obs(ed.eigenvalues), w)))


def moments(H, site: int, n_max: int) -> np.ndarray:
    """``[H^k]_{ll}`` for ``k = 0..n_max`` by repeated matrix-vector products."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if isinstance(H, Hamiltonian):
        row, mat = H.row(site), H.matrix
    else:
        row, mat = site, np.asarray(H, dtype=float)
    e = np.zeros(mat.shape[0])
    e[row] = 1.0
    out = np.empty(n_max + 1)
    # [H^(2j)]_ll = |H^j e|^2 and [H^(2j+1)]_ll = <H^j e, H H^j e>
    q = e
    out[0] = 1.0
    for k in range(1, n_max + 1):
        if k % 2 == 0:
            out[k] = q @ q
        else:
            out[k] = q @ (mat @ q)
            q = mat @ q
    return out


@dataclass(frozen=True)
class SpectralMeasure:
    locations: np.ndarray
    weights: np.ndarray

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.locations.tolist(), self.weights.tolist()))

    def moment(self, k: int) -> float:
        return float(np.dot(self.weights, self.locations**k))

    def integrate(self, f) -> float:
        return float(np.real(np.dot(self.weights, f(self.locations))))


def ldos(ed: EigenDecomposition, site: int) -> SpectralMeasure:
    return SpectralMeasure(ed.eigenvalues.copy(), ed.eigenvectors[ed.row(site)] ** 2)


@dataclass(frozen=True)
class SpectrumSummary:
    I_minus: tuple[float, float]
    I_plus: tuple[float, float]
    defect_eigenvalues: tuple[float, ...]
    g: float
    g_def: float
    mu: float

    @property
    def intervals(self) -> list[tuple[float, float]]:
        return [self.I_minus, self.I_plus]


def summarize_spectrum(
    ed_reference: EigenDecomposition, ed: EigenDecomposition, mu: float, pad: float = 0.0
) -> SpectrumSummary:
    """Band intervals around ``mu`` from a reference spectrum, plus the
    eigenvalues of ``ed`` that fall outside them."""
    lam_ref = ed_reference.eigenvalues
    below, above = lam_ref[lam_ref < mu], lam_ref[lam_ref > mu]
    if below.size == 0 or above.size == 0:
        raise MetallicError("reference spectrum lies on one side of mu")
    if np.any(np.abs(lam_ref - mu) < OCCUPATION_TOL * max(1.0, np.abs(lam_ref).max())):
        raise MetallicError("reference spectrum has an eigenvalue at mu")
    i_minus = (float(below.min() - pad), float(below.max()))
    i_plus = (float(above.min()), float(above.max() + pad))
    lam = ed.eigenvalues
    tol = 1e-10 * max(1.0, float(np.abs(lam).max()))
    inside = ((lam >= i_minus[0] - tol) & (lam <= i_minus[1] + tol)) | (
        (lam >= i_plus[0] - tol) & (lam <= i_plus[1] + tol)
    )
    defects = tuple(float(x) for x in lam[~inside])
    g = i_plus[0] - i_minus[1]
    upper = min([i_plus[0]] + [x for x in defects if x >= mu])
    lower = max([i_minus[1]] + [x for x in defects if x <= mu])
    return SpectrumSummary(i_minus, i_plus, defects, g, upper - lower, mu)


# -- derivatives ---------------------------------------------------------------

def divided_differences(obs, lam: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Matrix of first divided differences ``(f(x_s) - f(x_t)) / (x_s - x_t)``,
    with ``f'`` where the points (nearly) coincide."""
    lam = np.asarray(lam, dtype=float)
    if tol is None:
        tol = DD_TOL * max(1.0, float(np.max(np.abs(lam))))
    f = np.real(np.asarray(obs(lam)))
    df = np.real(np.asarray(obs.derivative(lam)))
    diff = lam[:, None] - lam[None, :]
    close = np.abs(diff) < tol
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = (f[:, None] - f[None, :]) / np.where(close, 1.0, diff)
    mean_df = 0.5 * (df[:, None] + df[None, :])
    return np.where(close, mean_df, dd)


def observable_derivative(
    H: Hamiltonian | None,
    config: Configuration,
    model: HoppingModel,
    obs,
    site: int,
    m: int,
    component="v",
    ed: EigenDecomposition | None = None,
) -> float:
    """``dO_site / du_m`` through the Daleckii-Krein formula.

    ``component`` is ``"v"`` or a position axis.  ``obs`` needs
    ``derivative``; interpolants qualify as well.
    """
    if ed is None:
        if H is None:
            from .lattice import assemble

            H = assemble(config, model)
        ed = eig(H)
    _check_occupation(obs, ed.eigenvalues)
    psi = ed.eigenvectors
    dH = hamiltonian_derivative(config, model, m, component)
    dd = divided_differences(obs, ed.eigenvalues)
    a = psi[ed.row(site)]
    return float(a @ ((dd * (psi.T @ dH @ psi)) @ a))


def potential_jacobian(ed: EigenDecomposition, obs, rows: Sequence[int] | None = None) -> np.ndarray:
    """``J[l, k] = dO_l / dv_k`` for all sites (or the given rows)."""
    _check_occupation(obs, ed.eigenvalues)
    psi = ed.eigenvectors
    dd = divided_differences(obs, ed.eigenvalues)
    rows = range(psi.shape[0]) if rows is None else rows
    out = np.empty((len(rows), psi.shape[0]))
    for i, l in enumerate(rows):
        w = psi[l] * psi  # w[k, s] = psi_s[l] psi_s[k]
        out[i] = np.einsum("ks,st,kt->k", w, dd, w, optimize=True)
    return out
