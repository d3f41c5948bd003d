"""Self-consistent tight binding with density-dependent on-site potentials.

The effective potential adds to the configuration's own on-site terms:

    v_l(rho) = onsite(rho_l) + s * sum_{m != l} (rho_m - Z_m) exp(-tau r_lm) / r_lm

and the fixed point ``rho = F(H(v(rho)))`` is solved either exactly or with
the observable replaced by its polynomial interpolant.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .lattice import Configuration, HoppingModel, assemble
from .linear import Interpolant, InterpolationSet
from .spectral import EigenDecomposition, _check_occupation, eig, potential_jacobian

__all__ = [
    "EffectivePotentialSpec",
    "StabilityOperator",
    "SCFResult",
    "SCFConvergenceError",
    "potential_from_density",
    "potential_gradient",
    "scf_map",
    "stability",
    "newton_scf",
    "damped_fixed_point",
    "history_to_csv",
]

log = logging.getLogger(__name__)


class SCFConvergenceError(RuntimeError):
    def __init__(self, msg, history=()):
        super().__init__(msg)
        self.history = list(history)


@dataclass(frozen=True)
class EffectivePotentialSpec:
    """``onsite`` holds ascending cubic coefficients ``c0..c3``; ``Z`` is a
    scalar or per-site reference charge."""

    onsite: tuple[float, ...] = (0.0,)
    yukawa_strength: float = 0.0
    yukawa_tau: float = 1.0
    reference_charges: float | tuple[float, ...] = 0.5

    def __post_init__(self):
        if len(self.onsite) > 4:
            raise ValueError("on-site function is at most cubic")
        if self.yukawa_strength < 0:
            raise ValueError("yukawa_strength must be >= 0")
        if not self.yukawa_tau > 0:
            raise ValueError("yukawa_tau must be > 0")

    def charges(self, n: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.reference_charges, dtype=float), (n,))

    def kernel(self, config: Configuration) -> np.ndarray:
        r = config.distances
        n = len(config)
        k = np.zeros((n, n))
        off = ~np.eye(n, dtype=bool)
        k[off] = self.yukawa_strength * np.exp(-self.yukawa_tau * r[off]) / r[off]
        return k


def potential_from_density(spec: EffectivePotentialSpec, config: Configuration, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (len(config),):
        raise ValueError("density length does not match the configuration")
    onsite = np.polynomial.polynomial.polyval(rho, spec.onsite)
    return onsite + spec.kernel(config) @ (rho - spec.charges(len(config)))


def potential_gradient(spec: EffectivePotentialSpec, config: Configuration, rho) -> np.ndarray:
    """``dv_l / drho_k``."""
    rho = np.asarray(rho, dtype=float)
    d_onsite = np.polynomial.polynomial.polyval(rho, np.polynomial.polynomial.polyder(spec.onsite))
    return spec.kernel(config) + np.diag(np.broadcast_to(d_onsite, rho.shape))


def _solve_state(spec, config, model, rho) -> EigenDecomposition:
    v = potential_from_density(spec, config, rho)
    return eig(assemble(config.with_potentials(config.potentials + v), model))


def _local_function(obs, approx):
    return obs if approx is None else Interpolant(approx, obs)


def scf_map(
    spec: EffectivePotentialSpec,
    config: Configuration,
    model: HoppingModel,
    obs,
    rho,
    approx: InterpolationSet | None = None,
) -> np.ndarray:
    """Density produced by the potential ``v(rho)``; ``approx`` switches to
    the interpolated observable."""
    ed = _solve_state(spec, config, model, rho)
    _check_occupation(obs, ed.eigenvalues)
    f = _local_function(obs, approx)
    return np.real(ed.eigenvectors**2 @ f(ed.eigenvalues))


@dataclass(frozen=True)
class StabilityOperator:
    matrix: np.ndarray
    min_singular_value: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def stability(
    spec: EffectivePotentialSpec,
    config: Configuration,
    model: HoppingModel,
    obs,
    rho,
    approx: InterpolationSet | None = None,
) -> StabilityOperator:
    """Jacobian ``L`` of the SCF map at ``rho``."""
    ed = _solve_state(spec, config, model, rho)
    jac = potential_jacobian(ed, _local_function(obs, approx))
    _check_occupation(obs, ed.eigenvalues)
    L = jac @ potential_gradient(spec, config, rho)
    smin = float(scipy.linalg.svdvals(np.eye(L.shape[0]) - L).min())
    return StabilityOperator(L, smin)


class SCFResult(NamedTuple):
    rho: np.ndarray
    history: list[float]


def _occupation_check(rho):
    if np.any(rho < -1e-8) or np.any(rho > 1 + 1e-8):
        warnings.warn("converged density leaves the physical range [0, 1]", RuntimeWarning, stacklevel=3)


def newton_scf(
    spec: EffectivePotentialSpec,
    config: Configuration,
    model: HoppingModel,
    obs,
    rho0,
    approx: InterpolationSet | None = None,
    tol: float = 1e-10,
    max_iter: int = 30,
    max_halvings: int = 5,
) -> SCFResult:
    """Newton iteration on ``rho - scf_map(rho) = 0`` with step halving.

    ``history[i]`` is the sup-norm residual after ``i`` steps.
    """
    rho = np.array(rho0, dtype=float)
    res = rho - scf_map(spec, config, model, obs, rho, approx)
    history = [float(np.abs(res).max())]
    for it in range(max_iter):
        if history[-1] <= tol:
            break
        L = stability(spec, config, model, obs, rho, approx)
        if L.min_singular_value < 1e-10:
            raise SCFConvergenceError("I - L is singular", history)
        step = np.linalg.solve(np.eye(L.n) - L.matrix, res)
        t = 1.0
        for _ in range(max_halvings + 1):
            trial = rho - t * step
            trial_res = trial - scf_map(spec, config, model, obs, trial, approx)
            if np.abs(trial_res).max() <= history[-1]:
                break
            t *= 0.5
        rho, res = trial, trial_res
        history.append(float(np.abs(res).max()))
        log.debug("newton step %d: residual %.3e (t = %g)", it + 1, history[-1], t)
    else:
        if history[-1] > tol:
            raise SCFConvergenceError(f"Newton did not converge in {max_iter} steps", history)
    _occupation_check(rho)
    return SCFResult(rho, history)


def damped_fixed_point(
    spec: EffectivePotentialSpec,
    config: Configuration,
    model: HoppingModel,
    obs,
    rho0,
    approx: InterpolationSet | None = None,
    alpha: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 500,
    divergence_window: int = 5,
) -> SCFResult:
    """Linear mixing ``rho <- (1 - alpha) rho + alpha scf_map(rho)``."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    rho = np.array(rho0, dtype=float)
    out = scf_map(spec, config, model, obs, rho, approx)
    history = [float(np.abs(rho - out).max())]
    growth = 0
    for _ in range(max_iter):
        if history[-1] <= tol:
            break
        rho = (1.0 - alpha) * rho + alpha * out
        out = scf_map(spec, config, model, obs, rho, approx)
        history.append(float(np.abs(rho - out).max()))
        growth = growth + 1 if history[-1] > history[-2] else 0
        if growth >= divergence_window:
            raise SCFConvergenceError(
                f"mixing diverges: residual grew for {divergence_window} consecutive steps", history
            )
    else:
        if history[-1] > tol:
            raise SCFConvergenceError(f"mixing did not converge in {max_iter} steps", history)
    _occupation_check(rho)
    return SCFResult(rho, history)


def history_to_csv(history) -> str:
    lines = ["iteration,residual_inf"]
    lines += [f"{i},{r:.17g}" for i, r in enumerate(history)]
    return "\n".join(lines) + "\n"
