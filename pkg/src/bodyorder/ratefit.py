"""Exponential rate estimation from error sequences."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

__all__ = ["ErrorCurve", "RateFit", "RateVerdict", "fit_rate", "compare_rate", "convergence_order", "FLOOR"]

FLOOR = 1e-16
log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ErrorCurve:
    x: np.ndarray
    err: np.ndarray
    floored: np.ndarray

    @classmethod
    def from_values(cls, x, err) -> "ErrorCurve":
        x = np.asarray(x, dtype=float)
        err = np.abs(np.asarray(err, dtype=float))
        if x.shape != err.shape:
            raise ValueError("x and err must have the same length")
        floored = err < FLOOR
        return cls(x, np.where(floored, FLOOR, err), floored)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    window: tuple[int, int]

    @property
    def rate(self) -> float:
        return -self.slope


def _select(curve: ErrorCurve, policy: str) -> np.ndarray:
    n = curve.x.size
    idx = np.flatnonzero(~curve.floored)
    if policy == "all":
        return idx
    if policy == "auto-tail":
        start = int(np.ceil(0.2 * n))
        keep = (np.arange(n) >= start) & (curve.err >= 100 * FLOOR) & ~curve.floored
        return np.flatnonzero(keep)
    raise ValueError(f"unknown window policy {policy!r}")


def fit_rate(curve: ErrorCurve, window_policy: str = "all") -> RateFit:
    """Least squares of ``log(err)`` against ``x`` on the selected window."""
    idx = _select(curve, window_policy)
    if idx.size < 4:
        raise ValueError(f"need at least 4 usable points, got {idx.size}")
    x, y = curve.x[idx], np.log(curve.err[idx])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(np.sum(resid**2)) / ss_tot)
    log.debug("fit_rate window %s..%s slope %.4g r2 %.4f", idx[0], idx[-1], slope, r2)
    return RateFit(float(slope), float(intercept), r2, (int(idx[0]), int(idx[-1])))


@dataclass(frozen=True)
class RateVerdict:
    passed: bool
    measured: float
    predicted: float
    ratio: float

    def __str__(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}: measured rate {self.measured:.4g} vs predicted {self.predicted:.4g} (ratio {self.ratio:.3f})"


def compare_rate(fit: RateFit, predicted_gamma: float, tolerance_rel: float = 0.15) -> RateVerdict:
    if not predicted_gamma > 0:
        raise ValueError("predicted rate must be positive")
    measured = -fit.slope
    ok = abs(measured - predicted_gamma) <= tolerance_rel * predicted_gamma
    return RateVerdict(bool(ok), measured, predicted_gamma, measured / predicted_gamma)


def convergence_order(history, start_below: float = 1e-2, floor: float = 1e-13) -> float:
    """Order ``q`` in ``e_{i+1} ~ C e_i^q`` by regressing ``log e_{i+1}`` on
    ``log e_i``.

    Uses the pairs after the residual first drops below ``start_below``
    (keeping the pair that straddles it) and stops at ``floor``.
    """
    e = np.asarray(history, dtype=float)
    e = e[: np.argmax(e <= floor)] if np.any(e <= floor) else e
    if e.size < 2:
        raise ValueError("need at least two residuals above the floor")
    first = max(int(np.argmax(e < start_below)) - 1, 0) if np.any(e < start_below) else 0
    x, y = np.log(e[first:-1]), np.log(e[first + 1:])
    if x.size == 1:
        # a single pair only supports the ratio estimate log e_1 / log e_0
        return float(y[0] / x[0])
    return float(np.polyfit(x, y, 1)[0])
