"""Recursion method: Lanczos tridiagonalisation from a site, Gauss quadrature
of the local density of states, and continued-fraction resolvents.

``K`` counts recursion levels: a Jacobi matrix with diagonal ``a_0..a_K``
reproduces the moments ``[H^k]_ll`` for ``k <= 2K + 1``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .lattice import Hamiltonian
from .spectral import FermiDirac, GrandPotential, SingularityError

__all__ = [
    "JacobiMatrix",
    "QuadratureRule",
    "Terminator",
    "VACUUM",
    "lanczos",
    "gauss_rule",
    "theta",
    "cf_resolvent",
    "jacobi_from_moments",
    "square_root_terminator",
    "MomentError",
]

BREAKDOWN_TOL = 1e-13
COLLISION_TOL = 1e-12


class MomentError(ValueError):
    """Moment sequence is not positive definite."""


@dataclass(frozen=True)
class JacobiMatrix:
    a: np.ndarray
    b: np.ndarray
    origin: dict = field(default_factory=dict)
    terminated: bool = False

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 1 or a.size < 1 or b.shape != (a.size - 1,):
            raise ValueError("need len(b) == len(a) - 1 >= 0")
        if np.any(b <= 0):
            raise ValueError("off-diagonal recursion coefficients must be positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def K(self) -> int:
        return self.a.size - 1

    def matrix(self) -> np.ndarray:
        return np.diag(self.a) + np.diag(self.b, 1) + np.diag(self.b, -1)

    def truncate(self, K: int) -> "JacobiMatrix":
        if K > self.K:
            raise ValueError(f"only {self.K} levels available")
        return JacobiMatrix(self.a[: K + 1], self.b[:K], self.origin, self.terminated and K == self.K)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "a_n", "b_n"])
        for n, a in enumerate(self.a):
            b = self.b[n - 1] if n > 0 else ""
            w.writerow([n, repr(float(a)), repr(float(b)) if n > 0 else b])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "JacobiMatrix":
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
        rows = rows[1:] if rows[0][0] == "n" else rows
        a = [float(r[1]) for r in rows]
        b = [float(r[2]) for r in rows[1:]]
        return cls(np.array(a), np.array(b), {"kind": "csv"})


def lanczos(H, site: int, K: int) -> JacobiMatrix:
    """Lanczos recursion from the unit vector at ``site`` with full
    reorthogonalisation.

    Stops early (``terminated=True``) when the Krylov space is exhausted.
    """
    mat = H.matrix if isinstance(H, Hamiltonian) else np.asarray(H, dtype=float)
    row = H.row(site) if isinstance(H, Hamiltonian) else site
    n = mat.shape[0]
    if K < 0:
        raise ValueError("K must be >= 0")
    if K + 1 > n:
        raise ValueError(f"K + 1 = {K + 1} exceeds the matrix dimension {n}")
    scale = max(float(np.abs(mat).sum(axis=1).max()), np.finfo(float).tiny)
    Q = np.zeros((n, K + 1))
    Q[row, 0] = 1.0
    a, b = [], []
    terminated = False
    for k in range(K + 1):
        w = mat @ Q[:, k]
        a.append(float(Q[:, k] @ w))
        if k == K:
            break
        w -= a[-1] * Q[:, k]
        if k > 0:
            w -= b[-1] * Q[:, k - 1]
        # two passes of classical Gram-Schmidt against every previous vector
        for _ in range(2):
            w -= Q[:, : k + 1] @ (Q[:, : k + 1].T @ w)
        beta = float(np.linalg.norm(w))
        if beta < BREAKDOWN_TOL * scale:
            terminated = True
            break
        b.append(beta)
        Q[:, k + 1] = w / beta
    return JacobiMatrix(np.array(a), np.array(b), {"kind": "lanczos", "site": site}, terminated)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def __call__(self, f) -> float:
        return float(np.real(np.dot(self.weights, f(self.nodes))))

    def moment(self, k: int) -> float:
        return float(np.dot(self.weights, self.nodes**k))


def gauss_rule(J: JacobiMatrix) -> QuadratureRule:
    """Golub-Welsch: nodes are the eigenvalues of ``J``, weights the squared
    first eigenvector components."""
    lam, vec = np.linalg.eigh(J.matrix())
    span = max(float(np.ptp(lam)), 1.0)
    if lam.size > 1 and np.min(np.diff(lam)) <= 1e-10 * span:
        raise ValueError("degenerate Gauss nodes; Jacobi matrix invariant violated")
    return QuadratureRule(lam, vec[0] ** 2)


def theta(J: JacobiMatrix, obs) -> float:
    """Nonlinear approximation ``O(T)_00`` of the local observable."""
    rule = gauss_rule(J)
    if isinstance(obs, (FermiDirac, GrandPotential)) and np.isinf(obs.beta):
        span = max(1.0, float(np.ptp(rule.nodes)))
        if np.any(np.abs(rule.nodes - obs.mu) < COLLISION_TOL * span):
            raise SingularityError("a Gauss node coincides with the chemical potential")
    return rule(obs)


@dataclass(frozen=True)
class Terminator:
    """Continued-fraction tail: ``"vacuum"`` or ``"square_root"``."""

    kind: str = "vacuum"
    a_inf: float = 0.0
    b_inf: float = 0.0

    def __post_init__(self):
        if self.kind not in ("vacuum", "square_root"):
            raise ValueError(f"unknown terminator {self.kind!r}")
        if self.kind == "square_root" and not self.b_inf > 0:
            raise ValueError("square-root terminator needs b_inf > 0")

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "vacuum":
            return np.zeros_like(z)
        w = z - self.a_inf
        s = np.sqrt(w * w - 4.0 * self.b_inf**2)
        t1, t2 = 0.5 * (w - s), 0.5 * (w + s)
        # the decaying root (|t| <= b_inf) is the one with Herglotz sign
        return np.where(np.abs(t1) <= np.abs(t2), t1, t2)


VACUUM = Terminator("vacuum")


def square_root_terminator(J: JacobiMatrix, tail: int = 3) -> Terminator:
    """Constant-chain tail with ``a_inf``, ``b_inf`` the mean of the last
    ``tail`` recursion coefficients."""
    if J.b.size == 0:
        raise ValueError("need at least one off-diagonal coefficient")
    return Terminator("square_root", float(np.mean(J.a[-tail:])), float(np.mean(J.b[-tail:])))


def cf_resolvent(J: JacobiMatrix, z, term: Terminator = VACUUM):
    """``[(z - T)^{-1}]_00`` by bottom-up continued-fraction evaluation."""
    z = np.asarray(z, dtype=complex)
    tail = term(z) if term.kind == "square_root" else np.zeros_like(z)
    denom = z - J.a[-1] - tail
    if np.any(denom == 0):
        raise ZeroDivisionError("continued fraction hits an eigenvalue of the truncated chain")
    g = 1.0 / denom
    for n in range(J.K - 1, -1, -1):
        denom = z - J.a[n] - J.b[n] ** 2 * g
        if np.any(denom == 0):
            raise ZeroDivisionError("continued fraction hits an eigenvalue of the truncated chain")
        g = 1.0 / denom
    return g.item() if g.ndim == 0 else g


def jacobi_from_moments(moments) -> JacobiMatrix:
    """Recursion coefficients from raw moments ``m_0 .. m_{2K+1}``
    (Chebyshev algorithm).  Ill-conditioned beyond ``K ~ 10``."""
    m = np.asarray(moments, dtype=float)
    if m.size < 2 or m.size % 2:
        raise ValueError("need an even number 2K + 2 of moments m_0..m_{2K+1}")
    n = m.size // 2
    alpha = np.zeros(n)
    beta = np.zeros(n)
    sig_prev = np.zeros(2 * n)
    sig = m.copy()
    alpha[0] = m[1] / m[0]
    beta[0] = m[0]
    for k in range(1, n):
        new = np.zeros(2 * n)
        for l in range(k, 2 * n - k):
            new[l] = sig[l + 1] - alpha[k - 1] * sig[l] - beta[k - 1] * sig_prev[l]
        if not new[k] > 0:
            raise MomentError(f"moment sequence not positive-definite at level {k}")
        alpha[k] = new[k + 1] / new[k] - sig[k] / sig[k - 1]
        beta[k] = new[k] / sig[k - 1]
        sig_prev, sig = sig, new
    return JacobiMatrix(alpha, np.sqrt(beta[1:]), {"kind": "moments"})
