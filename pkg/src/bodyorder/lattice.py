"""Finite atomic configurations and single-orbital tight-binding Hamiltonians.

The hopping model is

    h(r)       = h0 * exp(-gamma0 * r) * f(r)
    t(r1, r2)  = t0 * exp(-gamma0 * (r1 + r2))

with ``f`` an optional smooth cutoff factor bounded by one.  Matrix entries are

    H[l, k] = h(r_lk) + sum_{m not in {l, k}} t(r_lm, r_km) + delta_lk (shift + v_l)

and since ``exp(-gamma0 * 0)`` never enters the three-centre sum, the whole
three-centre part is ``t0 * E @ E`` with ``E`` the zero-diagonal matrix of
``exp(-gamma0 * r)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "SiteState",
    "Configuration",
    "HoppingModel",
    "Hamiltonian",
    "assemble",
    "restrict",
    "banded",
    "neighborhood_truncate",
    "make_chain",
    "make_defect_chain",
    "hamiltonian_derivative",
    "COINCIDENT_TOL",
]

COINCIDENT_TOL = 1e-12


@dataclass(frozen=True)
class SiteState:
    position: tuple[float, ...]
    onsite_potential: float = 0.0
    species: int = 0


class Configuration:
    """Immutable set of atomic sites.

    Parameters
    ----------
    positions : (n, d) array_like
        Site positions; a 1-D array is read as a chain (d = 1).
    potentials : (n,) array_like, optional
        On-site potentials ``v``; zero by default.
    species : (n,) array_like of int, optional
    """

    def __init__(self, positions, potentials=None, species=None):
        pos = np.array(positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.ndim != 2 or pos.shape[0] < 1:
            raise ValueError("configuration needs at least one site")
        if pos.shape[1] not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {pos.shape[1]}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        n = pos.shape[0]
        v = np.zeros(n) if potentials is None else np.array(potentials, dtype=float)
        z = np.zeros(n, dtype=int) if species is None else np.array(species, dtype=int)
        if v.shape != (n,) or z.shape != (n,):
            raise ValueError("potentials/species length does not match positions")
        if np.any(z < 0):
            raise ValueError("species labels must be non-negative")

        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        if n > 1:
            off = dist[~np.eye(n, dtype=bool)]
            min_sep = float(off.min())
            if min_sep < COINCIDENT_TOL:
                raise ValueError(f"coincident sites (separation {min_sep:.3e})")
        else:
            min_sep = np.inf

        for arr in (pos, v, z, dist):
            arr.setflags(write=False)
        self.positions = pos
        self.potentials = v
        self.species = z
        self.distances = dist
        self.min_separation = min_sep

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __repr__(self) -> str:
        return f"Configuration(n={len(self)}, d={self.dim})"

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def sites(self) -> list[SiteState]:
        return [
            SiteState(tuple(p), float(v), int(z))
            for p, v, z in zip(self.positions, self.potentials, self.species)
        ]

    @property
    def diameter(self) -> float:
        return float(self.distances.max())

    def with_potentials(self, potentials) -> "Configuration":
        return Configuration(self.positions, potentials, self.species)

    def with_positions(self, positions) -> "Configuration":
        return Configuration(positions, self.potentials, self.species)

    def subset(self, indices: Sequence[int]) -> "Configuration":
        idx = list(indices)
        return Configuration(self.positions[idx], self.potentials[idx], self.species[idx])

    def to_json(self) -> str:
        return json.dumps(
            {
                "positions": self.positions.tolist(),
                "potentials": self.potentials.tolist(),
                "species": [int(s) for s in self.species],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Configuration":
        data = json.loads(text)
        return cls(data["positions"], data["potentials"], data["species"])


@dataclass(frozen=True)
class HoppingModel:
    """Exponentially decaying two- and three-centre hopping.

    ``cutoff`` switches on a cosine taper of ``h`` between
    ``cutoff - cutoff_width`` and ``cutoff``.
    """

    h0: float = 1.0
    gamma0: float = 1.0
    onsite_shift: float = 0.0
    three_centre_t0: float = 0.0
    cutoff: float | None = None
    cutoff_width: float = 1.0

    def __post_init__(self):
        if not self.h0 > 0 or not self.gamma0 > 0:
            raise ValueError("h0 and gamma0 must be positive")
        if self.three_centre_t0 < 0:
            raise ValueError("three_centre_t0 must be non-negative")
        if self.cutoff is not None and not (0 < self.cutoff_width <= self.cutoff):
            raise ValueError("need 0 < cutoff_width <= cutoff")

    def _taper(self, r):
        r = np.asarray(r, dtype=float)
        if self.cutoff is None:
            return np.ones_like(r), np.zeros_like(r)
        r_on = self.cutoff - self.cutoff_width
        s = np.clip((r - r_on) / self.cutoff_width, 0.0, 1.0)
        f = 0.5 * (1.0 + np.cos(np.pi * s))
        inside = (r > r_on) & (r < self.cutoff)
        df = np.where(inside, -0.5 * np.pi / self.cutoff_width * np.sin(np.pi * s), 0.0)
        return f, df

    def h(self, r):
        f, _ = self._taper(r)
        return self.h0 * np.exp(-self.gamma0 * np.asarray(r, dtype=float)) * f

    def dh(self, r):
        r = np.asarray(r, dtype=float)
        f, df = self._taper(r)
        e = self.h0 * np.exp(-self.gamma0 * r)
        return e * (df - self.gamma0 * f)

    def t(self, r1, r2):
        return self.three_centre_t0 * np.exp(
            -self.gamma0 * (np.asarray(r1, dtype=float) + np.asarray(r2, dtype=float))
        )


@dataclass(frozen=True)
class Hamiltonian:
    matrix: np.ndarray
    sites: tuple[int, ...]
    provenance: dict = field(default_factory=lambda: {"kind": "full"})

    @property
    def site_index(self) -> dict[int, int]:
        return {s: i for i, s in enumerate(self.sites)}

    def row(self, site: int) -> int:
        return self.sites.index(site)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _two_centre(dist: np.ndarray, model: HoppingModel) -> np.ndarray:
    n = dist.shape[0]
    off = ~np.eye(n, dtype=bool)
    h = np.zeros_like(dist)
    h[off] = model.h(dist[off])
    return h


def _decay(dist: np.ndarray, model: HoppingModel) -> np.ndarray:
    e = np.exp(-model.gamma0 * dist)
    np.fill_diagonal(e, 0.0)
    return e


def _symmetrize(a: np.ndarray) -> np.ndarray:
    # upper triangle wins so the result is bit-symmetric
    iu = np.triu_indices_from(a, 1)
    a = a.copy()
    a.T[iu] = a[iu]
    return a


def _matrix(dist: np.ndarray, v: np.ndarray, model: HoppingModel, mask=None) -> np.ndarray:
    h2 = _two_centre(dist, model)
    if mask is not None:
        h2 = np.where(mask, h2, 0.0)
    mat = h2
    if model.three_centre_t0 > 0:
        e = _decay(dist, model)
        if mask is not None:
            e = np.where(mask, e, 0.0)
        h3 = model.three_centre_t0 * (e @ e)
        if mask is not None:
            h3 = np.where(mask, h3, 0.0)
        mat = mat + h3
    mat = mat + np.diag(model.onsite_shift + v)
    return _symmetrize(mat)


def assemble(config: Configuration, model: HoppingModel) -> Hamiltonian:
    """Full Hamiltonian of ``config``."""
    mat = _matrix(config.distances, config.potentials, model)
    return Hamiltonian(mat, tuple(range(len(config))), {"kind": "full"})


def restrict(
    config: Configuration, model: HoppingModel, center: int, subset: Iterable[int]
) -> Hamiltonian:
    """Hamiltonian of the isolated cluster ``{center} | subset``.

    Three-centre sums run over the cluster only.  Rows follow ascending site
    index; use ``Hamiltonian.row(center)`` to locate the centre.
    """
    subset = set(int(k) for k in subset)
    n = len(config)
    if center in subset:
        raise ValueError("center must not belong to the neighbour subset")
    if not 0 <= center < n or any(not 0 <= k < n for k in subset):
        raise ValueError("site index out of range")
    sites = tuple(sorted(subset | {center}))
    idx = np.array(sites)
    dist = config.distances[np.ix_(idx, idx)]
    mat = _matrix(dist, config.potentials[idx], model)
    prov = {"kind": "restricted", "center": center, "subset": sorted(subset)}
    return Hamiltonian(mat, sites, prov)


def banded(config: Configuration, model: HoppingModel, r_c: float) -> Hamiltonian:
    """Drop every hop, and every three-centre leg, longer than ``r_c``."""
    if not r_c > 0:
        raise ValueError("r_c must be positive")
    mask = config.distances <= r_c
    mat = _matrix(config.distances, config.potentials, model, mask=mask)
    return Hamiltonian(mat, tuple(range(len(config))), {"kind": "banded", "r_c": r_c})


def neighborhood_truncate(
    config: Configuration, model: HoppingModel, center: int, r_c: float
) -> Hamiltonian:
    if not r_c > 0:
        raise ValueError("r_c must be positive")
    d = config.distances[center]
    ball = [k for k in range(len(config)) if k != center and d[k] <= r_c]
    ham = restrict(config, model, center, ball)
    prov = {"kind": "neighborhood", "center": center, "r_c": r_c}
    return Hamiltonian(ham.matrix, ham.sites, prov)


def make_chain(n: int, spacing: float = 1.0, onsite_pattern=(0.0,)) -> Configuration:
    """Equispaced 1-D chain with the on-site pattern tiled along it."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    pattern = np.atleast_1d(np.asarray(onsite_pattern, dtype=float))
    if pattern.size == 0:
        raise ValueError("empty on-site pattern")
    v = np.resize(pattern, n)
    return Configuration(spacing * np.arange(n, dtype=float), v)


def make_defect_chain(
    n: int,
    spacing: float,
    defect_site: int,
    defect_potential: float,
    onsite_pattern=(0.5, -0.5),
) -> Configuration:
    if not 0 <= defect_site < n:
        raise ValueError(f"defect_site {defect_site} outside chain of length {n}")
    base = make_chain(n, spacing, onsite_pattern)
    v = base.potentials.copy()
    v[defect_site] = defect_potential
    return base.with_potentials(v)


def hamiltonian_derivative(
    config: Configuration, model: HoppingModel, site: int, component
) -> np.ndarray:
    """Derivative of the full Hamiltonian with respect to one site coordinate.

    ``component`` is ``"v"`` for the on-site potential or an integer axis of
    the position ``r_site``.
    """
    n = len(config)
    if component == "v":
        d = np.zeros((n, n))
        d[site, site] = 1.0
        return d
    axis = int(component)
    if not 0 <= axis < config.dim:
        raise ValueError(f"axis {axis} out of range for dimension {config.dim}")
    dist = config.distances
    others = np.arange(n) != site
    unit = np.zeros(n)
    # d r_{site,j} / d r_site[axis]
    unit[others] = (config.positions[site, axis] - config.positions[others, axis]) / dist[site, others]

    dh = np.zeros((n, n))
    dh[site, others] = model.dh(dist[site, others]) * unit[others]
    dh[others, site] = dh[site, others]
    if model.three_centre_t0 > 0:
        e = _decay(dist, model)
        de = np.zeros((n, n))
        de[site, others] = -model.gamma0 * e[site, others] * unit[others]
        de[others, site] = de[site, others]
        dh = dh + model.three_centre_t0 * (de @ e + e @ de)
    return _symmetrize(dh)
