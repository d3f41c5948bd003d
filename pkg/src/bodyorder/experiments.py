"""Experiment configurations, presets and sweep drivers behind the CLI.

Each ``run_*`` function returns a :class:`Table`; ``Table.to_csv`` renders
the documented CSV layout (``#`` comment header, 17 significant digits).
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .lattice import (
    Configuration,
    HoppingModel,
    assemble,
    banded,
    make_chain,
    make_defect_chain,
    neighborhood_truncate,
)
from .linear import (
    DampingKernel,
    cheb_project,
    interp_build,
    interp_eval,
    Interpolant,
    kpm_estimate,
    matrix_interpolant,
    vacuum_sum,
)
from .potential import (
    GreenParams,
    IntervalSet,
    asymptotic_rate,
    capacity,
    fejer_points,
    green_value,
    leja_points,
    solve_gap_params,
)
from .ratefit import ErrorCurve, convergence_order, fit_rate
from .recursion import lanczos, theta
from .scf import EffectivePotentialSpec, damped_fixed_point, newton_scf
from .spectral import (
    FermiDirac,
    GrandPotential,
    eig,
    local_observable,
    observable_derivative,
    summarize_spectrum,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "Table",
    "PRESETS",
    "preset",
    "load_config",
    "run_converge",
    "run_truncation",
    "run_locality",
    "run_scf",
    "run_nodes",
    "run_vacuum",
    "RUNNERS",
]

GREEN_OFFSET = 0.1
SCHEMES = ("fejer", "leja", "chebyshev", "kpm", "bop", "vacuum")
OBSERVABLES = {"fermi_dirac": FermiDirac, "grand_potential": GrandPotential}


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


DEFAULTS: dict[str, Any] = {
    "system": {
        "n": 0,
        "spacing": 1.0,
        "pattern": [0.2, -0.2],
        "defect_site": -1,
        "defect_potential": 0.0,
        "center": -1,
    },
    "model": {"h0": 3.6, "gamma0": 2.0, "t0": 0.0},
    "observable": {"kind": "fermi_dirac", "beta": 100.0, "mu": 0.0},
    "scheme": {
        "kind": "fejer",
        "intervals": "",
        "kernel": "none",
        "terminator": "vacuum",
        "pad": 0.0,
        "inner_pad": 0.0,
        "pollute": False,
        "defect_halfwidth": 0.01,
        "nodes": 40,
        "grid": 2000,
    },
    "sweep": {"parameter": "N", "values": [10, 20, 30, 40]},
    "scf": {
        "solver": "newton",
        "onsite": [0.0],
        "yukawa_strength": 0.1,
        "yukawa_tau": 1.0,
        "reference_charge": 0.5,
        "alpha": 0.5,
        "tol": 1e-10,
        "max_iter": 50,
        "perturbation": 0.01,
        "approx_nodes": 0,
    },
    "output": "",
    "seed": 0,
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"{where}: unknown field")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where}: expected a table")
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = val
    return out


@dataclass
class ExperimentConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        cfg = cls(_merge(DEFAULTS, raw))
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.data[key]

    def validate(self) -> None:
        d = self.data
        sch, obs, sys_, sw = d["scheme"], d["observable"], d["system"], d["sweep"]
        if sch["kind"] not in SCHEMES:
            raise ConfigError(f"scheme.kind: unknown value {sch['kind']!r} (expected one of {', '.join(SCHEMES)})")
        if obs["kind"] not in OBSERVABLES:
            raise ConfigError(f"observable.kind: unknown value {obs['kind']!r}")
        try:
            DampingKernel(sch["kernel"])
        except ValueError as exc:
            raise ConfigError(f"scheme.kernel: {exc}") from None
        if sch["terminator"] not in ("vacuum", "square_root"):
            raise ConfigError(f"scheme.terminator: unknown value {sch['terminator']!r}")
        if not float(obs["beta"]) > 0:
            raise ConfigError("observable.beta: must be positive (inf allowed)")
        vals = sw["values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError("sweep.values: must be a non-empty list")
        if any(not isinstance(v, (int, float)) for v in vals):
            raise ConfigError("sweep.values: entries must be numbers")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("sweep.values: must be strictly ascending")
        if sys_["n"] < 0 or (sys_["n"] and sys_["spacing"] <= 0):
            raise ConfigError("system: need n >= 0 and spacing > 0")
        if sys_["n"] and sys_["defect_site"] >= sys_["n"]:
            raise ConfigError("system.defect_site: outside the chain")
        if sch["intervals"]:
            try:
                IntervalSet.parse(sch["intervals"])
            except ValueError as exc:
                raise ConfigError(f"scheme.intervals: {exc}") from None
        elif not sys_["n"]:
            raise ConfigError("system.n: a chain or scheme.intervals is required")

    # -- derived objects --------------------------------------------------------

    @property
    def digest(self) -> str:
        blob = json.dumps(self.data, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def observable(self):
        o = self.data["observable"]
        return OBSERVABLES[o["kind"]](float(o["beta"]), float(o["mu"]))

    def model(self) -> HoppingModel:
        m = self.data["model"]
        return HoppingModel(h0=m["h0"], gamma0=m["gamma0"], three_centre_t0=m["t0"])

    def has_system(self) -> bool:
        return self.data["system"]["n"] > 0

    def reference(self) -> Configuration:
        s = self.data["system"]
        return make_chain(s["n"], s["spacing"], s["pattern"])

    def configuration(self) -> Configuration:
        s = self.data["system"]
        if s["defect_site"] >= 0:
            return make_defect_chain(s["n"], s["spacing"], s["defect_site"], s["defect_potential"], s["pattern"])
        return self.reference()

    def center(self) -> int:
        s = self.data["system"]
        if s["center"] >= 0:
            return s["center"]
        if s["defect_site"] >= 0:
            return s["defect_site"]
        return s["n"] // 2

    def to_toml(self) -> str:
        import tomli_w

        return tomli_w.dumps(self.data)


def load_config(text: str) -> ExperimentConfig:
    import tomli

    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from None
    return ExperimentConfig.from_dict(raw)


# -- presets ----------------------------------------------------------------------

_E1 = "[-1,-0.2]U[0.2,1]"
_E2 = "[-1,-0.2]U[-0.06,-0.03]U[0.2,1]"

PRESETS: dict[str, dict] = {
    "fig-preasymptotic-E1": {
        "observable": {"beta": 100.0, "mu": 0.0},
        "scheme": {"kind": "fejer", "intervals": _E1},
        "sweep": {"values": list(range(1, 97, 5))},
    },
    "fig-preasymptotic-E2": {
        "observable": {"beta": 100.0, "mu": 0.0},
        "scheme": {"kind": "fejer", "intervals": _E2},
        "sweep": {"values": list(range(1, 97, 5))},
    },
    "chebyshev-metal": {
        "system": {"n": 200, "pattern": [0.0]},
        "model": {"h0": 1.0, "gamma0": 1.5},
        "observable": {"beta": 10.0, "mu": 0.0},
        "scheme": {"kind": "chebyshev"},
        "sweep": {"values": list(range(10, 61, 5))},
    },
    "bop-defect": {
        "system": {"n": 301, "defect_site": 150, "defect_potential": -0.2},
        "observable": {"beta": math.inf, "mu": -0.13},
        "scheme": {"kind": "bop"},
        "sweep": {"parameter": "K", "values": list(range(1, 41))},
    },
    "fejer-defect-polluted": {
        "system": {"n": 301, "defect_site": 150, "defect_potential": -0.2},
        "observable": {"beta": math.inf, "mu": -0.13},
        "scheme": {"kind": "fejer", "pollute": True},
        "sweep": {"values": list(range(5, 120, 3))},
    },
    "truncation": {
        "system": {"n": 40},
        "observable": {"beta": math.inf, "mu": -0.13},
        "sweep": {"parameter": "r_c", "values": [float(r) for r in range(3, 13)]},
    },
    "locality": {
        "system": {"n": 40, "center": 20, "pattern": [0.4, -0.4]},
        "observable": {"beta": 100.0, "mu": -0.13},
        "scheme": {"kind": "fejer", "nodes": 60},
        "sweep": {"parameter": "m", "values": list(range(0, 40))},
    },
    "scf-weak": {
        "system": {"n": 12, "pattern": [0.5, -0.5]},
        "observable": {"beta": 100.0, "mu": -0.105},
        "scheme": {"pad": 0.02, "inner_pad": 0.02},
        "scf": {"yukawa_strength": 0.1},
        "sweep": {"parameter": "iteration", "values": [0]},
    },
    "scf-weak-approx": {
        "system": {"n": 12, "pattern": [0.5, -0.5]},
        "observable": {"beta": 100.0, "mu": -0.105},
        "scheme": {"pad": 0.02, "inner_pad": 0.02},
        "scf": {"yukawa_strength": 0.1, "approx_nodes": 40},
        "sweep": {"parameter": "iteration", "values": [0]},
    },
    "scf-zero": {
        "system": {"n": 12, "pattern": [0.5, -0.5]},
        "observable": {"beta": 100.0, "mu": -0.105},
        "scf": {"yukawa_strength": 0.0},
        "sweep": {"parameter": "iteration", "values": [0]},
    },
    "nodes-interval": {
        "scheme": {"intervals": "[-1,1]"},
        "sweep": {"parameter": "n", "values": [5]},
    },
    "vacuum-chain": {
        "system": {"n": 10, "center": 5},
        "observable": {"beta": math.inf, "mu": -0.13},
        "scheme": {"kind": "vacuum"},
        "sweep": {"values": [2, 3, 4, 5]},
    },
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return ExperimentConfig.from_dict(PRESETS[name])


# -- output -------------------------------------------------------------------------

@dataclass
class Table:
    columns: list[str]
    rows: list[tuple]
    comments: list[str] = field(default_factory=list)
    footer: list[str] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def to_csv(self, config: ExperimentConfig | None = None) -> str:
        lines = [f"# bodyorder {__version__} config_sha256={config.digest if config else 'none'}"]
        lines += [f"# {c}" for c in self.comments]
        lines.append(",".join(self.columns))
        for row in self.rows:
            lines.append(",".join(_fmt(v) for v in row))
        lines += [f"# {c}" for c in self.footer]
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- shared set-up --------------------------------------------------------------------

@dataclass
class _Setup:
    E: IntervalSet
    params: GreenParams
    config: Configuration | None = None
    reference: Configuration | None = None
    ed: Any = None
    ed_reference: Any = None
    center: int = 0
    summary: Any = None


def _interval_setup(cfg: ExperimentConfig) -> _Setup:
    sch = cfg["scheme"]
    if not cfg.has_system():
        E = IntervalSet.parse(sch["intervals"])
        return _Setup(E, solve_gap_params(E))
    model = cfg.model()
    conf, ref = cfg.configuration(), cfg.reference()
    ed, ed_ref = eig(assemble(conf, model)), eig(assemble(ref, model))
    obs = cfg.observable()
    summary = None
    if sch["intervals"]:
        E = IntervalSet.parse(sch["intervals"])
    elif sch["kind"] in ("chebyshev", "kpm"):
        lam = ed.eigenvalues
        E = IntervalSet((float(lam[0]) - sch["pad"], float(lam[-1]) + sch["pad"]))
    else:
        summary = summarize_spectrum(ed_ref, ed, obs.mu, sch["pad"])
        grow = sch["inner_pad"]
        ivs = [(summary.I_minus[0], summary.I_minus[1] + grow), (summary.I_plus[0] - grow, summary.I_plus[1])]
        if sch["pollute"]:
            hw = sch["defect_halfwidth"]
            ivs += [(x - hw, x + hw) for x in summary.defect_eigenvalues]
        E = IntervalSet.from_intervals(sorted(ivs))
    return _Setup(E, solve_gap_params(E), conf, ref, ed, ed_ref, cfg.center(), summary)


def _rate_so_far(xs, errs) -> list[float]:
    out = []
    for i in range(len(xs)):
        if i + 1 < 4:
            out.append(math.nan)
            continue
        try:
            out.append(fit_rate(ErrorCurve.from_values(xs[: i + 1], errs[: i + 1])).rate)
        except ValueError:
            out.append(math.nan)
    return out


# -- runners ----------------------------------------------------------------------------

def run_converge(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """Approximation error against the sweep parameter for one scheme."""
    sch = cfg["scheme"]
    kind = sch["kind"]
    obs = cfg.observable()
    st = _interval_setup(cfg)
    grid = st.E.grid(sch["grid"])
    exact_grid = obs(grid)
    comments = [f"scheme={kind} E={st.E}"]
    try:
        comments.append(f"predicted_rate={asymptotic_rate(st.params, obs):.17g}")
    except ValueError:
        comments.append("predicted_rate=nan")
    exact_local = local_observable(st.ed, obs, st.center) if st.ed is not None else math.nan

    if kind == "bop":
        if st.config is None:
            raise ConfigError("scheme.kind = bop needs a system")
        K_max = int(max(cfg["sweep"]["values"]))
        J = lanczos(assemble(st.config, cfg.model()), st.center, min(K_max, len(st.config) - 1))
        if st.summary is not None:
            clean = solve_gap_params(IntervalSet.from_intervals([st.summary.I_minus, st.summary.I_plus]))
            comments.append(f"predicted_rate_defect_free={asymptotic_rate(clean, obs):.17g}")
            hw = sch["defect_halfwidth"]
            ivs = sorted([st.summary.I_minus, st.summary.I_plus] + [(x - hw, x + hw) for x in st.summary.defect_eigenvalues])
            polluted = solve_gap_params(IntervalSet.from_intervals(ivs))
            comments.append(f"predicted_rate_defect_polluted={asymptotic_rate(polluted, obs):.17g}")
            comments.append(f"defect_eigenvalues={list(st.summary.defect_eigenvalues)}")
        comments.append("rates for bop are per polynomial degree 2K+1")

    def point(v):
        N = int(v)
        sup_err = math.nan
        loc_err = math.nan
        if kind in ("fejer", "leja"):
            nodes = fejer_points(st.params, N + 1) if kind == "fejer" else leja_points(st.params, N + 1)
            X = interp_build(nodes)
            sup_err = float(np.max(np.abs(interp_eval(X, obs, grid) - exact_grid)))
            if st.ed is not None:
                loc_err = abs(matrix_interpolant(st.ed, X, obs, st.center) - exact_local)
        elif kind in ("chebyshev", "kpm"):
            hull = (st.E.endpoints[0], st.E.endpoints[-1])
            series = cheb_project(obs, N, hull, n_quad=max(2 * (N + 1), 512))
            if kind == "kpm":
                series = series.damped(DampingKernel(sch["kernel"]))
            sup_err = float(np.max(np.abs(series(grid) - exact_grid)))
            if st.ed is not None:
                if kind == "kpm":
                    approx = kpm_estimate(assemble(st.config, cfg.model()), st.center, obs, N, DampingKernel(sch["kernel"]), interval=hull)
                else:
                    w = st.ed.eigenvectors[st.ed.row(st.center)] ** 2
                    approx = float(np.dot(series(st.ed.eigenvalues), w))
                loc_err = abs(approx - exact_local)
        elif kind == "bop":
            loc_err = abs(theta(J.truncate(min(N, J.K)), obs) - exact_local)
        elif kind == "vacuum":
            loc_err = abs(vacuum_sum(st.config, cfg.model(), obs, st.center, N) - exact_local)
        return sup_err, loc_err

    values = cfg["sweep"]["values"]
    results = _pmap(point, values, threads)
    xs = [2 * int(v) + 1 if kind == "bop" else v for v in values]
    errs = [r[1] if kind in ("bop", "vacuum") or math.isnan(r[0]) else r[0] for r in results]
    rates = _rate_so_far(xs, errs)
    rows = [(v, r[0], r[1], rate) for v, r, rate in zip(values, results, rates)]
    return Table(
        [cfg["sweep"]["parameter"], "sup_error_on_E", "local_observable_error_at_center", "measured_rate_so_far"],
        rows,
        comments,
    )


def run_truncation(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """Observable error at the centre for the banded and neighbourhood truncations."""
    conf, model, obs = cfg.configuration(), cfg.model(), cfg.observable()
    c = cfg.center()
    exact = local_observable(eig(assemble(conf, model)), obs, c)

    def point(r_c):
        e_band = abs(local_observable(eig(banded(conf, model, r_c)), obs, c) - exact)
        e_nbh = abs(local_observable(eig(neighborhood_truncate(conf, model, c, r_c)), obs, c) - exact)
        return e_band, e_nbh

    values = cfg["sweep"]["values"]
    rows = [(float(v), *r) for v, r in zip(values, _pmap(point, values, threads))]
    table = Table(["r_c", "banded_error", "neighborhood_error"], rows, [f"center={c}"])
    for col in ("banded_error", "neighborhood_error"):
        curve = ErrorCurve.from_values(table.column("r_c"), table.column(col))
        try:
            f = fit_rate(curve)
            table.footer.append(f"{col}: slope={f.slope:.17g} r2={f.r2:.17g}")
        except ValueError:
            table.footer.append(f"{col}: fit unavailable")
    return table


def run_locality(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """``|d I_N O_l / d v_m|`` against the distance ``r_lm``."""
    conf, model, obs = cfg.configuration(), cfg.model(), cfg.observable()
    c = cfg.center()
    st = _interval_setup(cfg)
    X = interp_build(fejer_points(st.params, int(cfg["scheme"]["nodes"])))
    p = Interpolant(X, obs)
    ed = st.ed

    def point(m):
        m = int(m)
        d = observable_derivative(None, conf, model, p, c, m, "v", ed=ed)
        return float(conf.distances[c, m]), abs(d)

    values = [v for v in cfg["sweep"]["values"] if int(v) < len(conf)]
    rows = [(int(m), *r) for m, r in zip(values, _pmap(point, values, threads))]
    table = Table(["m", "distance", "abs_derivative"], rows, [f"center={c} nodes={len(X)}"])
    far = [(r, d) for _, r, d in rows if r > 0]
    curve = ErrorCurve.from_values([r for r, _ in far], [d for _, d in far])
    try:
        f = fit_rate(curve)
        table.footer.append(f"decay fit: slope={f.slope:.17g} r2={f.r2:.17g}")
    except ValueError:
        table.footer.append("decay fit unavailable")
    return table


def scf_inputs(cfg: ExperimentConfig):
    s = cfg["scf"]
    spec = EffectivePotentialSpec(
        onsite=tuple(s["onsite"]),
        yukawa_strength=s["yukawa_strength"],
        yukawa_tau=s["yukawa_tau"],
        reference_charges=s["reference_charge"],
    )
    conf = cfg.configuration()
    rng = np.random.default_rng(cfg["seed"])
    rho0 = spec.charges(len(conf)) + s["perturbation"] * rng.standard_normal(len(conf))
    return spec, conf, rho0


def run_scf(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """Residual history of the SCF solve."""
    s = cfg["scf"]
    spec, conf, rho0 = scf_inputs(cfg)
    model, obs = cfg.model(), cfg.observable()
    approx = None
    if s["approx_nodes"] > 0:
        st = _interval_setup(cfg)
        approx = interp_build(fejer_points(st.params, int(s["approx_nodes"])))
    if s["solver"] == "newton":
        res = newton_scf(spec, conf, model, obs, rho0, approx, s["tol"], s["max_iter"])
    else:
        res = damped_fixed_point(spec, conf, model, obs, rho0, approx, s["alpha"], s["tol"], s["max_iter"])
    rows = [(i, r) for i, r in enumerate(res.history)]
    table = Table(["iteration", "residual_inf"], rows, [f"solver={s['solver']} iterations={len(res.history) - 1}"])
    try:
        table.footer.append(f"convergence_order={convergence_order(res.history):.17g}")
    except ValueError:
        table.footer.append("convergence_order=nan")
    table.footer.append("rho=" + " ".join(format(float(x), ".17g") for x in res.rho))
    return table


def run_nodes(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """Fejer and Leja node sets on an interval union, with ``g_E`` sampled
    at ``fejer + i * green_offset``."""
    st = _interval_setup(cfg)
    comments = [f"E={st.E}", f"capacity={capacity(st.params):.17g}",
                f"numerator_coeffs={list(st.params.numerator_coeffs)}"]
    try:
        comments.append(f"predicted_rate={asymptotic_rate(st.params, cfg.observable()):.17g}")
    except ValueError:
        pass
    rows = []
    for n in cfg["sweep"]["values"]:
        n = int(n)
        fej = fejer_points(st.params, n) if n >= 2 else np.array([st.E.endpoints[-1]])
        lej = np.sort(leja_points(st.params, n, max(2000, 4 * n)))
        for j in range(n):
            g = green_value(st.params, complex(fej[j], GREEN_OFFSET))
            rows.append((n, j, float(fej[j]), float(lej[j]), g))
    comments.append(f"green_offset={GREEN_OFFSET}")
    return Table(["n", "j", "fejer", "leja", "green"], rows, comments)


def run_vacuum(cfg: ExperimentConfig, threads: int = 1) -> Table:
    """Vacuum cluster expansion against interpolation at matched body order."""
    conf, model, obs = cfg.configuration(), cfg.model(), cfg.observable()
    st = _interval_setup(cfg)
    c = st.center
    exact = local_observable(st.ed, obs, c)

    def point(N):
        N = int(N)
        vac = abs(vacuum_sum(conf, model, obs, c, N) - exact)
        lin = abs(matrix_interpolant(st.ed, interp_build(fejer_points(st.params, N)), obs, c) - exact)
        return vac, lin

    values = cfg["sweep"]["values"]
    rows = [(int(v), *r) for v, r in zip(values, _pmap(point, values, threads))]
    return Table(["N", "vacuum_error", "interpolation_error"], rows, [f"E={st.E}"])


RUNNERS = {
    "converge": run_converge,
    "truncate": run_truncation,
    "locality": run_locality,
    "scf": run_scf,
    "nodes": run_nodes,
    "vacuum": run_vacuum,
}
