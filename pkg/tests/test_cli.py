import hashlib
import json
import math

import numpy as np
import pytest

from bodyorder import __version__
from bodyorder.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from bodyorder.experiments import (
    PRESETS,
    ConfigError,
    ExperimentConfig,
    Table,
    load_config,
    preset,
    run_converge,
    run_nodes,
    run_scf,
    run_truncation,
)

SMALL_FEJER = """
[observable]
beta = 100.0
[scheme]
kind = "fejer"
intervals = "[-1,-0.2]U[0.2,1]"
[sweep]
values = [4, 10, 16, 22, 28, 34, 40]
"""


def test_csv_is_byte_identical_across_runs(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(SMALL_FEJER)
    outs = []
    for threads in (1, 3):
        out = tmp_path / f"o{threads}.csv"
        assert main(["converge", "--config", str(cfg), "--out", str(out), "--threads", str(threads)]) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_header_carries_version_and_config_hash(capsys):
    assert main(["nodes", "--preset", "nodes-interval"]) == EXIT_OK
    first = capsys.readouterr().out.splitlines()[0]
    cfg = preset("nodes-interval")
    blob = json.dumps(cfg.data, sort_keys=True, default=str).encode()
    assert first == f"# bodyorder {__version__} config_sha256={hashlib.sha256(blob).hexdigest()}"


def test_seed_changes_hash(capsys):
    main(["nodes", "--preset", "nodes-interval", "--seed", "7"])
    a = capsys.readouterr().out.splitlines()[0]
    main(["nodes", "--preset", "nodes-interval"])
    b = capsys.readouterr().out.splitlines()[0]
    assert a != b


def test_floats_use_17_significant_digits():
    t = Table(["x"], [(1.0 / 3.0,)])
    assert t.to_csv().splitlines()[-1] == format(1.0 / 3.0, ".17g")
    assert float(t.to_csv().splitlines()[-1]) == 1.0 / 3.0


def test_nodes_closed_form():
    t = run_nodes(preset("nodes-interval"))
    expected = [-1.0, -math.sqrt(0.5), 0.0, math.sqrt(0.5), 1.0]
    np.testing.assert_allclose(t.column("fejer"), expected, atol=1e-8)
    # g_[-1,1](z) = log|z + sqrt(z^2 - 1)| at z = x + 0.1i
    z = t.column("fejer") + 0.1j
    w = z + np.sqrt(z - 1) * np.sqrt(z + 1)
    np.testing.assert_allclose(t.column("green"), np.log(np.abs(w)), atol=1e-6)


def test_truncation_beyond_diameter_is_exact():
    cfg = ExperimentConfig.from_dict({
        "system": {"n": 10},
        "observable": {"beta": 50.0, "mu": -0.13},
        "sweep": {"parameter": "r_c", "values": [10.0, 12.0]},
    })
    t = run_truncation(cfg)
    assert np.all(t.column("banded_error") < 1e-12)
    assert np.all(t.column("neighborhood_error") < 1e-12)


def test_scf_zero_coupling_one_iteration():
    t = run_scf(preset("scf-zero"))
    assert len(t.rows) == 2
    assert "iterations=1" in t.comments[0]


def test_scf_weak_newton_footer():
    t = run_scf(preset("scf-weak"))
    order = float(next(c for c in t.footer if c.startswith("convergence_order=")).split("=")[1])
    assert order >= 1.8


def test_fejer_errors_decrease_in_trend():
    t = run_converge(load_config(SMALL_FEJER))
    err = t.column("sup_error_on_E")
    assert err[-1] < 1e-2 * err[0]
    assert np.all(err[2:] < err[:-2])


def test_chebyshev_metal_rate():
    t = run_converge(preset("chebyshev-metal"))
    predicted = float(next(c for c in t.comments if c.startswith("predicted_rate=")).split("=")[1])
    measured = t.column("measured_rate_so_far")[-1]
    assert measured == pytest.approx(predicted, rel=0.2)


def test_bop_reports_both_predictions():
    cfg = preset("bop-defect")
    cfg.data["sweep"]["values"] = [1, 2, 3, 4, 5]
    t = run_converge(cfg)
    names = {c.split("=")[0] for c in t.comments}
    assert {"predicted_rate_defect_free", "predicted_rate_defect_polluted"} <= names
    assert len(t.rows) == 5


class TestPresets:
    def test_list(self, capsys):
        assert main(["preset", "list"]) == EXIT_OK
        assert capsys.readouterr().out.split() == sorted(PRESETS)

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_dump_round_trips(self, name, capsys):
        assert main(["preset", "dump", name]) == EXIT_OK
        again = load_config(capsys.readouterr().out)
        assert again.data == preset(name).data
        assert again.digest == preset(name).digest

    def test_unknown(self, capsys):
        assert main(["converge", "--preset", "nope"]) == EXIT_CONFIG
        assert "unknown preset" in capsys.readouterr().err


class TestErrors:
    def test_toml_syntax_reports_location(self, tmp_path, capsys):
        p = tmp_path / "bad.toml"
        p.write_text("[scheme]\nkind = \n")
        assert main(["converge", "--config", str(p)]) == EXIT_CONFIG
        assert "line 2" in capsys.readouterr().err

    def test_unknown_field_named(self, capsys, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("[scheme]\nkinds = 'fejer'\n")
        assert main(["converge", "--config", str(p)]) == EXIT_CONFIG
        assert "scheme.kinds" in capsys.readouterr().err

    @pytest.mark.parametrize("raw", [
        {"scheme": {"kind": "spline"}},
        {"sweep": {"values": []}},
        {"sweep": {"values": [3, 2]}},
        {"observable": {"beta": -1.0}},
        {"scheme": {"kernel": "boxcar"}},
        {"system": {"n": 0}},
    ])
    def test_validation(self, raw):
        base = {"scheme": {"intervals": "[-1,1]"}} if "system" not in raw else {}
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**base, **raw})

    def test_missing_file(self, tmp_path, capsys):
        assert main(["converge", "--config", str(tmp_path / "none.toml")]) == EXIT_CONFIG

    def test_bad_threads(self):
        assert main(["nodes", "--preset", "nodes-interval", "--threads", "0"]) == EXIT_CONFIG

    def test_numerical_failure_exit_code(self, tmp_path, capsys):
        # an SCF solve that runs out of iterations is a numerical failure, not a config error
        cfg = preset("scf-weak")
        cfg.data["scf"]["max_iter"] = 1
        p = tmp_path / "short.toml"
        p.write_text(cfg.to_toml())
        assert main(["scf", "--config", str(p)]) == EXIT_NUMERIC
        assert "numerical failure" in capsys.readouterr().err
