import copy
import csv
import json
import warnings
from importlib import resources

import pytest

from mmwave_coord import cli
from mmwave_coord.config import (ConfigError, expand_sweep, get_path, load_document, network_from_dict,
                                 parse_document, set_path, validate_document)
from mmwave_coord.quadrature import QuadratureWarning


def bundled(name):
    return json.loads(resources.files("mmwave_coord").joinpath("configs", f"{name}.json").read_text())


def small(doc, n=400):
    doc = copy.deepcopy(doc)
    doc["experiment"].setdefault("sim", {})["n_realizations"] = n
    return doc


@pytest.mark.parametrize("name", ["fig2", "fig3", "fig4", "fig5", "fig6"])
def test_bundled_configs_are_clean(name):
    report = validate_document(bundled(name))
    assert report.ok and not report.warnings, report.render()


def test_fig3_network_values():
    cfg = network_from_dict(bundled("fig3")["network"])
    assert cfg.propagation.c_los == pytest.approx(1e-6)
    assert cfg.operators[1].tx_power == pytest.approx(10 ** (-0.5))
    assert cfg.operators[0].bandwidth == 100e6
    assert cfg.antenna.side_lobe == pytest.approx(0.1)


def test_missing_key_is_named():
    doc = bundled("fig3")
    del doc["network"]["propagation"]["mu"]
    report = validate_document(doc)
    assert not report.ok
    assert any("'mu'" in e for e in report.errors)


def test_unknown_key_is_listed():
    doc = bundled("fig3")
    doc["network"]["operators"][0]["tx_power_dbw"] = 1
    with pytest.raises(ConfigError) as info:
        parse_document(doc)
    assert any("tx_power_dbw" in p for p in info.value.problems)


def test_capacity_warning_in_report():
    doc = bundled("fig3")
    doc["network"]["operators"][0]["coord_size"] = 7
    doc["network"]["operators"][1]["coord_size"] = 6
    report = validate_document(set_path(doc, "experiment.mode", "coverage_analytic"))
    assert report.ok
    assert any("13 coordinated" in w and "RF chain" in w for w in report.warnings)


def test_positive_intercept_warns():
    doc = set_path(bundled("fig3"), "network.propagation.intercept_los_db", 3)
    report = validate_document(doc)
    assert report.ok and any("intercept_los_db" in w for w in report.warnings)


def test_parse_error_has_line_and_column(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "network": {\n    "mu": 144,,\n}')
    with pytest.raises(ConfigError) as info:
        load_document(bad)
    assert "line 3" in str(info.value) and "column" in str(info.value)
    assert cli.main(["validate", "--config", str(bad)]) == cli.EXIT_CONFIG


def test_paths_and_sweep_expansion():
    doc = bundled("fig3")
    assert get_path(doc, "network.operators[1].coord_size") == 6
    changed = set_path(doc, "network.operators[1].coord_size", 3)
    assert get_path(changed, "network.operators[1].coord_size") == 3
    assert get_path(doc, "network.operators[1].coord_size") == 6
    with pytest.raises(ConfigError):
        set_path(doc, "network.operators[5].coord_size", 1)
    points = list(expand_sweep(doc))
    assert len(points) == 6
    assert all(p["experiment"]["mode"] == "coverage_both" for p, _ in points)
    assert len({tag for _, tag in points}) == 6


def _read(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def _write(tmp_path, doc, name="exp.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_coverage_run_outputs_and_reproducibility(tmp_path, capsys):
    doc = small(bundled("fig3"))
    doc["experiment"]["grid"]["count"] = 12
    doc["experiment"]["sweep"]["axes"] = [{"path": "network.operators[1].coord_size", "values": [0, 6]}]
    cfg = _write(tmp_path, doc)
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "5"]) == 0
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "5"]) == 0
    names = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert len(names) == 8
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    sim = _read(tmp_path / "a" / "coverage_sim__operators1.coord_size=6.csv")
    assert sim[0] == ["gamma_bps", "coverage", "stderr"]
    assert len(sim) == 13
    ana = _read(tmp_path / "a" / "coverage_analytic__operators1.coord_size=6.csv")
    assert ana[0] == ["gamma_bps", "coverage"]
    assert len(ana[1][1].replace("0.", "")) >= 10
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert "operators1.coord_size=6" in summary["median_gain_over_no_sharing"]
    assert (tmp_path / "a" / "plot.py").exists()
    # the manifest alone reproduces every table
    manifest = tmp_path / "a" / "manifest.json"
    assert json.loads(manifest.read_text())["seeds"]["base_seed"] == 5
    assert cli.main(["run", "--config", str(manifest), "--out", str(tmp_path / "c")]) == 0
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "c" / name).read_bytes()


def test_engine_flag_and_cli_sweep(tmp_path):
    doc = small(bundled("fig3"))
    doc["experiment"] = {k: v for k, v in doc["experiment"].items() if k != "sweep"}
    doc["experiment"]["mode"] = "coverage_both"
    doc["experiment"]["grid"]["count"] = 6
    cfg = _write(tmp_path, doc)
    out = tmp_path / "s"
    rc = cli.main(["sweep", "--config", cfg, "--out", str(out), "--engine", "analytic",
                   "--axis", "network.antenna.n_antennas=12,24", "--no-sharing-baseline"])
    assert rc == 0
    names = sorted(p.name for p in out.glob("*.csv"))
    assert names and all(n.startswith("coverage_analytic") for n in names)
    assert len(names) == 4
    assert cli.main(["sweep", "--config", cfg, "--out", str(out)]) == cli.EXIT_CONFIG


def test_cdf_verify_run(tmp_path, capsys):
    doc = small(bundled("fig2"), 500)
    doc["experiment"]["ranks"] = [1, 3]
    doc["experiment"]["grid"]["count"] = 25
    assert cli.main(["run", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "o")]) == 0
    rows = _read(tmp_path / "o" / "cdf_verify_K3.csv")
    assert rows[0] == ["t_linear", "cdf_analytic", "cdf_empirical"]
    assert len(rows) == 26
    assert "KS distance" in capsys.readouterr().out


def test_los_ratio_run(tmp_path):
    doc = small(bundled("fig6"))
    doc["experiment"]["ranks"] = [1, 10]
    assert cli.main(["run", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "o"),
                     "--engine", "analytic"]) == 0
    rows = _read(tmp_path / "o" / "los_ratio__operators0.density_per_m2=8e-05.csv")
    assert rows[0] == ["k", "los_fraction_analytic", "los_fraction_empirical"]
    assert rows[2][0] == "10" and rows[2][2] == ""
    assert float(rows[2][1]) == pytest.approx(0.90, abs=0.05)


def test_numerical_failure_exits_nonzero(tmp_path, monkeypatch):
    def failing(query, settings=None):
        warnings.warn("quadrature did not converge", QuadratureWarning)
        return original(query, settings)

    original = cli.rate_coverage_analytic
    monkeypatch.setattr(cli, "rate_coverage_analytic", failing)
    doc = small(bundled("fig3"))
    doc["experiment"] = {"mode": "coverage_analytic", "grid": {"min": 1e7, "max": 3e9, "count": 5}}
    rc = cli.main(["run", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "o")])
    assert rc == cli.EXIT_NUMERICAL
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["numerical_warnings"]


def test_invalid_config_exit_code(tmp_path, capsys):
    doc = bundled("fig3")
    del doc["network"]["antenna"]
    assert cli.main(["run", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert "antenna" in capsys.readouterr().err
