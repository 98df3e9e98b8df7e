import json

import numpy as np
import pandas as pd
import pytest
import yaml

from heatmilp.cli import EXIT_CONFIG, EXIT_OK, main
from heatmilp.config import ConfigError, default_tree, load_settings, merge
from heatmilp.scenarios import ScenarioConfig
from heatmilp.study import (objectives_non_increasing, prepare_dataset, run_scenario,
                            select_scenarios, wood_tax_check)

# a coarse grid keeps the command-line solves to a few seconds
SMALL = {"grid": {"n_periods": 2, "days_per_period": 3, "step_hours": 12},
         "controls": {"time_limit": 120.0}}


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text(yaml.safe_dump(SMALL))
    return str(p)


# -- config -------------------------------------------------------------------
def test_merge_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="grid.n_period"):
        merge(default_tree(), {"grid": {"n_period": 3}})
    assert merge(default_tree(), {"grid": {"n_periods": 3}})["grid"]["n_periods"] == 3


def test_bad_config_values(tmp_path):
    with pytest.raises(ConfigError):
        load_settings(overrides={"relax_study": {"values": [-1.0]}})
    with pytest.raises(ConfigError):
        load_settings(overrides={"controls": {"format": "xlsx"}})
    with pytest.raises(ConfigError, match="not found"):
        load_settings(tmp_path / "nope.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_settings(tmp_path / "list.yaml")


def test_print_defaults_round_trips(capsys):
    assert main(["--print-defaults"]) == EXIT_OK
    tree = yaml.safe_load(capsys.readouterr().out)
    assert tree == yaml.safe_load(yaml.safe_dump(default_tree()))
    s = load_settings(overrides=tree)
    assert s.controls.target_gap == default_tree()["controls"]["target_gap"]


def test_removing_a_technology():
    s = load_settings(overrides={"catalog": {"technologies": {"STES": None}}})
    assert "STES" not in [k.value for k in s.catalog.kinds]


# -- study helpers ------------------------------------------------------------------
def test_select_scenarios_dedupes_with_warning():
    with pytest.warns(UserWarning, match="twice"):
        out = select_scenarios(["NWB-CT74-RE-NG", "NWB-CT74-RE-NG", "WWB-CT74-RE-NG"], ScenarioConfig())
    assert [s.name for s in out] == ["NWB-CT74-RE-NG", "WWB-CT74-RE-NG"]
    assert len(select_scenarios("all", ScenarioConfig())) == 16
    with pytest.raises(KeyError, match="valid names"):
        select_scenarios(["nope"], ScenarioConfig())


def test_non_increasing_within_gap():
    assert objectives_non_increasing([100, 90, 90], [0, 0, 0])
    assert objectives_non_increasing([100, 105], [0, 0.1])  # 105 * 0.9 <= 100
    assert not objectives_non_increasing([100, 120], [0, 0.1])


def test_wood_tax_check_records():
    frame = pd.DataFrame([
        {"scenario": "WWB-CT200-RE-NG", "share_WB": 0.4, "final_gap": 0.1},
        {"scenario": "WWB-CT74-RE-NG", "share_WB": 0.3, "final_gap": 0.1},
        {"scenario": "WWB-CT200-RE-VG", "share_WB": 0.2, "final_gap": 0.1},
        {"scenario": "WWB-CT74-RE-VG", "share_WB": 0.3, "final_gap": 0.1},
    ])
    checks = {c["high"]: c["holds"] for c in wood_tax_check(frame)}
    assert checks == {"WWB-CT200-RE-NG": True, "WWB-CT200-RE-VG": False}


def test_tighter_gap_never_worse_than_loose_bound(tmp_path, cfg):
    objs = {}
    for gap in (0.30, 0.10):
        s = load_settings(cfg, {"controls": {"target_gap": gap}})
        prep = prepare_dataset(s)
        out = run_scenario(s, ScenarioConfig.from_name("NWB-CT74-RE-NG", s.template), prep,
                           tmp_path / f"g{gap}")
        assert out.solved and out.result.final_gap <= gap + 1e-9
        objs[gap] = out.result
    # each incumbent lies within its certified gap of the common optimum
    assert objs[0.10].objective * 0.9 <= objs[0.30].objective + 1e-6
    assert objs[0.30].objective * 0.7 <= objs[0.10].objective + 1e-6


# -- command line ----------------------------------------------------------------------
def test_no_verb_is_usage_error(capsys):
    assert main([]) == EXIT_CONFIG


def test_prepare_writes_dataset(tmp_path, cfg, capsys):
    assert main(["prepare", "--config", cfg, "--out-dir", str(tmp_path), "--synthesize", "7"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "annual heat" in out.lower()
    assert (tmp_path / "dataset" / "series.csv").exists()
    assert json.loads((tmp_path / "dataset" / "grid.json").read_text())["grid"]


def test_solve_then_validate(tmp_path, cfg, capsys):
    rc = main(["solve", "--config", cfg, "--out-dir", str(tmp_path), "--scenario", "WWB-CT74-RE-NG",
               "--gap", "0.05"])
    assert rc == EXIT_OK
    run = tmp_path / "WWB-CT74-RE-NG"
    for name in ("assignment.json", "summary.json", "schedule.csv", "kpi.csv", "costs.csv",
                 "residuals.csv", "plot_production.csv", "plot_preheat.csv"):
        assert (run / name).exists(), name
    summary = json.loads((run / "summary.json").read_text())
    assert summary["audit"]["max_balance_residual"] <= 1e-6
    assert summary["cost"]["lcoh"] == pytest.approx(summary["lcoh_from_objective"], rel=1e-4)
    capsys.readouterr()
    assert main(["validate", "--config", cfg, "--out-dir", str(tmp_path), str(run)]) == EXIT_OK
    assert "0 schedule violation" in capsys.readouterr().out
    assert (run / "residuals_revalidated.csv").exists()


def test_unknown_scenario_lists_names(tmp_path, cfg, capsys):
    rc = main(["solve", "--config", cfg, "--out-dir", str(tmp_path), "--scenario", "XYZ"])
    assert rc == EXIT_CONFIG
    assert "NWB-CT74-RE-NG" in capsys.readouterr().err


def test_sweep_two_scenarios(tmp_path, cfg, capsys):
    rc = main(["sweep", "--config", cfg, "--out-dir", str(tmp_path), "--gap", "0.1",
               "--scenario", "WWB-CT74-RE-NG", "--scenario", "WWB-CT200-RE-NG",
               "--scenario", "WWB-CT74-RE-NG"])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    assert "listed twice" in out
    frame = pd.read_csv(tmp_path / "sweep" / "matrix.csv")
    assert list(frame.scenario) == ["WWB-CT74-RE-NG", "WWB-CT200-RE-NG"]
    assert frame.lcoh.notna().all() and frame.renewable_share.notna().all()
    checks = json.loads((tmp_path / "sweep" / "checks.json").read_text())
    assert len(checks) == 1 and "gap_high" in checks[0]


def test_relax_study_single_value(tmp_path, cfg, capsys):
    rc = main(["relax-study", "--config", cfg, "--out-dir", str(tmp_path), "--values", "10", "--gap", "0.1"])
    assert rc == EXIT_OK
    frame = pd.read_csv(tmp_path / "relax" / "relax_study.csv")
    assert list(frame.dt_relax_max) == [10.0] and frame.objective.notna().all()


def test_relax_study_negative_value(tmp_path, cfg, capsys):
    rc = main(["relax-study", "--config", cfg, "--out-dir", str(tmp_path), "--values", "-5"])
    assert rc == EXIT_CONFIG
    assert ">= 0" in capsys.readouterr().err


def test_missing_price_file_named(tmp_path, capsys):
    stamps = pd.date_range("2022-01-01", periods=8760, freq="h")
    files = {}
    for name in ("heat_load", "t_ext", "gi", "elec_co2"):
        files[name] = str(tmp_path / f"{name}.csv")
        pd.DataFrame({"timestamp": stamps, "value": np.ones(8760)}).to_csv(files[name], index=False)
    files["elec_price"] = str(tmp_path / "prices_2022.csv")
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump({"data": {"synthesize": None, "files": files}}))
    rc = main(["prepare", "--config", str(p), "--out-dir", str(tmp_path / "o")])
    assert rc == EXIT_CONFIG
    assert "prices_2022.csv" in capsys.readouterr().err


def test_validate_without_run_files(tmp_path, cfg, capsys):
    assert main(["validate", "--config", cfg, "--out-dir", str(tmp_path), str(tmp_path / "none")]) == EXIT_CONFIG
