import json
import subprocess
import sys

import numpy as np
import pytest

from isacpulse import io
from isacpulse.cli import RunConfig, build_parser, config_from_args, main

DESK = ["--L", "64", "--NT", "8", "--Lg", "128", "--fs", "160e6"]


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_run_config_round_trip():
    rc = RunConfig(command="tradeoff", betas=(0.1, 0.5), roi_m=(4.0, 9.0), seed=7)
    assert RunConfig.from_dict(json.loads(json.dumps(rc.to_dict()))) == rc
    with pytest.raises(ValueError, match="unknown config keys"):
        RunConfig.from_dict({"bogus": 1})


def test_flags_override_config_file(tmp_path):
    saved = tmp_path / "cfg.json"
    assert main(["tradeoff", *DESK, "--betas", "0.3", "--save-config", str(saved),
                 "--out", str(tmp_path / "o")]) == 0
    ns = build_parser().parse_args(["tradeoff", "--config", str(saved), "--beta", "0.6", "--seed", "3"])
    rc = config_from_args(ns)
    assert rc.frame.L_g == 128 and rc.frame.beta == 0.6 and rc.seed == 3 and rc.betas == (0.3,)
    loaded = RunConfig.from_dict(json.loads(saved.read_text()))
    assert loaded.frame.N_T == 8 and loaded.output_dir == str(tmp_path / "o")


def test_design_admm_writes_outputs(tmp_path, capsys):
    assert run(tmp_path, "design", *DESK, "--roi", "8:32m") == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["isl_opt"] < rep["isl_rrc"]
    assert rep["nyquist_residual"] < 1e-8
    assert io.read_pulse_csv(tmp_path / "pulse.csv").samples.size == 128
    assert (tmp_path / "esd.csv").read_text().startswith("omega,df_hz=")
    assert "ISL" in capsys.readouterr().out


def test_design_sca(tmp_path):
    assert run(tmp_path, "design", *DESK, "--solver", "sca") == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["constraints"]["oobe_ok"] and rep["report"]["converged"]
    assert rep["first_sidelobe_opt_db"] < rep["first_sidelobe_rrc_db"]


def test_design_postcondition_failure_exit_code(tmp_path):
    # one ADMM iteration cannot meet the 1e-10 stopping rule
    assert run(tmp_path, "design", *DESK, "--iters", "1") == 2


def test_af_stats_with_monte_carlo_and_external_pulse(tmp_path):
    assert run(tmp_path / "d", "design", *DESK) == 0
    pulse = tmp_path / "d" / "pulse.csv"
    assert run(tmp_path, "af-stats", *DESK, "--pulse", str(pulse), "--frames", "50", "--max-delay", "20") == 0
    t = io.read_table_csv(tmp_path / "saf.csv")
    assert t["delay_bin"].tolist() == list(range(21))
    assert np.all(np.isfinite(t["z_score"]))
    assert t["expected_saf_norm"][0] > 0.9
    assert run(tmp_path, "af-stats", *DESK, "--doppler-slice") == 0
    assert io.read_table_csv(tmp_path / "saf_doppler_slice.csv")["doppler_bin"].size == 128


def test_af_stats_errors(tmp_path, capsys):
    assert run(tmp_path, "af-stats", *DESK, "--pulse", str(tmp_path / "nope.csv")) == 1
    assert "not found" in capsys.readouterr().err
    assert run(tmp_path / "d", "design", *DESK) == 0
    assert run(tmp_path, "af-stats", "--pulse", str(tmp_path / "d" / "pulse.csv")) == 1


def test_tradeoff_columns(tmp_path):
    assert run(tmp_path, "tradeoff", *DESK, "--betas", "0,0.3,0.9") == 0
    t = io.read_table_csv(tmp_path / "tradeoff.csv")
    assert t["bit_rate"].tolist() == [4.0, 4 / 1.3, 4 / 1.9]
    assert abs(t["opt_isl"][0] - t["rrc_isl"][0]) <= 1e-9
    assert np.all(t["opt_isl"] <= t["rrc_isl"] * (1 + 1e-12))
    assert np.all(t["wisl_csi"] <= t["wisl_no_csi"] * (1 + 1e-12))


def test_experiments_are_deterministic(tmp_path):
    scen = {"rd_map": {"targets": [{"range_m": 22.0}, {"range_m": 32.0, "amplitude": 0.8}],
                       "snr_db": 10.0, "max_delay": 120},
            "ranging": {"intervals": [[18, 27], [32, 41]], "amplitudes": [1, 0.8],
                        "snr_db": [0.0, 20.0], "trials": 4}}
    sfile = tmp_path / "scen.json"
    sfile.write_text(json.dumps(scen))
    for d in ("a", "b"):
        assert run(tmp_path / d, "experiments", "--scenario", str(sfile), "--seed", "5") == 0
    for name in ("rd_rrc.csv", "rd_optimized.csv", "rd_symbol.csv", "rmse.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert json.loads((tmp_path / "a" / "experiments.json").read_text())["rmse"]["rrc"]


def test_experiments_reject_zero_trials(tmp_path, capsys):
    assert run(tmp_path, "experiments", *DESK, "--trials", "0") == 1
    assert "at least one trial" in capsys.readouterr().err


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ISACPULSE_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["tradeoff", *DESK, "--betas", "0.3"]) == 0
    assert (tmp_path / "env" / "tradeoff.csv").is_file()


def test_invalid_arguments():
    with pytest.raises(SystemExit):
        main(["design", "--roi", "8-32"])
    assert main(["design", "--Lg", "100"]) == 1


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "isacpulse", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "design" in out.stdout
