import json
import os

import pytest

from hessmpc.cli import main
from hessmpc.config import (
    EngineConfig, from_dict, load_config, save_config, to_dict, validate,
)
from hessmpc.errors import ConfigError


def test_default_config_has_no_findings():
    assert validate(EngineConfig()) == []


def test_bad_efficiency_reported_at_path():
    cfg = EngineConfig()
    cfg.bess.eta_c = 1.2
    findings = validate(cfg)
    assert any(f.severity == "error" and f.path == "bess.eta_c" for f in findings)


def test_bad_envelope_and_controller():
    cfg = EngineConfig()
    cfg.caes.envelope_frac = (0.9, 0.1)
    cfg.controller = "magic"
    paths = {f.path for f in validate(cfg) if f.severity == "error"}
    assert "caes.envelope_frac" in paths
    assert "controller" in paths


def test_short_horizon_warning():
    cfg = EngineConfig()
    cfg.n3 = 5
    findings = validate(cfg)
    assert any(f.severity == "warning" and f.path == "n3" for f in findings)


def test_cubic_norm_flag():
    cfg = EngineConfig()
    cfg.l3_norm_power = 3
    assert validate(cfg) == []
    cfg.controller = "periodic_soc"
    assert any(f.path == "l3_norm_power" for f in validate(cfg))
    cfg.l3_norm_power = 4
    cfg.controller = "proposed"
    assert any(f.path == "l3_norm_power" for f in validate(cfg))


def test_config_round_trip(tmp_path):
    cfg = EngineConfig()
    cfg.scenario.seed = 17
    cfg.c_l3 = (0.7, 0.7)
    path = tmp_path / "config.json"
    save_config(cfg, str(path))
    back = load_config(str(path))
    assert back.scenario.seed == 17
    assert back.c_l3 == (0.7, 0.7)
    assert to_dict(back) == to_dict(cfg)


def test_include_mechanism(tmp_path):
    base = tmp_path / "devices.json"
    base.write_text(json.dumps({"bess": {
        "power_mw": 80.0, "energy_mwh": 160.0,
        "envelope_frac": [0.1, 0.9], "eta_c": 0.9, "eta_d": 0.9,
    }}))
    top = tmp_path / "main.json"
    top.write_text(json.dumps({
        "include": ["devices.json"],
        "scenario": {"seed": 5},
        "bess": {"eta_c": 0.92},
    }))
    cfg = load_config(str(top))
    assert cfg.bess.power_mw == 80.0
    assert cfg.bess.eta_c == 0.92      # own keys override includes
    assert cfg.scenario.seed == 5


def test_bad_json_raises_config_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(path))
    path2 = tmp_path / "badfield.json"
    path2.write_text(json.dumps({"scenario": {"archetype": "bogus"}}))
    with pytest.raises(ConfigError):
        load_config(str(path2))


def test_from_dict_tuple_coercion():
    cfg = from_dict({"q_weights": [0.3, 0.2, 0.1]})
    assert cfg.q_weights == (0.3, 0.2, 0.1)


def test_cli_validate_ok(capsys):
    rc = main(["validate"])
    assert rc == 0
    assert "valid" in capsys.readouterr().out


def test_cli_validate_bad_config(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"bess": {
        "power_mw": 100.0, "energy_mwh": 200.0,
        "envelope_frac": [0.1, 0.9], "eta_c": 1.5, "eta_d": 0.95,
    }}))
    rc = main(["validate", "--config", str(path)])
    assert rc == 2
    assert "bess.eta_c" in capsys.readouterr().out


def test_cli_synth(tmp_path, capsys):
    rc = main(["synth", "--days", "0.125", "--seed", "4", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "netload.csv").exists()
    from hessmpc.timeseries import ingest_csv
    ts = ingest_csv(tmp_path / "netload.csv")
    assert len(ts) == 10800


def test_cli_run_writes_report(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--days", "0.041666666666666664", "--seed", "1",
               "--out", str(out)])
    assert rc == 0
    assert (out / "metrics.json").exists()
    doc = json.loads((out / "metrics.json").read_text())
    assert "smoothing_rate" in doc["metrics"]
    for name in ("original.csv", "smoothed.csv", "output_L1.csv",
                 "soc_bess.csv", "soc_fess.csv"):
        assert (out / name).exists()


def test_cli_run_rejects_partial_hours(tmp_path, capsys):
    rc = main(["run", "--days", "0.03", "--out", str(tmp_path)])
    assert rc == 2


def test_cli_default_config(tmp_path):
    path = tmp_path / "defaults.json"
    rc = main(["default-config", "--out", str(path)])
    assert rc == 0
    cfg = load_config(str(path))
    assert validate(cfg) == []


def test_end_to_end_determinism(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    args = ["run", "--days", "0.041666666666666664", "--seed", "9"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    for name in sorted(os.listdir(out1)):
        b1 = (out1 / name).read_bytes()
        b2 = (out2 / name).read_bytes()
        assert b1 == b2, f"report file {name} differs between identical runs"


def test_cli_compare(tmp_path):
    out = tmp_path / "cmp"
    rc = main(["compare", "--days", "0.041666666666666664", "--seed", "2",
               "--out", str(out)])
    assert rc == 0
    doc = json.loads((out / "compare.json").read_text())
    assert set(doc) == {"proposed", "periodic_soc", "filter"}
    for sub in ("proposed", "periodic_soc", "filter"):
        assert (out / sub / "metrics.json").exists()


def test_band_traces_written(tmp_path):
    out = tmp_path / "bands"
    rc = main(["run", "--days", "0.041666666666666664", "--seed", "3",
               "--out", str(out)])
    assert rc == 0
    for layer in ("L1", "L2", "L3"):
        for comp in ("lower", "upper", "gamma"):
            assert (out / f"band_{layer}_{comp}.csv").exists()
