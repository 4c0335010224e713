import csv
import json
from pathlib import Path

import numpy as np
import pytest

from tdho import cli, ermakov
from tdho.config import DEFAULT_TOLERANCES, ConfigError, load_config, parse_overrides

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

FLOQUET = {"kind": "floquet", "omega0": 1.0, "eps": 0.3, "nu": 2.0}


def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_bad_alpha_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path, {"gaussian": {"alpha": -0.1}})
    assert cli.main(["gaussian", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "gaussian.alpha" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = write(tmp_path, {"gaussian": {"alpha": 1.0}, "colour": "blue"})
    assert cli.main(["gaussian", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "colour" in capsys.readouterr().err


def test_missing_section_is_config_error(tmp_path):
    cfg = write(tmp_path, {"profile": FLOQUET})
    assert cli.main(["gaussian", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_missing_file_is_config_error(tmp_path):
    assert cli.main(["gaussian", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path)]) == 2


def test_tolerance_override_parsing():
    assert parse_overrides(["casimir_drift=1e-3"]) == {"casimir_drift": 1e-3}
    with pytest.raises(ConfigError):
        parse_overrides(["nonsense=1"])
    with pytest.raises(ConfigError):
        parse_overrides(["casimir_drift"])


def test_override_can_fail_a_check(tmp_path):
    cfg = write(tmp_path, {"profile": FLOQUET, "time": {"t_end": 5.0, "n_output": 101},
                           "gaussian": {"q": 1.0, "alpha": 0.6, "beta": 0.1}})
    out = tmp_path / "o"
    code = cli.main(["gaussian", "--config", cfg, "--out", str(out),
                     "--tolerance-override", "casimir_identity=1e-30"])
    assert code == 1
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] is False
    assert rep["checks"]["casimir_ermakov_identity"]["pass"] is False
    assert rep["checks"]["casimir_drift"]["pass"] is True


def test_collapse_is_numerical_failure(tmp_path):
    cfg = write(tmp_path, {"profile": {"kind": "constant", "omega0": 0.0},
                           "time": {"t_end": 1.0, "n_output": 11},
                           "params": {"hbar": 1e-9},
                           "gaussian": {"alpha": 1.0, "beta": -50.0}})
    assert cli.main(["gaussian", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_gaussian_csv_and_resolved_echo(tmp_path):
    cfg = write(tmp_path, {"profile": FLOQUET, "time": {"t_end": 5.0, "n_output": 51},
                           "gaussian": {"q": 1.0, "alpha": 0.6, "beta": 0.1}})
    out = tmp_path / "o"
    assert cli.main(["gaussian", "--config", cfg, "--out", str(out)]) == 0
    header, data = read_csv(out / "gaussian.csv")
    assert header == ["t", "q", "p", "alpha", "beta", "gamma", "C", "I_alpha", "H_eff", "tau"]
    assert data.shape == (51, 10)
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["command"] == "gaussian"
    assert resolved["tolerances"] == DEFAULT_TOLERANCES
    assert resolved["solver"]["rel_tol"] == 1e-12
    # the echo round-trips: rerunning it gives identical bytes
    out2 = tmp_path / "o2"
    assert cli.main(["gaussian", "--config", str(out / "resolved_config.json"),
                     "--out", str(out2)]) == 0
    for name in ("gaussian.csv", "report.json", "resolved_config.json"):
        assert (out / name).read_bytes() == (out2 / name).read_bytes()


def test_classical_columns(tmp_path):
    base = {"profile": FLOQUET, "time": {"t_end": 5.0, "n_output": 51},
            "classical": {"q": 1.0, "qdot": 0.0}}
    out = tmp_path / "a"
    assert cli.main(["classical", "--config", write(tmp_path, base), "--out", str(out)]) == 0
    assert read_csv(out / "classical.csv")[0] == ["t", "q", "qdot", "W1", "W2"]
    with_eta = dict(base, eta={"a": 1.0, "b": 1.0, "c": 0.2})
    out = tmp_path / "b"
    assert cli.main(["classical", "--config", write(tmp_path, with_eta, "e.json"),
                     "--out", str(out)]) == 0
    header, data = read_csv(out / "classical.csv")
    assert header == ["t", "q", "qdot", "W1", "W2", "I_eta"]
    assert np.ptp(data[:, 5]) < 1e-8


def test_synchronize_csv_fits_harmonic(tmp_path):
    out = tmp_path / "s"
    assert cli.main(["synchronize", "--config", str(SCENARIOS / "ac3_synchronize.json"),
                     "--out", str(out)]) == 0
    header, data = read_csv(out / "synchronize.csv")
    assert header == ["t", "tau", "h", "Q", "dQ_dtau"]
    A, _, resid = ermakov.fit_harmonic(data[:, 1], data[:, 3], 0.5)
    assert resid < 1e-5 * A


def test_pde_csv_and_snapshots(tmp_path):
    cfg = json.loads((SCENARIOS / "ac9_pde_hygiene.json").read_text())
    cfg["pde"]["snapshots"] = True
    cfg["time"] = {"t_start": 0.0, "t_end": 0.5, "n_output": 6}
    out = tmp_path / "p"
    assert cli.main(["pde", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    header, data = read_csv(out / "pde.csv")
    assert header == ["t", "x1", "p1", "x2", "p2", "d", "C", "norm", "excess_kurtosis"]
    assert data.shape == (6, 9)
    assert (out / "density.csv").exists()


def test_batch_writes_per_scenario(tmp_path):
    item = {"profile": FLOQUET, "time": {"t_end": 2.0, "n_output": 21},
            "gaussian": {"q": 1.0, "alpha": 0.6, "beta": 0.1}}
    cfg = write(tmp_path, {"scenarios": [dict(item, name="one"), dict(item, name="two")]})
    out = tmp_path / "batch"
    assert cli.main(["invariants", "--config", cfg, "--out", str(out), "--jobs", "2"]) == 0
    assert (out / "one" / "report.json").exists() and (out / "two" / "report.json").exists()


def test_batch_names_must_be_unique(tmp_path):
    item = {"gaussian": {"alpha": 1.0}}
    cfg = write(tmp_path, {"scenarios": [item, item]})
    with pytest.raises(ConfigError):
        load_config(cfg)


def test_brackets_report(tmp_path):
    out = tmp_path / "b"
    assert cli.main(["brackets", "--config", str(SCENARIOS / "ac6_brackets.json"),
                     "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert set(rep["checks"]) == {"wronskian_bracket", "sl2_squared_wronskians",
                                  "uncertainty_algebra"}


def test_every_bundled_scenario_parses():
    files = sorted(SCENARIOS.glob("ac*.json"))
    assert len(files) == 9
    for f in files:
        assert load_config(f)
