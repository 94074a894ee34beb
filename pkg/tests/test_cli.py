import json

import pytest

from secmimo.cli import main, parse_snr_grid
from secmimo.errors import ValidationError
from secmimo.experiment import CSV_HEADER, read_csv


@pytest.fixture()
def small_experiment(tmp_path):
    doc = {
        "config": {"L": 1, "K": 2, "N_t": 8, "tau": 2, "seed": 4},
        "snr_grid_db": [0.0, 4.0],
        "schemes": ["MF_AN_OPT", "NAIVE_MF"],
        "trials": 3,
    }
    p = tmp_path / "exp.json"
    p.write_text(json.dumps(doc))
    return p


def test_snr_grid_parsing():
    assert parse_snr_grid("-10:10:2") == tuple(float(x) for x in range(-10, 11, 2))
    assert parse_snr_grid("0,2.5") == (0.0, 2.5)
    for bad in ("1:0:1", "0:1:0", "a,b"):
        with pytest.raises(ValidationError):
            parse_snr_grid(bad)


def test_sweep_writes_csv(small_experiment, tmp_path):
    out = tmp_path / "o.csv"
    assert main(["sweep", "--config", str(small_experiment), "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    assert len(read_csv(out)) == 4


def test_sweep_overrides(small_experiment, tmp_path):
    out = tmp_path / "o.csv"
    args = ["sweep", "--config", str(small_experiment), "--out", str(out), "--snr-db", "1:3:1",
            "--trials", "2", "--seed", "7", "--pe", "1,10", "--scheme", "NAIVE_MF", "--rescramble", "1"]
    assert main(args) == 0
    recs = read_csv(out)
    assert len(recs) == 3 * 2
    assert {r["seed"] for r in recs} == {"7"} and {r["trials"] for r in recs} == {"2"}


def test_scenario_round_trip(small_experiment, tmp_path):
    scen = tmp_path / "s.json"
    assert main(["scenario", "--config", str(small_experiment), "--out", str(scen)]) == 0
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", str(small_experiment), "--out", str(a)]) == 0
    assert main(["sweep", "--config", str(small_experiment), "--scenario", str(scen), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("cmd", ["rate-asymptotic", "optimize-power", "nullspace", "rate-exact"])
def test_other_subcommands(small_experiment, tmp_path, cmd):
    out = tmp_path / "o.csv"
    assert main([cmd, "--config", str(small_experiment), "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) >= 2


def test_diagnostics_subcommand(small_experiment, tmp_path):
    out = tmp_path / "d.csv"
    assert main(["diagnostics", "--config", str(small_experiment), "--n-t", "8,16", "--trials", "3",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n_t,quantity,empirical,closed_form,rel_gap"
    assert len(lines) == 1 + 2 * 6


def test_exit_code_validation(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"config": {"tau": 3}, "snr_grid_db": [0], "schemes": ["NAIVE_MF"], "trials": 1}))
    assert main(["sweep", "--config", str(bad)]) == 2
    assert "tau" in capsys.readouterr().err
    bad.write_text(json.dumps({"config": {}, "snr_grid_db": [0], "schemes": ["NAIVE_MF"], "trials": 1, "x": 1}))
    assert main(["sweep", "--config", str(bad)]) == 2


def test_exit_code_io(small_experiment, tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "missing.json")]) == 4
    assert main(["sweep", "--config", str(small_experiment), "--out", str(tmp_path / "no" / "x.csv")]) == 4


def test_exit_code_numerical(tmp_path):
    from secmimo.channel import CorrelationSet, SystemConfig, save_scenario
    import numpy as np

    cfg = SystemConfig(L=0, K=1, N_t=2, tau=1)
    R = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
    scen = tmp_path / "s.json"
    save_scenario(scen, CorrelationSet(R[None, None, None], np.eye(2, dtype=complex)[None]), cfg)
    exp = tmp_path / "e.json"
    exp.write_text(json.dumps({"config": cfg.to_dict(), "snr_grid_db": [0], "schemes": ["NAIVE_MF"], "trials": 1}))
    assert main(["sweep", "--config", str(exp), "--scenario", str(scen)]) in (2, 3)
