import json

import pytest

from dqsim.cli import main
from dqsim.config import FIT, OK, RESULT_COLUMNS, read_results

RUN = {
    "protocol": "dpf",
    "hamiltonian": "1.0 XXI\n1.0 IZZ",
    "partition": [[0, 1], [2]],
    "t": 0.5,
    "p": 1,
    "r": 4,
}


@pytest.fixture
def config_file(tmp_path):
    filename = tmp_path / "run.json"
    filename.write_text(json.dumps(RUN))
    return str(filename)


@pytest.fixture(autouse=True)
def qubit_cap(monkeypatch):
    monkeypatch.setenv("DQSIM_QUBIT_CAP", "24")


def test_simulate_to_file(config_file, tmp_path):
    out = tmp_path / "row.csv"
    assert main(["simulate", "--config", config_file, "--out", str(out)]) == 0
    rows = read_results(out.read_text())
    assert len(rows) == 1
    assert rows[0].status == OK
    assert rows[0].qcomm_qubits == 8 * 4


def test_simulate_to_stdout(config_file, capsys):
    assert main(["--log", "WARNING", "simulate", "--config", config_file]) == 0
    assert capsys.readouterr().out.splitlines()[0] == ",".join(RESULT_COLUMNS)


def test_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**RUN, "protocol": "dvqe"}))
    assert main(["simulate", "--config", str(bad)]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2


def test_qubit_cap_exit_code(config_file):
    assert main(["--qubit-cap", "3", "simulate", "--config", config_file]) == 3


def test_cost_table(capsys):
    argv = ["cost", "--model", "nn", "--gamma", "8", "--alpha", "1", "--t", "4", "--epsilon", "1e-2", "--p", "2"]
    assert main(argv) == 0
    assert "1810.19" in capsys.readouterr().out


def test_cost_from_config(config_file, tmp_path):
    out = tmp_path / "cost.csv"
    argv = ["cost", "--model", "all", "--config", config_file, "--epsilon", "1e-2", "--out", str(out)]
    assert main(argv) == 0
    assert len(out.read_text().splitlines()) == 1 + 9


def test_verify_qnet(capsys):
    assert main(["verify", "--suite", "qnet"]) == 0
    assert "chain gamma=5 w=3" in capsys.readouterr().out


def test_sweep_writes_csv(config_file, tmp_path):
    out = tmp_path / "sweep.csv"
    argv = ["sweep", "--config", config_file, "--param", "r", "--values", "4,8,16", "--fit", "--out", str(out)]
    assert main(argv) == 0
    rows = read_results(out.read_text())
    assert [row.steps for row in rows[:3]] == [4, 8, 16]
    assert rows[-1].protocol == FIT


def test_zero_steps_exit_code(tmp_path):
    bad = tmp_path / "zero.json"
    bad.write_text(json.dumps({**RUN, "r": 0}))
    assert main(["simulate", "--config", str(bad)]) == 2
