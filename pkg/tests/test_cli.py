import json

import pytest

from benignlab import cli
from benignlab.errors import NotConverged

RANKS = """experiment = "ranks"
n = 10
d_grid = [20]
samples = 500
master_seed = 1

[covariance]
kind = "blocks"
blocks = [[1.0, 2], [0.1, 18]]
"""


@pytest.fixture
def ranks_config(tmp_path):
    path = tmp_path / "ranks.toml"
    path.write_text(RANKS)
    return path


def test_success_writes_tables(tmp_path, ranks_config):
    out = tmp_path / "out"
    assert cli.main(["ranks", "--config", str(ranks_config), "--out", str(out)]) == 0
    assert (out / "ranks.csv").read_text().startswith("d,norm,r,R,")
    meta = json.loads((out / "meta.json").read_text())
    assert meta["schema_version"] == 1 and meta["threads"] == 1


def test_json_format(tmp_path, ranks_config):
    out = tmp_path / "out"
    assert cli.main(["ranks", "--config", str(ranks_config), "--out", str(out), "--format", "json"]) == 0
    data = json.loads((out / "ranks.json").read_text())
    assert data["columns"][:3] == ["d", "norm", "r"]


def test_config_errors_exit_two(tmp_path, ranks_config, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(RANKS.replace("samples = 500", "samples = 5"))
    assert cli.main(["ranks", "--config", str(bad)]) == 2
    assert "field 'samples'" in capsys.readouterr().err
    assert cli.main(["junk", "--config", str(ranks_config)]) == 2
    assert cli.main(["ranks", "--config", str(tmp_path / "missing.toml")]) == 2


def test_lab_threads_env(tmp_path, ranks_config, monkeypatch):
    out = tmp_path / "out"
    monkeypatch.setenv("LAB_THREADS", "3")
    assert cli.main(["ranks", "--config", str(ranks_config), "--out", str(out)]) == 0
    assert json.loads((out / "meta.json").read_text())["threads"] == 3
    assert cli.main(["ranks", "--config", str(ranks_config), "--out", str(out), "--threads", "2"]) == 0
    assert json.loads((out / "meta.json").read_text())["threads"] == 2
    monkeypatch.setenv("LAB_THREADS", "zero")
    assert cli.main(["ranks", "--config", str(ranks_config), "--out", str(out)]) == 2


def test_solver_failure_exits_three(tmp_path, ranks_config, monkeypatch):
    def boom(cfg, threads):
        raise NotConverged("admm stalled")

    monkeypatch.setattr(cli, "run", boom)
    assert cli.main(["ranks", "--config", str(ranks_config), "--out", str(tmp_path)]) == 3


def test_seed_override_changes_output(tmp_path, ranks_config):
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["ranks", "--config", str(ranks_config), "--out", str(a), "--seed", "1"])
    cli.main(["ranks", "--config", str(ranks_config), "--out", str(b), "--seed", "2"])
    assert (a / "ranks.csv").read_bytes() != (b / "ranks.csv").read_bytes()
