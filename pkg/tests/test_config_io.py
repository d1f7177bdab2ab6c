import json
import math
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from benignlab import config, io
from benignlab.config import EXPERIMENTS
from benignlab.errors import ConfigError

GOLDEN = Path(__file__).parent / "golden" / "headers.csv"


@pytest.mark.parametrize("exp", EXPERIMENTS)
def test_packaged_configs_round_trip(exp):
    cfg = config.default_config(exp)
    assert cfg.experiment == exp
    for fmt in ("toml", "json"):
        assert config.loads(config.dumps(cfg, fmt), fmt) == cfg


def test_error_reports_line_and_field():
    text = 'experiment = "figure1"\nn = 10\ntrials = -3\n'
    with pytest.raises(ConfigError, match=r"my\.toml:3: field 'trials'"):
        config.loads(text, source="my.toml")
    with pytest.raises(ConfigError, match="field 'bogus': unknown field"):
        config.loads('experiment = "ranks"\nbogus = 1\n')
    with pytest.raises(ConfigError, match="my.json:2"):
        config.loads('{"experiment": "ranks",\n "n": }', "json", source="my.json")


@pytest.mark.parametrize("exp", ["bound_check", "split_scan", "junk_features", "isotropic_bp"])
def test_bound_experiments_reject_large_delta(exp):
    cfg = config.default_config(exp).replace(delta=0.3)
    with pytest.raises(ConfigError, match="delta <= 1/4"):
        config.validate(cfg)
    config.validate(cfg.replace(delta=0.25))


def test_non_bound_experiment_accepts_large_delta():
    config.validate(config.default_config("ranks").replace(delta=0.5))


def test_sampling_cap_rejected_at_validation():
    cfg = config.default_config("figure1").replace(d_grid=[10 ** 12])
    with pytest.raises(ConfigError, match="d_grid"):
        config.validate(cfg)


def test_headers_match_golden_file():
    golden = {}
    for line in GOLDEN.read_text().splitlines():
        name, *cols = line.split(",")
        golden[name] = tuple(cols)
    assert golden == io.HEADERS
    assert io.SCHEMA_VERSION == 1


def test_sentinel_cells(tmp_path):
    rows = [(1, -math.inf, math.inf, None, math.nan, 0.1, True)]
    header = tuple("abcdefg")
    text = io.csv_text(header, rows)
    assert text.splitlines()[1] == "1,neg_inf,pos_inf,infeasible,nan,0.1,true"
    path = io.write_table(tmp_path, "t", header, rows)
    _, back = io.read_csv(path)
    assert back[0][:4] == (1, -math.inf, math.inf, None) and math.isnan(back[0][4])
    data = json.loads(io.json_text(header, rows))
    assert data["rows"][0]["b"] == "neg_inf" and data["rows"][0]["f"] == 0.1
    with pytest.raises(ValueError):
        io.csv_text(("a",), [(1, 2)])


@given(st.one_of(st.floats(allow_nan=False), st.integers(-2**63, 2**63), st.none(), st.booleans()))
def test_format_parse_round_trip(v):
    assert io.parse_value(io.format_value(v)) == v


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_shortest_round_trip_form(x):
    s = io.format_value(x)
    assert float(s) == x and s == repr(x)
