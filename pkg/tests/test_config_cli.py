import json
from pathlib import Path

import pytest

from gnsolve.analytic import solitary_wave
from gnsolve.boundary import Family
from gnsolve.cli import main
from gnsolve.config import ConfigError, load_config, parse_config
from gnsolve.driver import SolitonTrace

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = """
[grid]
x_min = 0
x_max = 1
n_cells = 40
[time]
t_end = 0.05
[initial]
profile = soliton
H = 0.1
A = 0.5
X = 0.5
[boundary.left]
family = wall
[boundary.right]
family = wall
"""


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.ini")), ids=lambda p: p.stem)
def test_shipped_configs_parse(path):
    cfg = load_config(path)
    assert cfg.n_cells > 0 and cfg.t_end > 0


def test_soliton_crossing_and_traces():
    cfg = load_config(CONFIGS / "soliton_spread.ini")
    assert cfg.t_end == pytest.approx((1 / (1.5 * 9.81 * 0.1)) ** 0.5)
    left = cfg.boundary["left"]
    assert left.family is Family.FIXED_DEPTH_VELOCITY
    assert isinstance(left.depth, SolitonTrace)
    assert left.depth(0.3) == solitary_wave(0.3, 0.0, cfg.soliton)[0]
    assert cfg.errors


def test_discharge_config_values():
    cfg = load_config(CONFIGS / "discharge_inflow.ini")
    left = cfg.boundary["left"]
    assert left.family is Family.DISCHARGE_PRESSURE
    assert left.discharge(3.0) == 0.05 and left.pressure(3.0) == 3e-5
    assert cfg.output_dt == 1.0


@pytest.mark.parametrize("text, match", [
    (SMALL.replace("[grid]", "[grd]"), "grid"),
    (SMALL.replace("t_end = 0.05", "t_end = soliton-crossing").replace("profile = soliton", "profile = dam-break"),
     "soliton"),
    (SMALL.replace("H = 0.1\n", ""), "H"),
    (SMALL.replace("t_end = 0.05", "t_end = -1"), "t_end"),
])
def test_bad_configs(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_unknown_family_is_rejected():
    with pytest.raises(ValueError):
        parse_config(SMALL.replace("family = wall", "family = sponge", 1))


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return p


def test_cli_run_writes_outputs(small_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(small_cfg), "--out", str(out), "--ledger", "--dump-matrix"]) == 0
    assert "reached t = 0.05" in capsys.readouterr().out
    assert (out / "ledger.csv").exists() and (out / "matrix_step0.txt").exists()
    assert (out / "snapshot_00000.csv").exists()


def test_cli_soliton_error(small_cfg, capsys):
    assert main(["soliton-error", str(small_cfg), "--at", "0.02"]) == 0
    errs = json.loads(capsys.readouterr().out)
    assert set(errs) == {"h", "u", "w", "sigma", "q_bar", "q_B"}


def test_cli_convergence(small_cfg, capsys):
    assert main(["convergence", str(small_cfg), "--meshes", "20,40,80"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("h") and "rate" in out


def test_cli_transparent_check(tmp_path, capsys):
    text = SMALL.replace("family = wall", "family = transparent").replace("H = 0.1", "H = 0.01") \
        .replace("t_end = 0.05", "t_end = 2")
    p = tmp_path / "t.ini"
    p.write_text(text)
    assert main(["transparent-check", str(p)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["finite"] and rep["min_depth"] > 0


def test_cli_reports_errors_with_nonzero_status(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.ini")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("gnsolve: error:") and err.count("\n") == 1
