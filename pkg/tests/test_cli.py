import json
import subprocess
import sys

import pytest

from conhj.cli import main
from conhj.config import REQUIRED, assemble, build_config, read_flat
from conhj.errors import ConfigInvalid

SMALL = ["--n-points", "401", "--t-final", "0.5"]


def limit_args(out, *extra):
    return ["limit", "--out", str(out), *SMALL, *extra]


def write_toml(path, body):
    path.write_text(body)
    return path


FULL_TOML = """
mode = "limit"
[model]
family = "satexp"
[model.params]
u0_depth = 1.5
[grid]
x_min = -5.0
x_max = 15.0
n_points = 401
[time]
t_final = 0.5
"""


def test_missing_required_key_names_the_field(tmp_path):
    cfg = write_toml(tmp_path / "c.toml", FULL_TOML.replace("n_points = 401\n", ""))
    with pytest.raises(ConfigInvalid) as info:
        assemble(cfg)
    assert info.value.field == "grid.n_points"


def test_every_required_key_is_checked(tmp_path):
    flat = read_flat(write_toml(tmp_path / "c.toml", FULL_TOML))
    for key in REQUIRED:
        broken = {k: v for k, v in flat.items() if k != key}
        with pytest.raises(ConfigInvalid) as info:
            build_config(broken)
        assert info.value.field == key


@pytest.mark.parametrize("key,value", [("grid.n_points", 2.5), ("jobs", 0), ("limit.route", "spectral"),
                                       ("sweep.eps", []), ("bogus.key", 1), ("model.u0_depth", -1.0)])
def test_bad_values_name_the_field(key, value):
    with pytest.raises(ConfigInvalid) as info:
        assemble(overrides={key: value})
    assert info.value.field == key


def test_toml_params_reach_the_model(tmp_path):
    cfg = assemble(write_toml(tmp_path / "c.toml", FULL_TOML.replace("u0_depth = 1.5", "u0_depth = 1.25")))
    assert cfg.model.params["u0_depth"] == 1.25
    assert cfg.mode == "limit"
    assert cfg.grid.n_points == 401


def test_missing_key_in_file_exits_one(tmp_path, capsys):
    cfg = write_toml(tmp_path / "c.toml", FULL_TOML.replace("t_final = 0.5\n", ""))
    assert main(["limit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "time.t_final" in capsys.readouterr().err


def test_unwritable_output_dir_exits_one(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(limit_args(blocker / "sub")) == 1
    assert "output_dir" in capsys.readouterr().err


def test_limit_run_writes_data_figures_and_manifest(tmp_path):
    out = tmp_path / "run"
    assert main(limit_args(out)) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["exit_status"] == 0
    assert manifest["mode"] == "limit"
    for name in manifest["outputs"]:
        assert (out / name).is_file()
    assert {"series.csv", "I.svg", "snapshots.svg"} <= set(manifest["outputs"])
    assert {"numpy", "scipy", "conhj"} <= set(manifest["versions"])


def test_repeated_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(limit_args(a)) == 0
    assert main(limit_args(b)) == 0
    for name in ("series.csv", "snapshots.ndjson", "I.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_manifest_reproduces_the_run(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(limit_args(a, "--route", "lax_oleinik")) == 0
    assert main(["limit", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
    assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()
    assert json.loads((b / "solution.json").read_text())["limit_config"]["route"] == "lax_oleinik"


def test_trajectory_from_saved_run(tmp_path, capsys):
    run = tmp_path / "run"
    assert main(limit_args(run)) == 0
    out = tmp_path / "traj"
    assert main(["traj", "--from", str(run), "--t", "0.5", "--out", str(out), "--no-plots"]) == 0
    header = (out / "series.csv").read_text().splitlines()[0]
    assert header == "s,gamma,gamma_dot"


def test_check_model_reports_assumptions(tmp_path):
    assert main(["check-model", "--out", str(tmp_path / "ok"), *SMALL]) == 0
    assert main(["check-model", "--out", str(tmp_path / "bad"), "--param", "u0_shift=-0.1", *SMALL]) == 2


def test_increasing_eps_ladder_is_an_error(tmp_path):
    assert main(["sweep-eps", "--out", str(tmp_path / "s"), "--eps-list", "0.05,0.1", *SMALL]) == 1


def test_unknown_subcommand_exits_one():
    with pytest.raises(SystemExit) as info:
        main(["nonsense"])
    assert info.value.code == 1


@pytest.mark.slow
def test_verify_at_defaults_exits_zero(tmp_path):
    out = tmp_path / "verify"
    proc = subprocess.run([sys.executable, "-m", "conhj", "verify", "--out", str(out), "--jobs", "4"],
                          capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0, proc.stderr
    lines = [l.split("\t") for l in proc.stdout.strip().splitlines()]
    assert [l[1] for l in lines] == ["pass"] * 15
    assert (out / "I_all.svg").is_file()
    assert json.loads((out / "report.json").read_text())["passed"] is True
