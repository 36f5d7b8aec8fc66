import numpy as np
import pytest

from qsmooth import __version__
from qsmooth.cli import main
from qsmooth.config import parse_config
from qsmooth.records import read_observed_csv, read_unobserved_csv

TINY = "t_final = 0.05\nm_smooth = 40\nn_eval = 60\nseed = 3\n"


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY)
    return path


def _run(*argv):
    return main([str(a) for a in argv])


def test_run_writes_outputs_and_manifest(tmp_path, cfg_file, capsys):
    out = tmp_path / "out"
    assert _run("run", "--config", cfg_file, "--out", out, "--threads", 1) == 0
    names = {p.name for p in out.iterdir()}
    assert {"record.csv", "states.csv", "fig1.csv", "fig4.csv", "manifest.txt", "ensemble_stats.npz"} <= names
    manifest = (out / "manifest.txt").read_text()
    assert f"# version = {__version__}" in manifest
    assert "# sha256 fig1.csv = " in manifest
    # the manifest doubles as a config file
    assert parse_config(manifest)["seed"] == 3
    header = (out / "fig1.csv").read_text().splitlines()[0]
    assert header.startswith("t,")
    assert "wrote" in capsys.readouterr().out


def test_manifest_is_deterministic(tmp_path, cfg_file):
    out = tmp_path / "out"
    _run("run", "--config", cfg_file, "--out", out, "--threads", 1)
    first = (out / "manifest.txt").read_text()
    _run("run", "--config", cfg_file, "--out", out, "--threads", 2)
    assert (out / "manifest.txt").read_text() == first


def test_replay_reproduces_figures(tmp_path, cfg_file):
    a, b = tmp_path / "a", tmp_path / "b"
    _run("run", "--config", cfg_file, "--out", a, "--threads", 1)
    assert _run("run", "--config", cfg_file, "--out", b, "--record", a / "record.csv") == 0
    for name in ("fig1.csv", "fig2.csv", "fig3.csv", "fig4.csv", "states.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    assert "replayed" in (b / "manifest.txt").read_text()


def test_figures_subcommand(tmp_path, cfg_file):
    out = tmp_path / "out"
    assert _run("figures", "2", "--config", cfg_file, "--out", out) == 0
    data = np.loadtxt(out / "fig2.csv", delimiter=",", skiprows=1)
    assert data.shape[0] == 51
    assert _run("figures", "--config", cfg_file, "--out", out) == 0
    assert _run("figures", "7", "--config", cfg_file, "--out", out) == 2


def test_record_subcommand(tmp_path, cfg_file):
    out = tmp_path / "out"
    assert _run("record", "--config", cfg_file, "--out", out, "--unobserved-index", 4) == 0
    assert read_observed_csv(out / "record.csv").n_steps == 50
    assert read_unobserved_csv(out / "unobserved_4.csv").n_steps == 50


def test_verify_exit_code(tmp_path, cfg_file, capsys):
    code = _run("verify", "--config", cfg_file, "--out", tmp_path)
    text = capsys.readouterr().out
    assert "checks passed" in text
    assert code in (0, 1)
    assert (code == 0) == ("[FAIL]" not in text)


@pytest.mark.parametrize("argv", [
    ["run", "--seed", "-1"], ["run", "--threads", "-2"], ["bogus"], ["run", "--backend", "gpu"],
])
def test_argument_errors(argv, capsys):
    assert main(argv) == 2


def test_config_error_exit(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("eta = 3\n")
    assert _run("run", "--config", bad, "--out", tmp_path) == 2
    assert _run("run", "--config", tmp_path / "nope.cfg") == 2


def test_propagation_error_exit(tmp_path):
    # a record that drives the filtered state through a vanishing trace
    cfg = tmp_path / "c.cfg"
    cfg.write_text("t_final = 0.002\neta = 1\nmu_ost = 0\nm_smooth = 2\nn_eval = 2\n")
    rec = tmp_path / "r.csv"
    rec.write_text("# dt = 0.001\nstep,dJ\n0,1e160\n1,1e160\n")
    assert _run("run", "--config", cfg, "--out", tmp_path / "o", "--record", rec) == 3
