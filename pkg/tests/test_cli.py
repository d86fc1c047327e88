import numpy as np
import pytest

from dsfkit import ConfigError, DsfGrid, RgfGrid
from dsfkit.cli import main, read_manifest
from dsfkit.config import RunConfig
from dsfkit.errors import AliasingError


def run(*args):
    return main([str(a) for a in args])


def test_config_defaults_and_overrides():
    cfg = RunConfig.load("model.preset = xx\nmodel.n = 10  # comment\n", ["run.steps=5"])
    assert cfg["run.dt"] == 0.6 and cfg["run.steps"] == 5 and cfg["run.order"] == 2
    assert cfg.model().n == 10
    with pytest.raises(ConfigError):
        RunConfig.load("model.nope = 1")
    with pytest.raises(ConfigError):
        RunConfig.load("run.engine = gpu")
    with pytest.raises(ConfigError):
        RunConfig.load("model.n = ten")
    with pytest.raises(AliasingError):
        RunConfig.load("run.dt = 1.5\nrun.e_max = 3")
    explicit = RunConfig.load("model.preset = none\nmodel.form = nnn\nmodel.epsilon = 0.3\nmodel.jp = 0.1\nmodel.n = 6")
    assert explicit.model().max_range == 2
    again = RunConfig.load(cfg.to_text())
    assert again.values == cfg.values


def test_groundstate_energies(tmp_path):
    from dsfkit.model import ground_energy_dense, preset_model

    assert run("groundstate", "--out", tmp_path / "a", "--set", "model.n=8") == 0
    text = (tmp_path / "a" / "energy.txt").read_text()
    e = float(text.split("energy = ")[1].split()[0])
    assert e == pytest.approx(ground_energy_dense(preset_model("kcuf3", 8)), abs=1e-8)
    assert run("groundstate", "--out", tmp_path / "b", "--set", "model.preset=xx", "--set", "model.n=2") == 0
    e2 = float((tmp_path / "b" / "energy.txt").read_text().split("energy = ")[1].split()[0])
    assert e2 == pytest.approx(-1.0, abs=1e-12)


def test_pipeline_and_manifest(tmp_path):
    out = tmp_path / "p"
    common = ["--set", "model.n=8", "--set", "run.channels=ZZ,XX,YY"]
    assert run("groundstate", "--out", out, *common) == 0
    assert run("rgf", "--out", out, *common) == 0
    grid = RgfGrid.read_csv(open(out / "rgf_ZZ.csv"))
    assert grid.values.shape == (8, 21)
    assert run("dsf", "--out", out, "--sum-rule", "--plot-data", out / "rgf_ZZ.csv", out / "rgf_XX.csv",
               out / "rgf_YY.csv") == 0
    from dsfkit.spectrum import sum_rule_integral

    dsfs = {c: DsfGrid.read_csv(open(out / f"dsf_{c}.csv")) for c in ("XX", "YY", "ZZ")}
    assert sum_rule_integral(dsfs) == pytest.approx(0.75, abs=1e-10)
    dat = (out / "dsf_ZZ.dat").read_text().splitlines()
    assert len(dat) == 1 + 21 and len(dat[0].split()) == 1 + 8
    assert run("compare", "--out", out / "cmp", out / "dsf_ZZ.csv", out / "dsf_ZZ.csv") == 0
    report = (out / "cmp" / "report.txt").read_text()
    assert "mse = 0\n" in report and "wasserstein = 0\n" in report
    for name in ("report.csv", "nqfi.csv", "peaks.csv", "manifest.txt"):
        assert (out / "cmp" / name).exists()
    blocks = read_manifest(out / "manifest.txt")
    assert [b.splitlines()[1] for b in blocks] == ["command = groundstate", "command = rgf", "command = dsf"]
    assert "model.n = 8" in blocks[1] and "rgf_ZZ.csv sha256=" in blocks[1]


def test_zero_steps_and_zero_grid(tmp_path):
    out = tmp_path / "z"
    assert run("groundstate", "--out", out, "--set", "model.n=6") == 0
    assert run("rgf", "--out", out, "--set", "model.n=6", "--set", "run.steps=0") == 0
    g = RgfGrid.read_csv(open(out / "rgf_ZZ.csv"))
    assert g.values.shape == (6, 1) and np.abs(g.values).max() < 1e-12
    zero = RgfGrid(np.zeros((6, 5)), 0.6, 2, "Z", "Z")
    with open(tmp_path / "zero.csv", "w") as fh:
        zero.write_csv(fh)
    assert run("dsf", "--out", out, "--prefix", "zero", tmp_path / "zero.csv") == 0
    assert np.abs(DsfGrid.read_csv(open(out / "zero_ZZ.csv")).values).max() == 0


def test_exit_codes(tmp_path, capsys):
    assert run("rgf", "--out", tmp_path / "none", "--set", "model.n=6") == 4
    assert run("groundstate", "--out", tmp_path, "--set", "bad.key=1") == 2
    assert run("resolution", "--n", 50, "--steps", 20, "--dt", 1.5, "--e-max", 3) == 2
    assert run("groundstate", "--out", tmp_path, "--set", "model.n=30") == 3
    (tmp_path / "junk.csv").write_text("not,a,grid\n")
    assert run("dsf", "--out", tmp_path, tmp_path / "junk.csv") == 4
    assert run("groundstate", "--out", tmp_path / "q", "--config", tmp_path / "missing.cfg") == 4


def test_resolution_command(tmp_path, capsys):
    assert run("resolution", "--n", 50, "--steps", 20, "--dt", 0.6, "--out", tmp_path) == 0
    text = (tmp_path / "resolution.txt").read_text()
    assert "dk = 0.12566370614359174" in text
    assert run("resolution", "--n", 4, "--ny", 4, "--steps", 10, "--dt", 0.5, "--dim", 2, "--gates", 960,
               "--depth", 120) == 0
    out = capsys.readouterr().out
    assert "product_from_gates" in out and "product_from_depth" in out


def test_vqe_prep_and_noise_sim(tmp_path):
    out = tmp_path / "v"
    cfg = ["--set", "model.preset=two_soliton", "--set", "model.n=8", "--set", "run.prep=vqe",
           "--set", "vqe.layers=1", "--set", "vqe.budget=200", "--set", "run.steps=4"]
    assert run("groundstate", "--out", out, *cfg) == 0
    assert (out / "vqe_params.txt").exists()
    assert run("noise-sim", "--out", out, *cfg, "--set", "noise.mean=0.01", "--set", "noise.shots=2000") == 0
    g = RgfGrid.read_csv(open(out / "rgf_noisy_ZZ.csv"))
    assert g.meta["shots"] == "2000"


def test_fidelity_scan_command(tmp_path):
    assert run("scan", "--out", tmp_path, "--set", "scan.kind=fidelity", "--set", "model.preset=two_soliton",
               "--set", "scan.ns=8", "--set", "scan.layers=0,1", "--set", "vqe.budget=200") == 0
    rows = (tmp_path / "fidelity_scan.csv").read_text().splitlines()
    assert rows[0] == "n,layers,fidelity" and len(rows) == 3


def test_bond_scan_command(tmp_path):
    assert run("scan", "--out", tmp_path, "--set", "model.n=10", "--set", "scan.chis=8,16,32",
               "--set", "run.steps=4", "--set", "mps.convergence_tol=1e-6") == 0
    assert (tmp_path / "bond_residuals.csv").read_text().startswith("chi,residual")
