import csv
import subprocess
import sys

import numpy as np
import pytest
import yaml

from giantatoms.cli import contrast_table, fringe_contrast, main, run, sweep, summarize
from giantatoms.config import (
    OUTPUT_ENV,
    SCENARIOS,
    apply_cell,
    atom_pair,
    auto_modes,
    config_hash,
    mode_grid,
    resolve,
)
from giantatoms.coupling import center_separation
from giantatoms.errors import ConfigurationError

SMALL = {
    "method": "master",
    "initial": "eg",
    "atoms": {"a": {"type": "comb", "points": [0.0, 1.5], "strength": 0.7071}, "b": {"type": "comb", "points": [4.0, 5.5], "strength": 0.7071}},
    "grid": {"k_max": 10.0, "n_modes": 64},
    "time": {"dt": 0.01, "t_max": 1.0},
}


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data))
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize(
    "patch,where",
    [
        ({"method": "magic"}, "method"),
        ({"time": {"dt": -1}}, "time.dt"),
        ({"grid": {"n_modes": 63}}, "grid.n_modes"),
        ({"atoms": {"a": {"type": "gaussian", "center": 0.0}}}, "atoms.a"),
        ({"atoms": {"b": {"type": "blob"}}}, "atoms.b.type"),
        ({"initial": "xx"}, "initial"),
        ({"method": "dressed1", "initial": "ee"}, "initial"),
        ({"method": "dressed2", "initial": "eg"}, "initial"),
        ({"bath": {"kind": "thermal", "beta": 1.0}, "method": "dressed1"}, "bath.kind"),
        ({"bath": {"kind": "thermal"}}, "bath.beta"),
        ({"sweep": {"colour": [1, 2]}}, "sweep.colour"),
        ({"sweep": {"width": [0.1]}}, "sweep.width"),
        ({"observable": {"time": 5.0}}, "observable.time"),
        ({"method": "sse", "ensemble": {"n_traj": 7}}, "ensemble"),
        ({"scenario": "nope"}, "scenario"),
    ],
)
def test_validation_names_the_field(patch, where):
    from giantatoms.config import deep_merge

    with pytest.raises(ConfigurationError, match=f"^{where.replace('.', '[.]')}"):
        resolve(deep_merge(SMALL, patch))


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_presets_resolve(name):
    cfg = resolve({"scenario": name})
    assert mode_grid(cfg).t_recurrence > 2 * cfg["time"]["t_max"]


def test_auto_modes_clears_horizon():
    for k, t in [(10, 10), (20, 10), (0.9, 5), (128, 7)]:
        n = auto_modes(k, t)
        assert n % 2 == 0
        assert np.pi * (n - 1) / k >= 2 * 1.3 * t


def test_sweep_cells_move_atom_b():
    cfg = resolve({"scenario": "double-peak"})
    cell = apply_cell(cfg, {"width": 1.0, "separation": 0.7})
    a, b = atom_pair(cell)
    assert center_separation(a, b) == pytest.approx(0.7)
    assert a.width == b.width == 1.0
    m = apply_cell(resolve({"scenario": "comb-m-sweep"}), {"m": 10})
    assert len(atom_pair(m)[0].points) == 10


def test_config_hash_is_stable():
    cfg = resolve(SMALL)
    assert config_hash(cfg) == config_hash(resolve(SMALL))
    assert config_hash(cfg) != config_hash(resolve({**SMALL, "initial": "ge"}))


def test_fringe_contrast():
    assert fringe_contrast([1.0, 3.0]) == pytest.approx(0.5)
    assert fringe_contrast([0.0, 0.0]) == 0.0
    assert fringe_contrast([0.2, 0.2, 0.2]) == 0.0


def test_run_dispatch_matches_between_methods():
    master = run(resolve(SMALL))
    dressed = run(resolve({**SMALL, "method": "dressed1"}))
    assert np.abs(master.series.rho[:, 1:3, 1:3] - dressed.series.rho[:, 1:3, 1:3]).max() < 1e-3
    s = summarize(master.series, 0.5)
    assert s["C_at_t"] == pytest.approx(master.series.concurrence()[50])


def test_single_cell_sweep_equals_run():
    cfg = resolve({**SMALL, "sweep": {"strength": [0.5]}})
    axes, cells, results = sweep(cfg)
    assert axes == ["strength"] and len(cells) == 1
    direct = run(resolve({**SMALL, "atoms": {mu: {**SMALL["atoms"][mu], "strength": 0.5} for mu in "ab"}}))
    np.testing.assert_array_equal(results[0].series.rho, direct.series.rho)


def test_contrast_table_groups_other_axes():
    cells = [{"width": w, "separation": s} for w in (0.1, 1.0) for s in (0.0, 1.0)]
    rows = [{"C_at_t": v} for v in (0.1, 0.3, 0.2, 0.2)]
    table = contrast_table(["width", "separation"], cells, rows)
    assert [r["contrast"] for r in table] == pytest.approx([0.5, 0.0])


def test_simulate_writes_outputs_and_is_reproducible(tmp_path):
    cfg = write_yaml(tmp_path / "c.yaml", SMALL)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "r1")]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "r2")]) == 0
    a = (tmp_path / "r1" / "series.csv").read_bytes()
    assert a == (tmp_path / "r2" / "series.csv").read_bytes()
    manifest = yaml.safe_load((tmp_path / "r1" / "manifest.yaml").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["config_hash"] == config_hash(resolve(SMALL))
    rows = read_csv(tmp_path / "r1" / "series.csv")
    assert len(rows) == 101


def test_output_dir_from_environment(tmp_path, monkeypatch):
    cfg = write_yaml(tmp_path / "c.yaml", SMALL)
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["simulate", "--config", str(cfg)]) == 0
    assert (tmp_path / "env" / "series.csv").exists()


def test_sweep_command(tmp_path):
    cfg = write_yaml(tmp_path / "c.yaml", {**SMALL, "sweep": {"strength": [0.3, 0.6]}, "observable": {"time": 1.0}})
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
    surface = read_csv(tmp_path / "s" / "surface.csv")
    assert [float(r["strength"]) for r in surface] == [0.3, 0.6]
    assert (tmp_path / "s" / "cells" / "cell_0001.csv").exists()


def test_correlate_command(tmp_path):
    cfg = write_yaml(tmp_path / "c.yaml", {**SMALL, "grid": {"k_max": 20.0, "n_modes": 128}, "time": {"dt": 0.005, "t_max": 6.0}})
    assert main(["correlate", "--config", str(cfg), "--out", str(tmp_path / "k")]) == 0
    peaks = read_csv(tmp_path / "k" / "peaks.csv")
    assert peaks and all("offset_steps" in r for r in peaks)


def test_validate_command(tmp_path):
    cfg = write_yaml(tmp_path / "c.yaml", SMALL)
    assert main(["validate", "--config", str(cfg), "--out", str(tmp_path / "v")]) == 0
    rows = read_csv(tmp_path / "v" / "validate.csv")
    assert all(r["passed"] == "True" for r in rows)


def test_noise_test_command(tmp_path):
    cfg = write_yaml(tmp_path / "c.yaml", SMALL)
    code = main(["noise-test", "--config", str(cfg), "--out", str(tmp_path / "n"), "--samples", "4000", "--probes", "5"])
    assert code == 0
    assert (tmp_path / "n" / "noise_covariance.csv").exists()


def test_bad_config_exits_with_message(tmp_path, capsys):
    cfg = write_yaml(tmp_path / "c.yaml", {**SMALL, "time": {"dt": "fast"}})
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "time.dt" in capsys.readouterr().err
    assert main(["simulate", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "giantatoms", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip()
