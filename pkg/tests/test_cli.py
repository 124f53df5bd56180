"""CLI mechanics: config handling, schemas, manifests, exit codes,
thread-count determinism and golden-value regression."""

import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

CONFIG_DIR = Path(__file__).parent.parent / "configs"


def run_cli(args, cwd=None):
    return subprocess.run([sys.executable, "-m", "bubblebands.cli", *args],
                          capture_output=True, text=True, cwd=cwd)


def write_config(path, doc):
    path.write_text(yaml.safe_dump(doc))
    return str(path)


@pytest.fixture(scope="module")
def tiny_bands_config(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "bands.yaml"
    return write_config(p, {
        "bands": {"path": [[3.45, 1.99], "dirac", [3.80, 2.20]],
                  "n_per_segment": 2},
    })


@pytest.fixture(scope="module")
def bands_run(tiny_bands_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("bands_run")
    res = run_cli(["bands", "--config", tiny_bands_config, "--out", str(out)])
    assert res.returncode == 0, res.stderr
    return out


def test_default_configs_parse():
    from bubblebands.config import load_config

    for name in ("honeycomb.yaml", "square.yaml"):
        cfg = load_config(CONFIG_DIR / name)
        assert cfg.raw["bubbles"]["radius"] == 0.2
        assert cfg.material.delta == pytest.approx(1e-3)
        assert cfg.material.v == cfg.material.v_b == 1.0
    # default honeycomb path is Gamma-K-M-Gamma
    cfg = load_config(CONFIG_DIR / "honeycomb.yaml")
    assert cfg.raw["bands"]["path"] == ["gamma", "dirac", "m", "gamma"]


def test_config_rejects_unknown_keys(tmp_path):
    p = write_config(tmp_path / "bad.yaml", {"latice": {"kind": "honeycomb"}})
    res = run_cli(["dirac", "--config", p, "--out", str(tmp_path / "o")])
    assert res.returncode == 1
    assert "config error" in res.stderr


def test_config_rejects_bad_values(tmp_path):
    p = write_config(tmp_path / "bad.yaml", {"lattice": {"kind": "triangular"}})
    res = run_cli(["bands", "--config", p, "--out", str(tmp_path / "o")])
    assert res.returncode == 1


def test_numeric_failure_exit_code(tmp_path):
    # a frequency shift far outside the sub-wavelength window resolves to
    # no mode anywhere; the envelope command reports numeric failure
    p = write_config(tmp_path / "c.yaml",
                     {"envelope": {"epsilons": [0.2], "fft_epsilons": []}})
    res = run_cli(["envelope", "--config", p, "--out", str(tmp_path / "o")])
    assert res.returncode == 2


def test_bands_outputs_and_schema(bands_run):
    rows = list(csv.DictReader(open(bands_run / "bands.csv")))
    assert list(rows[0].keys()) == ["arclength", "alpha_x", "alpha_y",
                                    "omega1", "omega2", "residual1",
                                    "residual2", "omega1_asym", "omega2_asym"]
    assert len(rows) == 5
    om1 = np.array([float(r["omega1"]) for r in rows])
    om2 = np.array([float(r["omega2"]) for r in rows])
    assert np.all(om1 <= om2 + 1e-12)
    doc = json.loads((bands_run / "bands.json").read_text())
    assert doc["n_failed"] == 0
    # path passes through K, so the JSON carries the cone report
    assert "dirac" in doc
    assert doc["dirac"]["gradient_pattern_dev"] <= 1e-4

    from bubblebands.cli import validate_json

    validate_json(doc, "bands_report")
    manifest = json.loads((bands_run / "manifest.json").read_text())
    validate_json(manifest, "manifest")
    assert set(manifest["outputs"]) == {"bands.csv", "bands.json"}


def test_csv_numeric_format(bands_run):
    lines = (bands_run / "bands.csv").read_text().splitlines()
    field = lines[1].split(",")[0]
    assert "e" in field and len(field.split("e")[0].split(".")[1]) == 12


def test_manifest_rerun_is_byte_identical(bands_run, tmp_path):
    out2 = tmp_path / "rerun"
    res = run_cli(["bands", "--config", str(bands_run / "manifest.json"),
                   "--out", str(out2)])
    assert res.returncode == 0, res.stderr
    for name in ("bands.csv", "bands.json", "manifest.json"):
        assert (out2 / name).read_bytes() == (bands_run / name).read_bytes()


def test_thread_count_determinism(tiny_bands_config, bands_run, tmp_path):
    out4 = tmp_path / "threads4"
    res = run_cli(["bands", "--config", tiny_bands_config, "--out", str(out4),
                   "--threads", "4"])
    assert res.returncode == 0, res.stderr
    assert (out4 / "bands.csv").read_bytes() == (bands_run / "bands.csv").read_bytes()
    assert (out4 / "bands.json").read_bytes() == (bands_run / "bands.json").read_bytes()


def test_dirac_command_golden_regression(tmp_path, golden):
    """Physical scalars in dirac.json are config-trim independent; they are
    guarded against the frozen first verified run."""
    p = write_config(tmp_path / "d.yaml", {
        "dirac": {"fit_radii_rel": [1e-3, 2e-3, 4e-3, 7e-3, 1e-2],
                  "n_directions": 2}})
    out = tmp_path / "o"
    res = run_cli(["dirac", "--config", p, "--out", str(out)])
    assert res.returncode == 0, res.stderr
    doc = json.loads((out / "dirac.json").read_text())
    g = golden["honeycomb"]
    assert np.isclose(doc["c1_star"], g["c1_star"], rtol=1e-8)
    assert np.isclose(doc["omega_star_numeric"], g["omega_star_numeric"], rtol=1e-7)
    assert np.isclose(doc["omega_star_asymptotic"], g["omega_star_asymptotic"],
                      rtol=1e-8)
    assert np.isclose(abs(complex(*doc["c_dirac"])), g["abs_c"], rtol=1e-6)
    assert np.isclose(doc["lambda0"], g["lambda0"], rtol=1e-8)
    assert np.isclose(doc["slope_formula"], g["cone_slope"], rtol=1e-6)
    slopes = doc["slopes_plus"] + doc["slopes_minus"]
    assert np.allclose(slopes, g["cone_slope"], rtol=0.01)


def test_square_bands_reports_bandgap(tmp_path):
    p = write_config(tmp_path / "sq.yaml", {
        "lattice": {"kind": "square"},
        "bands": {"path": ["gamma", "x", "m", "gamma"], "n_per_segment": 2}})
    out = tmp_path / "o"
    res = run_cli(["bands", "--config", p, "--out", str(out)])
    assert res.returncode == 0, res.stderr
    doc = json.loads((out / "bands.json").read_text())
    assert doc["bandgap_above_first_band"] is True
    assert doc["n_failed"] == 0
    rows = list(csv.DictReader(open(out / "bands.csv")))
    om1 = np.array([float(r["omega1"]) for r in rows])
    # single band: omega2 columns are nan, first band peaks at M (index 4)
    assert all(r["omega2"] == "nan" for r in rows)
    assert np.nanargmax(om1) == 4
    assert om1[0] == 0.0 and om1[-1] == 0.0   # quasi-static value at Gamma


def test_field_command_outputs(tmp_path):
    p = write_config(tmp_path / "f.yaml", {
        "field": {"epsilon": 8e-3, "band": "lower", "region_cells": 2,
                  "resolution": 12, "line_cells": 16, "samples_per_cell": 4}})
    out = tmp_path / "o"
    res = run_cli(["field", "--config", p, "--out", str(out)])
    assert res.returncode == 0, res.stderr
    rows = list(csv.DictReader(open(out / "field.csv")))
    assert list(rows[0].keys()) == ["x", "y", "re_u", "im_u", "inside"]
    assert len(rows) == 144
    inside = np.array([float(r["inside"]) for r in rows])
    assert 0 < inside.sum() < len(rows)
    line = list(csv.DictReader(open(out / "field_line.csv")))
    assert list(line[0].keys()) == ["x", "re_u", "im_u", "inside"]
    doc = json.loads((out / "field.json").read_text())
    assert doc["sigma_ratio"] <= 1e-6
    a_mag = abs(complex(*doc["coeff_A"]))
    assert abs(a_mag - 1 / np.sqrt(2)) <= 0.05


def test_envelope_command_outputs(tmp_path, golden):
    p = write_config(tmp_path / "e.yaml", {
        "envelope": {"epsilons": [-5e-3, -1e-3, 1e-3, 5e-3],
                     "fft_epsilons": []}})
    out = tmp_path / "o"
    res = run_cli(["envelope", "--config", p, "--out", str(out)])
    assert res.returncode == 0, res.stderr
    rows = list(csv.DictReader(open(out / "envelope.csv")))
    assert list(rows[0].keys()) == ["epsilon", "f_dispersion", "f_fft"]
    doc = json.loads((out / "envelope.json").read_text())
    assert doc["fit_model"] == "linear"
    assert np.isclose(doc["slope_formula"],
                      golden["honeycomb"]["envelope_slope_formula"], rtol=1e-6)
    assert np.isclose(doc["fit_coefficient"], doc["slope_formula"], rtol=0.05)


def test_seed_recorded_in_manifest(tmp_path, tiny_bands_config):
    out = tmp_path / "o"
    res = run_cli(["dirac", "--config",
                   write_config(tmp_path / "d.yaml", {
                       "dirac": {"fit_radii_rel": [1e-3, 2e-3, 4e-3, 7e-3, 1e-2],
                                 "n_directions": 1}}),
                   "--out", str(out), "--seed", "42"])
    assert res.returncode == 0, res.stderr
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 42
    assert manifest["config"]["seed"] == 42
