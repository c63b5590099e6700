import json
from pathlib import Path

import numpy as np
import pytest

from gravphase.cli import main
from gravphase.config import (
    CONFIG_SCHEMA,
    ConfigError,
    apply_overrides,
    get_preset,
    preset_names,
)


def test_presets_listed_and_valid():
    names = preset_names()
    assert len(names) >= 5
    for name in ("gie-2x2", "wide-gaussian-pair", "sn-vs-full",
                 "semiclassical-overlap", "zassenhaus-t3"):
        assert name in names
        get_preset(name)  # validates against the schema


def test_presets_command(capsys):
    assert main(["presets"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "gie-2x2" in out
    assert main(["presets", "--emit", "zassenhaus-t3"]) == 0
    emitted = json.loads(capsys.readouterr().out)
    assert emitted["scenario"] == "opalg-verify"
    assert main(["presets", "--emit", "nope"]) == 1


def test_schema_command(capsys):
    assert main(["schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert schema == CONFIG_SCHEMA


def test_malformed_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"scenario": "phase-compare",\n  "seed": }')
    assert main(["run", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "bad.json:2:" in err  # line-anchored message
    missing = tmp_path / "missing.json"
    assert main(["run", str(missing)]) == 1
    invalid = tmp_path / "invalid.json"
    invalid.write_text(json.dumps({"scenario": "phase-compare", "seed": -1}))
    assert main(["run", str(invalid)]) == 1


def test_override_paths():
    cfg = get_preset("zassenhaus-t3")
    out = apply_overrides(cfg, ["opalg.t_points=5", "seed=9"])
    assert out["opalg"]["t_points"] == 5 and out["seed"] == 9
    with pytest.raises(ConfigError, match="not present"):
        apply_overrides(cfg, ["nope.deep=1"])
    with pytest.raises(ConfigError, match="path=value"):
        apply_overrides(cfg, ["garbage"])


def test_numerical_guard_exit_code(tmp_path):
    cfg = get_preset("gie-2x2")
    cfg["scenario"] = "poisson"
    cfg["grid"] = {"n": 64, "box": 8.0}  # direct solver is guarded above N=48
    cfg["poisson"] = {"profile": {"type": "gaussian", "mass": 1.0,
                                  "center": [4.0, 4.0, 4.0], "sigma": 1.2}}
    path = tmp_path / "guard.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 2


def test_negativity_scenario_matches_direct_computation(tmp_path):
    s2 = 1 / np.sqrt(2)
    cfg = {
        "scenario": "negativity",
        "seed": 1,
        "negativity": {
            "amplitudes_a": [s2, s2],
            "amplitudes_b": [s2, s2],
            "phases": [[np.pi, 0.0], [0.0, 0.0]],
        },
    }
    path = tmp_path / "neg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert main(["run", str(path), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert abs(report["result"]["negativity"] - 0.5) < 1e-12


def test_poisson_scenario_writes_grid_files(tmp_path):
    cfg = {
        "scenario": "poisson",
        "seed": 2,
        "grid": {"n": 16, "box": 8.0},
        "poisson": {"profile": {"type": "gaussian", "mass": 1.0,
                                "center": [4.0, 4.0, 4.0], "sigma": 1.2},
                    "stride": 2},
    }
    path = tmp_path / "p.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert main(["run", str(path), "--out", str(out)]) == 0
    assert (out / "fields" / "hT.f64").exists()
    header = json.loads((out / "fields" / "hT.f64.json").read_text())
    assert header["N"] == 16
    report = json.loads((out / "report.json").read_text())
    assert report["result"]["backend_deviation_max_rel"] < 0.01
    assert "units" in report["result"]


def _csv_bodies(outdir: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted((outdir / "tables").glob("*.csv"))}


def test_rerun_is_byte_identical(tmp_path):
    cfg = get_preset("zassenhaus-t3")
    cfg["opalg"]["t_points"] = 5
    path = tmp_path / "z.json"
    path.write_text(json.dumps(cfg))
    outs = []
    for tag in ("one", "two"):
        out = tmp_path / tag
        assert main(["run", str(path), "--out", str(out)]) == 0
        outs.append(_csv_bodies(out))
    assert outs[0] and outs[0] == outs[1]


def test_si_units_scenario_matches_natural_computation(tmp_path):
    # GIE-scale numbers in SI; the report's phases must equal a direct
    # computation in rescaled internal units (phases are dimensionless)
    cfg = {
        "scenario": "phase-compare",
        "seed": 4,
        "constants": {"system": "si", "length_scale": 1e-4, "mass_scale": 1e-14},
        "time": 2.5,
        "backend": "auto",
        "sources": {
            "a": {"type": "gaussian", "mass": 1e-14,
                  "center": [0.0, 0.0, 0.0], "sigma": 1e-4},
            "b": {"type": "gaussian", "mass": 1e-14,
                  "center": [4.5e-4, 0.0, 0.0], "sigma": 1e-4},
        },
    }
    path = tmp_path / "si.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert main(["run", str(path), "--out", str(out)]) == 0
    body = (out / "tables" / "models.csv").read_text().splitlines()
    header = body[0].split(",")
    general = next(r.split(",") for r in body[1:] if r.startswith("general"))
    phase = float(general[header.index("phase_rad")])

    from gravphase.phases import theta_AB
    from gravphase.sources import PhysicalConstants, gaussian_density
    si = PhysicalConstants.si()
    expected, _ = theta_AB(gaussian_density(1e-14, (0, 0, 0), 1e-4),
                           gaussian_density(1e-14, (4.5e-4, 0, 0), 1e-4),
                           2.5, si)
    assert abs(phase - expected) < 1e-12 * abs(expected)
    report = json.loads((out / "report.json").read_text())
    assert "internal units" in report["result"]["units"]["lengths_masses_times"]
