from __future__ import annotations

import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from cantortubes.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, main
from cantortubes.construction import Realization
from cantortubes.experiments import ConfigError, RunConfig, run_experiment
from cantortubes.reports import FORMAT_VERSION, Curve, ExperimentReport, read_csv, write_report

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
W_TILT = {"point": [0.5, 0.5], "direction": [math.cos(1.0), math.sin(1.0)]}


def _write(tmp_path: Path, doc: dict, name: str = "cfg.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def _e22(depth: int, experiment: dict | None = None, seed: int = 1) -> dict:
    doc = {
        "schema_version": 1,
        "construction": {"d": 2, "levels": [[2, 2]], "repeat": depth},
        "rule": {"kind": "ColumnLR"},
        "seed": seed,
    }
    if experiment is not None:
        doc["experiment"] = experiment
    return doc


def _no_temp_files(path: Path) -> bool:
    return not any(p.name.endswith(".tmp") for p in path.rglob("*"))


# ----------------------------------------------------------------- generate


def test_generate_e22_depth_10(tmp_path, capsys):
    assert main(["generate", "--config", str(CONFIGS / "generate_e22.json"), "--out", str(tmp_path)]) == EXIT_PASS
    doc = json.loads((tmp_path / "e22_depth10.json").read_text())
    real = Realization.from_dict(doc)
    assert real.depth == 10
    assert len(real.cubes(10)) == 1024
    assert doc["config"]["seed"] == 7
    assert "1024 cubes" in capsys.readouterr().out
    assert _no_temp_files(tmp_path)


def test_generate_overfull_exits_2(tmp_path, capsys):
    code = main(["generate", "--config", str(CONFIGS / "generate_overfull.json"), "--out", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "invalid parameters: overfull level (level 1)" in capsys.readouterr().err
    assert not list(tmp_path.iterdir())


def test_generate_is_byte_identical(tmp_path):
    cfg = str(CONFIGS / "generate_e22.json")
    main(["generate", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["generate", "--config", cfg, "--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "e22_depth10.json").read_bytes()
    b = (tmp_path / "b" / "e22_depth10.json").read_bytes()
    assert a == b


def test_generate_seed_override(tmp_path):
    cfg = str(CONFIGS / "generate_e22.json")
    main(["generate", "--config", cfg, "--out", str(tmp_path), "--seed", "8"])
    assert Realization.from_dict(json.loads((tmp_path / "e22_depth10.json").read_text())).seed == 8


# --------------------------------------------------------------- experiment


def test_tube_scan_t08_exits_0(tmp_path):
    cfg = _write(tmp_path, _e22(10, {"name": "tube-scan", "t": 0.8, "width_exponents": [3, 9],
                                     "tubes_per_width": 300}))
    assert main(["experiment", "--config", cfg, "--out", str(tmp_path)]) == EXIT_PASS
    meta, rows = read_csv(tmp_path / "tube_scan_width.csv")
    assert meta["format_version"] == FORMAT_VERSION
    assert [float(r["width"]) for r in rows] == [2.0**-j for j in range(3, 10)]
    assert all(float(r["ratio_t0.8"]) > 0 for r in rows)


def test_tail_with_inadmissible_lambda_exits_2(tmp_path, capsys):
    code = main(["experiment", "--config", str(CONFIGS / "tail_bad_lambda.json"), "--out", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "invalid λ/λ0 pair" in capsys.readouterr().err


def test_box_dim_two_depths_exits_2(tmp_path, capsys):
    code = main(["experiment", "--config", str(CONFIGS / "box_dim_two_depths.json"), "--out", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "insufficient scales" in capsys.readouterr().err


@pytest.mark.parametrize(
    "doc, message",
    [
        (_e22(4, {"name": "spectral"}), "unknown experiment"),
        ({**_e22(4, {"name": "martingale"}), "schema_version": 99}, "schema_version"),
        (_e22(4, {"name": "martingale"}), "needs a flat"),
        (_e22(4, {"name": "mgf", "flat": W_TILT}), "concentration.t"),
    ],
)
def test_config_errors_exit_2(tmp_path, capsys, doc, message):
    code = main(["experiment", "--config", _write(tmp_path, doc), "--out", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert message in capsys.readouterr().err


def test_missing_config_exits_2(tmp_path, capsys):
    assert main(["experiment", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["experiment", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_failed_check_exits_1(tmp_path):
    # a band no slope can reach turns the box-dimension check red
    cfg = _write(tmp_path, _e22(10, {"name": "box-dim", "directions": 3, "depths": [4, 5, 6, 7],
                                     "band": [1.5, 2.0]}))
    assert main(["experiment", "--config", cfg, "--out", str(tmp_path)]) == EXIT_FAIL


def test_reports_embed_config_version_and_timestamp(tmp_path):
    doc = _e22(4, {"name": "martingale", "flat": W_TILT, "level": 3, "trials": 1000}, seed=5)
    cfg = _write(tmp_path, doc)
    assert main(["experiment", "--config", cfg, "--out", str(tmp_path), "--threads", "2"]) == EXIT_PASS
    rep = json.loads((tmp_path / "martingale.json").read_text())
    assert rep["format_version"] == FORMAT_VERSION
    assert rep["config"]["experiment"] == doc["experiment"]
    assert rep["config"]["threads"] == 2
    assert rep["trial_index_range"] == [0, 1000]
    assert rep["timestamp"].endswith("+00:00")
    meta, rows = read_csv(tmp_path / "martingale_samples.csv")
    assert meta["config"]["seed"] == 5
    assert len(rows) == 1000
    assert _no_temp_files(tmp_path)


def test_format_flag_selects_outputs(tmp_path):
    cfg = _write(tmp_path, _e22(4, {"name": "martingale", "flat": W_TILT, "level": 3, "trials": 1000}))
    main(["experiment", "--config", cfg, "--out", str(tmp_path / "j"), "--format", "json"])
    main(["experiment", "--config", cfg, "--out", str(tmp_path / "c"), "--format", "csv"])
    assert [p.suffix for p in (tmp_path / "j").iterdir()] == [".json"]
    assert {p.suffix for p in (tmp_path / "c").iterdir()} == {".csv"}


def test_reports_are_reproducible(tmp_path):
    doc = _e22(6, {"name": "tail", "flat": W_TILT, "levels": [4, 5, 6], "trials": 500,
                   "concentration": {"t": 0.8, "R": 1.0}})
    a = run_experiment(RunConfig.from_dict(doc, "experiment"))
    b = run_experiment(RunConfig.from_dict({**doc, "threads": 3}, "experiment"))
    assert a.statistics == b.statistics
    assert a.curves["tail"].rows == b.curves["tail"].rows


def test_figures_are_rendered(tmp_path):
    pytest.importorskip("matplotlib")
    cfg = _write(tmp_path, _e22(8, {"name": "tube-scan", "t": [0.8], "width_exponents": [3, 7],
                                    "tubes_per_width": 100}))
    assert main(["experiment", "--config", cfg, "--out", str(tmp_path), "--figures"]) == EXIT_PASS
    png = tmp_path / "tube_scan.png"
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_net_audit_default_and_export(tmp_path, capsys):
    cfg = _write(tmp_path, {"schema_version": 1, "seed": 3,
                            "experiment": {"cases": 60, "strip_realizations": 4, "export_net_level": 1,
                                           "eps_net": 0.25}})
    assert main(["net-audit", "--config", cfg, "--out", str(tmp_path)]) == EXIT_PASS
    rep = json.loads((tmp_path / "net_audit.json").read_text())
    assert rep["statistics"]["lemma"]["violations"] == 0
    net = json.loads((tmp_path / "net_d2_m1_n1.json").read_text())
    assert len(net["members"]) > 0
    _, rows = read_csv(tmp_path / "net_audit_measure_audit.csv")
    assert set(rows[0]) == {"case", "exact", "oracle", "oracle_se", "error"}


def test_inspect_realization_and_report(tmp_path, capsys):
    main(["generate", "--config", str(CONFIGS / "generate_e22.json"), "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["inspect", str(tmp_path / "e22_depth10.json")]) == EXIT_PASS
    out = capsys.readouterr().out
    assert "level 10: 1024 cubes" in out
    cfg = _write(tmp_path, _e22(4, {"name": "martingale", "flat": W_TILT, "level": 2, "trials": 1000}))
    main(["experiment", "--config", cfg, "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["inspect", str(tmp_path / "martingale.json")]) == EXIT_PASS
    assert "PASS conditional_mean" in capsys.readouterr().out
    (tmp_path / "junk.json").write_text("[1, 2]")
    assert main(["inspect", str(tmp_path / "junk.json")]) == EXIT_CONFIG


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "cantortubes", "generate", "--config", str(CONFIGS / "generate_overfull.json"),
         "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == EXIT_CONFIG
    assert "overfull level" in proc.stderr


# ----------------------------------------------------------------- reports


def test_csv_roundtrip(tmp_path):
    rep = ExperimentReport("demo-run", {"a": 1}, 3, 10)
    rep.curves = {"c": Curve(["x", "y"], [(1, 0.1), (2, float("nan"))])}
    rep.checks = {"ok": True}
    paths = write_report(rep, tmp_path, {"seed": 3}, ("json", "csv"))
    assert [p.name for p in paths] == ["demo_run.json", "demo_run_c.csv"]
    meta, rows = read_csv(tmp_path / "demo_run_c.csv")
    assert meta == {"format_version": FORMAT_VERSION, "config": {"seed": 3}}
    assert rows[0] == {"x": "1", "y": "0.1"}
    assert rows[1]["y"] == "nan"
    assert json.loads((tmp_path / "demo_run.json").read_text())["passed"] is True


def test_run_config_roundtrip():
    doc = _e22(5, {"name": "martingale", "flat": W_TILT})
    cfg = RunConfig.from_dict(doc, "experiment")
    again = RunConfig.from_dict({**cfg.to_dict(), "experiment": cfg.experiment}, "experiment")
    assert again.params == cfg.params
    assert again.rule == cfg.rule
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"construction": {"d": 2}}, "generate")
