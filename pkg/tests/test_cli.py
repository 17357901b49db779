"""CLI wiring: subcommands, config validation, exit codes, manifests."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from wastefinder.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main


def _write_cfg(path: Path, cfg: dict) -> str:
    path.write_text(json.dumps(cfg))
    return str(path)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One tiny end-to-end CLI run shared by the checks below."""
    root = tmp_path_factory.mktemp("cliws")
    scene_dir = root / "scene"
    models_dir = root / "models"
    cfg = {
        "scene": {
            "width": 96,
            "height": 96,
            "catalog_start": "2020-01",
            "catalog_months": 12,
            "cloud_fraction": 0.05,
            "noise": 0.01,
            "seed": 5,
            "plants": [
                {"center": [30, 30], "radius": 7},
                {"center": [68, 62], "radius": 8},
                {"center": [30, 68], "radius": 8, "kind": "greenhouse"},
            ],
        },
        "train": {
            "scenes": [str(scene_dir)],
            "timesteps": ["2020-09"],
            "seed": 3,
            "background_patches": 2,
            "pixel_epochs": 6,
            "teacher_count": 2,
            "teacher_epochs": 2,
            "student_epochs": 2,
            "student_augment": False,
        },
        "distill": {"unlabeled_scenes": [str(scene_dir)]},
        "detect": {"scene": str(scene_dir), "models": str(models_dir), "timesteps": ["2020-09"]},
        "monitor": {"scene": str(scene_dir), "models": str(models_dir),
                    "candidates": str(root / "det" / "candidates.geojson")},
        "eval": {"candidates": str(root / "det" / "candidates.geojson"), "scene": str(scene_dir)},
    }
    cfg_path = _write_cfg(root / "run.json", cfg)
    assert main(["gen-scene", "--config", cfg_path, "--out", str(scene_dir)]) == EXIT_OK
    assert main(["train-pixel", "--config", cfg_path, "--out", str(models_dir)]) == EXIT_OK
    assert main(["train-teachers", "--config", cfg_path, "--out", str(models_dir)]) == EXIT_OK
    assert main(["train-svm", "--config", cfg_path, "--out", str(models_dir)]) == EXIT_OK
    assert main(["distill", "--config", cfg_path, "--out", str(models_dir)]) == EXIT_OK
    assert main([
        "detect", "--config", cfg_path, "--mode", "high",
        "--out", str(root / "det"), "--store", str(root / "store"),
    ]) == EXIT_OK
    return root, cfg_path


def test_artifacts_exist(workspace):
    root, _ = workspace
    assert (root / "scene" / "raster.json").exists()
    assert (root / "scene" / "truth.geojson").exists()
    assert (root / "models" / "pixel.wfnet").exists()
    assert (root / "models" / "norm_stats.json").exists()
    assert (root / "models" / "teachers" / "teacher_01.wfnet").exists()
    assert (root / "models" / "svm.wfsvm").exists()
    assert (root / "models" / "student.wfnet").exists()
    assert (root / "models" / "soft_targets.jsonl").exists()
    gj = json.loads((root / "det" / "candidates.geojson").read_text())
    assert gj["type"] == "FeatureCollection"
    assert (root / "det" / "heatmap_avg.bin").exists()
    assert (root / "det" / "report.json").exists()


def test_manifests_written(workspace):
    root, _ = workspace
    for d in ("scene", "models", "det"):
        m = json.loads((root / d / "manifest.json").read_text())
        assert {"command", "config_hash", "seed", "version", "created"} <= set(m)


def test_eval_runs(workspace, capsys):
    root, cfg_path = workspace
    assert main(["eval", "--config", cfg_path, "--out", str(root / "eval")]) == EXIT_OK
    report = json.loads((root / "eval" / "eval_report.json").read_text())
    assert {"sites", "detected", "recall"} <= set(report)


def test_monitor_runs(workspace):
    root, cfg_path = workspace
    assert main(["monitor", "--config", cfg_path, "--out", str(root / "mon"),
                 "--store", str(root / "store")]) == EXIT_OK
    summary = json.loads((root / "mon" / "monitor_summary.json").read_text())
    assert isinstance(summary, dict)


def test_missing_config_key_names_it(tmp_path, capsys):
    cfg_path = _write_cfg(
        tmp_path / "bad.json",
        {"scene": {"width": 10, "catalog_start": "2020-01", "catalog_months": 3}},
    )
    code = main(["gen-scene", "--config", cfg_path, "--out", str(tmp_path / "o")])
    assert code == EXIT_USAGE
    assert "scene.height" in capsys.readouterr().err


def test_unknown_command_is_usage_error():
    assert main(["frobnicate", "--config", "x.json"]) == EXIT_USAGE


def test_missing_scene_dir_is_data_error(tmp_path, capsys):
    cfg_path = _write_cfg(
        tmp_path / "c.json",
        {"train": {"scenes": [str(tmp_path / "nope")], "timesteps": ["2020-09"]}},
    )
    assert main(["train-pixel", "--config", cfg_path, "--out", str(tmp_path / "m")]) == EXIT_DATA


def test_module_entrypoint_exit_codes(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "wastefinder", "nonsense"],
        capture_output=True, text=True,
    )
    assert proc.returncode == EXIT_USAGE
    proc2 = subprocess.run(
        [sys.executable, "-m", "wastefinder", "gen-scene", "--config", str(tmp_path / "absent.json")],
        capture_output=True, text=True,
    )
    assert proc2.returncode == EXIT_USAGE
    assert "absent.json" in proc2.stderr
