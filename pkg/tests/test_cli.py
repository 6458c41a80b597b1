import os

import yaml
from click.testing import CliRunner

from sfrestore.cli import main


def _write_config(tmp_path, **experiment):
    raw = {
        "experiment": {
            "task": "inpaint-random", "dataset": "imagenet-preset",
            "mode": "safari", "seed": 0, "steps": 8, "sigma": 0.025,
            "output_dir": str(tmp_path / "out"), "image_size": 16,
            "gallery_size": 4, "num_images": 1,
        }
    }
    raw["experiment"].update(experiment)
    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump(raw))
    return str(path)


def test_run_command(tmp_path):
    cfg = _write_config(tmp_path)
    result = CliRunner().invoke(main, ["run", "--config", cfg])
    assert result.exit_code == 0, result.output
    assert "psnr" in result.output
    assert os.path.exists(tmp_path / "out" / "metrics.csv")


def test_run_with_overrides(tmp_path):
    cfg = _write_config(tmp_path)
    out2 = str(tmp_path / "other")
    result = CliRunner().invoke(
        main,
        ["run", "--config", cfg, "--seed", "5", "--out", out2,
         "--override", "experiment.steps=4"],
    )
    assert result.exit_code == 0, result.output
    assert os.path.exists(os.path.join(out2, "manifest.txt"))


def test_config_error_exit_code(tmp_path):
    cfg = _write_config(tmp_path, task="bogus-task")
    result = CliRunner().invoke(main, ["run", "--config", cfg])
    assert result.exit_code == 2
    assert "config error" in result.output


def test_bad_override_exit_code(tmp_path):
    cfg = _write_config(tmp_path)
    result = CliRunner().invoke(
        main, ["run", "--config", cfg, "--override", "guidance.bogus=1"]
    )
    assert result.exit_code == 2


def test_sweep_command(tmp_path):
    cfg = _write_config(tmp_path)
    result = CliRunner().invoke(
        main, ["sweep", "--config", cfg, "--axis", "sigma", "--values", "0.0,0.05"]
    )
    assert result.exit_code == 0, result.output
    assert os.path.exists(tmp_path / "out" / "sweep.csv")


def test_verify_theory_command(tmp_path):
    result = CliRunner().invoke(
        main, ["verify-theory", "--instances", "12", "--out", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    assert "12 instances verified" in result.output
    assert os.path.exists(tmp_path / "bound_reports.csv")


def test_selftest_command():
    result = CliRunner().invoke(main, ["selftest"])
    assert result.exit_code == 0, result.output
    assert "all checks passed" in result.output
    assert "FAIL" not in result.output
