import os

import numpy as np
import pytest

from sfrestore.config import ExperimentConfig
from sfrestore.gallery import make_toy_gallery
from sfrestore.harness import (
    apply_sweep_value,
    build_gallery,
    build_operator,
    read_csv,
    run_batch,
    run_experiment,
    run_item,
    run_sweep,
)


def _cfg(tmp_path, **kw):
    base = dict(
        task="inpaint-random", dataset="imagenet-preset", mode="safari",
        seed=3, steps=10, sigma=0.025, output_dir=str(tmp_path / "out"),
        image_size=16, channels=1, gallery_size=4, num_images=2,
    )
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.mark.parametrize("task,out_shape", [
    ("inpaint-random", (16, 16, 1)),
    ("inpaint-box", (16, 16, 1)),
    ("deblur-gauss", (16, 16, 1)),
    ("sr", (4, 4, 1)),
])
def test_build_operator_shapes(tmp_path, task, out_shape):
    cfg = _cfg(tmp_path, task=task)
    A = build_operator(cfg, 0)
    assert A.in_shape == (16, 16, 1) and A.out_shape == out_shape


def test_build_gallery_preset_and_folder(tmp_path):
    cfg = _cfg(tmp_path)
    gal = build_gallery(cfg)
    assert gal.shape == (4, 16, 16, 1)

    from sfrestore.core import save_image

    folder = tmp_path / "gal"
    folder.mkdir()
    for i in range(3):
        save_image(folder / f"{i}.png", gal[i])
    cfg2 = _cfg(tmp_path, dataset=str(folder), gallery_size=3)
    assert build_gallery(cfg2).shape == (3, 16, 16, 1)

    cfg3 = _cfg(tmp_path, dataset=str(folder), image_size=32)
    with pytest.raises(Exception):
        build_gallery(cfg3)


def test_run_item_deterministic(tmp_path):
    cfg = _cfg(tmp_path)
    gal = build_gallery(cfg)
    a = run_item(cfg, gal, 0)
    b = run_item(cfg, gal, 0)
    assert np.array_equal(a.restored, b.restored)
    assert a.psnr_db == b.psnr_db and a.ssim == b.ssim
    c = run_item(cfg, gal, 1)
    assert not np.array_equal(a.measurement, c.measurement)


def test_worker_pool_matches_serial(tmp_path):
    cfg1 = _cfg(tmp_path)
    gal = build_gallery(cfg1)
    serial = run_batch(cfg1, gal)
    cfg2 = _cfg(tmp_path, workers=2)
    parallel = run_batch(cfg2, gal)
    for a, b in zip(serial, parallel):
        assert a.index == b.index
        assert np.array_equal(a.restored, b.restored)


def test_run_experiment_outputs(tmp_path):
    cfg = _cfg(tmp_path)
    summary = run_experiment(cfg)
    out = cfg.output_dir
    for name in ("manifest.txt", "metrics.csv", "item_0.png", "item_1.png",
                 "trace_0.csv", "trace_1.csv", "operator_0.npz"):
        assert os.path.exists(os.path.join(out, name)), name
    assert np.isfinite(summary["psnr_mean"])

    header, rows = read_csv(os.path.join(out, "metrics.csv"))
    assert header == ["image", "psnr_db", "ssim"]
    assert rows[-2][0] == "mean" and rows[-1][0] == "std"
    assert abs(float(rows[-2][1]) - summary["psnr_mean"]) < 1e-12

    # every CSV is stamped with the manifest hash
    with open(os.path.join(out, "metrics.csv")) as f:
        first = f.readline().strip()
    assert first == f"# manifest_sha256={cfg.manifest_hash()}"


def test_trace_csv_readable(tmp_path):
    cfg = _cfg(tmp_path)
    run_experiment(cfg)
    header, rows = read_csv(os.path.join(cfg.output_dir, "trace_0.csv"))
    assert header == ["t", "L_s", "L_H", "L_L", "residual_sq",
                      "rho_s", "rho_H", "rho_L"]
    assert len(rows) == cfg.steps
    assert int(rows[0][0]) == cfg.steps and int(rows[-1][0]) == 1


def test_sr_montage_upscales_measurement(tmp_path):
    from sfrestore.core import load_image

    cfg = _cfg(tmp_path, task="sr")
    run_experiment(cfg)
    img = load_image(os.path.join(cfg.output_dir, "item_0.png"))
    assert img.shape == (16, 48, 1)  # measurement | restored | ground truth


def test_apply_sweep_value(tmp_path):
    cfg = _cfg(tmp_path)
    assert apply_sweep_value(cfg, "r0", 3).guidance.r0 == 3
    assert apply_sweep_value(cfg, "rho_H", 0.7).guidance.c_h_late == 0.7
    assert apply_sweep_value(cfg, "rho_L", 0.7).guidance.c_l_late == 0.7
    assert apply_sweep_value(cfg, "sigma", 0.1).sigma == 0.1
    assert apply_sweep_value(cfg, "upsample_factor", 2).guidance.upsample_factor == 2
    with pytest.raises(Exception, match="sr"):
        apply_sweep_value(cfg, "sr_factor", 2)
    sr = _cfg(tmp_path, task="sr")
    assert apply_sweep_value(sr, "sr_factor", 2).degradation.sr_factor == 2
    with pytest.raises(Exception):
        apply_sweep_value(cfg, "bogus", 1)


def test_run_sweep_writes_csv(tmp_path):
    cfg = _cfg(tmp_path, num_images=1)
    rows = run_sweep(cfg, "sigma", [0.0, 0.1])
    assert len(rows) == 2
    header, data = read_csv(os.path.join(cfg.output_dir, "sweep.csv"))
    assert header[:2] == ["axis", "value"] and len(data) == 2


def test_toy_gallery_properties():
    gal = make_toy_gallery(6, 16, 3, 11)
    assert gal.shape == (6, 16, 16, 3)
    assert gal.min() >= 0.05 - 1e-12 and gal.max() <= 0.95 + 1e-12
    again = make_toy_gallery(6, 16, 3, 11)
    assert np.array_equal(gal, again)
    # members must be mutually distinguishable
    flat = gal.reshape(6, -1)
    d = np.linalg.norm(flat[:, None] - flat[None], axis=-1)
    assert d[~np.eye(6, dtype=bool)].min() > 1.0
