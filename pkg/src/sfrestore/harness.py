"""Batch experiment harness: task setup, runs, sweeps, report emission.

Outputs per experiment directory:
    item_<i>.png       measurement | restoration | ground truth montage
    trace_<i>.csv      per-step losses and weights
    metrics.csv        per-item PSNR/SSIM plus mean/std summary rows
    manifest.txt       resolved config (canonical JSON) and its hash

Every CSV starts with a ``# manifest_sha256=<hash>`` comment line. Batch
items run in a worker pool; item i derives all of its randomness from
(master seed, i), so results are independent of worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import metrics
from .config import ConfigError, ExperimentConfig, PRESET_DATASETS
from .core import save_image
from .degradations import (
    LinearDegradation,
    NoiseModel,
    make_bicubic_downsample,
    make_box_mask,
    make_gaussian_blur,
    make_random_mask,
    measure,
    save_operator,
)
from .gallery import load_gallery_folder, make_toy_gallery
from .sampler import RunTrace, run
from .schedule import make_linear_schedule
from .scores import EmpiricalPrior, EmpiricalScoreModel

SWEEP_AXES = ("r0", "rho_H", "rho_L", "upsample_factor", "sr_factor", "sigma")


@dataclass
class ItemResult:
    index: int
    psnr_db: float
    ssim: float
    restored: np.ndarray
    measurement: np.ndarray
    ground_truth: np.ndarray
    trace: RunTrace


def build_operator(cfg: ExperimentConfig, item_seed) -> LinearDegradation:
    shape = (cfg.image_size, cfg.image_size, cfg.channels)
    p = cfg.degradation.resolved(cfg.image_size)
    if cfg.task == "inpaint-random":
        return make_random_mask(shape, p.mask_fraction, item_seed)
    if cfg.task == "inpaint-box":
        return make_box_mask(shape, p.box_size, item_seed)
    if cfg.task == "deblur-gauss":
        return make_gaussian_blur(shape, p.kernel_size, p.kernel_sigma)
    if cfg.task == "sr":
        return make_bicubic_downsample(shape, p.sr_factor)
    raise ConfigError(f"unknown task {cfg.task!r}")


def build_gallery(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.dataset in PRESET_DATASETS:
        return make_toy_gallery(cfg.gallery_size, cfg.image_size, cfg.channels, cfg.seed)
    gal = load_gallery_folder(cfg.dataset, max_images=cfg.gallery_size)
    if gal.shape[1:] != (cfg.image_size, cfg.image_size, cfg.channels):
        raise ConfigError(
            f"gallery images have shape {gal.shape[1:]}, config expects "
            f"({cfg.image_size}, {cfg.image_size}, {cfg.channels})"
        )
    return gal


def run_item(cfg: ExperimentConfig, gallery: np.ndarray, index: int) -> ItemResult:
    """Measure and restore gallery item ``index % K``; fully seed-derived."""
    ss = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(index,))
    op_seed, meas_seed, run_seed = ss.spawn(3)
    x0 = gallery[index % gallery.shape[0]]
    A = build_operator(cfg, op_seed)
    y = measure(A, x0, NoiseModel(cfg.sigma), meas_seed)
    beta_start, beta_end = cfg.schedule_betas()
    sched = make_linear_schedule(cfg.steps, beta_start, beta_end)
    model = EmpiricalScoreModel(EmpiricalPrior(gallery), sched)
    restored, trace = run(y, A, model, cfg.guidance, sched, run_seed)
    restored_clipped = np.clip(restored, 0.0, 1.0)
    return ItemResult(
        index=index,
        psnr_db=metrics.psnr(restored_clipped, x0),
        ssim=metrics.ssim(restored_clipped, x0),
        restored=restored_clipped,
        measurement=y,
        ground_truth=x0,
        trace=trace,
    )


_POOL_STATE: dict = {}


def _pool_init(cfg: ExperimentConfig, gallery: np.ndarray) -> None:
    _POOL_STATE["cfg"] = cfg
    _POOL_STATE["gallery"] = gallery


def _pool_item(index: int) -> ItemResult:
    return run_item(_POOL_STATE["cfg"], _POOL_STATE["gallery"], index)


def run_batch(cfg: ExperimentConfig, gallery: np.ndarray) -> list[ItemResult]:
    indices = list(range(cfg.num_images))
    if cfg.workers == 1:
        return [run_item(cfg, gallery, i) for i in indices]
    with ProcessPoolExecutor(
        max_workers=cfg.workers, initializer=_pool_init, initargs=(cfg, gallery)
    ) as pool:
        results = list(pool.map(_pool_item, indices))
    return sorted(results, key=lambda r: r.index)


def _montage(result: ItemResult) -> np.ndarray:
    """measurement | restoration | ground truth, matched heights."""
    gt = result.ground_truth
    y = result.measurement
    if y.shape != gt.shape:
        # nearest-neighbor blow-up for display of small SR measurements
        fy, fx = gt.shape[0] // y.shape[0], gt.shape[1] // y.shape[1]
        y = np.repeat(np.repeat(y, fy, axis=0), fx, axis=1)
    return np.concatenate(
        [np.clip(y, 0.0, 1.0), result.restored, gt], axis=1
    )


def _write_csv(path: str, header: str, rows: list[str], manifest_hash: str) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# manifest_sha256={manifest_hash}\n")
        f.write(header + "\n")
        for row in rows:
            f.write(row + "\n")


def read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    """Read back a harness CSV; returns (header columns, rows)."""
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if not ln.startswith("#")]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def summarize(results: list[ItemResult]) -> dict[str, float]:
    psnrs = np.array([r.psnr_db for r in results])
    ssims = np.array([r.ssim for r in results])
    return {
        "psnr_mean": float(np.mean(psnrs)),
        "psnr_std": float(np.std(psnrs)),
        "ssim_mean": float(np.mean(ssims)),
        "ssim_std": float(np.std(ssims)),
    }


def run_experiment(cfg: ExperimentConfig, save_outputs: bool = True) -> dict:
    """Run the configured batch; returns the summary dict."""
    gallery = build_gallery(cfg)
    results = run_batch(cfg, gallery)
    summary = summarize(results)
    if save_outputs:
        out = cfg.output_dir
        os.makedirs(out, exist_ok=True)
        mh = cfg.manifest_hash()
        with open(os.path.join(out, "manifest.txt"), "w") as f:
            f.write(f"manifest_sha256={mh}\n{cfg.manifest()}\n")
        rows = []
        for r in results:
            save_image(os.path.join(out, f"item_{r.index}.png"), _montage(r))
            with open(os.path.join(out, f"trace_{r.index}.csv"), "w", newline="") as f:
                f.write(f"# manifest_sha256={mh}\n")
                f.write(r.trace.to_csv())
            rows.append(f"{r.index},{_fmt(r.psnr_db)},{_fmt(r.ssim)}")
        rows.append(f"mean,{_fmt(summary['psnr_mean'])},{_fmt(summary['ssim_mean'])}")
        rows.append(f"std,{_fmt(summary['psnr_std'])},{_fmt(summary['ssim_std'])}")
        _write_csv(os.path.join(out, "metrics.csv"), "image,psnr_db,ssim", rows, mh)
        # persist one operator sidecar per item so measurements are replayable
        for r in results:
            ss = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(r.index,))
            op_seed = ss.spawn(3)[0]
            save_operator(
                os.path.join(out, f"operator_{r.index}.npz"),
                build_operator(cfg, op_seed),
            )
    return summary


def apply_sweep_value(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    from dataclasses import replace

    if axis == "r0":
        return replace(cfg, guidance=replace(cfg.guidance, r0=int(value)))
    if axis == "rho_H":
        return replace(cfg, guidance=replace(cfg.guidance, c_h_late=float(value)))
    if axis == "rho_L":
        return replace(cfg, guidance=replace(cfg.guidance, c_l_late=float(value)))
    if axis == "upsample_factor":
        return replace(cfg, guidance=replace(cfg.guidance, upsample_factor=int(value)))
    if axis == "sr_factor":
        if cfg.task != "sr":
            raise ConfigError("sr_factor sweep is only valid for the sr task")
        return replace(cfg, degradation=replace(cfg.degradation, sr_factor=int(value)))
    if axis == "sigma":
        return replace(cfg, sigma=float(value))
    raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")


def run_sweep(cfg: ExperimentConfig, axis: str, values: list) -> list[dict]:
    """One experiment per value; writes sweep.csv, returns the row dicts."""
    rows = []
    for v in values:
        sub = apply_sweep_value(cfg, axis, v)
        summary = run_experiment(sub, save_outputs=False)
        rows.append({"axis": axis, "value": v, **summary})
    os.makedirs(cfg.output_dir, exist_ok=True)
    _write_csv(
        os.path.join(cfg.output_dir, "sweep.csv"),
        "axis,value,psnr_mean,psnr_std,ssim_mean,ssim_std",
        [
            f"{r['axis']},{r['value']},{_fmt(r['psnr_mean'])},{_fmt(r['psnr_std'])},"
            f"{_fmt(r['ssim_mean'])},{_fmt(r['ssim_std'])}"
            for r in rows
        ],
        cfg.manifest_hash(),
    )
    return rows
