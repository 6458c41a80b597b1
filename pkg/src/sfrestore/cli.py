"""Command line entry point.

Subcommands:
    run            one batch experiment from a config file
    sweep          repeat an experiment along one hyperparameter axis
    verify-theory  randomized likelihood-bound verification, CSV report
    selftest       quick invariant checks of the numerical core

Exit codes: 0 success, 1 run failure, 2 config error.
"""

from __future__ import annotations

import os
import sys

import click
import numpy as np

from . import theory
from .config import ConfigError, load_config
from .harness import SWEEP_AXES, run_experiment, run_sweep
from .sampler import SamplingDivergedError

EXIT_RUN_FAILURE = 1
EXIT_CONFIG_ERROR = 2


def _load(config_path, seed, out, overrides):
    items = list(overrides)
    if seed is not None:
        items.append(f"experiment.seed={seed}")
    if out is not None:
        items.append(f"experiment.output_dir={out}")
    try:
        return load_config(config_path, items)
    except (ConfigError, OSError, ValueError) as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)


def _common_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(exists=True, dir_okay=False))(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="override experiment.seed")(fn)
    fn = click.option("--out", type=str, default=None,
                      help="override experiment.output_dir")(fn)
    fn = click.option("--override", "overrides", multiple=True,
                      help="section.key=value, repeatable")(fn)
    return fn


@click.group()
def main():
    """Guided diffusion restoration for linear inverse problems."""


@main.command("run")
@_common_options
def cmd_run(config_path, seed, out, overrides):
    cfg = _load(config_path, seed, out, overrides)
    try:
        summary = run_experiment(cfg)
    except SamplingDivergedError as e:
        click.echo(f"run failed: {e}", err=True)
        sys.exit(EXIT_RUN_FAILURE)
    click.echo(
        f"psnr {summary['psnr_mean']:.3f} +/- {summary['psnr_std']:.3f} dB, "
        f"ssim {summary['ssim_mean']:.4f} +/- {summary['ssim_std']:.4f}"
    )
    click.echo(f"outputs in {cfg.output_dir}")


@main.command("sweep")
@_common_options
@click.option("--axis", required=True, type=click.Choice(SWEEP_AXES))
@click.option("--values", required=True,
              help="comma-separated values, e.g. 1,2,3,4,5")
def cmd_sweep(config_path, seed, out, overrides, axis, values):
    cfg = _load(config_path, seed, out, overrides)
    try:
        vals = [float(v) if "." in v or "e" in v.lower() else int(v)
                for v in values.split(",")]
    except ValueError:
        click.echo(f"could not parse sweep values {values!r}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    try:
        rows = run_sweep(cfg, axis, vals)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    except SamplingDivergedError as e:
        click.echo(f"run failed: {e}", err=True)
        sys.exit(EXIT_RUN_FAILURE)
    for r in rows:
        click.echo(
            f"{axis}={r['value']}: psnr {r['psnr_mean']:.3f} dB, "
            f"ssim {r['ssim_mean']:.4f}"
        )
    click.echo(f"sweep.csv in {cfg.output_dir}")


@main.command("verify-theory")
@click.option("--instances", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=str, default=None,
              help="directory for the bound-report CSV")
def cmd_verify_theory(instances, seed, out):
    try:
        reports = theory.run_randomized_verification(instances, seed=seed)
    except theory.BoundViolationError as e:
        click.echo(f"BOUND VIOLATION: {e}", err=True)
        sys.exit(EXIT_RUN_FAILURE)
    margin = min(r.rhs - r.lhs for r in reports)
    click.echo(f"{len(reports)} instances verified, min slack {margin:.3e}")
    if out is not None:
        os.makedirs(out, exist_ok=True)
        path = os.path.join(out, "bound_reports.csv")
        with open(path, "w", newline="") as f:
            f.write(theory.reports_to_csv(reports))
        click.echo(f"report written to {path}")


@main.command("selftest")
def cmd_selftest():
    """Fast numerical invariant checks; prints one line per check."""
    from .core import fft2, ifft2, rng_from_seed
    from .transforms import ideal_highpass, ideal_lowpass

    rng = rng_from_seed(0)
    failures = 0

    def check(name, ok):
        nonlocal failures
        click.echo(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    x = rng.random((16, 16, 3))
    check("fft round-trip", np.max(np.abs(ifft2(fft2(x)) - x)) < 1e-10)
    check(
        "parseval",
        abs(np.sum(np.abs(fft2(x)) ** 2) - 256 * np.sum(x**2))
        < 1e-6 * np.sum(x**2) * 256,
    )
    hp = ideal_highpass(x, 4)
    lp = ideal_lowpass(x, 4)
    check("filter partition", np.max(np.abs(hp + lp - x)) < 1e-10)
    check(
        "norm decomposition",
        abs(np.sum(hp**2) + np.sum(lp**2) - np.sum((x) ** 2)) < 1e-8,
    )
    try:
        theory.run_randomized_verification(20, seed=0)
        check("likelihood bound (20 instances)", True)
    except theory.BoundViolationError:
        check("likelihood bound (20 instances)", False)
    if failures:
        click.echo(f"{failures} check(s) failed", err=True)
        sys.exit(EXIT_RUN_FAILURE)
    click.echo("all checks passed")


if __name__ == "__main__":
    main()
