"""Experiment configuration: YAML loading, validation, and task presets.

The eight presets (two training-distribution flavors x four restoration
tasks) carry the guidance hyperparameters verbatim; any field can be
overridden from the config file or the CLI. Unknown keys anywhere in the
config are hard errors.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import yaml

from .sampler import GuidanceConfig

TASKS = ("inpaint-random", "inpaint-box", "deblur-gauss", "sr")
PRESET_DATASETS = ("imagenet-preset", "ffhq-preset")


class ConfigError(ValueError):
    pass


# (dataset, task) -> guidance hyperparameters. "early" applies while
# t > tau * T, "late" afterwards; coefficients are the numerators of the
# rho = c / sqrt(L) weights.
PRESETS: dict[tuple[str, str], dict] = {
    ("imagenet-preset", "inpaint-random"): dict(
        r0=5, tau_fraction=0.7,
        c_h_early=0.0, c_l_early=0.0, c_s_early=0.25,
        c_h_late=0.125, c_l_late=0.025, c_s_late=0.35,
    ),
    ("imagenet-preset", "inpaint-box"): dict(
        r0=5, tau_fraction=0.5,
        c_h_early=0.125, c_l_early=0.125, c_s_early=0.125,
        c_h_late=0.625, c_l_late=0.125, c_s_late=0.125,
    ),
    ("imagenet-preset", "deblur-gauss"): dict(
        r0=4, tau_fraction=0.5,
        c_h_early=0.0125, c_l_early=0.025, c_s_early=0.075,
        c_h_late=0.3, c_l_late=0.15, c_s_late=0.225,
    ),
    ("imagenet-preset", "sr"): dict(
        r0=5, tau_fraction=0.7,
        c_h_early=0.25, c_l_early=0.25, c_s_early=0.025,
        c_h_late=1.25, c_l_late=0.25, c_s_late=0.0,
    ),
    ("ffhq-preset", "inpaint-random"): dict(
        r0=5, tau_fraction=0.7,
        c_h_early=0.2, c_l_early=0.2, c_s_early=0.075,
        c_h_late=0.8, c_l_late=0.2, c_s_late=0.15,
    ),
    ("ffhq-preset", "inpaint-box"): dict(
        r0=5, tau_fraction=0.5,
        c_h_early=0.125, c_l_early=0.125, c_s_early=0.05,
        c_h_late=0.75, c_l_late=0.375, c_s_late=0.1,
    ),
    ("ffhq-preset", "deblur-gauss"): dict(
        r0=5, tau_fraction=0.7,
        c_h_early=0.25, c_l_early=0.25, c_s_early=0.05,
        c_h_late=1.25, c_l_late=0.25, c_s_late=0.025,
    ),
    ("ffhq-preset", "sr"): dict(
        r0=2, tau_fraction=0.7,
        c_h_early=0.15, c_l_early=0.15, c_s_early=0.1,
        c_h_late=1.0, c_l_late=0.25, c_s_late=0.0,
        # SR on the face preset keeps psi_s an upsampler in the early phase
        early_spatial_upsample=True,
    ),
}

# bicubic upsampling factor used by psi_s across all presets
PRESET_UPSAMPLE_FACTOR = 4


@dataclass(frozen=True)
class DegradationParams:
    """Task parameters; None means "scale the preset value to the image size"."""

    mask_fraction: float = 0.92
    box_size: int | None = None  # default H // 2
    kernel_size: int | None = None  # default ~H/4 rounded down to odd
    kernel_sigma: float | None = None  # default 3.0 * H / 256
    sr_factor: int = 4

    def resolved(self, image_size: int) -> "DegradationParams":
        box = self.box_size if self.box_size is not None else image_size // 2
        ks = self.kernel_size
        if ks is None:
            ks = image_size // 4
            if ks % 2 == 0:
                ks -= 1
            ks = max(ks, 3)
        sig = self.kernel_sigma if self.kernel_sigma is not None else 3.0 * image_size / 256.0
        return replace(self, box_size=box, kernel_size=ks, kernel_sigma=sig)


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    dataset: str  # preset name or path to an image folder
    mode: str
    seed: int
    steps: int
    sigma: float
    output_dir: str
    image_size: int = 32
    channels: int = 1
    gallery_size: int = 16
    num_images: int = 4
    workers: int = 1
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    degradation: DegradationParams = field(default_factory=DegradationParams)
    beta_start: float | None = None  # None -> scaled from the T=1000 defaults
    beta_end: float | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.num_images < 1 or self.gallery_size < 1:
            raise ConfigError("num_images and gallery_size must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def schedule_betas(self) -> tuple[float, float]:
        """Linear beta range; scaled from the T=1000 convention when unset.

        Scaling by 1000/T preserves the total injected noise, so short
        desk-scale runs still start from (nearly) pure noise.
        """
        scale = 1000.0 / self.steps
        start = self.beta_start if self.beta_start is not None else min(1e-4 * scale, 0.05)
        end = self.beta_end if self.beta_end is not None else min(0.02 * scale, 0.5)
        return (start, max(start, end))

    def manifest(self) -> str:
        """Canonical JSON of every semantic field."""
        d = asdict(self)
        return json.dumps(d, sort_keys=True, default=str)

    def manifest_hash(self) -> str:
        return hashlib.sha256(self.manifest().encode()).hexdigest()[:16]


def preset_guidance(dataset: str, task: str, mode: str = "safari") -> GuidanceConfig:
    """GuidanceConfig populated from the preset tables."""
    key = (dataset, task)
    if key not in PRESETS:
        raise ConfigError(f"no preset for dataset={dataset!r}, task={task!r}")
    return GuidanceConfig(
        mode=mode, upsample_factor=PRESET_UPSAMPLE_FACTOR, **PRESETS[key]
    )


_EXPERIMENT_KEYS = {
    "task": str, "dataset": str, "mode": str, "seed": int, "steps": int,
    "sigma": float, "output_dir": str, "image_size": int, "channels": int,
    "gallery_size": int, "num_images": int, "workers": int,
}
_REQUIRED_EXPERIMENT_KEYS = ("task", "dataset", "mode", "seed", "steps",
                             "sigma", "output_dir")
_GUIDANCE_KEYS = {
    "r0": int, "tau_fraction": float, "upsample_factor": int,
    "c_s_early": float, "c_h_early": float, "c_l_early": float,
    "c_s_late": float, "c_h_late": float, "c_l_late": float,
    "gradient_mode": str, "dps_weight": float, "dps_weight_mode": str,
    "early_spatial_upsample": bool, "early_upsample_factor": int,
}
_DEGRADATION_KEYS = {
    "mask_fraction": float, "box_size": int, "kernel_size": int,
    "kernel_sigma": float, "sr_factor": int,
}
_SCHEDULE_KEYS = {"beta_start": float, "beta_end": float}
_SECTIONS = {
    "experiment": _EXPERIMENT_KEYS,
    "guidance": _GUIDANCE_KEYS,
    "degradation": _DEGRADATION_KEYS,
    "schedule": _SCHEDULE_KEYS,
}


def _coerce(section: str, key: str, value, expected: type):
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if expected is bool and not isinstance(value, bool):
        raise ConfigError(f"{section}.{key}: expected bool, got {value!r}")
    if not isinstance(value, expected) or isinstance(value, bool) and expected is not bool:
        raise ConfigError(
            f"{section}.{key}: expected {expected.__name__}, got {value!r}"
        )
    return value


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a nested config dict and build an ExperimentConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping of sections")
    unknown_sections = set(raw) - set(_SECTIONS)
    if unknown_sections:
        raise ConfigError(f"unknown config sections: {sorted(unknown_sections)}")

    parsed: dict[str, dict] = {}
    for section, schema in _SECTIONS.items():
        body = raw.get(section, {}) or {}
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        unknown = set(body) - set(schema)
        if unknown:
            raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
        parsed[section] = {
            k: _coerce(section, k, v, schema[k]) for k, v in body.items()
        }

    missing = [k for k in _REQUIRED_EXPERIMENT_KEYS if k not in parsed["experiment"]]
    if missing:
        raise ConfigError(f"missing required experiment keys: {missing}")

    exp = parsed["experiment"]
    dataset, task, mode = exp["dataset"], exp["task"], exp["mode"]
    if task not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}, got {task!r}")

    preset_ds = dataset if dataset in PRESET_DATASETS else "imagenet-preset"
    try:
        guidance = preset_guidance(preset_ds, task, mode=mode)
        if parsed["guidance"]:
            guidance = replace(guidance, **parsed["guidance"])
    except ValueError as e:
        raise ConfigError(str(e)) from e

    degradation = DegradationParams(**parsed["degradation"])
    try:
        return ExperimentConfig(
            guidance=guidance,
            degradation=degradation,
            beta_start=parsed["schedule"].get("beta_start"),
            beta_end=parsed["schedule"].get("beta_end"),
            **exp,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e


def load_config(path: str, overrides: list[str] | None = None) -> ExperimentConfig:
    """Parse a YAML config file, apply ``section.key=value`` overrides."""
    with open(path) as f:
        raw = yaml.safe_load(f)
    if raw is None:
        raw = {}
    for item in overrides or []:
        apply_override(raw, item)
    return config_from_dict(raw)


def apply_override(raw: dict, item: str) -> None:
    """Apply one dotted override like ``experiment.seed=3`` in place."""
    key, sep, value = item.partition("=")
    if not sep:
        raise ConfigError(f"override must look like section.key=value, got {item!r}")
    parts = key.strip().split(".")
    if len(parts) != 2:
        raise ConfigError(f"override key must be section.key, got {key!r}")
    section, name = parts
    raw.setdefault(section, {})
    raw[section][name] = yaml.safe_load(value)
