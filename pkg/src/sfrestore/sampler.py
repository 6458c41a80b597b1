"""Guided ancestral sampling with spatial- and frequency-domain fidelity.

One reverse step: denoise x_t to x0_hat, take the unconditional ancestral
step, then subtract the weighted gradients of the three fidelity losses

    L_s = ||psi_s(y) - psi_s(A x0_hat)||^2        (spatial)
    L_H = ||psi_H(y) - psi_H(A x0_hat)||^2        (high-frequency)
    L_L = ||psi_L(y) - psi_L(A x0_hat)||^2        (low-frequency)

with per-term weights rho_X = c_X / sqrt(L_X + eps). The coefficient c_X
switches between an early set (t > tau * T) and a late set, and psi_s is the
identity during the early phase (bicubic upsampling afterwards).

Modes: "safari" runs all three terms, "spatial-only" / "freq-only" zero the
complementary coefficients, "dps" guides on the plain residual through the
identity transform with a single weight, and "unconditional" applies no
guidance at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .core import rng_from_seed
from .degradations import LinearDegradation
from .schedule import DiffusionSchedule, ancestral_step
from .scores import ScoreModel
from .transforms import FidelityTransform, fidelity_losses, make_transform

LOSS_NORM_EPS = 1e-12

MODES = ("safari", "spatial-only", "freq-only", "dps", "unconditional")
GRADIENT_MODES = ("exact-vjp", "frozen-denoiser")
DPS_WEIGHT_MODES = ("residual-normalized", "constant")


class SamplingDivergedError(RuntimeError):
    """Raised when a loss or state goes non-finite; carries the trace so far."""

    def __init__(self, message: str, trace: "RunTrace | None" = None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class GuidanceConfig:
    mode: str = "safari"
    r0: int = 5
    upsample_factor: int = 4
    tau_fraction: float = 0.7
    c_s_early: float = 0.0
    c_h_early: float = 0.0
    c_l_early: float = 0.0
    c_s_late: float = 0.0
    c_h_late: float = 0.0
    c_l_late: float = 0.0
    gradient_mode: str = "exact-vjp"
    dps_weight: float = 0.25
    dps_weight_mode: str = "residual-normalized"
    # keep psi_s an upsampler during the early phase too (used for SR on the
    # face-prior preset); factor defaults to upsample_factor when None
    early_spatial_upsample: bool = False
    early_upsample_factor: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.gradient_mode not in GRADIENT_MODES:
            raise ValueError(f"gradient_mode must be one of {GRADIENT_MODES}")
        if self.dps_weight_mode not in DPS_WEIGHT_MODES:
            raise ValueError(f"dps_weight_mode must be one of {DPS_WEIGHT_MODES}")
        if not 0.0 <= self.tau_fraction <= 1.0:
            raise ValueError(f"tau_fraction must be in [0, 1], got {self.tau_fraction}")
        if self.r0 < 0:
            raise ValueError(f"r0 must be >= 0, got {self.r0}")
        if self.upsample_factor < 1:
            raise ValueError(f"upsample_factor must be >= 1, got {self.upsample_factor}")
        for name in ("c_s_early", "c_h_early", "c_l_early",
                     "c_s_late", "c_h_late", "c_l_late", "dps_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class StepRecord:
    t: int
    loss_s: float
    loss_h: float
    loss_l: float
    residual_sq: float
    rho_s: float
    rho_h: float
    rho_l: float


@dataclass
class RunTrace:
    records: list[StepRecord] = field(default_factory=list)
    final_image: np.ndarray | None = None

    CSV_HEADER = "t,L_s,L_H,L_L,residual_sq,rho_s,rho_H,rho_L"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.records:
            lines.append(
                f"{r.t},{r.loss_s:.17g},{r.loss_h:.17g},{r.loss_l:.17g},"
                f"{r.residual_sq:.17g},{r.rho_s:.17g},{r.rho_h:.17g},{r.rho_l:.17g}"
            )
        return "\n".join(lines) + "\n"


@lru_cache(maxsize=128)
def _cached_transform(kind: str, in_shape, factor: int, r0: int) -> FidelityTransform:
    return make_transform(kind, in_shape, factor=factor, r0=r0)


def is_early_phase(cfg: GuidanceConfig, t: int, T: int) -> bool:
    return t > cfg.tau_fraction * T


def spatial_transform_for_step(
    cfg: GuidanceConfig, t: int, T: int, meas_shape
) -> FidelityTransform:
    """psi_s for step t: identity during the early phase, upsample after."""
    meas_shape = tuple(meas_shape)
    if cfg.mode in ("dps", "unconditional"):
        return _cached_transform("identity", meas_shape, 1, 0)
    if is_early_phase(cfg, t, T):
        if cfg.early_spatial_upsample:
            factor = cfg.early_upsample_factor or cfg.upsample_factor
            return _cached_transform("bicubic-upsample", meas_shape, factor, 0)
        return _cached_transform("identity", meas_shape, 1, 0)
    return _cached_transform("bicubic-upsample", meas_shape, cfg.upsample_factor, 0)


def effective_weights(
    cfg: GuidanceConfig, t: int, T: int, losses: tuple[float, float, float]
) -> tuple[float, float, float]:
    """(rho_s, rho_H, rho_L) for step t given the current loss values."""
    loss_s, loss_h, loss_l = losses
    if min(losses) < 0:
        raise ValueError("losses must be nonnegative")
    if cfg.mode == "unconditional":
        return (0.0, 0.0, 0.0)
    if cfg.mode == "dps":
        if cfg.dps_weight_mode == "constant":
            return (cfg.dps_weight, 0.0, 0.0)
        return (cfg.dps_weight / np.sqrt(loss_s + LOSS_NORM_EPS), 0.0, 0.0)
    if is_early_phase(cfg, t, T):
        c_s, c_h, c_l = cfg.c_s_early, cfg.c_h_early, cfg.c_l_early
    else:
        c_s, c_h, c_l = cfg.c_s_late, cfg.c_h_late, cfg.c_l_late
    if cfg.mode == "spatial-only":
        c_h = c_l = 0.0
    elif cfg.mode == "freq-only":
        c_s = 0.0
    return (
        c_s / np.sqrt(loss_s + LOSS_NORM_EPS),
        c_h / np.sqrt(loss_h + LOSS_NORM_EPS),
        c_l / np.sqrt(loss_l + LOSS_NORM_EPS),
    )


def _chain_to_xt(
    grad_xhat: np.ndarray,
    x_t: np.ndarray,
    t: int,
    score: ScoreModel,
    sched: DiffusionSchedule,
    gradient_mode: str,
) -> np.ndarray:
    """Pull a gradient w.r.t. x0_hat back to x_t through the denoiser."""
    if gradient_mode == "exact-vjp":
        return score.denoise_vjp(x_t, t, grad_xhat)
    # frozen denoiser: only the explicit 1/sqrt(ab) factor of the Tweedie
    # affine map is differentiated
    return grad_xhat / np.sqrt(sched.alpha_bar_t(t))


def fidelity_loss_gradient(
    x_t: np.ndarray,
    t: int,
    y: np.ndarray,
    A: LinearDegradation,
    score: ScoreModel,
    transform: FidelityTransform,
    sched: DiffusionSchedule,
    gradient_mode: str = "exact-vjp",
) -> np.ndarray:
    """grad_{x_t} ||psi(y) - psi(A denoise(x_t))||^2 for a single transform."""
    x0_hat = score.denoise(x_t, t)
    Ax = A.apply(x0_hat)
    g_meas = transform.adjoint(2.0 * (transform.apply(Ax) - transform.apply(y)))
    return _chain_to_xt(A.adjoint(g_meas), x_t, t, score, sched, gradient_mode)


def guided_step(
    x_t: np.ndarray,
    t: int,
    y: np.ndarray,
    A: LinearDegradation,
    score: ScoreModel,
    cfg: GuidanceConfig,
    sched: DiffusionSchedule,
    rng: np.random.Generator,
) -> tuple[np.ndarray, StepRecord]:
    """One guided reverse step; returns (x_{t-1}, trace record)."""
    psi_s = spatial_transform_for_step(cfg, t, sched.T, y.shape)
    x0_hat = score.denoise(x_t, t)
    Ax = A.apply(x0_hat)
    losses = fidelity_losses(y, Ax, psi_s, cfg.r0)
    residual_sq = float(np.sum((y - Ax) ** 2))
    x_prev = ancestral_step(x_t, x0_hat, t, sched, rng)

    rho_s, rho_h, rho_l = effective_weights(cfg, t, sched.T, losses)
    g_meas = np.zeros_like(y)
    if rho_s != 0.0:
        g_meas += rho_s * psi_s.adjoint(2.0 * (psi_s.apply(Ax) - psi_s.apply(y)))
    if rho_h != 0.0:
        psi_h = _cached_transform("highpass", y.shape, 1, cfg.r0)
        g_meas += rho_h * psi_h.apply(2.0 * (Ax - y))  # self-adjoint projection
    if rho_l != 0.0:
        psi_l = _cached_transform("lowpass", y.shape, 1, cfg.r0)
        g_meas += rho_l * psi_l.apply(2.0 * (Ax - y))
    if rho_s != 0.0 or rho_h != 0.0 or rho_l != 0.0:
        x_prev = x_prev - _chain_to_xt(
            A.adjoint(g_meas), x_t, t, score, sched, cfg.gradient_mode
        )

    record = StepRecord(
        t=t,
        loss_s=losses[0],
        loss_h=losses[1],
        loss_l=losses[2],
        residual_sq=residual_sq,
        rho_s=float(rho_s),
        rho_h=float(rho_h),
        rho_l=float(rho_l),
    )
    if not (np.all(np.isfinite(x_prev)) and all(np.isfinite(v) for v in losses)):
        raise SamplingDivergedError(f"non-finite state or loss at t={t}")
    return x_prev, record


def run(
    y: np.ndarray,
    A: LinearDegradation,
    score: ScoreModel,
    cfg: GuidanceConfig,
    sched: DiffusionSchedule,
    seed,
) -> tuple[np.ndarray, RunTrace]:
    """Full reverse trajectory from x_T ~ N(0, I); deterministic under seed."""
    rng = rng_from_seed(seed)
    x = rng.standard_normal(A.in_shape)
    trace = RunTrace()
    for t in range(sched.T, 0, -1):
        try:
            x, record = guided_step(x, t, y, A, score, cfg, sched, rng)
        except SamplingDivergedError as e:
            e.trace = trace
            raise
        trace.records.append(record)
    trace.final_image = x
    return x, trace


def reduced_config(cfg: GuidanceConfig) -> GuidanceConfig:
    """The safari config whose trajectory a restricted mode must reproduce."""
    if cfg.mode == "spatial-only":
        return replace(cfg, mode="safari", c_h_early=0.0, c_l_early=0.0,
                       c_h_late=0.0, c_l_late=0.0)
    if cfg.mode == "freq-only":
        return replace(cfg, mode="safari", c_s_early=0.0, c_s_late=0.0)
    raise ValueError(f"no safari reduction for mode {cfg.mode!r}")
