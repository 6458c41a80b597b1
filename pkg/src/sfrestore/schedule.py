"""Discrete variance-preserving diffusion schedule and reverse-step kernels.

Integer steps t = 1..T index the noise tables; alpha_bar[0] = 1 by
convention so t = 0 denotes the clean data. The ancestral reverse update is

    x_{t-1} = sqrt(a_t) (1 - ab_{t-1}) / (1 - ab_t) * x_t
            + sqrt(ab_{t-1}) b_t / (1 - ab_t)       * x0_hat
            + sigma_tilde_t * z

with sigma_tilde_t^2 = b_t (1 - ab_{t-1}) / (1 - ab_t) and z = 0 at t = 1.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .core import rng_from_seed


@dataclass(frozen=True)
class DiffusionSchedule:
    """Noise tables; index with t in 1..T (alpha_bar also accepts 0)."""

    T: int
    beta: np.ndarray  # shape (T,), beta[t-1] = beta_t
    alpha: np.ndarray  # shape (T,)
    alpha_bar: np.ndarray  # shape (T+1,), alpha_bar[0] = 1
    sigma_tilde: np.ndarray  # shape (T,)

    def check_t(self, t: int, allow_zero: bool = False) -> int:
        lo = 0 if allow_zero else 1
        if not lo <= t <= self.T:
            raise ValueError(f"t must be in [{lo}, {self.T}], got {t}")
        return t

    def beta_t(self, t: int) -> float:
        return float(self.beta[self.check_t(t) - 1])

    def alpha_t(self, t: int) -> float:
        return float(self.alpha[self.check_t(t) - 1])

    def alpha_bar_t(self, t: int) -> float:
        return float(self.alpha_bar[self.check_t(t, allow_zero=True)])

    def sigma_tilde_t(self, t: int) -> float:
        return float(self.sigma_tilde[self.check_t(t) - 1])

    def dump_table(self) -> str:
        """Plain-text audit table: t, beta, alpha_bar, sigma_tilde."""
        buf = io.StringIO()
        buf.write("t\tbeta\talpha_bar\tsigma_tilde\n")
        for t in range(1, self.T + 1):
            buf.write(
                f"{t}\t{self.beta[t - 1]:.12e}\t{self.alpha_bar[t]:.12e}"
                f"\t{self.sigma_tilde[t - 1]:.12e}\n"
            )
        return buf.getvalue()


def make_linear_schedule(
    T: int, beta_start: float = 1e-4, beta_end: float = 0.02
) -> DiffusionSchedule:
    """Linear beta schedule; tables reproducible bit-exactly from the args."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ValueError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    beta = np.linspace(beta_start, beta_end, T)
    alpha = 1.0 - beta
    alpha_bar = np.concatenate([[1.0], np.cumprod(alpha)])
    # posterior std of the reverse kernel; zero at t=1 since alpha_bar_0 = 1
    sigma_tilde = np.sqrt(beta * (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:]))
    for arr in (beta, alpha, alpha_bar, sigma_tilde):
        arr.setflags(write=False)
    return DiffusionSchedule(
        T=T, beta=beta, alpha=alpha, alpha_bar=alpha_bar, sigma_tilde=sigma_tilde
    )


def forward_sample(
    x0: np.ndarray, t: int, sched: DiffusionSchedule, rng: np.random.Generator | int
) -> np.ndarray:
    """x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) z."""
    sched.check_t(t, allow_zero=True)
    ab = sched.alpha_bar_t(t)
    x0 = np.asarray(x0, dtype=np.float64)
    if t == 0:
        return x0.copy()
    if not isinstance(rng, np.random.Generator):
        rng = rng_from_seed(rng)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * rng.standard_normal(x0.shape)


def tweedie_mean(
    x_t: np.ndarray, t: int, score: np.ndarray, sched: DiffusionSchedule
) -> np.ndarray:
    """Posterior-mean denoiser: (x_t + (1 - ab_t) * score) / sqrt(ab_t)."""
    sched.check_t(t, allow_zero=True)
    ab = sched.alpha_bar_t(t)
    x_t = np.asarray(x_t, dtype=np.float64)
    score = np.asarray(score, dtype=np.float64)
    return (x_t + (1.0 - ab) * score) / np.sqrt(ab)


def ancestral_step(
    x_t: np.ndarray,
    x0_hat: np.ndarray,
    t: int,
    sched: DiffusionSchedule,
    rng: np.random.Generator | int,
) -> np.ndarray:
    """One reverse DDPM step; the noise draw is suppressed at t = 1."""
    sched.check_t(t)
    a_t = sched.alpha_t(t)
    ab_t = sched.alpha_bar_t(t)
    ab_prev = sched.alpha_bar_t(t - 1)
    beta_t = sched.beta_t(t)
    coef_xt = np.sqrt(a_t) * (1.0 - ab_prev) / (1.0 - ab_t)
    coef_x0 = np.sqrt(ab_prev) * beta_t / (1.0 - ab_t)
    x_t = np.asarray(x_t, dtype=np.float64)
    x0_hat = np.asarray(x0_hat, dtype=np.float64)
    out = coef_xt * x_t + coef_x0 * x0_hat
    if t > 1:
        if not isinstance(rng, np.random.Generator):
            rng = rng_from_seed(rng)
        out = out + sched.sigma_tilde_t(t) * rng.standard_normal(x_t.shape)
    return out
