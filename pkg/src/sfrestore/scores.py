"""Score model backends.

The shipped backend is an empirical prior: a finite gallery of clean images
with uniform weights. Under the variance-preserving forward kernel the
marginal at step t is then an exact K-component isotropic Gaussian mixture,
so the score, the posterior-mean denoiser and the denoiser's Jacobian all
have closed forms; every downstream approximation can be checked against
them exactly.

A file-exchange adapter (`SubprocessScoreModel`) lets an external process
supply scores over a newline-delimited stdin/stdout protocol, for plugging
in a pretrained network without linking any ML runtime.
"""

from __future__ import annotations

import subprocess
import threading
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .core import floats_to_hex, hex_to_floats
from .schedule import DiffusionSchedule, tweedie_mean


@runtime_checkable
class ScoreModel(Protocol):
    """Pluggable contract consumed by the guidance sampler."""

    def score(self, x_t: np.ndarray, t: int) -> np.ndarray: ...

    def denoise(self, x_t: np.ndarray, t: int) -> np.ndarray: ...

    def denoise_vjp(self, x_t: np.ndarray, t: int, v: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class EmpiricalPrior:
    """Uniform mixture of K point masses at clean gallery images."""

    gallery: np.ndarray  # (K, H, W, C)

    def __post_init__(self):
        g = np.asarray(self.gallery, dtype=np.float64)
        if g.ndim != 4 or g.shape[0] < 1:
            raise ValueError(f"gallery must have shape (K, H, W, C), got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError("gallery contains non-finite entries")
        if g.min() < 0.0 or g.max() > 1.0:
            raise ValueError("gallery images must lie in [0, 1]")
        g.setflags(write=False)
        object.__setattr__(self, "gallery", g)

    @property
    def K(self) -> int:
        return self.gallery.shape[0]

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return self.gallery.shape[1:]


def posterior_weights(
    prior: EmpiricalPrior, x_t: np.ndarray, t: int, sched: DiffusionSchedule
) -> np.ndarray:
    """Exact posterior over gallery components given x_t; sums to 1."""
    sched.check_t(t)
    ab = sched.alpha_bar_t(t)
    x_t = np.asarray(x_t, dtype=np.float64)
    diff = x_t[None] - np.sqrt(ab) * prior.gallery
    logits = -np.sum(diff.reshape(prior.K, -1) ** 2, axis=1) / (2.0 * (1.0 - ab))
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def empirical_denoise(
    prior: EmpiricalPrior, x_t: np.ndarray, t: int, sched: DiffusionSchedule
) -> np.ndarray:
    """Posterior mean over the gallery: sum_k w_k x0_k."""
    w = posterior_weights(prior, x_t, t, sched)
    return np.tensordot(w, prior.gallery, axes=(0, 0))


def empirical_score(
    prior: EmpiricalPrior, x_t: np.ndarray, t: int, sched: DiffusionSchedule
) -> np.ndarray:
    """Exact mixture score: (sqrt(ab) sum_k w_k x0_k - x_t) / (1 - ab)."""
    ab = sched.alpha_bar_t(t)
    x0_hat = empirical_denoise(prior, x_t, t, sched)
    return (np.sqrt(ab) * x0_hat - np.asarray(x_t, dtype=np.float64)) / (1.0 - ab)


def empirical_denoise_vjp(
    prior: EmpiricalPrior,
    x_t: np.ndarray,
    t: int,
    v: np.ndarray,
    sched: DiffusionSchedule,
) -> np.ndarray:
    """J^T v for J = d(denoise)/d(x_t), as a K-term sum of rank-1 actions.

    J = sqrt(ab)/(1-ab) * (sum_k w_k x0_k x0_k^T - x0_hat x0_hat^T) is the
    posterior covariance of the gallery scaled by sqrt(ab)/(1-ab); it is
    symmetric PSD, so J^T v = J v.
    """
    ab = sched.alpha_bar_t(t)
    v = np.asarray(v, dtype=np.float64)
    w = posterior_weights(prior, x_t, t, sched)
    flat = prior.gallery.reshape(prior.K, -1)
    dots = flat @ v.ravel()  # <x0_k, v>
    x0_hat_flat = w @ flat
    jv = (w * dots) @ flat - (x0_hat_flat @ v.ravel()) * x0_hat_flat
    return (np.sqrt(ab) / (1.0 - ab)) * jv.reshape(v.shape)


@dataclass(frozen=True)
class EmpiricalScoreModel:
    """ScoreModel backend with closed-form score/denoise/VJP."""

    prior: EmpiricalPrior
    sched: DiffusionSchedule

    def score(self, x_t, t):
        return empirical_score(self.prior, x_t, t, self.sched)

    def denoise(self, x_t, t):
        return empirical_denoise(self.prior, x_t, t, self.sched)

    def denoise_vjp(self, x_t, t, v):
        return empirical_denoise_vjp(self.prior, x_t, t, v, self.sched)


class ScoreServerError(RuntimeError):
    """Protocol violation or timeout talking to an external score process."""


class SubprocessScoreModel:
    """Score backend served by a child process over stdin/stdout.

    Protocol (one request and one response per line):
        request:   SCORE <t> <H> <W> <C> <hex>
        response:  OK <hex>            on success
                   ERR <message>       on failure
    where <hex> is the row-major float64 array as big-endian base-16 text.

    The denoiser is derived from the score via the posterior-mean identity;
    no Jacobian is available, so this backend requires the sampler's
    frozen-denoiser gradient mode.
    """

    def __init__(self, command: list[str], sched: DiffusionSchedule, timeout: float = 30.0):
        self.sched = sched
        self.timeout = timeout
        self._lock = threading.Lock()
        self._proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.terminate()
            self._proc.wait(timeout=5.0)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _read_line(self) -> str:
        result: list[str] = []

        def reader():
            result.append(self._proc.stdout.readline())

        th = threading.Thread(target=reader, daemon=True)
        th.start()
        th.join(self.timeout)
        if th.is_alive() or not result or not result[0]:
            self.close()
            raise ScoreServerError("score server timed out or closed its stream")
        return result[0].rstrip("\n")

    def score(self, x_t: np.ndarray, t: int) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=np.float64)
        h, w, c = x_t.shape
        with self._lock:
            if self._proc.poll() is not None:
                raise ScoreServerError("score server process has exited")
            self._proc.stdin.write(f"SCORE {t} {h} {w} {c} {floats_to_hex(x_t)}\n")
            self._proc.stdin.flush()
            line = self._read_line()
        tag, _, payload = line.partition(" ")
        if tag == "ERR":
            raise ScoreServerError(f"score server error: {payload}")
        if tag != "OK":
            raise ScoreServerError(f"malformed score server response: {line[:80]!r}")
        try:
            return hex_to_floats(payload, x_t.shape)
        except ValueError as e:
            raise ScoreServerError(f"malformed score payload: {e}") from e

    def denoise(self, x_t: np.ndarray, t: int) -> np.ndarray:
        return tweedie_mean(x_t, t, self.score(x_t, t), self.sched)

    def denoise_vjp(self, x_t, t, v):
        raise ScoreServerError(
            "external score servers expose no Jacobian; "
            "use gradient_mode='frozen-denoiser'"
        )
