"""Numerical verification of the likelihood-approximation error bound.

With the empirical prior, the posterior over clean images given x_t is a
discrete distribution over the K gallery points, so the conditional
likelihood integral collapses to a finite sum and both sides of the bound

    |p_t(y|x_t) - p(y|x0_hat)| <= e^{-1/2} / gamma * L_psi * ||A|| * m_1

can be evaluated exactly. Everything is kept in unnormalized form: the
normalizing constant of the Gaussian-shaped likelihood appears on both
sides of the bound and cancels, so it is never instantiated.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .degradations import LinearDegradation, operator_norm
from .schedule import DiffusionSchedule
from .scores import EmpiricalPrior, posterior_weights
from .transforms import FidelityTransform


class BoundViolationError(AssertionError):
    """The verified instance broke the theoretical bound."""


@dataclass(frozen=True)
class BoundReport:
    lhs: float  # |exact - approx|, unnormalized likelihoods
    rhs: float  # e^{-1/2}/gamma * L_psi * ||A|| * m1
    gamma: float
    lipschitz_psi: float
    operator_norm_a: float
    m1: float  # first absolute posterior moment around x0_hat

    CSV_HEADER = "lhs,rhs,gamma,L_psi,A_norm,m1"

    def csv_row(self) -> str:
        return (
            f"{self.lhs:.17g},{self.rhs:.17g},{self.gamma:.17g},"
            f"{self.lipschitz_psi:.17g},{self.operator_norm_a:.17g},{self.m1:.17g}"
        )


def _loss(y: np.ndarray, ax: np.ndarray, psi: FidelityTransform, gamma: float) -> float:
    d = psi.apply(y) - psi.apply(ax)
    return float(np.sum(d**2) / (2.0 * gamma**2))


def approx_conditional_likelihood(
    y: np.ndarray,
    x_hat: np.ndarray,
    A: LinearDegradation,
    psi: FidelityTransform,
    gamma: float,
) -> float:
    """Unnormalized exp(-||psi(y) - psi(A x_hat)||^2 / (2 gamma^2))."""
    return float(np.exp(-_loss(y, A.apply(x_hat), psi, gamma)))


def exact_conditional_likelihood(
    y: np.ndarray,
    x_t: np.ndarray,
    t: int,
    A: LinearDegradation,
    psi: FidelityTransform,
    gamma: float,
    prior: EmpiricalPrior,
    sched: DiffusionSchedule,
) -> float:
    """Unnormalized sum_k w_k(x_t) exp(-||psi(y) - psi(A x0_k)||^2/(2 gamma^2))."""
    w = posterior_weights(prior, x_t, t, sched)
    total = 0.0
    for k in range(prior.K):
        total += w[k] * np.exp(-_loss(y, A.apply(prior.gallery[k]), psi, gamma))
    return float(total)


def lipschitz_constant(psi: FidelityTransform, iters: int = 200, seed: int = 0) -> float:
    """Spectral norm of a linear transform (equals its Lipschitz constant)."""
    return operator_norm(psi, iters=iters, seed=seed)


def verify_bound(
    y: np.ndarray,
    x_t: np.ndarray,
    t: int,
    A: LinearDegradation,
    psi: FidelityTransform,
    gamma: float,
    prior: EmpiricalPrior,
    sched: DiffusionSchedule,
    slack: float = 1e-12,
    l_psi: float | None = None,
    a_norm: float | None = None,
) -> BoundReport:
    """Check lhs <= rhs on one instance; raises BoundViolationError if broken.

    ``l_psi`` / ``a_norm`` may be supplied to reuse spectral norms across
    instances sharing the same operators.
    """
    w = posterior_weights(prior, x_t, t, sched)
    x0_hat = np.tensordot(w, prior.gallery, axes=(0, 0))
    exact = exact_conditional_likelihood(y, x_t, t, A, psi, gamma, prior, sched)
    approx = approx_conditional_likelihood(y, x0_hat, A, psi, gamma)
    flat = (prior.gallery - x0_hat[None]).reshape(prior.K, -1)
    m1 = float(w @ np.linalg.norm(flat, axis=1))
    if l_psi is None:
        l_psi = lipschitz_constant(psi)
    if a_norm is None:
        a_norm = operator_norm(A)
    rhs = float(np.exp(-0.5) / gamma * l_psi * a_norm * m1)
    report = BoundReport(
        lhs=abs(exact - approx),
        rhs=rhs,
        gamma=gamma,
        lipschitz_psi=l_psi,
        operator_norm_a=a_norm,
        m1=m1,
    )
    if report.lhs > report.rhs + slack:
        raise BoundViolationError(f"bound violated: {report}")
    return report


def reports_to_csv(reports: list[BoundReport]) -> str:
    buf = io.StringIO()
    buf.write(BoundReport.CSV_HEADER + "\n")
    for r in reports:
        buf.write(r.csv_row() + "\n")
    return buf.getvalue()


def run_randomized_verification(
    n_instances: int = 200,
    seed: int = 0,
    size: int = 8,
    gammas: tuple[float, ...] = (0.1, 1.0, 10.0),
) -> list[BoundReport]:
    """Randomized bound checks over all transform and operator kinds.

    Each instance draws a random gallery, timestep, measurement and x_t,
    cycles through the (psi, A, gamma) grid, and verifies the bound. Raises
    BoundViolationError on the first broken instance.
    """
    from .core import rng_from_seed
    from .degradations import (
        make_bicubic_downsample,
        make_box_mask,
        make_gaussian_blur,
        make_random_mask,
        IdentityOperator,
    )
    from .schedule import forward_sample, make_linear_schedule
    from .transforms import make_transform

    rng = rng_from_seed(seed)
    sched = make_linear_schedule(100, 1e-3, 0.2)
    shape = (size, size, 1)
    operators = [
        IdentityOperator(in_shape=shape),
        make_random_mask(shape, 0.5, seed + 1),
        make_box_mask(shape, size // 2, seed + 2),
        make_gaussian_blur(shape, 5, 1.0),
        make_bicubic_downsample(shape, 2),
    ]
    psi_specs = [
        ("identity", {}),
        ("bicubic-upsample", {"factor": 2}),
        ("highpass", {"r0": 2}),
        ("lowpass", {"r0": 2}),
    ]
    a_norms = {id(A): operator_norm(A) for A in operators}
    psi_norms: dict[tuple, float] = {}
    reports: list[BoundReport] = []
    i = 0
    while len(reports) < n_instances:
        k = int(rng.choice([2, 4, 8]))
        gallery = rng.uniform(0.0, 1.0, size=(k, *shape))
        prior = EmpiricalPrior(gallery)
        t = int(rng.integers(1, sched.T + 1))
        x_t = forward_sample(gallery[0], t, sched, rng)
        A = operators[i % len(operators)]
        kind, kw = psi_specs[(i // len(operators)) % len(psi_specs)]
        gamma = gammas[i % len(gammas)]
        psi = make_transform(kind, A.out_shape, **kw)
        psi_key = (kind, A.out_shape, tuple(sorted(kw.items())))
        if psi_key not in psi_norms:
            psi_norms[psi_key] = lipschitz_constant(psi)
        y = A.apply(gallery[int(rng.integers(k))]) + 0.025 * rng.standard_normal(
            A.out_shape
        )
        reports.append(
            verify_bound(
                y, x_t, t, A, psi, gamma, prior, sched,
                l_psi=psi_norms[psi_key], a_norm=a_norms[id(A)],
            )
        )
        i += 1
    return reports
