"""Perturbation-based bandit-to-OLO reduction.

One round: the OLO learner proposes w_t; an axis direction and sign are
sampled uniformly over the 2d outcomes; the played point is
w~ = w + lambda^{-1/2} * sign * e_axis with the isotropic eigenvalue
lambda = 1/(d * max(||w||^2, eps_floor^2)); the environment returns only the
scalar <l, w~>; the loss estimate l~ = d * sqrt(lambda) * sign * observed *
e_axis is unbiased for l and is fed back to the learner.

``enumerate_estimates`` is the exact oracle over the finite sample space:
it lists all 2d (estimate, probability) pairs, supporting either the
isotropic eigenvalue or an explicit per-axis eigenvalue list (diagonal
perturbation matrix in the standard basis).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import Learner, NonFiniteValue, PabloError, RngStream, as_vector

__all__ = [
    "PerturbationConfig",
    "PerturbationDraw",
    "RoundRecord",
    "make_lambda",
    "perturb",
    "estimate_loss",
    "enumerate_estimates",
    "pablo_round",
]


@dataclass(frozen=True)
class PerturbationConfig:
    """Dimension, perturbation floor, and loss-norm bound for the reduction."""

    d: int
    eps_floor: float
    lipschitz_G: float = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise PabloError("dimension must be positive")
        if not (self.eps_floor > 0 and math.isfinite(self.eps_floor)):
            raise PabloError("eps_floor must be a positive finite real")
        if not (self.lipschitz_G > 0):
            raise PabloError("lipschitz_G must be positive")


@dataclass(frozen=True)
class PerturbationDraw:
    """One sampled perturbation outcome: axis index, sign, and eigenvalue."""

    axis: int
    sign: float
    lam: float

    def __post_init__(self):
        if self.sign not in (-1.0, 1.0):
            raise PabloError("sign must be +-1")
        if not (self.lam > 0):
            raise PabloError("lambda must be positive")


@dataclass(frozen=True)
class RoundRecord:
    """Everything observed in one bandit round."""

    w: np.ndarray
    draw: PerturbationDraw
    w_tilde: np.ndarray
    observed: float
    estimate: np.ndarray


def make_lambda(w: np.ndarray, cfg: PerturbationConfig) -> float:
    """Shared eigenvalue of the isotropic perturbation matrix at iterate w."""
    w = as_vector(w, cfg.d)
    n2 = float(w @ w)
    return 1.0 / (cfg.d * max(n2, cfg.eps_floor**2))


def perturb(w: np.ndarray, draw: PerturbationDraw) -> np.ndarray:
    """Played point w~ = w + lambda^{-1/2} * sign * e_axis."""
    w = as_vector(w)
    out = w.copy()
    out[draw.axis] += draw.sign / math.sqrt(draw.lam)
    return out


def estimate_loss(observed: float, draw: PerturbationDraw, d: int) -> np.ndarray:
    """One-point loss estimate l~ = d * sqrt(lambda) * sign * observed * e_axis."""
    if not math.isfinite(observed):
        raise NonFiniteValue("observed scalar loss is not finite")
    out = np.zeros(d)
    out[draw.axis] = d * math.sqrt(draw.lam) * draw.sign * observed
    return out


def enumerate_estimates(
    w: np.ndarray,
    ell: np.ndarray,
    cfg: PerturbationConfig,
    eigenvalues: Sequence[float] | None = None,
) -> list[tuple[np.ndarray, float]]:
    """All 2d (estimate, probability) pairs of the perturbation round.

    With ``eigenvalues`` the perturbation matrix is diagonal with those
    entries; otherwise the isotropic eigenvalue from ``make_lambda`` is used
    on every axis.
    """
    w = as_vector(w, cfg.d)
    ell = as_vector(ell, cfg.d)
    if eigenvalues is None:
        lams = [make_lambda(w, cfg)] * cfg.d
    else:
        lams = [float(v) for v in eigenvalues]
        if len(lams) != cfg.d or any(v <= 0 for v in lams):
            raise PabloError("eigenvalue list must have d positive entries")
    out = []
    prob = 1.0 / (2 * cfg.d)
    for axis in range(cfg.d):
        for sign in (1.0, -1.0):
            draw = PerturbationDraw(axis, sign, lams[axis])
            observed = float(ell @ perturb(w, draw))
            out.append((estimate_loss(observed, draw, cfg.d), prob))
    return out


def pablo_round(
    learner: Learner,
    env_feedback: Callable[[np.ndarray], float],
    cfg: PerturbationConfig,
    rng: RngStream,
) -> RoundRecord:
    """Run one bandit round: perturb, play, observe, estimate, update."""
    w = as_vector(learner.predict(), cfg.d)
    # one integer draw in [0, 2d) decides both axis and sign
    k = rng.integer(2 * cfg.d)
    draw = PerturbationDraw(k // 2, 1.0 if k % 2 == 0 else -1.0, make_lambda(w, cfg))
    w_tilde = perturb(w, draw)
    observed = float(env_feedback(w_tilde))
    est = estimate_loss(observed, draw, cfg.d)
    learner.update(est)
    return RoundRecord(w, draw, w_tilde, observed, est)
