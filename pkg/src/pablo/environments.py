"""Loss-generating environments and comparator constructors.

Environments produce the full loss vector each round (given the played
point, which only the adaptive adversary inspects); the harness keeps the
loss for regret accounting and reveals only the scalar inner product to
bandit learners.  Includes the stochastic hypercube hard instance
(theta in {+-Delta}^d, Delta = 1/(8 sqrt(T)), Gaussian noise), its clipped
variant with calibrated noise so that losses stay in the unit ball, a
fixed-mean stochastic environment, fixed loss sequences, and the adaptive
sign adversary l_t = G w~_t/||w~_t||.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .core import PabloError, RngStream, as_vector

__all__ = [
    "Environment",
    "FixedSequenceEnv",
    "StochasticHypercubeEnv",
    "ClippedHypercubeEnv",
    "FixedThetaEnv",
    "AdaptiveSignEnv",
    "CustomEnv",
    "hypercube_env",
    "clipped_sigma",
    "adaptive_sign_env",
    "fenchel_comparator",
    "hypercube_comparator",
    "switching_comparator",
]


class Environment:
    """Base class: stateful loss generator, one ``loss`` call per round."""

    d: int
    name: str = "environment"

    def loss(self, w_tilde: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class FixedSequenceEnv(Environment):
    """Replays a fixed (oblivious) loss sequence."""

    name = "fixed_sequence"

    def __init__(self, losses: Sequence[np.ndarray]):
        self.losses = [as_vector(l) for l in losses]
        if not self.losses:
            raise PabloError("loss sequence must be non-empty")
        self.d = self.losses[0].size
        for l in self.losses:
            if l.size != self.d:
                raise PabloError("losses disagree on dimension")
        self._t = 0

    def loss(self, w_tilde: np.ndarray) -> np.ndarray:
        if self._t >= len(self.losses):
            raise PabloError("loss sequence exhausted")
        out = self.losses[self._t]
        self._t += 1
        return out


class StochasticHypercubeEnv(Environment):
    """Hard instance: l_t = theta + noise, theta uniform on {+-Delta}^d with
    Delta = 1/(8 sqrt(T)), noise N(0, (2d)^{-1} I)."""

    name = "stochastic_hypercube"

    def __init__(self, d: int, T: int, rng: RngStream):
        if T < 4 * d:
            raise PabloError(f"hypercube environment requires T >= 4d (T={T}, d={d})")
        self.d = d
        self.T = T
        self.delta = 1.0 / (8.0 * math.sqrt(T))
        self._rng = rng
        self.theta = self.delta * rng.child("theta").signs(d)
        self._noise = rng.child("noise")
        self.noise_sigma = 1.0 / math.sqrt(2.0 * d)

    def loss(self, w_tilde: np.ndarray) -> np.ndarray:
        return self.theta + self.noise_sigma * self._noise.normal(self.d)


def clipped_sigma(d: int, T: int) -> float:
    """Noise variance sigma_d^2 = (1/4) / (d + (sqrt(d) + 2 sqrt(ln 8T))^2),
    calibrated so clipping to the unit ball fires with probability <= 1/(8T)."""
    if d < 1 or T < 1:
        raise PabloError("d, T >= 1 required")
    return 0.25 / (d + (math.sqrt(d) + 2.0 * math.sqrt(math.log(8.0 * T))) ** 2)


class ClippedHypercubeEnv(Environment):
    """Hypercube instance with calibrated noise and hard unit-ball clipping:
    the loss is zeroed (not resampled) whenever its norm exceeds 1."""

    name = "clipped_hypercube"

    def __init__(self, d: int, T: int, rng: RngStream):
        if T < 4 * d:
            raise PabloError(f"hypercube environment requires T >= 4d (T={T}, d={d})")
        self.d = d
        self.T = T
        self.delta = 1.0 / (8.0 * math.sqrt(T))
        self.theta = self.delta * rng.child("theta").signs(d)
        self._noise = rng.child("noise")
        self.noise_sigma = math.sqrt(clipped_sigma(d, T))
        self.clip_count = 0
        self.round_count = 0

    def loss(self, w_tilde: np.ndarray) -> np.ndarray:
        raw = self.theta + self.noise_sigma * self._noise.normal(self.d)
        self.round_count += 1
        if float(raw @ raw) > 1.0:
            self.clip_count += 1
            return np.zeros(self.d)
        return raw


class FixedThetaEnv(Environment):
    """Stochastic environment with a caller-chosen mean vector and Gaussian
    noise, rescaled into the unit ball so that ||l_t|| <= 1 always."""

    name = "fixed_theta"

    def __init__(self, theta: np.ndarray, noise_sigma: float, rng: RngStream):
        self.theta = as_vector(theta)
        self.d = self.theta.size
        if noise_sigma < 0:
            raise PabloError("noise_sigma must be nonnegative")
        if float(np.linalg.norm(self.theta)) > 1.0:
            raise PabloError("theta must lie in the unit ball")
        self.noise_sigma = noise_sigma
        self._noise = rng.child("noise")

    def loss(self, w_tilde: np.ndarray) -> np.ndarray:
        raw = self.theta + self.noise_sigma * self._noise.normal(self.d)
        n = float(np.linalg.norm(raw))
        return raw / n if n > 1.0 else raw


class AdaptiveSignEnv(Environment):
    """Fully adaptive adversary: l_t = G w~_t/||w~_t|| (G e_1 at the origin)."""

    name = "adaptive_sign"

    def __init__(self, G: float, d: int):
        if G <= 0:
            raise PabloError("G must be positive")
        self.G = G
        self.d = d

    def loss(self, w_tilde: np.ndarray) -> np.ndarray:
        w = as_vector(w_tilde, self.d)
        n = float(np.linalg.norm(w))
        if n == 0.0:
            out = np.zeros(self.d)
            out[0] = self.G
            return out
        return self.G * w / n


class CustomEnv(Environment):
    """Wraps an arbitrary callback (t, w~_t) -> l_t."""

    name = "custom"

    def __init__(self, fn: Callable[[int, np.ndarray], np.ndarray], d: int):
        self.fn = fn
        self.d = d
        self._t = 0

    def loss(self, w_tilde: np.ndarray) -> np.ndarray:
        out = as_vector(self.fn(self._t, w_tilde), self.d)
        self._t += 1
        return out


def hypercube_env(
    d: int, T: int, rng: RngStream
) -> tuple[StochasticHypercubeEnv, np.ndarray]:
    """Hypercube environment plus its optimal unit comparator
    u_theta = -sgn(theta)/sqrt(d)."""
    env = StochasticHypercubeEnv(d, T, rng)
    return env, hypercube_comparator(env.theta)


def hypercube_comparator(theta: np.ndarray) -> np.ndarray:
    theta = as_vector(theta)
    return -np.sign(theta) / math.sqrt(theta.size)


def adaptive_sign_env(G: float, d: int) -> AdaptiveSignEnv:
    return AdaptiveSignEnv(G, d)


def fenchel_comparator(
    losses: Sequence[np.ndarray], eps: float, G: float, T: int
) -> np.ndarray:
    """Worst-case data-dependent comparator
    u = -(L_T/||L_T||) * eps * exp(||L_T||^2/(G^2 T)); 0 when L_T = 0."""
    if eps <= 0 or G <= 0 or T < 1:
        raise PabloError("eps, G > 0 and T >= 1 required")
    pts = [as_vector(l) for l in losses]
    L = np.sum(pts, axis=0) if pts else np.zeros(1)
    n = float(np.linalg.norm(L))
    if n == 0.0:
        return np.zeros_like(L)
    return -(L / n) * eps * math.exp(n**2 / (G**2 * T))


def piecewise_hindsight_comparator(
    losses: Sequence[np.ndarray], segments: int, path_target: float
) -> list[np.ndarray]:
    """Piecewise-constant comparator with an exact, controlled path length.

    Splits the horizon into ``segments`` near-equal blocks, points each
    block's comparator against that block's summed loss, then rescales the
    (equal-norm) points so the realized path length equals ``path_target``.
    """
    if segments < 2:
        raise PabloError("need at least 2 segments for a nonzero path length")
    if path_target <= 0:
        raise PabloError("path_target must be positive")
    pts = [as_vector(l) for l in losses]
    T = len(pts)
    if T < segments:
        raise PabloError("horizon shorter than the number of segments")
    d = pts[0].size
    bounds = [round(i * T / segments) for i in range(segments + 1)]
    dirs = []
    for i in range(segments):
        block = np.sum(pts[bounds[i] : bounds[i + 1]], axis=0)
        n = float(np.linalg.norm(block))
        if n > 0.0:
            dirs.append(-block / n)
        else:
            e = np.zeros(d)
            e[0] = 1.0
            dirs.append(e)
    path = sum(float(np.linalg.norm(b - a)) for a, b in zip(dirs, dirs[1:]))
    if path == 0.0:
        raise PabloError("degenerate comparator: all segment directions equal")
    scale = path_target / path
    out: list[np.ndarray] = []
    for i, u in enumerate(dirs):
        out.extend([scale * u] * (bounds[i + 1] - bounds[i]))
    return out


def switching_comparator(
    segments: Sequence[tuple[Sequence[float], int]], T: int
) -> list[np.ndarray]:
    """Piecewise-constant comparator sequence from (point, length) segments;
    segment lengths must sum to T."""
    out: list[np.ndarray] = []
    for point, length in segments:
        if length < 1:
            raise PabloError("segment lengths must be positive")
        p = as_vector(point)
        out.extend([p] * int(length))
    if len(out) != T:
        raise PabloError(f"segment lengths sum to {len(out)}, expected T={T}")
    return out
