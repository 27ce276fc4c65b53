"""Shared numeric primitives: vectors, deterministic RNG streams, the online
learner contract, and comparator path metrics.

All norms are Euclidean and all logarithms are natural.
"""

from __future__ import annotations

import hashlib
import math
from abc import ABC, abstractmethod
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "PabloError",
    "DimensionMismatch",
    "NonFiniteValue",
    "as_vector",
    "RngStream",
    "Learner",
    "path_length",
    "switch_count",
    "linearithmic_metrics",
]


class PabloError(Exception):
    """Base class for all structured errors raised by this package."""


class DimensionMismatch(PabloError):
    """Two vectors (or a vector and a config) disagree on dimension."""


class NonFiniteValue(PabloError):
    """A NaN or infinity showed up where a finite real was required."""


def as_vector(x: Iterable[float], dim: int | None = None) -> np.ndarray:
    """Validate ``x`` as a finite float vector, optionally of dimension ``dim``."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimensionMismatch(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteValue("vector contains NaN or Inf")
    if dim is not None and v.size != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {v.size}")
    return v


def _mix64(x: int) -> int:
    # splitmix64 finalizer; spreads low-entropy seeds over 64 bits
    x &= 0xFFFFFFFFFFFFFFFF
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & 0xFFFFFFFFFFFFFFFF
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def _label_hash(label: str) -> int:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """Deterministic random stream with reproducible child-stream derivation.

    Child streams are derived as ``mix(seed XOR blake2b(label))`` so the same
    (seed, label) pair produces the same stream on every platform.  Gaussian
    draws use the Box-Muller transform over PCG64 uniforms; this choice is
    part of the reproducibility contract and must not change silently.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, label: str) -> "RngStream":
        return RngStream(_mix64(self.seed ^ _label_hash(label)))

    def integer(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return int(self._gen.integers(0, n))

    def uniform(self, size: int | None = None):
        return self._gen.random() if size is None else self._gen.random(size)

    def signs(self, size: int) -> np.ndarray:
        """Uniform +-1 vector."""
        return np.where(self._gen.random(size) < 0.5, -1.0, 1.0)

    def normal(self, size: int) -> np.ndarray:
        """Standard normal draws via Box-Muller."""
        n_pairs = (size + 1) // 2
        u1 = self._gen.random(n_pairs)
        u2 = self._gen.random(n_pairs)
        r = np.sqrt(-2.0 * np.log1p(-u1))
        out = np.empty(2 * n_pairs)
        out[0::2] = r * np.cos(2.0 * np.pi * u2)
        out[1::2] = r * np.sin(2.0 * np.pi * u2)
        return out[:size]


class Learner(ABC):
    """Online linear optimization learner.

    ``predict`` is pure given state; ``update`` mutates state exactly once per
    round, so the prediction at round t depends only on the first t-1
    gradients.
    """

    @abstractmethod
    def predict(self) -> np.ndarray: ...

    @abstractmethod
    def update(self, g: np.ndarray) -> None: ...

    @abstractmethod
    def reset(self) -> None: ...


def _check_sequence(points: Sequence[np.ndarray]) -> list[np.ndarray]:
    if len(points) == 0:
        raise DimensionMismatch("comparator sequence must be non-empty")
    pts = [as_vector(p) for p in points]
    dim = pts[0].size
    for p in pts[1:]:
        if p.size != dim:
            raise DimensionMismatch("comparator points disagree on dimension")
    return pts


def path_length(points: Sequence[np.ndarray]) -> float:
    """Total movement of the comparator: sum of successive increment norms."""
    pts = _check_sequence(points)
    return float(sum(np.linalg.norm(b - a) for a, b in zip(pts, pts[1:])))


def switch_count(points: Sequence[np.ndarray]) -> int:
    """Number of rounds on which the comparator changes (exact equality)."""
    pts = _check_sequence(points)
    return sum(1 for a, b in zip(pts, pts[1:]) if not np.array_equal(a, b))


def linearithmic_metrics(
    points: Sequence[np.ndarray], eps_budget: float, T: int
) -> tuple[float, float]:
    """Log-weighted comparator size and path length.

    Returns ``(Phi_T, P_T_Phi)`` where ``Phi_T = |u_T| * ln(|u_T| * T / eps + 1)``
    and ``P_T_Phi`` sums ``|du| * ln(4 T^3 |du| / eps + 1)`` over increments.
    """
    if eps_budget <= 0:
        raise PabloError("eps_budget must be positive")
    if T < 1:
        raise PabloError("T must be >= 1")
    pts = _check_sequence(points)
    last = float(np.linalg.norm(pts[-1]))
    phi = last * math.log(last * T / eps_budget + 1.0)
    scale = 4.0 * T**3 / eps_budget
    p_phi = 0.0
    for a, b in zip(pts, pts[1:]):
        d = float(np.linalg.norm(b - a))
        p_phi += d * math.log(scale * d + 1.0)
    return phi, p_phi
