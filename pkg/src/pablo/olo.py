"""Comparator-adaptive online linear optimization learners.

``DynamicBaseLearner`` implements the refined dynamic base update: with
anchor w1 and potential psi'(x) = (k/eta) ln(x/alpha + 1),

    theta_t = (k/eta) ln(||w_t - w1||/alpha + 1) (w_t - w1)/||w_t - w1|| - g_t
    w_{t+1} = w1 + theta_t/||theta_t|| * alpha *
              [exp((eta/k)(||theta_t|| - (eta/2)||g_t||^2 - gamma)) - 1]_+

projected onto the domain (full space, or the 1-D nonnegative half-line).

``GridMetaLearner`` runs one base instance per step size on the grid
eta_i = min(2^i/(G T), 1/G), i = 0..floor(log2 T), plays the sum of the base
iterates, and broadcasts each gradient to every instance.  Its internals are
vectorized over the grid.

``theorem9_bound`` / ``theorem10_bound`` evaluate the learners' dynamic
regret certificates for use as runtime checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Learner, PabloError, as_vector, linearithmic_metrics

__all__ = [
    "FULL_SPACE",
    "HALF_LINE",
    "DynamicBaseParams",
    "DynamicBaseLearner",
    "base_project",
    "MetaParams",
    "make_grid",
    "GridMetaLearner",
    "meta_tuned",
    "theorem9_bound",
    "theorem10_bound",
]

FULL_SPACE = "full-space"
HALF_LINE = "nonnegative-halfline"

# relative slack on the gradient-norm precondition, to absorb float noise in
# callers that construct gradients with norm exactly G
_G_SLACK = 1e-9


@dataclass(frozen=True)
class DynamicBaseParams:
    """Hyperparameters of one dynamic base learner."""

    alpha: float
    gamma: float
    eta: float
    k: float
    G: float
    anchor: np.ndarray = field(default_factory=lambda: np.zeros(1))
    domain: str = FULL_SPACE

    def __post_init__(self):
        if not (self.alpha > 0 and self.gamma > 0 and self.eta > 0 and self.G > 0):
            raise PabloError("alpha, gamma, eta, G must be positive")
        if self.eta > (1.0 + _G_SLACK) / self.G:
            raise PabloError("eta must satisfy eta <= 1/G")
        if self.k < 4:
            raise PabloError("k must be >= 4")
        if self.domain not in (FULL_SPACE, HALF_LINE):
            raise PabloError(f"unsupported domain {self.domain!r}")
        object.__setattr__(self, "anchor", as_vector(self.anchor))
        if self.domain == HALF_LINE:
            if self.anchor.size != 1 or self.anchor[0] != 0.0:
                raise PabloError("half-line domain requires 1-D zero anchor")

    @staticmethod
    def tuned(
        eps_budget: float,
        G: float,
        T: int,
        eta: float,
        dim: int,
        domain: str = FULL_SPACE,
    ) -> "DynamicBaseParams":
        """Settings alpha = eps/T, gamma = G/T, k = 4 backing the certificates."""
        return DynamicBaseParams(
            alpha=eps_budget / T,
            gamma=G / T,
            eta=eta,
            k=4.0,
            G=G,
            anchor=np.zeros(dim),
            domain=domain,
        )


def base_project(w_tilde: np.ndarray, domain: str) -> np.ndarray:
    """Bregman projection onto the domain: identity on the full space,
    max(., 0) on the 1-D half-line (the radially symmetric potential centered
    at 0 makes 0 the projection of any negative scalar)."""
    if domain == FULL_SPACE:
        return w_tilde
    if domain == HALF_LINE:
        return np.maximum(w_tilde, 0.0)
    raise PabloError(f"unsupported domain {domain!r}")


class DynamicBaseLearner(Learner):
    """One dynamic base instance with the closed-form mirror update."""

    def __init__(self, params: DynamicBaseParams):
        self.params = params
        self.w = params.anchor.copy()

    def reset(self) -> None:
        self.w = self.params.anchor.copy()

    def predict(self) -> np.ndarray:
        return self.w.copy()

    def update(self, g: np.ndarray) -> None:
        p = self.params
        g = as_vector(g, p.anchor.size)
        gnorm2 = float(g @ g)
        if gnorm2 > (p.G * (1.0 + _G_SLACK)) ** 2:
            raise PabloError(
                f"gradient norm {math.sqrt(gnorm2):.6g} exceeds bound G={p.G:.6g}"
            )
        diff = self.w - p.anchor
        nd = float(np.linalg.norm(diff))
        if nd > 0.0:
            theta = (p.k / p.eta) * math.log(nd / p.alpha + 1.0) * (diff / nd) - g
        else:
            theta = -g
        ntheta = float(np.linalg.norm(theta))
        if ntheta == 0.0:
            self.w = p.anchor.copy()
            return
        bracket = ntheta - (p.eta / 2.0) * gnorm2 - p.gamma
        mag = p.alpha * max(math.exp((p.eta / p.k) * bracket) - 1.0, 0.0)
        self.w = base_project(p.anchor + (theta / ntheta) * mag, p.domain)


def make_grid(G: float, T: int) -> list[float]:
    """Step-size grid {min(2^i/(G T), 1/G) : i = 0..floor(log2 T)}, deduped."""
    if T < 1 or G <= 0:
        raise PabloError("T >= 1 and G > 0 required")
    grid: list[float] = []
    for i in range(int(math.floor(math.log2(T))) + 1):
        eta = min(2.0**i / (G * T), 1.0 / G)
        if not grid or eta != grid[-1]:
            grid.append(eta)
    return grid


@dataclass(frozen=True)
class MetaParams:
    """Grid meta-learner configuration; the grid is derived from (G, T)."""

    eps_budget: float
    G: float
    T: int
    dim: int
    grid: tuple[float, ...] = ()

    def __post_init__(self):
        if self.eps_budget <= 0 or self.G <= 0 or self.T < 1 or self.dim < 1:
            raise PabloError("eps_budget, G > 0 and T, dim >= 1 required")
        if not self.grid:
            object.__setattr__(self, "grid", tuple(make_grid(self.G, self.T)))


class GridMetaLearner(Learner):
    """Sum of dynamic base learners over the step-size grid, vectorized.

    All instances share anchor 0, alpha = eps/T, gamma = G/T, k = 4 and the
    full space as domain; they differ only in eta.
    """

    def __init__(self, params: MetaParams):
        self.params = params
        self.etas = np.asarray(params.grid)
        self.alpha = params.eps_budget / params.T
        self.gamma = params.G / params.T
        self.k = 4.0
        self.W = np.zeros((self.etas.size, params.dim))

    @property
    def grid_size(self) -> int:
        return self.etas.size

    def reset(self) -> None:
        self.W[:] = 0.0

    def predict(self) -> np.ndarray:
        return self.W.sum(axis=0)

    def base_predictions(self) -> np.ndarray:
        return self.W.copy()

    def update(self, g: np.ndarray) -> None:
        g = as_vector(g, self.params.dim)
        gnorm2 = float(g @ g)
        G = self.params.G
        if gnorm2 > (G * (1.0 + _G_SLACK)) ** 2:
            raise PabloError(
                f"gradient norm {math.sqrt(gnorm2):.6g} exceeds bound G={G:.6g}"
            )
        nd = np.linalg.norm(self.W, axis=1)
        # (k/eta) ln(||w||/alpha + 1) / ||w||, with the 0/0 at the anchor -> 0
        coef = np.zeros_like(nd)
        nz = nd > 0.0
        coef[nz] = (self.k / self.etas[nz]) * np.log(nd[nz] / self.alpha + 1.0) / nd[nz]
        theta = coef[:, None] * self.W - g[None, :]
        ntheta = np.linalg.norm(theta, axis=1)
        bracket = ntheta - (self.etas / 2.0) * gnorm2 - self.gamma
        mag = self.alpha * np.maximum(
            np.exp((self.etas / self.k) * bracket) - 1.0, 0.0
        )
        scale = np.zeros_like(ntheta)
        tz = ntheta > 0.0
        scale[tz] = mag[tz] / ntheta[tz]
        self.W = scale[:, None] * theta


def meta_tuned(params: MetaParams) -> GridMetaLearner:
    """Grid meta-learner with each base tuned for its certificate."""
    return GridMetaLearner(params)


def _phi(x: float, lam: float) -> float:
    return x * math.log(lam * x + 1.0)


def theorem9_bound(
    u: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    eps_budget: float,
    G: float,
    eta: float,
    anchor: np.ndarray | None = None,
) -> float:
    """Dynamic regret certificate of the tuned base learner.

    G(M + eps) + 8[Phi(||u_T - w1||, T/eps) + sum Phi(||du_t||, 4T^3/eps)]/(2 eta)
    + (eta/2) sum ||g_t||^2 ||u_t - w1||, with Phi(x, lam) = x ln(lam x + 1)
    and M = max_t ||u_t - w1||.
    """
    T = len(grads)
    if len(u) != T or T < 1:
        raise PabloError("comparator and gradient sequences must share length >= 1")
    pts = [as_vector(p) for p in u]
    w1 = np.zeros(pts[0].size) if anchor is None else as_vector(anchor, pts[0].size)
    offs = [p - w1 for p in pts]
    M = max(float(np.linalg.norm(o)) for o in offs)
    phi_T = _phi(float(np.linalg.norm(offs[-1])), T / eps_budget)
    p_phi = sum(
        _phi(float(np.linalg.norm(b - a)), 4.0 * T**3 / eps_budget)
        for a, b in zip(offs, offs[1:])
    )
    var = sum(
        float(g @ g) * float(np.linalg.norm(o)) for g, o in zip(grads, offs)
    )
    return G * (M + eps_budget) + 8.0 * (phi_T + p_phi) / (2.0 * eta) + (eta / 2.0) * var


def theorem10_bound(
    u: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    eps_budget: float,
    G: float,
    grid_size: int,
) -> float:
    """Dynamic regret certificate of the grid meta-learner.

    4G(|S| eps + M + Phi_T + P_T^Phi)
    + 2 sqrt(2 (Phi_T + P_T^Phi) sum ||g_t||^2 ||u_t||).
    """
    T = len(grads)
    if len(u) != T or T < 1:
        raise PabloError("comparator and gradient sequences must share length >= 1")
    pts = [as_vector(p) for p in u]
    M = max(float(np.linalg.norm(p)) for p in pts)
    phi_T, p_phi = linearithmic_metrics(pts, eps_budget, T)
    var = sum(float(g @ g) * float(np.linalg.norm(p)) for g, p in zip(grads, pts))
    return 4.0 * G * (grid_size * eps_budget + M + phi_T + p_phi) + 2.0 * math.sqrt(
        2.0 * (phi_T + p_phi) * var
    )
