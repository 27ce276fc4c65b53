"""Optimistic composite-penalty learning.

The per-round penalty phi_t is a sum of two Huber-like components
r_t(w; c, alpha, p) whose quadratic bowl flattens to a linear cone at the
current iterate norm, with a running-sum denominator (alpha^p +
sum_{s<=t} ||w_s||^p)^{1-1/p}.  The composite learner pairs a direction
learner A_x (full space) with a scale learner A_y (nonnegative half-line)
and plays the implicit iterate solving w~ = x - y * eta * grad phi(w~); the
optimistic feedback wiring keeps the penalty gradients from inflating the
effective gradient norm.  ``highprob_constants`` produces the calibrated
penalty weights for the high-probability regime, and ``highprob_meta``
wraps one composite learner per step size on the usual grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Learner, PabloError, as_vector
from .olo import (
    FULL_SPACE,
    HALF_LINE,
    DynamicBaseLearner,
    DynamicBaseParams,
    make_grid,
)

__all__ = [
    "HuberComponent",
    "CompositePenalty",
    "huber_value",
    "huber_grad_coeff",
    "solve_fixed_point",
    "CompositeLearner",
    "HighProbConstants",
    "highprob_constants",
    "HighProbMeta",
    "highprob_meta",
]

_SOLVE_MAX_ITERS = 200


@dataclass
class HuberComponent:
    """One Huber-like penalty component with its running norm-power sum."""

    c: float
    alpha: float
    p: float
    S: float = 0.0

    def __post_init__(self):
        if self.c < 0 or self.alpha <= 0 or self.p < 1 or self.S < 0:
            raise PabloError("require c >= 0, alpha > 0, p >= 1, S >= 0")

    def commit(self, r: float) -> None:
        """Add the current iterate norm's p-th power to the running sum."""
        self.S += r**self.p

    def copy(self) -> "HuberComponent":
        return HuberComponent(self.c, self.alpha, self.p, self.S)


def huber_value(w_norm: float, center_norm: float, comp: HuberComponent) -> float:
    """Penalty value at radius ``w_norm`` for the component centered at
    ``center_norm``; ``comp.S`` must already include center_norm^p."""
    if w_norm < 0 or center_norm < 0:
        raise PabloError("norms must be nonnegative")
    denom = (comp.alpha**comp.p + comp.S) ** (1.0 - 1.0 / comp.p)
    if w_norm <= center_norm:
        return comp.c * w_norm**comp.p / denom
    return (
        comp.c
        * (comp.p * w_norm - (comp.p - 1.0) * center_norm)
        * center_norm ** (comp.p - 1.0)
        / denom
    )


def huber_grad_coeff(r: float, comp: HuberComponent, S_excl: float) -> float:
    """Radial slope c p r^{p-1} / (alpha^p + S_excl + r^p)^{1-1/p} at the
    component's center; the full gradient is this times w/||w|| (0 at r=0).
    Always bounded by c*p."""
    if r < 0 or S_excl < 0:
        raise PabloError("r and S_excl must be nonnegative")
    if r == 0.0:
        return 0.0
    denom = (comp.alpha**comp.p + S_excl + r**comp.p) ** (1.0 - 1.0 / comp.p)
    return comp.c * comp.p * r ** (comp.p - 1.0) / denom


@dataclass
class CompositePenalty:
    """Two-component penalty phi = r(.; c1, a1, 2) + r(.; c2, a2, ln(T+1))."""

    comp1: HuberComponent
    comp2: HuberComponent

    @property
    def H(self) -> float:
        """Gradient-norm bound c1 p1 + c2 p2."""
        return self.comp1.c * self.comp1.p + self.comp2.c * self.comp2.p

    def components(self) -> tuple[HuberComponent, HuberComponent]:
        return (self.comp1, self.comp2)

    def grad_coeff(self, r: float) -> float:
        """Total radial slope at the center, using the committed sums as the
        excluded-current-round denominators."""
        return sum(huber_grad_coeff(r, c, c.S) for c in self.components())

    def commit(self, r: float) -> None:
        for c in self.components():
            c.commit(r)

    def copy(self) -> "CompositePenalty":
        return CompositePenalty(self.comp1.copy(), self.comp2.copy())


def solve_fixed_point(
    x: np.ndarray, y: float, eta: float, penalty: CompositePenalty
) -> np.ndarray:
    """Solve w~ = x - y*eta*grad phi(w~) for the implicit iterate.

    The solution is collinear with x, so it reduces to the scalar root of
    h(r) = r + y*eta*sum_j g_j(r) = ||x||, with each g_j's denominator
    including the current r^{p_j}.  h is continuous and strictly increasing
    with h(0) = 0 <= ||x|| <= h(||x||), so bisection on [0, ||x||] converges.
    """
    x = as_vector(x)
    if y < 0 or eta <= 0:
        raise PabloError("require y >= 0 and eta > 0")
    xnorm = float(np.linalg.norm(x))
    if xnorm == 0.0:
        return np.zeros_like(x)
    pull = y * eta
    if pull == 0.0 or penalty.H == 0.0:
        return x.copy()
    tol = 1e-12 * max(1.0, xnorm)

    def h(r: float) -> float:
        return r + pull * penalty.grad_coeff(r)

    lo, hi = 0.0, xnorm
    for _ in range(_SOLVE_MAX_ITERS):
        mid = 0.5 * (lo + hi)
        val = h(mid)
        # h' >= 1, so a residual within tol also places mid within tol of
        # the true root
        if abs(val - xnorm) <= tol:
            return x * (mid / xnorm)
        if val < xnorm:
            lo = mid
        else:
            hi = mid
        # fallback for penalties with p near 1, where h is so steep at tiny
        # radii that no representable r meets the residual tolerance
        if hi - lo <= tol * 1e-4:
            return x * (0.5 * (lo + hi) / xnorm)
    raise PabloError("fixed-point bisection failed to converge")


class CompositeLearner(Learner):
    """One step size's composite learner: direction learner A_x on the full
    space, scale learner A_y on the half-line, implicit penalized iterate."""

    def __init__(
        self,
        eta: float,
        penalty: CompositePenalty,
        eps_budget: float,
        G: float,
        T: int,
        dim: int,
    ):
        H = penalty.H
        if eta * (G + H) > 1.0 + 1e-12:
            raise PabloError("require eta <= 1/(G + H)")
        self.eta = eta
        self.G = G
        self.dim = dim
        self._init_penalty = penalty.copy()
        self.penalty = penalty.copy()
        self.A_x = DynamicBaseLearner(
            DynamicBaseParams.tuned(eps_budget, G + H, T, eta, dim, FULL_SPACE)
        )
        self.A_y = DynamicBaseLearner(
            DynamicBaseParams.tuned(eps_budget, G + H, T, eta, 1, HALF_LINE)
        )
        self.w_tilde = np.zeros(dim)
        self.max_grad_phi_norm = 0.0

    def reset(self) -> None:
        self.penalty = self._init_penalty.copy()
        self.A_x.reset()
        self.A_y.reset()
        self.w_tilde = np.zeros(self.dim)
        self.max_grad_phi_norm = 0.0

    def predict(self) -> np.ndarray:
        return self.w_tilde.copy()

    def update(self, g: np.ndarray) -> None:
        g = as_vector(g, self.dim)
        r = float(np.linalg.norm(self.w_tilde))
        coeff = self.penalty.grad_coeff(r)
        grad_phi = coeff * (self.w_tilde / r) if r > 0.0 else np.zeros(self.dim)
        self.max_grad_phi_norm = max(self.max_grad_phi_norm, coeff)
        tg = g + grad_phi
        self.A_x.update(tg)
        self.A_y.update(np.array([-self.eta * float(tg @ grad_phi)]))
        self.penalty.commit(r)
        x = self.A_x.predict()
        y = float(self.A_y.predict()[0])
        self.w_tilde = solve_fixed_point(x, y, self.eta, self.penalty)


@dataclass(frozen=True)
class HighProbConstants:
    """Calibrated penalty weights for the high-probability regime."""

    c1: float
    c2: float
    alpha1: float
    alpha2: float
    p1: float
    p2: float
    H: float
    omega: float
    eps_budget: float
    delta: float
    eps_floor: float

    def make_penalty(self) -> CompositePenalty:
        return CompositePenalty(
            HuberComponent(self.c1, self.alpha1, self.p1),
            HuberComponent(self.c2, self.alpha2, self.p2),
        )


def _ln_plus(x: float) -> float:
    return max(math.log(x), 0.0) if x > 0 else 0.0


def highprob_constants(
    G: float,
    delta: float,
    T: int,
    d: int,
    eps_budget: float,
    omega: float | None = None,
    grid_size: int | None = None,
) -> HighProbConstants:
    """Penalty weights calibrated so the composite cancellation covers the
    estimator's concentration terms at confidence 1 - delta."""
    if not (0.0 < delta <= 0.25):
        raise PabloError("delta must lie in (0, 1/4]")
    if eps_budget <= 0 or G <= 0 or T < 1 or d < 1:
        raise PabloError("G, eps_budget > 0 and T, d >= 1 required")
    if omega is None:
        omega = eps_budget / math.sqrt(math.log(16.0 / delta))
    if omega <= 0:
        raise PabloError("omega must be positive")
    m = grid_size if grid_size is not None else int(math.floor(math.log2(T))) + 1
    c1 = 6.0 * G * math.sqrt(
        d
        * m
        * math.log(
            (4.0 / delta)
            * (T + _ln_plus(4.0 * eps_budget * math.sqrt(m) / omega)) ** 2
        )
    )
    c2 = (
        72.0
        * d
        * G
        * math.log(
            (28.0 / delta)
            * (T + _ln_plus(2.0 * eps_budget * math.sqrt(m) / omega)) ** 2
        )
    )
    p1, p2 = 2.0, math.log(T + 1.0)
    return HighProbConstants(
        c1=c1,
        c2=c2,
        alpha1=eps_budget,
        alpha2=omega,
        p1=p1,
        p2=p2,
        H=c1 * p1 + c2 * p2,
        omega=omega,
        eps_budget=eps_budget,
        delta=delta,
        eps_floor=omega / math.sqrt(T),
    )


class HighProbMeta(Learner):
    """Grid of composite learners sharing the calibrated penalty weights;
    plays the sum of the composite iterates."""

    def __init__(self, constants: HighProbConstants, G: float, T: int, dim: int):
        self.constants = constants
        self.G = G
        self.dim = dim
        grid = make_grid(G + constants.H, T)
        self.instances = [
            CompositeLearner(
                eta, constants.make_penalty(), constants.eps_budget, G, T, dim
            )
            for eta in grid
        ]

    @property
    def grid_size(self) -> int:
        return len(self.instances)

    @property
    def max_grad_phi_norm(self) -> float:
        return max(inst.max_grad_phi_norm for inst in self.instances)

    def reset(self) -> None:
        for inst in self.instances:
            inst.reset()

    def predict(self) -> np.ndarray:
        out = np.zeros(self.dim)
        for inst in self.instances:
            out += inst.w_tilde
        return out

    def update(self, g: np.ndarray) -> None:
        g = as_vector(g, self.dim)
        for inst in self.instances:
            inst.update(g)


def highprob_meta(
    constants: HighProbConstants, G: float, T: int, dim: int
) -> HighProbMeta:
    return HighProbMeta(constants, G, T, dim)
