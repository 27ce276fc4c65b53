"""Experiment orchestration.

Assembles learner stacks (optionally behind the bandit reduction), runs
trials against environments, computes static/dynamic regret and comparator
path metrics, aggregates over seeds, fits log-log scaling laws, and writes
CSV with a JSON sidecar.

Regret accounting: the played point is the perturbed w~_t in bandit mode
and the raw iterate in full-information mode; ``regret_dynamic`` is
sum <l_t, played_t> - sum <l_t, u_t> against the comparator sequence and
``regret_static`` is the same with the final comparator point held fixed
(the two coincide for constant comparators).

In bandit mode the OLO stack is tuned for gradient bound 2 d G (the
almost-sure bound on the loss estimates when losses satisfy ||l|| <= G)
with budget eps/d, and the perturbation floor defaults to eps/sqrt(T)
(omega/sqrt(T) for the high-probability learner).
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import __version__
from .composite import HighProbMeta, highprob_constants
from .core import Learner, PabloError, RngStream, as_vector, linearithmic_metrics, path_length, switch_count
from .environments import (
    AdaptiveSignEnv,
    ClippedHypercubeEnv,
    Environment,
    FixedSequenceEnv,
    FixedThetaEnv,
    StochasticHypercubeEnv,
    fenchel_comparator,
    hypercube_comparator,
    switching_comparator,
)
from .olo import DynamicBaseLearner, DynamicBaseParams, GridMetaLearner, MetaParams, theorem9_bound, theorem10_bound
from .perturbation import PerturbationConfig, pablo_round

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "TrialSummary",
    "ScalingFit",
    "SweepResult",
    "CertifyReport",
    "run_trial",
    "sweep",
    "certify",
    "CSV_COLUMNS",
    "write_csv",
    "write_sidecar",
]

CSV_COLUMNS = [
    "env",
    "learner",
    "d",
    "T",
    "seed",
    "regret_static",
    "regret_dynamic",
    "P_T",
    "S_T",
    "Phi_T",
    "P_T_Phi",
    "max_u",
    "sum_l2u",
]

_LEARNER_KINDS = ("dynamic_meta", "highprob_meta", "dynamic_base")
_MODES = ("bandit", "full_info")


class ConfigError(PabloError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    env: dict[str, Any]
    learner: dict[str, Any]
    comparator: dict[str, Any]
    T_grid: tuple[int, ...]
    seeds: int
    base_seed: int = 0
    mode: str = "bandit"

    @staticmethod
    def from_dict(raw: dict[str, Any]) -> "ExperimentConfig":
        def need(key: str):
            if key not in raw:
                raise ConfigError(f"config: missing required key {key!r}")
            return raw[key]

        env = dict(need("env"))
        learner = dict(need("learner"))
        comparator = dict(raw.get("comparator", {"variant": "zero"}))
        T_grid = tuple(int(t) for t in need("T_grid"))
        if not T_grid or any(t < 1 for t in T_grid):
            raise ConfigError("config.T_grid: horizons must be positive")
        seeds = int(raw.get("seeds", 1))
        if seeds < 1:
            raise ConfigError("config.seeds: must be positive")
        mode = raw.get("mode", "bandit")
        if mode not in _MODES:
            raise ConfigError(f"config.mode: {mode!r} not in {_MODES}")
        kind = learner.get("kind")
        if kind not in _LEARNER_KINDS:
            raise ConfigError(f"config.learner.kind: {kind!r} not in {_LEARNER_KINDS}")
        if "variant" not in env:
            raise ConfigError("config.env: missing 'variant'")
        return ExperimentConfig(
            env=env,
            learner=learner,
            comparator=comparator,
            T_grid=T_grid,
            seeds=seeds,
            base_seed=int(raw.get("base_seed", 0)),
            mode=mode,
        )

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["T_grid"] = list(self.T_grid)
        return out


def build_env(spec: dict[str, Any], T: int, rng: RngStream) -> Environment:
    variant = spec.get("variant")
    try:
        if variant == "fixed_sequence":
            return FixedSequenceEnv([as_vector(l) for l in spec["losses"]])
        if variant == "stochastic_hypercube":
            return StochasticHypercubeEnv(int(spec["d"]), T, rng)
        if variant == "clipped_hypercube":
            return ClippedHypercubeEnv(int(spec["d"]), T, rng)
        if variant == "fixed_theta":
            return FixedThetaEnv(
                as_vector(spec["theta"]), float(spec.get("noise_sigma", 0.25)), rng
            )
        if variant == "adaptive_sign":
            return AdaptiveSignEnv(float(spec.get("G", 1.0)), int(spec["d"]))
    except KeyError as e:
        raise ConfigError(f"config.env: missing field {e.args[0]!r} for {variant!r}")
    raise ConfigError(f"config.env.variant: unknown variant {variant!r}")


def _build_learner(
    learner_spec: dict[str, Any], d: int, T: int, mode: str
) -> tuple[Learner, PerturbationConfig | None]:
    kind = learner_spec["kind"]
    G = float(learner_spec.get("G", 1.0))
    eps = float(learner_spec.get("eps_budget", 1.0))
    if G <= 0 or eps <= 0:
        raise ConfigError("config.learner: G and eps_budget must be positive")
    bandit = mode == "bandit"
    # the feedback seen by the OLO stack: raw losses, or estimates with the
    # almost-sure norm bound 2 d G
    G_feed = 2.0 * d * G if bandit else G
    eps_learn = eps / d if bandit else eps
    pcfg = None
    if kind == "dynamic_base":
        eta = float(learner_spec.get("eta", 1.0 / G_feed))
        learner: Learner = DynamicBaseLearner(
            DynamicBaseParams.tuned(eps_learn, G_feed, T, eta, d)
        )
    elif kind == "dynamic_meta":
        learner = GridMetaLearner(MetaParams(eps_learn, G_feed, T, d))
    elif kind == "highprob_meta":
        delta = float(learner_spec.get("delta", 0.05))
        grid_size = int(math.floor(math.log2(T))) + 1
        constants = highprob_constants(
            G, delta, T, d, eps_learn, learner_spec.get("omega"), grid_size
        )
        learner = HighProbMeta(constants, G_feed, T, d)
    else:  # pragma: no cover - guarded by from_dict
        raise ConfigError(f"unknown learner kind {kind!r}")
    if bandit:
        if kind == "highprob_meta":
            eps_floor = learner.constants.eps_floor
        else:
            eps_floor = float(
                learner_spec.get("eps_floor", eps_learn / math.sqrt(T))
            )
        pcfg = PerturbationConfig(d=d, eps_floor=eps_floor, lipschitz_G=G)
    return learner, pcfg


def _build_comparator(
    spec: dict[str, Any],
    env: Environment,
    losses: Sequence[np.ndarray],
    T: int,
    learner_spec: dict[str, Any],
) -> list[np.ndarray]:
    variant = spec.get("variant", "zero")
    d = env.d
    if variant == "zero":
        return [np.zeros(d)] * T
    if variant == "static":
        u = as_vector(spec["u"], d)
        return [u] * T
    if variant == "switching":
        segments = [(seg[0], int(seg[1])) for seg in spec["segments"]]
        return switching_comparator(segments, T)
    if variant == "hypercube_opt":
        theta = getattr(env, "theta", None)
        if theta is None:
            raise ConfigError(
                "config.comparator: hypercube_opt requires an environment with a mean vector"
            )
        return [hypercube_comparator(theta)] * T
    if variant == "piecewise_hindsight":
        from .environments import piecewise_hindsight_comparator

        return piecewise_hindsight_comparator(
            losses, int(spec["segments"]), float(spec["path_target"])
        )
    if variant == "fenchel":
        eps = float(spec.get("eps", learner_spec.get("eps_budget", 1.0)))
        G = float(spec.get("G", learner_spec.get("G", 1.0)))
        return [fenchel_comparator(losses, eps, G, T)] * T
    raise ConfigError(f"config.comparator.variant: unknown variant {variant!r}")


@dataclass
class TrialSummary:
    env: str
    learner: str
    d: int
    T: int
    seed: int
    regret_static: float
    regret_dynamic: float
    P_T: float
    S_T: int
    Phi_T: float
    P_T_Phi: float
    max_u: float
    sum_l2u: float
    extras: dict[str, Any] = field(default_factory=dict)

    def csv_row(self) -> list[str]:
        return [
            self.env,
            self.learner,
            str(self.d),
            str(self.T),
            str(self.seed),
            repr(self.regret_static),
            repr(self.regret_dynamic),
            repr(self.P_T),
            str(self.S_T),
            repr(self.Phi_T),
            repr(self.P_T_Phi),
            repr(self.max_u),
            repr(self.sum_l2u),
        ]


@dataclass
class TrialResult:
    summary: TrialSummary
    losses: list[np.ndarray]
    played: list[np.ndarray]
    iterates: list[np.ndarray]
    comparators: list[np.ndarray]


def run_trial(
    config: ExperimentConfig, T: int, seed: int, log_rounds: bool = False
) -> TrialResult:
    """One deterministic trial: same (config, T, seed) gives identical output."""
    rng = RngStream(config.base_seed).child(f"T={T}").child(f"seed={seed}")
    env = build_env(config.env, T, rng.child("env"))
    d = env.d
    learner, pcfg = _build_learner(config.learner, d, T, config.mode)
    play_rng = rng.child("play")
    losses: list[np.ndarray] = []
    played: list[np.ndarray] = []
    iterates: list[np.ndarray] = []
    for _ in range(T):
        if config.mode == "bandit":
            captured: dict[str, np.ndarray] = {}

            def feedback(w_tilde: np.ndarray) -> float:
                ell = env.loss(w_tilde)
                captured["ell"] = ell
                return float(ell @ w_tilde)

            rec = pablo_round(learner, feedback, pcfg, play_rng)
            losses.append(captured["ell"])
            played.append(rec.w_tilde)
            iterates.append(rec.w)
        else:
            w = learner.predict()
            ell = env.loss(w)
            learner.update(ell)
            losses.append(ell)
            played.append(w)
            iterates.append(w)
    comparators = _build_comparator(
        config.comparator, env, losses, T, config.learner
    )
    eps = float(config.learner.get("eps_budget", 1.0))
    loss_played = sum(float(l @ w) for l, w in zip(losses, played))
    loss_dyn = sum(float(l @ u) for l, u in zip(losses, comparators))
    u_last = comparators[-1]
    loss_static = sum(float(l @ u_last) for l in losses)
    phi_T, p_phi = linearithmic_metrics(comparators, eps, T)
    extras: dict[str, Any] = {}
    if hasattr(env, "theta"):
        extras["theta"] = np.asarray(env.theta).tolist()
    if hasattr(env, "clip_count"):
        extras["clip_count"] = env.clip_count
    if isinstance(learner, HighProbMeta):
        extras["max_grad_phi_norm"] = learner.max_grad_phi_norm
        extras["H"] = learner.constants.H
    summary = TrialSummary(
        env=env.name,
        learner=config.learner["kind"],
        d=d,
        T=T,
        seed=seed,
        regret_static=loss_played - loss_static,
        regret_dynamic=loss_played - loss_dyn,
        P_T=path_length(comparators),
        S_T=switch_count(comparators),
        Phi_T=phi_T,
        P_T_Phi=p_phi,
        max_u=max(float(np.linalg.norm(u)) for u in comparators),
        sum_l2u=sum(
            float(l @ l) * float(np.linalg.norm(u))
            for l, u in zip(losses, comparators)
        ),
        extras=extras,
    )
    if not log_rounds:
        losses, played, iterates = [], [], []
    return TrialResult(summary, losses, played, iterates, comparators if log_rounds else [])


@dataclass
class ScalingFit:
    slope: float
    intercept: float
    r2: float
    degenerate: bool = False


def fit_loglog(xs: Sequence[float], ys: Sequence[float]) -> ScalingFit:
    """Least-squares fit of ln(y) vs ln(x); degenerate when any y <= 0."""
    if len(xs) < 2 or any(y <= 0 for y in ys) or any(x <= 0 for x in xs):
        return ScalingFit(float("nan"), float("nan"), float("nan"), degenerate=True)
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(float(slope), float(intercept), r2)


@dataclass
class SweepResult:
    summaries: list[TrialSummary]
    aggregates: list[dict[str, float]]
    fit: ScalingFit


def _run_one(args: tuple[dict[str, Any], int, int]) -> TrialSummary:
    raw, T, seed = args
    return run_trial(ExperimentConfig.from_dict(raw), T, seed).summary


def _pool_size() -> int:
    raw = os.environ.get("PABLO_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def sweep(config: ExperimentConfig) -> SweepResult:
    """All (T, seed) trials plus per-horizon aggregates and a log-log fit of
    mean dynamic regret against T."""
    jobs = [
        (config.to_dict(), T, seed) for T in config.T_grid for seed in range(config.seeds)
    ]
    workers = _pool_size()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_run_one, jobs, chunksize=8))
    else:
        summaries = [_run_one(j) for j in jobs]
    aggregates = []
    for T in config.T_grid:
        regs = np.asarray(
            [s.regret_dynamic for s in summaries if s.T == T], dtype=float
        )
        aggregates.append(
            {
                "T": float(T),
                "mean": float(regs.mean()),
                "std": float(regs.std(ddof=1)) if regs.size > 1 else 0.0,
                "q50": float(np.quantile(regs, 0.5)),
                "q90": float(np.quantile(regs, 0.9)),
                "q95": float(np.quantile(regs, 0.95)),
            }
        )
    fit = fit_loglog([a["T"] for a in aggregates], [a["mean"] for a in aggregates])
    return SweepResult(summaries, aggregates, fit)


@dataclass
class CertifyReport:
    trials: int
    violations: list[dict[str, Any]]

    @property
    def passed(self) -> bool:
        return not self.violations


def certify(config: ExperimentConfig) -> CertifyReport:
    """Full-information certificate check: measured regret of every trial
    must not exceed the learner's theorem bound."""
    if config.mode != "full_info":
        raise ConfigError("certify requires mode 'full_info'")
    kind = config.learner["kind"]
    if kind not in ("dynamic_base", "dynamic_meta"):
        raise ConfigError("certify supports dynamic_base and dynamic_meta only")
    eps = float(config.learner.get("eps_budget", 1.0))
    G = float(config.learner.get("G", 1.0))
    violations = []
    n = 0
    for T in config.T_grid:
        for seed in range(config.seeds):
            res = run_trial(config, T, seed, log_rounds=True)
            n += 1
            grads = res.losses
            u = res.comparators
            if kind == "dynamic_base":
                eta = float(config.learner.get("eta", 1.0 / G))
                bound = theorem9_bound(u, grads, eps, G, eta)
            else:
                grid_size = GridMetaLearner(
                    MetaParams(eps, G, T, res.summary.d)
                ).grid_size
                bound = theorem10_bound(u, grads, eps, G, grid_size)
            measured = res.summary.regret_dynamic
            if measured > bound + 1e-9:
                violations.append(
                    {"T": T, "seed": seed, "measured": measured, "bound": bound}
                )
    return CertifyReport(n, violations)


def csv_text(summaries: Sequence[TrialSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for s in summaries:
        writer.writerow(s.csv_row())
    return buf.getvalue()


def write_csv(summaries: Sequence[TrialSummary], path: str) -> None:
    with open(path, "w", newline="") as f:
        f.write(csv_text(summaries))


def write_sidecar(config: ExperimentConfig, path: str, **extra: Any) -> None:
    payload = {"config": config.to_dict(), "version": __version__}
    payload.update(extra)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
