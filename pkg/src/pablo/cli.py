"""Command-line interface.

Subcommands:
  run        --config cfg.json [--out DIR] [--log-rounds]   trials -> CSV + sidecar
  sweep      --config cfg.json --out DIR                    trials + aggregates + scaling fit
  check                                                     built-in invariant/certificate suite
  enumerate  --d D --w a,b,.. --ell a,b,.. --eps V          exact estimator table

Exit codes: 0 success, 1 check failure, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .core import PabloError, RngStream
from .harness import (
    ConfigError,
    ExperimentConfig,
    certify,
    csv_text,
    run_trial,
    sweep,
    write_csv,
    write_sidecar,
)
from .perturbation import PerturbationConfig, enumerate_estimates


def _load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    try:
        return ExperimentConfig.from_dict(raw)
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}")


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    summaries = [
        run_trial(config, T, seed, log_rounds=args.log_rounds).summary
        for T in config.T_grid
        for seed in range(config.seeds)
    ]
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_csv(summaries, os.path.join(args.out, "trials.csv"))
        write_sidecar(config, os.path.join(args.out, "run.json"))
    else:
        sys.stdout.write(csv_text(summaries))
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    result = sweep(config)
    os.makedirs(args.out, exist_ok=True)
    write_csv(result.summaries, os.path.join(args.out, "trials.csv"))
    write_sidecar(
        config,
        os.path.join(args.out, "sweep.json"),
        aggregates=result.aggregates,
        fit={
            "slope": result.fit.slope,
            "intercept": result.fit.intercept,
            "r2": result.fit.r2,
            "degenerate": result.fit.degenerate,
        },
    )
    for a in result.aggregates:
        print(
            f"T={int(a['T'])} mean={a['mean']:.6g} std={a['std']:.6g} "
            f"q50={a['q50']:.6g} q90={a['q90']:.6g} q95={a['q95']:.6g}"
        )
    if result.fit.degenerate:
        print("fit: degenerate (non-positive means)")
    else:
        print(f"fit: slope={result.fit.slope:.4f} r2={result.fit.r2:.4f}")
    return 0


def _check_estimator() -> list[str]:
    failures = []
    rng = RngStream(20260826)
    for i in range(200):
        r = rng.child(f"inst{i}")
        d = int(2 ** r.integer(4))
        w = np.asarray(r.normal(d)) * (10.0 ** (r.integer(3) - 1))
        ell = np.asarray(r.normal(d))
        cfg = PerturbationConfig(d=d, eps_floor=0.1 + r.uniform())
        entries = enumerate_estimates(w, ell, cfg)
        mean = sum(p * e for e, p in entries)
        if np.max(np.abs(mean - ell)) > 1e-12:
            failures.append(f"estimator unbiasedness violated on instance {i}")
        ell2 = float(ell @ ell)
        for e, _ in entries:
            if float(e @ e) > 4.0 * d**2 * ell2 * (1.0 + 1e-9):
                failures.append(f"almost-sure estimate bound violated on instance {i}")
        m2 = sum(p * float(e @ e) for e, p in entries)
        if m2 > 2.0 * d * ell2 * (1.0 + 1e-9):
            failures.append(f"mean second-moment bound violated on instance {i}")
    return failures


def _check_certificates() -> list[str]:
    failures = []
    for kind in ("dynamic_base", "dynamic_meta"):
        config = ExperimentConfig.from_dict(
            {
                "env": {"variant": "adaptive_sign", "G": 1.0, "d": 2},
                "learner": {"kind": kind, "G": 1.0, "eps_budget": 1.0},
                "comparator": {"variant": "zero"},
                "T_grid": [128],
                "seeds": 4,
                "mode": "full_info",
            }
        )
        report = certify(config)
        if not report.passed:
            failures.append(f"{kind}: {len(report.violations)} certificate violations")
    return failures


def _check_determinism() -> list[str]:
    config = ExperimentConfig.from_dict(
        {
            "env": {"variant": "stochastic_hypercube", "d": 2},
            "learner": {"kind": "dynamic_meta", "G": 1.0, "eps_budget": 1.0},
            "comparator": {"variant": "hypercube_opt"},
            "T_grid": [16],
            "seeds": 2,
            "base_seed": 7,
        }
    )
    rows_a = csv_text(
        [run_trial(config, 16, s).summary for s in range(config.seeds)]
    )
    rows_b = csv_text(
        [run_trial(config, 16, s).summary for s in range(config.seeds)]
    )
    return [] if rows_a == rows_b else ["repeated run is not byte-identical"]


def _cmd_check(args: argparse.Namespace) -> int:
    failures = []
    for name, fn in (
        ("estimator", _check_estimator),
        ("certificates", _check_certificates),
        ("determinism", _check_determinism),
    ):
        errs = fn()
        status = "ok" if not errs else "FAIL"
        print(f"check {name}: {status}")
        for e in errs:
            print(f"  {e}")
        failures.extend(errs)
    return 1 if failures else 0


def _parse_vec(text: str) -> np.ndarray:
    try:
        return np.asarray([float(x) for x in text.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse vector {text!r} (expected comma-separated reals)")


def _cmd_enumerate(args: argparse.Namespace) -> int:
    w = _parse_vec(args.w)
    ell = _parse_vec(args.ell)
    if w.size != args.d or ell.size != args.d:
        raise ConfigError("--w and --ell must have exactly --d components")
    cfg = PerturbationConfig(d=args.d, eps_floor=args.eps)
    entries = enumerate_estimates(w, ell, cfg)
    print("axis sign prob estimate")
    for idx, (est, prob) in enumerate(entries):
        axis, sign = idx // 2, "+" if idx % 2 == 0 else "-"
        print(f"{axis} {sign} {prob:.6g} {np.array2string(est, precision=10)}")
    mean = sum(p * e for e, p in entries)
    print(f"mean {np.array2string(mean, precision=10)}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="pablo",
        description="Simulator for unconstrained bandit linear optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run all configured trials, write CSV")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--log-rounds", action="store_true")
    p_run.set_defaults(fn=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="trials + aggregates + scaling fit")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_check = sub.add_parser("check", help="run the invariant/certificate suite")
    p_check.set_defaults(fn=_cmd_check)

    p_enum = sub.add_parser("enumerate", help="print the exact estimator table")
    p_enum.add_argument("--d", type=int, required=True)
    p_enum.add_argument("--w", required=True)
    p_enum.add_argument("--ell", required=True)
    p_enum.add_argument("--eps", type=float, required=True)
    p_enum.set_defaults(fn=_cmd_enumerate)

    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except PabloError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
