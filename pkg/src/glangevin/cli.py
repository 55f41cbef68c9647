"""Batch experiment runner.

Subcommands (one per experiment):

- ``harmonic-covariance``: stationary covariance of a scheme on the unit
  linear oscillator, exact (Lyapunov) and Monte Carlo side by side.
- ``table1``: step-halving study of the stationary q^2 moment on a 1-d
  potential against the quadrature reference.
- ``strong-order``: coupled dyadic self-convergence of trajectories.
- ``energy-order``: per-step energy defect and deterministic global
  error orders on the harmonic oscillator.
- ``tv-curve``: noise-free total-variation distance to the exact Gibbs
  Gaussian over a step ladder.
- ``sample``: a thinned trajectory stream.

Configuration comes from a flat-key JSON file (``--config``) with CLI
flags overriding individual keys one-to-one.  Every experiment writes a
single CSV whose numeric body is a pure function of the configuration
(comment header lines carry provenance, including a timestamp).  Exit
codes: 0 success, 2 configuration error, 3 divergence, 4 numeric
failure.  The environment variable ``GLANGEVIN_OUTPUT_DIR`` sets the
directory for relative output paths.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .analysis import (convergence_study, deterministic_global_error_curve,
                       gibbs_moment_quadrature, linear_stationary_covariance,
                       local_energy_error_curve, moment_error_curve,
                       observed_orders, tv_to_gibbs_curve)
from .errors import ConfigError, GlangevinError
from .gla import run_chain, sample_trajectory, strong_error_experiment
from .integrators import custom_scheme, scheme_by_name
from .model import HamiltonianSystem, MassMatrix, PhaseState, potential_by_name
from .noise import NoiseStream
from .ou import build_ou_operator

EXPERIMENTS = ("harmonic-covariance", "table1", "strong-order", "energy-order",
               "tv-curve", "sample")
OUTPUT_DIR_ENV = "GLANGEVIN_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_NUMERIC = 4


@dataclass
class ExperimentConfig:
    """Flat experiment configuration; JSON keys and CLI flags match 1:1."""

    experiment: str
    seed: int
    scheme: str = "verlet"
    potential: str = "harmonic"
    potential_params: list = None
    gamma: float = 1.0
    beta: float = 2.0
    h0: float = 0.4
    steps: int = 1_000_000
    replicas: int = 10_000
    levels: int = 4
    burn_in: float = 0.1
    batches: int = 64
    workers: int = 0  # 0 = available parallelism
    output: str = ""
    stride: int = 100
    custom_c: list = None
    custom_d: list = None
    custom_order: int = 0
    custom_kick_first: bool = True


def _validate(cfg):
    problems = []
    if cfg.experiment not in EXPERIMENTS:
        problems.append(f"experiment must be one of {EXPERIMENTS}, got {cfg.experiment!r}")
    if cfg.seed is None:
        problems.append("seed: required, none given")
    else:
        try:
            s = int(cfg.seed)
            if not 0 <= s < 2 ** 64:
                problems.append("seed: must be a 64-bit unsigned integer")
        except (TypeError, ValueError):
            problems.append("seed: must be an integer")
    if cfg.scheme not in ("euler", "verlet", "neri4", "custom"):
        problems.append(f"scheme: unknown '{cfg.scheme}'")
    elif cfg.scheme == "custom":
        if not cfg.custom_c or not cfg.custom_d:
            problems.append("scheme: custom requires custom_c and custom_d")
        elif len(cfg.custom_c) != len(cfg.custom_d):
            problems.append("custom_c and custom_d must have equal length")
        if cfg.custom_order < 1:
            problems.append("custom_order: must be >= 1 for a custom scheme")
    if cfg.potential not in ("harmonic", "double-well", "polynomial"):
        problems.append(f"potential: unknown '{cfg.potential}'")
    elif cfg.potential == "polynomial" and not cfg.potential_params:
        problems.append("potential: polynomial requires potential_params")
    for key in ("gamma", "beta", "h0"):
        if not getattr(cfg, key) > 0.0:
            problems.append(f"{key}: must be positive")
    if cfg.steps < 1:
        problems.append("steps: must be >= 1")
    if cfg.replicas < 2:
        problems.append("replicas: must be >= 2")
    if cfg.levels < 1 or (cfg.experiment == "strong-order" and cfg.levels < 2):
        problems.append("levels: must be >= 1 (>= 2 for strong-order)")
    if not 0.0 <= cfg.burn_in < 1.0:
        problems.append("burn_in: must be a fraction in [0, 1)")
    if cfg.batches < 1:
        problems.append("batches: must be >= 1")
    if cfg.workers < 0:
        problems.append("workers: must be >= 0 (0 = auto)")
    if cfg.stride < 1:
        problems.append("stride: must be >= 1")
    if problems:
        raise ConfigError(problems)
    return cfg


def parse_config(path=None, overrides=None):
    """Build a validated ExperimentConfig from a JSON file plus overrides.

    ``overrides`` (CLI flags) win over file values key by key.
    """
    data = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError([f"config file: {exc}"]) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(
                [f"config file: malformed JSON at line {exc.lineno}: {exc.msg}"]) from exc
        if not isinstance(data, dict):
            raise ConfigError(["config file: top level must be a JSON object"])
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError([f"unknown config key '{k}'" for k in sorted(unknown)])
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    if "experiment" not in data:
        raise ConfigError(["experiment: required, none given"])
    if "seed" not in data:
        raise ConfigError(["seed: required, none given"])
    if "steps" not in data and data["experiment"] in ("strong-order", "energy-order"):
        data["steps"] = 5  # coarse-level step count: T = steps * h0
    data = _coerce_types(data)
    cfg = ExperimentConfig(**{k: data[k] for k in data})
    return _validate(cfg)


_FIELD_TYPES = {
    "seed": int, "steps": int, "replicas": int, "levels": int, "batches": int,
    "workers": int, "stride": int, "custom_order": int,
    "gamma": float, "beta": float, "h0": float, "burn_in": float,
}


def _coerce_types(data):
    problems = []
    out = dict(data)
    for key, typ in _FIELD_TYPES.items():
        if key in out and out[key] is not None:
            try:
                out[key] = typ(out[key])
            except (TypeError, ValueError):
                problems.append(f"{key}: expected {typ.__name__}, got {out[key]!r}")
    for key in ("potential_params", "custom_c", "custom_d"):
        if key in out and out[key] is not None:
            try:
                out[key] = [float(v) for v in out[key]]
            except (TypeError, ValueError):
                problems.append(f"{key}: expected a list of numbers")
    if problems:
        raise ConfigError(problems)
    return out


def _build_scheme(cfg):
    if cfg.scheme == "custom":
        return custom_scheme(cfg.custom_c, cfg.custom_d, cfg.custom_order,
                             cfg.custom_kick_first)
    return scheme_by_name(cfg.scheme)


def _build_system(cfg):
    potential = potential_by_name(cfg.potential, cfg.potential_params)
    n = potential.dim or 1
    return HamiltonianSystem(MassMatrix.identity(n), potential)


def _workers(cfg):
    return cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".16e")
    return str(value)


def write_csv(path, columns, rows, cfg, extra_comments=()):
    """Write provenance comments ('#') then a deterministic numeric body."""
    canon = json.dumps(asdict(cfg), sort_keys=True, separators=(",", ":"))
    lines = [f"# glangevin {__version__}",
             f"# config {canon}",
             f"# generated_at {datetime.now(timezone.utc).isoformat()}"]
    lines += [f"# {c}" for c in extra_comments]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _output_path(cfg):
    name = cfg.output or f"{cfg.experiment}.csv"
    if os.path.isabs(name):
        return name
    return os.path.join(os.environ.get(OUTPUT_DIR_ENV, "."), name)


def run_experiment(cfg):
    """Execute one experiment; returns (exit_code, output_path)."""
    path = _output_path(cfg)
    runner = {
        "harmonic-covariance": _run_harmonic_covariance,
        "table1": _run_table1,
        "strong-order": _run_strong_order,
        "energy-order": _run_energy_order,
        "tv-curve": _run_tv_curve,
        "sample": _run_sample,
    }[cfg.experiment]
    return runner(cfg, path)


def _run_harmonic_covariance(cfg, path):
    scheme = _build_scheme(cfg)
    system = HamiltonianSystem(MassMatrix.identity(1), potential_by_name("harmonic"))
    exact = linear_stationary_covariance(scheme, cfg.h0, cfg.gamma, cfg.beta)
    ou_op = build_ou_operator(cfg.gamma, cfg.beta, system.mass, cfg.h0)
    x0 = PhaseState([0.0], [0.0])
    result = run_chain(scheme, system, ou_op, x0, cfg.steps,
                       int(cfg.burn_in * cfg.steps), ["q2", "p2", "qp"],
                       NoiseStream(cfg.seed, chain=0))
    lyap = {"q2": exact[0, 0], "p2": exact[1, 1], "qp": exact[0, 1]}
    rows = []
    for name in ("q2", "p2", "qp"):
        est = result.estimates[name]
        rows.append((name, lyap[name], est.mean, est.stderr, est.n))
    write_csv(path, ("observable", "lyapunov", "mc_estimate", "mc_stderr", "n"),
              rows, cfg)
    if result.diverged:
        print(f"divergence: scheme={cfg.scheme} h={cfg.h0} chain=0 "
              f"step={result.diverged_step}", file=sys.stderr)
        return EXIT_DIVERGED, path
    return EXIT_OK, path


def _run_table1(cfg, path):
    scheme = _build_scheme(cfg)
    system = _build_system(cfg)
    reference = gibbs_moment_quadrature(system.potential, cfg.beta, "q2")
    rows = convergence_study(scheme, system, cfg.gamma, cfg.beta, cfg.h0,
                             cfg.steps, cfg.levels, cfg.seed, reference,
                             burn_in_fraction=cfg.burn_in, workers=_workers(cfg))
    out = [(r.h, r.steps, r.estimate, r.stderr, reference, r.error,
            r.observed_order, r.reliable) for r in rows]
    write_csv(path, ("h", "steps", "estimate", "stderr", "reference", "error",
                     "observed_order", "reliable"), out, cfg)
    diverged = [r for r in rows if math.isnan(r.estimate)]
    if diverged:
        print(f"divergence: scheme={cfg.scheme} h={diverged[0].h} "
              f"chain={rows.index(diverged[0])}", file=sys.stderr)
        return EXIT_DIVERGED, path
    return EXIT_OK, path


def _run_strong_order(cfg, path):
    scheme = _build_scheme(cfg)
    system = _build_system(cfg)
    total_time = cfg.steps * cfg.h0  # steps = coarse-level step count
    result = strong_error_experiment(scheme, system, cfg.gamma, cfg.beta,
                                     cfg.h0, cfg.levels, total_time,
                                     cfg.replicas, NoiseStream(cfg.seed))
    rows = []
    for i, (h, gap_fin, gap_next) in enumerate(result.rows):
        order = result.observed_orders[i - 1] if i >= 1 else float("nan")
        rows.append((h, gap_fin, gap_next, order))
    write_csv(path, ("h", "rms_gap_vs_finest", "rms_gap_next", "observed_order"),
              rows, cfg,
              extra_comments=(f"replicas_used {result.replicas_used}",
                              f"replicas_discarded {result.replicas_discarded}"))
    return EXIT_OK, path


def _run_energy_order(cfg, path):
    scheme = _build_scheme(cfg)
    h_values = [cfg.h0 / (1 << level) for level in range(cfg.levels)]
    states = [PhaseState([q], [p]) for q, p in
              np.random.default_rng(cfg.seed).uniform(-2.0, 2.0, size=(64, 2))]
    local = local_energy_error_curve(scheme, h_values, states)
    total_time = cfg.steps * cfg.h0
    x0 = PhaseState([1.0], [0.0])
    glob = deterministic_global_error_curve(scheme, h_values, total_time, x0)
    local_orders = [float("nan")] + observed_orders(local)
    global_orders = [float("nan")] + observed_orders(glob)
    rows = list(zip(h_values, local, glob, local_orders, global_orders))
    write_csv(path, ("h", "local_energy_error", "global_error",
                     "local_order", "global_order"), rows, cfg)
    return EXIT_OK, path


def _run_tv_curve(cfg, path):
    scheme = _build_scheme(cfg)
    h_values = [cfg.h0 / (1 << level) for level in range(cfg.levels)]
    tvs = tv_to_gibbs_curve(scheme, cfg.gamma, cfg.beta, h_values)
    moments = moment_error_curve(scheme, cfg.gamma, cfg.beta, h_values)
    orders = [float("nan")] + observed_orders(tvs)
    rows = list(zip(h_values, tvs, moments, orders))
    write_csv(path, ("h", "tv", "moment_error", "observed_order"), rows, cfg)
    return EXIT_OK, path


def _run_sample(cfg, path):
    scheme = _build_scheme(cfg)
    system = _build_system(cfg)
    ou_op = build_ou_operator(cfg.gamma, cfg.beta, system.mass, cfg.h0)
    x0 = PhaseState(np.zeros(system.n), np.zeros(system.n))
    traj, diverged_step = sample_trajectory(scheme, system, ou_op, x0,
                                            cfg.steps, cfg.stride,
                                            NoiseStream(cfg.seed, chain=0))
    n = system.n
    columns = ["step"] + [f"q{i}" for i in range(n)] + [f"p{i}" for i in range(n)]
    rows = [tuple([int(r[0])] + [float(v) for v in r[1:]]) for r in traj]
    write_csv(path, columns, rows, cfg)
    if diverged_step >= 0:
        print(f"divergence: scheme={cfg.scheme} h={cfg.h0} chain=0 "
              f"step={diverged_step}", file=sys.stderr)
        return EXIT_DIVERGED, path
    return EXIT_OK, path


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _add_common_flags(sub):
    sub.add_argument("--config", default=None, help="JSON config file")
    sub.add_argument("--scheme", default=None,
                     choices=("euler", "verlet", "neri4", "custom"))
    sub.add_argument("--potential", default=None,
                     choices=("harmonic", "double-well", "polynomial"))
    sub.add_argument("--potential-params", dest="potential_params",
                     type=_float_list, default=None, metavar="C0,C1,...")
    sub.add_argument("--gamma", type=float, default=None)
    sub.add_argument("--beta", type=float, default=None)
    sub.add_argument("--h0", type=float, default=None)
    sub.add_argument("--steps", type=int, default=None)
    sub.add_argument("--replicas", type=int, default=None)
    sub.add_argument("--levels", type=int, default=None)
    sub.add_argument("--burn-in", dest="burn_in", type=float, default=None)
    sub.add_argument("--batches", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--workers", type=int, default=None)
    sub.add_argument("--output", default=None)
    sub.add_argument("--stride", type=int, default=None)
    sub.add_argument("--custom-c", dest="custom_c", type=_float_list, default=None)
    sub.add_argument("--custom-d", dest="custom_d", type=_float_list, default=None)
    sub.add_argument("--custom-order", dest="custom_order", type=int, default=None)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="glangevin",
        description="Langevin splitting-sampler experiments (deterministic, CSV output)")
    subs = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        _add_common_flags(subs.add_parser(name))
    args = parser.parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k != "config"}
    overrides["experiment"] = args.experiment
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        code, path = run_experiment(cfg)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except GlangevinError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(path)
    return code


if __name__ == "__main__":
    sys.exit(main())
