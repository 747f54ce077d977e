"""Command-line front end.

Subcommands:

* ``jumplab rates -c config.json``      analytic generator only
* ``jumplab simulate -c config.json``   trajectory ensemble + jump statistics
* ``jumplab zeno -c config.json --gammas 2,4 [--mode fixed|rescaled]``

Each run writes a self-contained directory: config echo, ``rates.json``,
``summary.json``, ``meanq.csv``, and optional per-trajectory CSVs.  All JSON
documents carry ``schema_version``.  Exit codes: 0 success, 1 I/O failure,
2 validation or usage error, 3 runtime numerical failure.  Validation errors
also emit a machine-readable JSON object on standard error.

``JUMPLAB_THREADS`` caps the worker count; outputs are bit-identical for any
setting because trajectory streams are keyed by (master_seed, index).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .analyze import (
    DEFAULT_EPSILON,
    MeanQ,
    collapse_frequencies,
    conditional_phase_mean,
    detect_jumps_trajectory,
    ensemble_mean_q,
    estimate_generator,
    no_collapse_fraction,
    z_scores,
)
from .decompose import decompose, validate_scaling
from .errors import (
    ConfigError,
    EmptyEnsembleError,
    JumplabError,
    NoCollapseError,
    PositivityBreachError,
    ReducibleError,
    StabilityGuardError,
)
from .rates import (
    RateGenerator,
    delta_matrix,
    generator_to_json,
    jump_rates,
    stationary,
)
from .sde import (
    DEFAULT_SCHEME,
    run_qy_ensemble,
    run_sme_ensemble,
    write_qy_csv,
    write_trajectory_csv,
)
from .model import (
    LindbladModel,
    MeasurementSetup,
    ValidatedModel,
    load_model,
    model_from_dict,
    model_to_dict,
    validate_model,
)

SCHEMA_VERSION = 1

AUTO_DT_FACTOR = 0.02
AUTO_BURN_IN_FACTOR = 10.0


@dataclass
class RunParams:
    dt: float
    horizon: float
    n_trajectories: int
    master_seed: int
    decimation: int
    epsilon: float
    burn_in: float
    scheme: str
    rho0: np.ndarray
    collapse_window: float


@dataclass
class ExperimentConfig:
    model: LindbladModel
    validated: ValidatedModel
    run: RunParams
    out_dir: str
    save_trajectories: bool
    save_qy: bool
    raw: dict


def _auto_dt(gamma: float) -> float:
    if gamma <= 0:
        raise ConfigError('dt "auto" requires gamma > 0; set dt explicitly')
    return AUTO_DT_FACTOR / (gamma * gamma)


def _auto_burn_in(vm: ValidatedModel) -> float:
    tensors = decompose(vm)
    dm = delta_matrix(tensors, vm.setup)
    d = vm.dim
    re = [dm[k, l].real for k in range(d) for l in range(d) if k != l]
    floor = min(re) if re else 0.0
    if floor <= 0 or vm.gamma <= 0:
        raise ConfigError('burn_in "auto" requires gamma > 0 and damped phases')
    return AUTO_BURN_IN_FACTOR / (vm.gamma * vm.gamma * floor)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None

    model_spec = raw.get("model")
    if model_spec is None:
        raise ConfigError('config missing "model"')
    if isinstance(model_spec, str):
        base = os.path.dirname(os.path.abspath(path))
        model = load_model(os.path.join(base, model_spec) if not os.path.isabs(model_spec) else model_spec)
    elif isinstance(model_spec, dict):
        model = model_from_dict(model_spec)
    else:
        raise ConfigError('"model" must be an inline object or a file path')
    vm = validate_model(model)

    run_spec = dict(raw.get("run", {}))
    horizon = float(run_spec.get("horizon", 0.0))
    if horizon <= 0:
        raise ConfigError('"run.horizon" must be positive')
    n_traj = int(run_spec.get("n_trajectories", 1))
    if n_traj < 1:
        raise ConfigError('"run.n_trajectories" must be >= 1')
    dt_spec = run_spec.get("dt", "auto")
    dt = _auto_dt(vm.gamma) if dt_spec == "auto" else float(dt_spec)
    burn_spec = run_spec.get("burn_in", "auto")
    burn_in = _auto_burn_in(vm) if burn_spec == "auto" else float(burn_spec)
    epsilon = float(run_spec.get("epsilon", DEFAULT_EPSILON))
    decimation = int(run_spec.get("decimation", 100))
    scheme = str(run_spec.get("scheme", DEFAULT_SCHEME))
    master_seed = int(run_spec.get("master_seed", 0))

    rho0_diag = run_spec.get("rho0_diag")
    if rho0_diag is None:
        rho0 = np.eye(vm.dim, dtype=complex) / vm.dim
    else:
        p = np.asarray(rho0_diag, dtype=float)
        if len(p) != vm.dim or p.min() < 0 or abs(p.sum() - 1.0) > 1e-9:
            raise ConfigError('"run.rho0_diag" must be a probability vector of length dim')
        rho0 = np.diag(p.astype(complex))
    collapse_window = float(run_spec.get("collapse_window", horizon))

    outputs = dict(raw.get("outputs", {}))
    out_dir = outputs.get("dir", "jumplab_run")

    return ExperimentConfig(
        model=model,
        validated=vm,
        run=RunParams(
            dt=dt,
            horizon=horizon,
            n_trajectories=n_traj,
            master_seed=master_seed,
            decimation=decimation,
            epsilon=epsilon,
            burn_in=burn_in,
            scheme=scheme,
            rho0=rho0,
            collapse_window=collapse_window,
        ),
        out_dir=out_dir,
        save_trajectories=bool(outputs.get("save_trajectories", False)),
        save_qy=bool(outputs.get("save_qy", False)),
        raw=raw,
    )


def _dump_json(doc: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def analytic_block(vm: ValidatedModel) -> dict:
    """Generator, stationary distribution, and mechanism report for a model."""
    tensors = decompose(vm)
    report = validate_scaling(vm)
    gen = jump_rates(tensors, vm.setup)
    try:
        pi = stationary(gen)
    except ReducibleError:
        pi = None
    doc = {
        "schema_version": SCHEMA_VERSION,
        "generator": generator_to_json(gen, pi, report.mechanisms),
        "scaling_report": report.to_dict(),
    }
    return doc


def cmd_rates(config: ExperimentConfig) -> int:
    os.makedirs(config.out_dir, exist_ok=True)
    doc = analytic_block(config.validated)
    _dump_json(config.raw, os.path.join(config.out_dir, "config.json"))
    _dump_json(doc, os.path.join(config.out_dir, "rates.json"))
    return 0


def _mean_q_csv(mq: MeanQ, path: str) -> None:
    d = mq.mean.shape[1]
    header = "t," + ",".join(f"meanQ_{i}" for i in range(d)) + "," + ",".join(
        f"seQ_{i}" for i in range(d)
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for k in range(len(mq.times)):
            cells = [f"{mq.times[k]:.15g}"]
            cells += [f"{v:.15g}" for v in mq.mean[k]]
            cells += [f"{v:.15g}" for v in mq.se[k]]
            fh.write(",".join(cells) + "\n")


def _complex_pair(z: complex) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def cmd_simulate(config: ExperimentConfig) -> int:
    vm = config.validated
    run = config.run
    os.makedirs(config.out_dir, exist_ok=True)
    _dump_json(config.raw, os.path.join(config.out_dir, "config.json"))

    analytic = analytic_block(vm)
    _dump_json(analytic, os.path.join(config.out_dir, "rates.json"))
    gen = RateGenerator(dim=vm.dim, m=np.asarray(analytic["generator"]["m"]))

    trajectories = run_sme_ensemble(
        vm,
        run.rho0,
        run.dt,
        run.horizon,
        run.n_trajectories,
        run.master_seed,
        decimation=run.decimation,
        scheme=run.scheme,
    )

    paths = [detect_jumps_trajectory(t, run.epsilon) for t in trajectories]
    summary = {
        "schema_version": SCHEMA_VERSION,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        "model": model_to_dict(config.model),
        "run": {
            "dt": run.dt,
            "horizon": run.horizon,
            "n_trajectories": run.n_trajectories,
            "master_seed": run.master_seed,
            "decimation": run.decimation,
            "epsilon": run.epsilon,
            "burn_in": run.burn_in,
            "scheme": run.scheme,
        },
        "analytic": analytic,
        "no_collapse_fraction": no_collapse_fraction(paths),
    }

    try:
        stats = estimate_generator(paths)
        summary["empirical"] = stats.to_dict()
        summary["z_scores"] = [[float(x) for x in row] for row in z_scores(stats, gen)]
    except EmptyEnsembleError as exc:
        summary["empirical"] = None
        summary["empirical_note"] = str(exc)

    try:
        freq = collapse_frequencies(paths, run.collapse_window)
        summary["collapse_frequencies"] = [float(x) for x in freq]
    except (NoCollapseError, EmptyEnsembleError) as exc:
        summary["collapse_frequencies"] = None
        summary["collapse_note"] = str(exc)

    mq = ensemble_mean_q(trajectories)
    _mean_q_csv(mq, os.path.join(config.out_dir, "meanq.csv"))

    if config.save_trajectories:
        tdir = os.path.join(config.out_dir, "trajectories")
        os.makedirs(tdir, exist_ok=True)
        for k, traj in enumerate(trajectories):
            write_trajectory_csv(traj, os.path.join(tdir, f"traj_{k:05d}.csv"))

    if config.save_qy:
        tensors = decompose(vm)
        q0 = np.diag(run.rho0).real
        qy_trajs = run_qy_ensemble(
            tensors,
            vm.setup,
            q0,
            run.dt,
            run.horizon,
            run.n_trajectories,
            run.master_seed,
            decimation=run.decimation,
        )
        qdir = os.path.join(config.out_dir, "qy")
        os.makedirs(qdir, exist_ok=True)
        for k, traj in enumerate(qy_trajs):
            write_qy_csv(traj, os.path.join(qdir, f"qy_{k:05d}.csv"))
        phase = {}
        for state in range(vm.dim):
            try:
                cpm = conditional_phase_mean(
                    qy_trajs, state, run.epsilon, run.burn_in
                )
                phase[str(state)] = {
                    "mean": [[_complex_pair(z) for z in row] for row in cpm.mean],
                    "se": [[float(x) for x in row] for row in cpm.se],
                    "n_samples": cpm.n_samples,
                }
            except JumplabError as exc:
                phase[str(state)] = {"error": exc.code, "message": str(exc)}
        summary["conditional_phase"] = phase

    _dump_json(summary, os.path.join(config.out_dir, "summary.json"))
    return 0


def _zeno_variant(model: LindbladModel, gamma: float, mode: str) -> ValidatedModel:
    """Model at measurement strength gamma for a sweep.

    "rescaled" keeps the generator slots fixed (rates gamma-independent);
    "fixed" holds the physical generator fixed by dividing each slot by its
    gamma power.
    """
    setup = MeasurementSetup(nu=model.setup.nu, gamma=gamma, eta=model.setup.eta)
    if mode == "rescaled":
        variant = LindbladModel(
            h1=model.h1, h2diag=model.h2diag, na_ops=model.na_ops,
            nb_diags=model.nb_diags, setup=setup,
        )
    elif mode == "fixed":
        variant = LindbladModel(
            h1=model.h1 / gamma,
            h2diag=model.h2diag / (gamma * gamma),
            na_ops=model.na_ops,
            nb_diags=tuple(b / gamma for b in model.nb_diags),
            setup=setup,
        )
    else:
        raise ConfigError(f"unknown zeno mode {mode!r}")
    return validate_model(variant)


def cmd_zeno(config: ExperimentConfig, gammas: list, mode: str) -> int:
    if len(gammas) < 2:
        raise ConfigError("zeno sweep needs at least two gamma values")
    run = config.run
    os.makedirs(config.out_dir, exist_ok=True)
    _dump_json(config.raw, os.path.join(config.out_dir, "config.json"))

    rows = []
    for gamma in gammas:
        vm = _zeno_variant(config.model, gamma, mode)
        dt = _auto_dt(gamma) if config.raw.get("run", {}).get("dt", "auto") == "auto" else run.dt
        trajectories = run_sme_ensemble(
            vm, run.rho0, dt, run.horizon, run.n_trajectories, run.master_seed,
            decimation=run.decimation, scheme=run.scheme,
        )
        paths = [detect_jumps_trajectory(t, run.epsilon) for t in trajectories]
        try:
            stats = estimate_generator(paths)
            n_trans = int(stats.transition_counts.sum())
            total_dwell = float(stats.dwell_time_totals.sum())
            mean_dwell = total_dwell / n_trans if n_trans else float("nan")
            m_hat = stats.m_hat
        except EmptyEnsembleError:
            n_trans, total_dwell, mean_dwell = 0, 0.0, float("nan")
            m_hat = np.zeros((vm.dim, vm.dim))
        row = {
            "gamma": gamma,
            "mode": mode,
            "dt": dt,
            "transitions": n_trans,
            "total_dwell": total_dwell,
            "mean_dwell": mean_dwell,
            "m_hat": m_hat,
        }
        rows.append(row)

    d = config.validated.dim
    pairs = [(i, j) for i in range(d) for j in range(d) if i != j]
    header = "gamma,mode,dt,transitions,total_dwell,mean_dwell," + ",".join(
        f"m_hat_{i}_{j}" for i, j in pairs
    )
    with open(os.path.join(config.out_dir, "sweep.csv"), "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            cells = [
                f"{row['gamma']:.15g}",
                row["mode"],
                f"{row['dt']:.15g}",
                str(row["transitions"]),
                f"{row['total_dwell']:.15g}",
                f"{row['mean_dwell']:.15g}",
            ]
            cells += [f"{row['m_hat'][i, j]:.15g}" for i, j in pairs]
            fh.write(",".join(cells) + "\n")
    return 0


def _emit_error(exc: JumplabError) -> None:
    sys.stderr.write(json.dumps({"error": exc.code, "message": str(exc)}) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="jumplab",
        description="Analytic jump rates for tightly measured open systems, "
        "with trajectory-ensemble verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_rates = sub.add_parser("rates", help="compute the analytic generator")
    p_rates.add_argument("-c", "--config", required=True)

    p_sim = sub.add_parser("simulate", help="run a trajectory ensemble")
    p_sim.add_argument("-c", "--config", required=True)

    p_zeno = sub.add_parser("zeno", help="sweep the measurement strength")
    p_zeno.add_argument("-c", "--config", required=True)
    p_zeno.add_argument("--gammas", required=True, help="comma-separated gamma values")
    p_zeno.add_argument("--mode", choices=("fixed", "rescaled"), default="fixed")

    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        if args.command == "rates":
            return cmd_rates(config)
        if args.command == "simulate":
            return cmd_simulate(config)
        gammas = [float(g) for g in args.gammas.split(",") if g.strip()]
        return cmd_zeno(config, gammas, args.mode)
    except (PositivityBreachError, StabilityGuardError) as exc:
        _emit_error(exc)
        return 3
    except JumplabError as exc:
        _emit_error(exc)
        return 2
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "io", "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
