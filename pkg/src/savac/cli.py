"""Command line front end.

Subcommands: ``run`` (single path with run log and optional field dumps),
``mc`` (ensemble strong errors), ``eoc`` (ladder errors with observed
orders), ``rtrack`` (auxiliary tracking study), ``check`` (quick oracle and
invariant suite).  Every failure exits nonzero with a one-line error on
stderr; all outputs land in the resolved output directory (--out flag, else
SAV_SPDE_OUT, else the configured directory).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfg
from .errors import SavacError
from .mc import (
    r_tracking_study,
    run_ensemble,
    write_eoc_csv,
    write_errors_csv,
    write_tracking_csv,
)
from .mesh import build_torus_mesh
from .noise import coarsen, default_modes, generate_increments, total_displacement
from .potential import PotentialParams, noise_coefficient
from .profiles import cosine_profile
from .sav import (
    dense_oracle_step,
    initial_state,
    prepare_operators,
    run_path,
    sav_step,
)


def _fmt(value: float) -> str:
    return f"{value:.12e}"


def _resolve_out_dir(args, config: cfg.RunConfig) -> Path:
    if args.out is not None:
        out = Path(args.out)
    elif os.environ.get("SAV_SPDE_OUT"):
        out = Path(os.environ["SAV_SPDE_OUT"])
    else:
        out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_overrides(config: cfg.RunConfig, args) -> cfg.RunConfig:
    updates = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.samples is not None:
        updates["samples"] = args.samples
    if args.workers is not None:
        updates["workers"] = args.workers
    return replace(config, **updates) if updates else config


def _write_runlog(result, path: Path) -> None:
    lines = ["step,time,r,sqrt_Eh,E_sav,cg_iters"]
    for n in range(len(result.times)):
        iters = 0 if n == 0 else int(result.cg_iterations[n - 1])
        lines.append(",".join([
            str(n),
            _fmt(result.times[n]),
            _fmt(result.r[n]),
            _fmt(result.sqrt_energy[n]),
            _fmt(result.sav_energy[n]),
            str(iters),
        ]))
    path.write_text("\n".join(lines) + "\n")


def _write_field(mesh, phi: np.ndarray, path: Path) -> None:
    if mesh.dim == 1:
        lines = ["node_index,x,phi"]
        for i in range(mesh.node_count):
            lines.append(f"{i},{_fmt(mesh.nodes[i, 0])},{_fmt(phi[i])}")
    else:
        lines = ["node_index,x,y,phi"]
        for i in range(mesh.node_count):
            lines.append(
                f"{i},{_fmt(mesh.nodes[i, 0])},{_fmt(mesh.nodes[i, 1])},"
                f"{_fmt(phi[i])}"
            )
    path.write_text("\n".join(lines) + "\n")


def _write_noise_dump(path_obj, sample_id: int, out_path: Path) -> None:
    lines = ["sample,mode_rank,step,increment"]
    increments = path_obj.increments
    for rank in range(increments.shape[0]):
        for step in range(increments.shape[1]):
            lines.append(
                f"{sample_id},{rank},{step},{_fmt(increments[rank, step])}"
            )
    out_path.write_text("\n".join(lines) + "\n")


def _cmd_run(config: cfg.RunConfig, out_dir: Path) -> int:
    mesh = build_torus_mesh(config.dim, config.level)
    params = cfg.potential_params(config)
    ops = prepare_operators(mesh, params, config.tau,
                            cfg.solver_options(config))
    phi0 = cfg.initial_profile(config)(mesh)
    model = cfg.noise_model(config)
    path = None
    if model is not None:
        path = generate_increments(model, 0, config.n_steps, config.tau)
        if config.noise_dump:
            _write_noise_dump(path, 0, out_dir / "noise.csv")
    stride = config.snapshot_every or None
    result = run_path(phi0, ops, config.n_steps, model=model, path=path,
                      snapshot_every=stride)
    _write_runlog(result, out_dir / "run.csv")
    _write_field(mesh, phi0, out_dir / "field_000000.csv")
    if result.snapshots is not None:
        for i, step in enumerate(result.snapshot_steps):
            _write_field(mesh, result.snapshots[i],
                         out_dir / f"field_{int(step):06d}.csv")
    print(f"run: {config.n_steps} steps on a {config.dim}-D level "
          f"{config.level} mesh, final r = {result.state.r:.6e}, "
          f"outputs in {out_dir}")
    return 0


def _cmd_mc(config: cfg.RunConfig, out_dir: Path) -> int:
    report = run_ensemble(cfg.experiment_plan(config), cfg.problem(config),
                          workers=config.workers)
    write_errors_csv(report, out_dir / "mc_errors.csv")
    print(f"mc: {report.samples} samples over {len(report.levels)} rungs, "
          f"E_tot finest = {report.err_tot[0]:.6e}, outputs in {out_dir}")
    return 0


def _cmd_eoc(config: cfg.RunConfig, out_dir: Path) -> int:
    report = run_ensemble(cfg.experiment_plan(config), cfg.problem(config),
                          workers=config.workers)
    write_eoc_csv(report, out_dir / "eoc.csv")
    orders = ", ".join("-" if not np.isfinite(v) else f"{v:.3f}"
                       for v in report.eoc_tot)
    print(f"eoc: {report.samples} samples, EOC_tot per rung = [{orders}], "
          f"outputs in {out_dir}")
    return 0


def _cmd_rtrack(config: cfg.RunConfig, out_dir: Path) -> int:
    report = r_tracking_study(cfg.tracking_plan(config), cfg.problem(config),
                              workers=config.workers)
    write_tracking_csv(report, out_dir / "rtrack.csv")
    orders = ", ".join("-" if not np.isfinite(v) else f"{v:.3f}"
                       for v in report.orders)
    print(f"rtrack: {report.samples} samples, observed orders = [{orders}], "
          f"outputs in {out_dir}")
    return 0


def _check_dense_oracle() -> None:
    mesh = build_torus_mesh(1, 3)
    params = PotentialParams(gamma=1e-5, epsilon=1.0)
    ops = prepare_operators(mesh, params, 1e-3)
    rng = np.random.default_rng(2024)
    fast = initial_state(rng.normal(0.0, 0.5, mesh.node_count), ops)
    slow = fast
    for _ in range(10):
        noise_term = noise_coefficient(fast.phi, params) \
            * rng.normal(0.0, 0.02, mesh.node_count)
        fast, _ = sav_step(fast, noise_term, ops)
        slow = dense_oracle_step(slow, noise_term, ops)
        gap = max(float(np.max(np.abs(fast.phi - slow.phi))),
                  abs(fast.r - slow.r))
        if gap > 1e-10:
            raise AssertionError(f"two-solve path deviates from the dense "
                                 f"oracle by {gap:.3e}")


def _check_fixed_point() -> None:
    mesh = build_torus_mesh(1, 4)
    params = PotentialParams(gamma=1e-5, epsilon=1.0)
    ops = prepare_operators(mesh, params, 1e-3)
    zero = np.zeros(mesh.node_count)
    for value in (1.0, -1.0):
        state = initial_state(np.full(mesh.node_count, value), ops)
        r0 = state.r
        for _ in range(20):
            state, _ = sav_step(state, zero, ops)
        if not (np.all(state.phi == value) and state.r == r0):
            raise AssertionError(f"pure phase {value:+.0f} drifted")


def _check_energy_decay() -> None:
    mesh = build_torus_mesh(1, 5)
    params = PotentialParams(gamma=1e-5, epsilon=1.0)
    ops = prepare_operators(mesh, params, 1e-3)
    phi0 = cosine_profile(0.8)(mesh)
    result = run_path(phi0, ops, 50)
    worst = float(np.max(np.diff(result.sav_energy)))
    if worst > 1e-12:
        raise AssertionError(f"modified energy increased by {worst:.3e}")


def _check_coarsening() -> None:
    from .noise import NoiseModel

    model = NoiseModel(1, default_modes(1), master_seed=0)
    fine = generate_increments(model, 0, 64, 1e-4)
    coarse = coarsen(fine, 8)
    gap = float(np.max(np.abs(total_displacement(coarse)
                              - total_displacement(fine))))
    if gap > 1e-14:
        raise AssertionError(f"coarsening displacement gap {gap:.3e}")


def _check_orthonormality() -> None:
    from .noise import eigenfunction

    x = np.linspace(0.0, 1.0, 1 << 10, endpoint=False)
    ks = range(-3, 4)
    table = np.stack([eigenfunction(k, x) for k in ks])
    gram = table @ table.T / x.size
    gap = float(np.max(np.abs(gram - np.eye(len(list(ks))))))
    if gap > 1e-12:
        raise AssertionError(f"mode Gram matrix off by {gap:.3e}")


def _cmd_check(config: cfg.RunConfig, out_dir: Path) -> int:
    checks = [
        ("dense-oracle equivalence", _check_dense_oracle),
        ("pure-phase fixed points", _check_fixed_point),
        ("deterministic energy decay", _check_energy_decay),
        ("noise coarsening checksum", _check_coarsening),
        ("mode orthonormality", _check_orthonormality),
    ]
    failures = 0
    for name, check in checks:
        try:
            check()
        except Exception as exc:  # report every failing check, then exit
            failures += 1
            print(f"FAIL  {name}: {exc}")
        else:
            print(f"PASS  {name}")
    if failures:
        print(f"check: {failures} of {len(checks)} checks failed",
              file=sys.stderr)
        return 1
    print(f"check: all {len(checks)} checks passed")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "mc": _cmd_mc,
    "eoc": _cmd_eoc,
    "rtrack": _cmd_rtrack,
    "check": _cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="savac",
        description="Stochastic phase-field solver with an auxiliary-scalar "
                    "scheme: path simulation and strong-convergence studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "run": "simulate a single path and write the run log",
        "mc": "ensemble strong errors over the configured ladder",
        "eoc": "ladder errors with observed convergence orders",
        "rtrack": "auxiliary tracking error under step refinement",
        "check": "run the built-in oracle and invariant checks",
    }
    for name, info in descriptions.items():
        p = sub.add_parser(name, help=info, description=info)
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the master seed")
        p.add_argument("--samples", type=int, default=None,
                       help="override the sample count")
        p.add_argument("--workers", type=int, default=None,
                       help="override the worker count")
        p.add_argument("--out", default=None,
                       help="output directory (default: SAV_SPDE_OUT or the "
                            "configured directory)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _apply_overrides(cfg.parse_config(args.config), args)
        out_dir = _resolve_out_dir(args, config)
        return _COMMANDS[args.command](config, out_dir)
    except FileNotFoundError as exc:
        print(f"error: config file not found: {exc.filename}",
              file=sys.stderr)
        return 1
    except SavacError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
