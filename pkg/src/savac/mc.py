"""Monte Carlo strong-error measurement on a mesh / time-step ladder.

A reference trajectory on a fine mesh with a fine time step is compared
against coarse reruns driven by the same Brownian increments, aggregated by
block summation so every rung sees the identical path.  Errors are measured
on the reference mesh after nodal prolongation, on the comparison time grid
of the coarsest rung:

    E_L2  = sqrt( max_n  mean_S ||e_n||_{lumped L2}^2 )
    E_H1  = sqrt( tau_c * sum_n mean_S ||e_n||_{H1}^2 )
    E_tot = sqrt( E_L2^2 + E_H1^2 )

Workers split the ensemble by sample id; the per-mode counter-based seeding
makes every sample's path independent of the worker layout, and the sorted
reduction makes the result byte-identical for any worker count.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, EnsembleError, PathError, SavacError
from .fem import assemble_lumped_mass, assemble_stiffness
from .linalg import SolverOptions
from .mesh import TorusMesh, build_torus_mesh, prolong
from .noise import (
    ModeSpec,
    NoiseModel,
    coarsen,
    generate_increments,
    total_displacement,
)
from .potential import PotentialParams
from .sav import StepOperators, prepare_operators, run_path

CHECKSUM_RTOL = 1e-12


@dataclass(frozen=True)
class LadderRung:
    """One coarse resolution: mesh level and time-step multiple.

    The rung integrates with tau = tau_factor * tau_ref where tau_ref is the
    reference step size.
    """

    level: int
    tau_factor: int

    def __post_init__(self):
        violations = []
        if not isinstance(self.level, (int, np.integer)) or self.level < 1:
            violations.append(f"rung level must be a positive integer, "
                              f"got {self.level!r}")
        if (not isinstance(self.tau_factor, (int, np.integer))
                or self.tau_factor < 1):
            violations.append(f"rung tau factor must be a positive integer, "
                              f"got {self.tau_factor!r}")
        if violations:
            raise ConfigError(violations)


@dataclass(frozen=True)
class ExperimentPlan:
    """Ladder description for a strong-error study.

    Rungs are ordered finest first.  Every rung must be strictly coarser
    than the reference in both mesh and time step, so the reference is never
    compared against itself; tau factors must divide the reference step
    count and each other's maximum so all comparison times land on common
    step indices.
    """

    dim: int
    final_time: float
    n_fine: int
    ref_level: int
    rungs: tuple
    samples: int
    master_seed: int

    def __post_init__(self):
        violations = []
        if self.dim not in (1, 2):
            violations.append(f"dim must be 1 or 2, got {self.dim!r}")
        if not (isinstance(self.final_time, (int, float))
                and np.isfinite(self.final_time) and self.final_time > 0):
            violations.append(f"final_time must be positive and finite, "
                              f"got {self.final_time!r}")
        if not isinstance(self.n_fine, (int, np.integer)) or self.n_fine < 1:
            violations.append(f"n_fine must be a positive integer, "
                              f"got {self.n_fine!r}")
        if (not isinstance(self.ref_level, (int, np.integer))
                or self.ref_level < 1):
            violations.append(f"ref_level must be a positive integer, "
                              f"got {self.ref_level!r}")
        if not self.rungs:
            violations.append("at least one ladder rung is required")
        object.__setattr__(self, "rungs", tuple(self.rungs))
        for rung in self.rungs:
            if not isinstance(rung, LadderRung):
                violations.append(f"rungs must be LadderRung instances, "
                                  f"got {rung!r}")
                continue
            if (isinstance(self.ref_level, (int, np.integer))
                    and rung.level >= self.ref_level):
                violations.append(
                    f"rung level {rung.level} is not strictly coarser than "
                    f"the reference level {self.ref_level}"
                )
            if rung.tau_factor < 2:
                violations.append(
                    f"rung tau factor {rung.tau_factor} must be at least 2 "
                    f"so the reference step stays strictly finer"
                )
            if (isinstance(self.n_fine, (int, np.integer))
                    and self.n_fine % rung.tau_factor):
                violations.append(
                    f"rung tau factor {rung.tau_factor} does not divide the "
                    f"reference step count {self.n_fine}"
                )
        levels = [r.level for r in self.rungs if isinstance(r, LadderRung)]
        factors = [r.tau_factor for r in self.rungs if isinstance(r, LadderRung)]
        if levels and sorted(set(levels), reverse=True) != levels:
            violations.append(
                f"rungs must be ordered finest first with strictly "
                f"decreasing levels, got {levels}"
            )
        if factors and sorted(set(factors)) != factors:
            violations.append(
                f"rung tau factors must strictly increase from finest to "
                f"coarsest, got {factors}"
            )
        if factors and any(max(factors) % f for f in factors):
            violations.append(
                f"every tau factor must divide the coarsest one "
                f"{max(factors)} so comparison times align, got {factors}"
            )
        if not isinstance(self.samples, (int, np.integer)) or self.samples < 1:
            violations.append(f"samples must be a positive integer, "
                              f"got {self.samples!r}")
        if (not isinstance(self.master_seed, (int, np.integer))
                or self.master_seed < 0):
            violations.append(f"master_seed must be a nonnegative integer, "
                              f"got {self.master_seed!r}")
        if violations:
            raise ConfigError(violations)

    @property
    def tau_ref(self) -> float:
        return self.final_time / self.n_fine

    @property
    def comparison_factor(self) -> int:
        return max(r.tau_factor for r in self.rungs)

    @property
    def comparison_steps(self) -> int:
        return self.n_fine // self.comparison_factor


@dataclass(frozen=True)
class Problem:
    """Physics of a run: potential, noise spectrum, initial data, solver."""

    params: PotentialParams
    modes: tuple
    initial: Callable[[TorusMesh], np.ndarray]
    solver: SolverOptions = field(default_factory=SolverOptions)
    noise_enabled: bool = True

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        violations = []
        if self.noise_enabled and not self.modes:
            violations.append("noise is enabled but the mode list is empty")
        for mode in self.modes:
            if not isinstance(mode, ModeSpec):
                violations.append(f"modes must be ModeSpec instances, "
                                  f"got {mode!r}")
        if not callable(self.initial):
            violations.append(f"initial must be callable, got {self.initial!r}")
        if violations:
            raise ConfigError(violations)


@dataclass(frozen=True)
class ErrorReport:
    """Strong errors per rung, finest first, with tau-normalized orders.

    ``eoc_*`` holds NaN in the first slot; entry i compares rung i against
    the next finer rung i-1, normalized by the tau ratio so the value is an
    order per time-step doubling.
    """

    levels: tuple
    spacings: np.ndarray
    taus: np.ndarray
    err_l2: np.ndarray
    err_h1: np.ndarray
    err_tot: np.ndarray
    eoc_l2: np.ndarray
    eoc_h1: np.ndarray
    eoc_tot: np.ndarray
    samples: int


@dataclass(frozen=True)
class TrackingPlan:
    """Step-size refinement study of the auxiliary tracking gap.

    All runs share one mesh; the step size is tau_ref * factor for each
    entry of ``factors`` (strictly decreasing, so rows go coarse to fine).
    """

    dim: int
    level: int
    final_time: float
    n_fine: int
    factors: tuple
    samples: int
    master_seed: int

    def __post_init__(self):
        violations = []
        if self.dim not in (1, 2):
            violations.append(f"dim must be 1 or 2, got {self.dim!r}")
        if not isinstance(self.level, (int, np.integer)) or self.level < 1:
            violations.append(f"level must be a positive integer, "
                              f"got {self.level!r}")
        if not (isinstance(self.final_time, (int, float))
                and np.isfinite(self.final_time) and self.final_time > 0):
            violations.append(f"final_time must be positive and finite, "
                              f"got {self.final_time!r}")
        if not isinstance(self.n_fine, (int, np.integer)) or self.n_fine < 1:
            violations.append(f"n_fine must be a positive integer, "
                              f"got {self.n_fine!r}")
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            violations.append("at least one step factor is required")
        for f in self.factors:
            if not isinstance(f, (int, np.integer)) or f < 1:
                violations.append(f"step factors must be positive integers, "
                                  f"got {f!r}")
            elif (isinstance(self.n_fine, (int, np.integer))
                    and self.n_fine % f):
                violations.append(f"step factor {f} does not divide the fine "
                                  f"step count {self.n_fine}")
        ints = [f for f in self.factors if isinstance(f, (int, np.integer))]
        if ints and sorted(set(ints), reverse=True) != ints:
            violations.append(f"step factors must strictly decrease, "
                              f"got {list(self.factors)}")
        if not isinstance(self.samples, (int, np.integer)) or self.samples < 1:
            violations.append(f"samples must be a positive integer, "
                              f"got {self.samples!r}")
        if (not isinstance(self.master_seed, (int, np.integer))
                or self.master_seed < 0):
            violations.append(f"master_seed must be a nonnegative integer, "
                              f"got {self.master_seed!r}")
        if violations:
            raise ConfigError(violations)

    @property
    def tau_ref(self) -> float:
        return self.final_time / self.n_fine


@dataclass(frozen=True)
class TrackingReport:
    """Mean over samples of max_n |r_n - sqrt(E_h(phi_n))| per step size.

    Rows go from the largest tau to the smallest; ``orders`` holds NaN in
    the first slot and the per-halving order log2(e_prev / e_i) /
    log2(tau_prev / tau_i) afterwards.
    """

    taus: np.ndarray
    mean_errors: np.ndarray
    orders: np.ndarray
    samples: int


def compute_eoc(errors) -> np.ndarray:
    """Observed orders between consecutive errors, finest first.

    ``errors[i]`` belongs to a resolution twice as fine as ``errors[i+1]``;
    the result has one entry per adjacent pair, log2(errors[i+1] /
    errors[i]).  Degenerate (zero or negative) errors yield NaN entries.
    """
    e = np.asarray(errors, dtype=float)
    if e.ndim != 1 or e.size < 2:
        raise ValueError("compute_eoc needs a 1-D sequence of at least "
                         "two errors")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log2(e[1:] / e[:-1])


def _normalized_orders(errors: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """Per-doubling orders with NaN leading entry, normalized by tau ratios."""
    out = np.full(errors.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[1:] = np.log2(errors[1:] / errors[:-1]) \
            / np.log2(taus[1:] / taus[:-1])
    return out


def _verify_checksum(coarse_disp: np.ndarray, fine_disp: np.ndarray,
                     sample_id: int) -> None:
    """Block-summed increments must reproduce the fine path's displacement."""
    if not np.allclose(coarse_disp, fine_disp, rtol=CHECKSUM_RTOL, atol=1e-14):
        gap = float(np.max(np.abs(coarse_disp - fine_disp)))
        raise EnsembleError(
            sample_id,
            f"coarsened noise path diverged from the fine path "
            f"(max displacement gap {gap:.3e})"
        )


def _squared_error_series(diff: np.ndarray, mass_diag: np.ndarray,
                          stiff) -> np.ndarray:
    """Per-time lumped L2 and full H1 squared norms of a (T, n) series.

    Returns an array of shape (2, T); tiny negative roundoff in the
    seminorm is clipped at zero.
    """
    l2 = (diff * diff) @ mass_diag
    semi = np.einsum("tn,nt->t", diff, stiff @ diff.T)
    return np.stack([l2, np.maximum(l2 + semi, 0.0)])


# worker context, inherited by forked pool processes
_CTX = None


@dataclass
class _EocContext:
    plan: ExperimentPlan
    problem: Problem
    model: NoiseModel | None
    ref_mesh: TorusMesh
    ref_ops: StepOperators
    ref_phi0: np.ndarray
    ref_mass_diag: np.ndarray
    ref_stiff: object
    rung_meshes: list
    rung_ops: list
    rung_phi0: list
    rung_strides: list


def _build_eoc_context(plan: ExperimentPlan, problem: Problem) -> _EocContext:
    ref_mesh = build_torus_mesh(plan.dim, plan.ref_level)
    ref_ops = prepare_operators(ref_mesh, problem.params, plan.tau_ref,
                                problem.solver)
    model = (NoiseModel(plan.dim, problem.modes, plan.master_seed)
             if problem.noise_enabled else None)
    rung_meshes, rung_ops, rung_phi0, rung_strides = [], [], [], []
    for rung in plan.rungs:
        mesh = build_torus_mesh(plan.dim, rung.level)
        # the rung tau must equal factor * tau_ref bit for bit, because the
        # coarsened path carries exactly that product
        ops = prepare_operators(mesh, problem.params,
                                rung.tau_factor * plan.tau_ref,
                                problem.solver)
        rung_meshes.append(mesh)
        rung_ops.append(ops)
        rung_phi0.append(problem.initial(mesh))
        rung_strides.append(plan.comparison_factor // rung.tau_factor)
    return _EocContext(
        plan=plan,
        problem=problem,
        model=model,
        ref_mesh=ref_mesh,
        ref_ops=ref_ops,
        ref_phi0=problem.initial(ref_mesh),
        ref_mass_diag=assemble_lumped_mass(ref_mesh).diag,
        ref_stiff=assemble_stiffness(ref_mesh),
        rung_meshes=rung_meshes,
        rung_ops=rung_ops,
        rung_phi0=rung_phi0,
        rung_strides=rung_strides,
    )


def _eoc_sample(sample_id: int):
    ctx = _CTX
    plan, problem = ctx.plan, ctx.problem
    try:
        if ctx.model is not None:
            fine_path = generate_increments(ctx.model, sample_id, plan.n_fine,
                                            plan.tau_ref)
            fine_disp = total_displacement(fine_path)
        else:
            fine_path = None
        ref = run_path(ctx.ref_phi0, ctx.ref_ops, plan.n_fine,
                       model=ctx.model, path=fine_path,
                       snapshot_every=plan.comparison_factor)
        payload = np.empty((len(plan.rungs), 2, plan.comparison_steps))
        for i, rung in enumerate(plan.rungs):
            if fine_path is not None:
                path = coarsen(fine_path, rung.tau_factor)
                _verify_checksum(total_displacement(path), fine_disp,
                                 sample_id)
            else:
                path = None
            result = run_path(ctx.rung_phi0[i], ctx.rung_ops[i],
                              plan.n_fine // rung.tau_factor,
                              model=ctx.model, path=path,
                              snapshot_every=ctx.rung_strides[i])
            lifted = prolong(result.snapshots, ctx.rung_meshes[i],
                             ctx.ref_mesh)
            payload[i] = _squared_error_series(lifted - ref.snapshots,
                                               ctx.ref_mass_diag,
                                               ctx.ref_stiff)
        return sample_id, payload
    except EnsembleError:
        raise
    except (PathError, SavacError) as exc:
        raise EnsembleError(sample_id, str(exc)) from exc


def _map_samples(worker, n_samples: int, workers: int):
    """Run ``worker`` over sample ids, inline or in a fork pool.

    Results are returned sorted by sample id so reductions are byte
    identical for every worker count.
    """
    if workers < 1:
        raise ConfigError([f"workers must be a positive integer, "
                           f"got {workers!r}"])
    if workers == 1:
        results = [worker(s) for s in range(n_samples)]
    else:
        pool_ctx = multiprocessing.get_context("fork")
        with pool_ctx.Pool(processes=workers) as pool:
            results = pool.map(worker, range(n_samples))
    results.sort(key=lambda item: item[0])
    return results


def run_ensemble(plan: ExperimentPlan, problem: Problem,
                 workers: int = 1) -> ErrorReport:
    """Estimate strong errors for every rung of the plan."""
    global _CTX
    _CTX = _build_eoc_context(plan, problem)
    try:
        results = _map_samples(_eoc_sample, plan.samples, workers)
    finally:
        _CTX = None
    acc = np.zeros((len(plan.rungs), 2, plan.comparison_steps))
    for _, payload in results:
        acc += payload
    mean = acc / plan.samples
    tau_comparison = plan.comparison_factor * plan.tau_ref
    err_l2 = np.sqrt(np.max(mean[:, 0, :], axis=1))
    err_h1 = np.sqrt(tau_comparison * np.sum(mean[:, 1, :], axis=1))
    err_tot = np.sqrt(err_l2**2 + err_h1**2)
    taus = np.array([r.tau_factor * plan.tau_ref for r in plan.rungs])
    return ErrorReport(
        levels=tuple(r.level for r in plan.rungs),
        spacings=np.array([0.5**r.level for r in plan.rungs]),
        taus=taus,
        err_l2=err_l2,
        err_h1=err_h1,
        err_tot=err_tot,
        eoc_l2=_normalized_orders(err_l2, taus),
        eoc_h1=_normalized_orders(err_h1, taus),
        eoc_tot=_normalized_orders(err_tot, taus),
        samples=plan.samples,
    )


@dataclass
class _TrackingContext:
    plan: TrackingPlan
    problem: Problem
    model: NoiseModel | None
    phi0: np.ndarray
    ops_by_factor: list


def _build_tracking_context(plan: TrackingPlan,
                            problem: Problem) -> _TrackingContext:
    mesh = build_torus_mesh(plan.dim, plan.level)
    model = (NoiseModel(plan.dim, problem.modes, plan.master_seed)
             if problem.noise_enabled else None)
    ops = [prepare_operators(mesh, problem.params, f * plan.tau_ref,
                             problem.solver) for f in plan.factors]
    return _TrackingContext(plan=plan, problem=problem, model=model,
                            phi0=problem.initial(mesh), ops_by_factor=ops)


def _tracking_sample(sample_id: int):
    ctx = _CTX
    plan = ctx.plan
    try:
        if ctx.model is not None:
            fine_path = generate_increments(ctx.model, sample_id, plan.n_fine,
                                            plan.tau_ref)
        values = np.empty(len(plan.factors))
        for i, factor in enumerate(plan.factors):
            path = coarsen(fine_path, factor) if ctx.model is not None else None
            result = run_path(ctx.phi0, ctx.ops_by_factor[i],
                              plan.n_fine // factor,
                              model=ctx.model, path=path)
            values[i] = float(np.max(result.tracking_error))
        return sample_id, values
    except (PathError, SavacError) as exc:
        raise EnsembleError(sample_id, str(exc)) from exc


def r_tracking_study(plan: TrackingPlan, problem: Problem,
                     workers: int = 1) -> TrackingReport:
    """Mean peak gap between r and sqrt(E_h) under step refinement."""
    global _CTX
    _CTX = _build_tracking_context(plan, problem)
    try:
        results = _map_samples(_tracking_sample, plan.samples, workers)
    finally:
        _CTX = None
    acc = np.zeros(len(plan.factors))
    for _, values in results:
        acc += values
    mean_errors = acc / plan.samples
    taus = np.array([f * plan.tau_ref for f in plan.factors])
    orders = np.full(len(plan.factors), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        orders[1:] = np.log2(mean_errors[:-1] / mean_errors[1:]) \
            / np.log2(taus[:-1] / taus[1:])
    return TrackingReport(taus=taus, mean_errors=mean_errors, orders=orders,
                          samples=plan.samples)


def _fmt(value: float) -> str:
    return "" if not np.isfinite(value) else f"{value:.12e}"


def write_eoc_csv(report: ErrorReport, path) -> None:
    """Ladder errors finest first; first-row order columns stay empty."""
    lines = ["level,h,tau,E_L2,EOC_L2,E_H1,EOC_H1,E_tot,EOC_tot,samples"]
    for i, level in enumerate(report.levels):
        lines.append(",".join([
            str(level),
            _fmt(report.spacings[i]),
            _fmt(report.taus[i]),
            _fmt(report.err_l2[i]),
            _fmt(report.eoc_l2[i]),
            _fmt(report.err_h1[i]),
            _fmt(report.eoc_h1[i]),
            _fmt(report.err_tot[i]),
            _fmt(report.eoc_tot[i]),
            str(report.samples),
        ]))
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(lines) + "\n")


def write_errors_csv(report: ErrorReport, path) -> None:
    """Plain ensemble errors finest first, without order columns."""
    lines = ["level,h,tau,E_L2,E_H1,E_tot,samples"]
    for i, level in enumerate(report.levels):
        lines.append(",".join([
            str(level),
            _fmt(report.spacings[i]),
            _fmt(report.taus[i]),
            _fmt(report.err_l2[i]),
            _fmt(report.err_h1[i]),
            _fmt(report.err_tot[i]),
            str(report.samples),
        ]))
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(lines) + "\n")


def write_tracking_csv(report: TrackingReport, path) -> None:
    """Tracking errors from the largest step down; first order entry empty."""
    lines = ["tau,mean_max_tracking_error,observed_order"]
    for i in range(len(report.taus)):
        lines.append(",".join([
            _fmt(report.taus[i]),
            _fmt(report.mean_errors[i]),
            _fmt(report.orders[i]),
        ]))
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(lines) + "\n")
