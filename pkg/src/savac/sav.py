"""Augmented auxiliary-scalar time stepping for the stochastic phase field.

One step advances (phi, r) where r tracks sqrt of the lumped potential
energy.  With E = E_h(phi), b = F'(phi) / (eps sqrt(E)) the classic scalar
auxiliary scheme couples

    M phi_new + tau eps K phi_new + tau r_new c = M (phi + noise)
    r_new = r + (c / 2) . (phi_new - phi)

where the coefficient vector c augments the deterministic m b by half the
directional derivative of b along the noise increment; this correction is
what keeps r tracking sqrt(E_h) at first order in the presence of
multiplicative noise.  The linear system is symmetric positive definite, so
the coupled step reduces to two conjugate-gradient solves and a scalar
update.

``dense_oracle_step`` solves the coupled (N+1) x (N+1) system directly with
a dense factorization and shares no linear algebra with ``sav_step``; it is
the correctness oracle for the fast path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import PathError, SingularStepError, SolverError
from .fem import (
    LumpedMass,
    _check_length,
    assemble_lumped_mass,
    assemble_stiffness,
)
from .linalg import SolverOptions, SparseSymOperator, cg_solve
from .mesh import TorusMesh
from .noise import NoiseModel, NoisePath, mode_table
from .potential import (
    PotentialParams,
    double_well_prime,
    double_well_second,
    lumped_energy,
    noise_coefficient,
    sav_energy,
)

DENSE_ORACLE_MAX_NODES = 4096


@dataclass(frozen=True)
class StepCoefficients:
    """Per-step scalars and vectors entering the coupled system.

    energy     lumped potential energy E of the previous iterate
    coupling   a = sum_j m_j (F'(phi_j)/eps) n_j, the energy derivative
               along the noise increment
    noise      nodal noise increment n = rho(phi) * w
    aug        xi, half the directional derivative of F'(phi)/(eps sqrt(E))
    rvec       c = m * (F'(phi)/(eps sqrt(E)) + xi)
    """

    energy: float
    coupling: float
    noise: np.ndarray
    aug: np.ndarray
    rvec: np.ndarray


@dataclass(frozen=True)
class StepOperators:
    """Mesh-level objects shared by every step of a run."""

    mesh: TorusMesh
    mass: LumpedMass
    stiffness: sp.csr_matrix
    system: SparseSymOperator
    tau: float
    params: PotentialParams
    solver: SolverOptions


@dataclass(frozen=True)
class SavState:
    phi: np.ndarray
    r: float


def prepare_operators(mesh: TorusMesh, params: PotentialParams, tau: float,
                      solver_options: SolverOptions | None = None) -> StepOperators:
    """Assemble mass, stiffness and the step system M + tau eps K."""
    tau = float(tau)
    if not (np.isfinite(tau) and tau > 0.0):
        raise SolverError(f"time step must be positive and finite, got {tau!r}")
    mass = assemble_lumped_mass(mesh)
    stiff = assemble_stiffness(mesh)
    system_mat = sp.diags(mass.diag) + (tau * params.epsilon) * stiff
    system = SparseSymOperator.from_scipy(system_mat.tocsr(), check_symmetry=False)
    return StepOperators(
        mesh=mesh,
        mass=mass,
        stiffness=stiff,
        system=system,
        tau=tau,
        params=params,
        solver=solver_options if solver_options is not None else SolverOptions(),
    )


def initial_state(phi0: np.ndarray, ops: StepOperators) -> SavState:
    """Pair the initial field with r_0 = sqrt(E_h(phi_0))."""
    phi0 = _check_length(np.asarray(phi0, dtype=float), ops.mesh.node_count,
                         "initial field")
    r0 = float(np.sqrt(lumped_energy(phi0, ops.mass, ops.params)))
    return SavState(phi=phi0.copy(), r=r0)


def step_coefficients(phi: np.ndarray, noise_term: np.ndarray,
                      mass: LumpedMass, params: PotentialParams) -> StepCoefficients:
    """Coefficients of the coupled system, evaluated at the previous iterate.

    The augmentation xi is half the derivative of b(phi) = F'(phi)/(eps
    sqrt(E_h(phi))) in the direction of the noise increment:

        xi = -(a / (4 E^{3/2})) F'(phi)/eps + (1 / (2 sqrt(E))) F''(phi)/eps * n
    """
    phi = np.asarray(phi, dtype=float)
    noise_term = np.asarray(noise_term, dtype=float)
    inv_eps = 1.0 / params.epsilon
    fp = inv_eps * double_well_prime(phi)
    fpp = inv_eps * double_well_second(phi)
    energy = lumped_energy(phi, mass, params)
    # E >= gamma / eps > 0, so the roots below never degenerate
    sqrt_e = np.sqrt(energy)
    coupling = float(np.dot(mass.diag, fp * noise_term))
    aug = (-coupling / (4.0 * energy * sqrt_e)) * fp \
        + (0.5 / sqrt_e) * fpp * noise_term
    rvec = mass.diag * (fp / sqrt_e + aug)
    return StepCoefficients(energy=energy, coupling=coupling,
                            noise=noise_term, aug=aug, rvec=rvec)


def reduce_auxiliary(r_prev: float, rvec: np.ndarray, phi_prev: np.ndarray,
                     y0: np.ndarray, y1: np.ndarray, tau: float) -> float:
    """Eliminate phi_new from the scalar update.

    Substituting phi_new = y0 - tau r_new y1 into
    r_new = r_prev + (c/2).(phi_new - phi_prev) and solving for r_new gives

        r_new = [r_prev + (c/2).(y0 - phi_prev)] / [1 + (tau/2) c.y1]

    For the positive definite step system the denominator equals
    1 + (tau/2) c^T A^{-1} c >= 1; the guard below is defensive only.
    """
    numer = r_prev + 0.5 * float(np.dot(rvec, y0 - phi_prev))
    denom = 1.0 + 0.5 * tau * float(np.dot(rvec, y1))
    if abs(denom) < 1e-12:
        raise SingularStepError(
            f"auxiliary update denominator {denom:.3e} is numerically singular"
        )
    return numer / denom


def sav_step(state: SavState, noise_term: np.ndarray, ops: StepOperators,
             y1_start: np.ndarray | None = None):
    """Advance one step via two CG solves and the scalar reduction.

    Returns the new state and ``(iterations, y1)`` where ``y1`` can warm
    start the next step's second solve.
    """
    phi, r = state.phi, state.r
    coeff = step_coefficients(phi, noise_term, ops.mass, ops.params)
    rvec = coeff.rvec
    target = phi + coeff.noise
    y0, it0 = cg_solve(ops.system, ops.mass.diag * target, x0=target,
                       options=ops.solver)
    y1, it1 = cg_solve(ops.system, rvec, x0=y1_start, options=ops.solver)
    r_new = reduce_auxiliary(r, rvec, phi, y0, y1, ops.tau)
    phi_new = y0 - (ops.tau * r_new) * y1
    return SavState(phi=phi_new, r=r_new), (it0 + it1, y1)


def dense_oracle_step(state: SavState, noise_term: np.ndarray,
                      ops: StepOperators) -> SavState:
    """Reference step: solve the coupled block system densely.

    Assembles the full (N+1) x (N+1) matrix

        [ M + tau eps K   tau c ] [phi_new]   [ M (phi + n)        ]
        [ -(c/2)^T        1     ] [r_new  ] = [ r - (c/2) . phi    ]

    and hands it to a dense LU solve.  Deliberately independent of the
    CG-based fast path.
    """
    n = ops.mesh.node_count
    if n > DENSE_ORACLE_MAX_NODES:
        raise SolverError(
            f"dense oracle supports at most {DENSE_ORACLE_MAX_NODES} nodes, "
            f"got {n}"
        )
    phi, r = state.phi, state.r
    coeff = step_coefficients(phi, noise_term, ops.mass, ops.params)
    rvec = coeff.rvec
    block = np.zeros((n + 1, n + 1))
    block[:n, :n] = np.diag(ops.mass.diag) \
        + (ops.tau * ops.params.epsilon) * ops.stiffness.toarray()
    block[:n, n] = ops.tau * rvec
    block[n, :n] = -0.5 * rvec
    block[n, n] = 1.0
    rhs = np.empty(n + 1)
    rhs[:n] = ops.mass.diag * (phi + coeff.noise)
    rhs[n] = r - 0.5 * float(np.dot(rvec, phi))
    sol = np.linalg.solve(block, rhs)
    return SavState(phi=sol[:n], r=float(sol[n]))


@dataclass(frozen=True)
class PathResult:
    """Diagnostics of one trajectory.

    All per-step arrays include the initial state at index 0 except
    ``cg_iterations`` which has one entry per step.  ``snapshots`` holds the
    field at steps ``snapshot_steps`` (multiples of the requested stride,
    excluding step 0).
    """

    times: np.ndarray
    r: np.ndarray
    sqrt_energy: np.ndarray
    sav_energy: np.ndarray
    max_abs: np.ndarray
    cg_iterations: np.ndarray
    snapshots: np.ndarray | None
    snapshot_steps: np.ndarray | None
    state: SavState

    @property
    def tracking_error(self) -> np.ndarray:
        """|r_n - sqrt(E_h(phi_n))| along the path."""
        return np.abs(self.r - self.sqrt_energy)


def run_path(phi0: np.ndarray, ops: StepOperators, n_steps: int, *,
             model: NoiseModel | None = None, path: NoisePath | None = None,
             snapshot_every: int | None = None) -> PathResult:
    """March ``n_steps`` steps from ``phi0``, recording diagnostics.

    With ``model`` and ``path`` given, step ``n`` consumes increment column
    ``n`` of the path evaluated through the coefficient at the current
    iterate, so the discretization is adapted.  Without a model the run is
    deterministic (zero noise).  Solver and singularity failures are wrapped
    in :class:`PathError` tagged with the failing step.
    """
    if not isinstance(n_steps, (int, np.integer)) or n_steps < 1:
        raise ValueError(f"n_steps must be a positive integer, got {n_steps!r}")
    if model is not None:
        if path is None:
            raise ValueError("a noise path is required when a model is given")
        if path.n_steps != n_steps:
            raise ValueError(
                f"path provides {path.n_steps} increments, run needs {n_steps}"
            )
        if abs(path.tau - ops.tau) > 1e-12 * max(abs(ops.tau), 1.0):
            raise ValueError(
                f"path step size {path.tau!r} differs from operator step "
                f"size {ops.tau!r}"
            )
        table = mode_table(model, ops.mesh)
    if snapshot_every is not None:
        if not isinstance(snapshot_every, (int, np.integer)) or snapshot_every < 1:
            raise ValueError(
                f"snapshot_every must be a positive integer, got {snapshot_every!r}"
            )
        if n_steps % snapshot_every:
            raise ValueError(
                f"snapshot stride {snapshot_every} does not divide {n_steps} steps"
            )

    state = initial_state(phi0, ops)
    n_nodes = ops.mesh.node_count
    r_hist = np.empty(n_steps + 1)
    sqrt_e = np.empty(n_steps + 1)
    e_sav = np.empty(n_steps + 1)
    max_abs = np.empty(n_steps + 1)
    iters = np.zeros(n_steps, dtype=np.int64)
    r_hist[0] = state.r
    sqrt_e[0] = state.r  # r_0 is defined as sqrt(E_h(phi_0))
    e_sav[0] = sav_energy(state.phi, state.r, ops.stiffness, ops.params)
    max_abs[0] = float(np.max(np.abs(state.phi)))

    n_snaps = n_steps // snapshot_every if snapshot_every else 0
    snapshots = np.empty((n_snaps, n_nodes)) if n_snaps else None
    snapshot_steps = (
        snapshot_every * np.arange(1, n_snaps + 1) if n_snaps else None
    )
    snap_cursor = 0

    zero_noise = np.zeros(n_nodes)
    y1_prev = None
    # All noise reads go through this cursor; asserting it equals the loop
    # counter guarantees step n consumes exactly increment n and never a
    # later one, so the discrete flow stays adapted to the driving path.
    noise_cursor = 0
    for step in range(n_steps):
        if model is not None:
            assert noise_cursor == step, "noise increments consumed out of order"
            w = table.T @ path.increments[:, noise_cursor]
            noise_cursor += 1
            noise_term = noise_coefficient(state.phi, ops.params) * w
        else:
            noise_term = zero_noise
        try:
            state, (its, y1_prev) = sav_step(state, noise_term, ops,
                                             y1_start=y1_prev)
        except (SolverError, SingularStepError) as exc:
            raise PathError(step + 1, str(exc)) from exc
        peak = float(np.max(np.abs(state.phi)))
        if not np.isfinite(peak):
            raise PathError(step + 1, "field is no longer finite")
        iters[step] = its
        r_hist[step + 1] = state.r
        sqrt_e[step + 1] = np.sqrt(lumped_energy(state.phi, ops.mass, ops.params))
        e_sav[step + 1] = sav_energy(state.phi, state.r, ops.stiffness, ops.params)
        max_abs[step + 1] = peak
        if snapshots is not None and (step + 1) % snapshot_every == 0:
            snapshots[snap_cursor] = state.phi
            snap_cursor += 1

    return PathResult(
        times=ops.tau * np.arange(n_steps + 1),
        r=r_hist,
        sqrt_energy=sqrt_e,
        sav_energy=e_sav,
        max_abs=max_abs,
        cg_iterations=iters,
        snapshots=snapshots,
        snapshot_steps=snapshot_steps,
        state=state,
    )
