"""Finite-mode Q-Wiener increments on the torus with counter-based seeding.

The driving noise is W = sum_k lambda_k g_k beta_k over a finite mode table,
where the g_k are the real Fourier eigenfunctions of the periodic Laplacian
and the beta_k are independent Brownian motions.  Each (sample, mode) pair
owns its own random stream whose seed is derived from
(master_seed, sample_id, mode_rank) by a fixed 64-bit mix, so ensembles are
reproducible regardless of scheduling and any sample can be regenerated in
isolation.

Increments are always drawn at the finest time step of an experiment and
coarser paths are produced by exact summation, never redrawn; this couples
all resolutions of a convergence study to the same driving path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MeshError
from .mesh import TorusMesh
from .potential import PotentialParams, noise_coefficient

_MASK64 = (1 << 64) - 1


def _splitmix64(value: int) -> int:
    """One splitmix64 output step (Steele, Lea, Flood)."""
    value = (value + 0x9E3779B97F4A7C15) & _MASK64
    z = value
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream_seed(master_seed: int, sample_id: int, mode_rank: int) -> int:
    """Derive the 64-bit seed of the (sample, mode) stream.

    The chain is seed = mix(mix(mix(master) ^ sample) ^ rank) with
    mix = splitmix64; it is fixed for all time, since changing it silently
    re-randomizes every experiment.
    """
    s = _splitmix64(master_seed & _MASK64)
    s = _splitmix64(s ^ (sample_id & _MASK64))
    s = _splitmix64(s ^ (mode_rank & _MASK64))
    return s


@dataclass(frozen=True)
class ModeSpec:
    """One noise mode: wavenumbers per direction and amplitude lambda."""

    k: tuple
    amplitude: float


@dataclass(frozen=True)
class NoiseModel:
    """Mode table plus master seed.

    The position of a mode in ``modes`` is its rank, which enters the seed
    derivation; the canonical order (ascending k, lexicographic in 2-D) is
    produced by :func:`default_modes`, and config files keep file order.
    """

    dim: int
    modes: tuple
    master_seed: int

    def __post_init__(self):
        violations = []
        if self.dim not in (1, 2):
            violations.append(f"noise dim must be 1 or 2, got {self.dim!r}")
        if not self.modes:
            violations.append("noise model needs at least one mode")
        for rank, mode in enumerate(self.modes):
            if len(mode.k) != self.dim:
                violations.append(
                    f"mode {rank}: wavenumber tuple {mode.k!r} does not match "
                    f"dim {self.dim}"
                )
            if not mode.amplitude > 0.0:
                violations.append(
                    f"mode {rank}: amplitude must be > 0, got {mode.amplitude!r}"
                )
        if len({m.k for m in self.modes}) != len(self.modes):
            violations.append("duplicate wavenumbers in mode table")
        if not isinstance(self.master_seed, (int, np.integer)) or self.master_seed < 0:
            violations.append(
                f"master_seed must be a nonnegative integer, got {self.master_seed!r}"
            )
        if violations:
            raise ConfigError(violations)

    @property
    def n_modes(self) -> int:
        return len(self.modes)


@dataclass(frozen=True)
class NoisePath:
    """Per-mode Brownian increments of one sample at one time step.

    ``increments[rank, n]`` is the increment of mode ``rank`` over the n-th
    interval of length ``tau``; each entry is N(0, tau) and rows are
    independent across modes and samples.
    """

    sample_id: int
    tau: float
    increments: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.increments.shape[0]

    @property
    def n_steps(self) -> int:
        return self.increments.shape[1]


def default_modes(dim: int, max_wavenumber: int = 3) -> tuple:
    """Inverse-square spectrum lambda_k = 1 / max(1, k^2), |k| <= cutoff.

    In 2-D the table is the tensor product with amplitudes lambda_k * lambda_l,
    ordered lexicographically in (k, l).
    """
    ks = range(-max_wavenumber, max_wavenumber + 1)

    def lam(k):
        return 1.0 / max(1, k * k)

    if dim == 1:
        return tuple(ModeSpec(k=(k,), amplitude=lam(k)) for k in ks)
    return tuple(
        ModeSpec(k=(k, l), amplitude=lam(k) * lam(l)) for k in ks for l in ks
    )


def eigenfunction(k: int, x):
    """Real Fourier eigenfunction g_k of the periodic Laplacian on (0,1).

    g_k = sqrt(2) cos(2 pi k x) for k >= 1, 1 for k = 0, and
    sqrt(2) sin(2 pi k x) for k <= -1 (the signed wavenumber stays inside the
    sine).  The family is orthonormal in L2(0,1).
    """
    x = np.asarray(x, dtype=float)
    if k == 0:
        return np.ones_like(x)
    if k >= 1:
        return np.sqrt(2.0) * np.cos(2.0 * np.pi * k * x)
    return np.sqrt(2.0) * np.sin(2.0 * np.pi * k * x)


def mode_values(mode: ModeSpec, mesh: TorusMesh) -> np.ndarray:
    """Nodal values of the (tensor product) eigenfunction of one mode."""
    if len(mode.k) != mesh.dim:
        raise MeshError(
            f"mode {mode.k!r} does not match mesh dimension {mesh.dim}"
        )
    out = eigenfunction(mode.k[0], mesh.nodes[:, 0])
    if mesh.dim == 2:
        out = out * eigenfunction(mode.k[1], mesh.nodes[:, 1])
    return out


def mode_table(model: NoiseModel, mesh: TorusMesh) -> np.ndarray:
    """Amplitude-scaled nodal eigenfunctions, one row per mode.

    Precomputing this (n_modes, node_count) table makes evaluating a noise
    increment field a single matrix-vector product.
    """
    if model.dim != mesh.dim:
        raise MeshError(
            f"noise model is {model.dim}-D but mesh is {mesh.dim}-D"
        )
    table = np.empty((model.n_modes, mesh.node_count))
    for rank, mode in enumerate(model.modes):
        table[rank] = mode.amplitude * mode_values(mode, mesh)
    return table


def generate_increments(model: NoiseModel, sample_id: int, n_steps: int,
                        tau: float) -> NoisePath:
    """Draw the increment array of one sample at the finest step ``tau``.

    Each mode rank draws from its own PCG64 generator seeded by
    :func:`stream_seed`; the Gaussian sampler is
    ``numpy.random.Generator.standard_normal``, fixed as part of the
    reproducibility contract.
    """
    if n_steps < 1:
        raise ConfigError([f"n_steps must be >= 1, got {n_steps}"])
    if not tau > 0.0:
        raise ConfigError([f"tau must be > 0, got {tau}"])
    if sample_id < 0:
        raise ConfigError([f"sample_id must be >= 0, got {sample_id}"])
    increments = np.empty((model.n_modes, n_steps))
    for rank in range(model.n_modes):
        seed = stream_seed(model.master_seed, sample_id, rank)
        gen = np.random.Generator(np.random.PCG64(seed))
        increments[rank] = gen.standard_normal(n_steps)
    increments *= np.sqrt(tau)
    increments.setflags(write=False)
    return NoisePath(sample_id=sample_id, tau=tau, increments=increments)


def coarsen(path: NoisePath, factor: int) -> NoisePath:
    """Aggregate consecutive increments into a path at step factor * tau.

    Coarse increment n is the exact sum of its ``factor`` fine increments,
    so every coarsening of one fine path telescopes to the same Brownian
    values at shared times.
    """
    if not isinstance(factor, (int, np.integer)) or isinstance(factor, bool):
        raise ConfigError([f"coarsening factor must be an integer, got {factor!r}"])
    if factor < 1:
        raise ConfigError([f"coarsening factor must be >= 1, got {factor}"])
    if path.n_steps % factor != 0:
        raise ConfigError(
            [f"factor {factor} does not divide the step count {path.n_steps}"]
        )
    if factor == 1:
        return path
    coarse = path.increments.reshape(
        path.n_modes, path.n_steps // factor, factor
    ).sum(axis=2)
    coarse.setflags(write=False)
    return NoisePath(sample_id=path.sample_id, tau=path.tau * factor,
                     increments=coarse)


def total_displacement(path: NoisePath) -> np.ndarray:
    """Per-mode sum of all increments; invariant under coarsening.

    Serves as the checksum that all resolutions of a coupled study consumed
    the same driving path.
    """
    return path.increments.sum(axis=1)


def noise_field(model: NoiseModel, path: NoisePath, step: int,
                mesh: TorusMesh, table: np.ndarray | None = None) -> np.ndarray:
    """Nodal values of the increment field sum_k lambda_k dbeta_k^n g_k.

    ``step`` indexes the path's own step grid.  Pass a precomputed
    :func:`mode_table` to avoid re-evaluating eigenfunctions per step.
    """
    if not 0 <= step < path.n_steps:
        raise ConfigError(
            [f"step {step} outside the path range [0, {path.n_steps})"]
        )
    if path.n_modes != model.n_modes:
        raise ConfigError(
            [f"path has {path.n_modes} modes, model has {model.n_modes}"]
        )
    if table is None:
        table = mode_table(model, mesh)
    return table.T @ path.increments[:, step]


def apply_noise_operator(phi: np.ndarray, w: np.ndarray,
                         params: PotentialParams) -> np.ndarray:
    """Nodal product rho(phi) * w: the discrete diffusion applied to a field."""
    phi = np.asarray(phi, dtype=float)
    w = np.asarray(w, dtype=float)
    if phi.shape != w.shape:
        raise MeshError(
            f"apply_noise_operator: shapes {phi.shape} and {w.shape} differ"
        )
    return noise_coefficient(phi, params) * w
