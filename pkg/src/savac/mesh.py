"""Uniform periodic P1 meshes on the unit torus and dyadic transfer operators.

Meshes are structured lattices on (0,1)^dim with periodic identification, so
there are no duplicated seam nodes: the right/top neighbours of the last
column/row wrap around to index 0.  Only dyadic resolutions are supported,
which keeps every pair of levels nested and makes prolongation an exact
evaluation of the coarse finite element function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MeshError

#: Hard cap on the number of nodes of a single mesh.
MAX_NODE_COUNT = 1 << 21


@dataclass(frozen=True)
class TorusMesh:
    """Immutable structured simplicial mesh of the periodic unit torus.

    Nodes are the lattice points ``i * spacing`` (2-D ordering is row-major
    with x fastest, ``index = iy * grid + ix``).  In 2-D every grid square is
    split along its lower-left to upper-right diagonal, so each vertex touches
    six triangles.  ``cells`` lists vertex indices in a fixed orientation:
    1-D ``(left, right)``; 2-D lower triangles ``(LL, LR, UR)`` followed by
    upper triangles ``(LL, UR, UL)``.

    Attributes
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    level : int
        Dyadic refinement level; the grid has ``2**level`` nodes per direction.
    spacing : float
        Mesh size ``h = 2**-level``.
    grid : int
        Nodes per direction.
    node_count : int
        Total number of nodes, ``grid**dim``.
    nodes : numpy.ndarray
        ``(node_count, dim)`` coordinates in ``[0, 1)``.
    cells : numpy.ndarray
        ``(cell_count, dim + 1)`` vertex indices.
    """

    dim: int
    level: int
    spacing: float
    grid: int
    node_count: int
    nodes: np.ndarray
    cells: np.ndarray

    @property
    def cell_count(self) -> int:
        return self.cells.shape[0]

    def cell_measure(self) -> float:
        """Measure of a single cell; all cells are congruent."""
        if self.dim == 1:
            return self.spacing
        return 0.5 * self.spacing * self.spacing


def build_torus_mesh(dim: int, level: int) -> TorusMesh:
    """Construct the uniform periodic mesh of (0,1)^dim at a dyadic level.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    level : int
        Refinement level m >= 1; the spacing is ``2**-m``.

    Returns
    -------
    TorusMesh

    Raises
    ------
    MeshError
        If ``dim`` is unsupported, ``level < 1``, or the node count would
        exceed ``MAX_NODE_COUNT``.
    """
    if dim not in (1, 2):
        raise MeshError(f"unsupported dimension {dim!r}, expected 1 or 2")
    if not isinstance(level, (int, np.integer)) or isinstance(level, bool):
        raise MeshError(f"level must be an integer, got {level!r}")
    if level < 1:
        raise MeshError(f"level must be >= 1, got {level}")
    grid = 1 << level
    node_count = grid**dim
    if node_count > MAX_NODE_COUNT:
        raise MeshError(
            f"level {level} in {dim}-D has {node_count} nodes, "
            f"exceeding the cap of {MAX_NODE_COUNT}"
        )
    spacing = 1.0 / grid

    if dim == 1:
        idx = np.arange(grid, dtype=np.int64)
        nodes = (idx.astype(float) * spacing)[:, None]
        cells = np.column_stack([idx, (idx + 1) % grid])
    else:
        ix, iy = np.meshgrid(np.arange(grid, dtype=np.int64),
                             np.arange(grid, dtype=np.int64), indexing="xy")
        ix = ix.ravel()
        iy = iy.ravel()
        nodes = np.column_stack([ix.astype(float) * spacing,
                                 iy.astype(float) * spacing])
        ixp = (ix + 1) % grid
        iyp = (iy + 1) % grid
        ll = iy * grid + ix
        lr = iy * grid + ixp
        ur = iyp * grid + ixp
        ul = iyp * grid + ix
        lower = np.column_stack([ll, lr, ur])
        upper = np.column_stack([ll, ur, ul])
        cells = np.vstack([lower, upper])

    nodes.setflags(write=False)
    cells.setflags(write=False)
    return TorusMesh(dim=dim, level=level, spacing=spacing, grid=grid,
                     node_count=node_count, nodes=nodes, cells=cells)


def _check_nested(coarse: TorusMesh, fine: TorusMesh, n_values: int) -> None:
    if coarse.dim != fine.dim:
        raise MeshError(
            f"dimension mismatch: source is {coarse.dim}-D, target is {fine.dim}-D"
        )
    if fine.level < coarse.level:
        raise MeshError(
            f"prolongation target (level {fine.level}) must be at least as fine "
            f"as the source (level {coarse.level})"
        )
    if n_values != coarse.node_count:
        raise MeshError(
            f"field has {n_values} values but the source mesh has "
            f"{coarse.node_count} nodes"
        )


def prolong(values: np.ndarray, coarse: TorusMesh, fine: TorusMesh) -> np.ndarray:
    """Evaluate a coarse nodal field on the nodes of a nested finer mesh.

    The coarse piecewise linear function is evaluated exactly at each fine
    node, so constants are reproduced bitwise and nodal min/max bounds are
    preserved up to roundoff.  ``values`` may carry leading batch axes; the
    last axis runs over coarse nodes.

    Parameters
    ----------
    values : numpy.ndarray
        Nodal values on ``coarse``, shape ``(..., coarse.node_count)``.
    coarse, fine : TorusMesh
        Nested source and target meshes (same dimension,
        ``fine.level >= coarse.level``).

    Returns
    -------
    numpy.ndarray
        Nodal values on ``fine``, shape ``(..., fine.node_count)``.
    """
    values = np.asarray(values, dtype=float)
    _check_nested(coarse, fine, values.shape[-1])
    if fine.level == coarse.level:
        return values.copy()

    shift = fine.level - coarse.level
    factor = 1 << shift
    nc = coarse.grid

    if coarse.dim == 1:
        idx = np.arange(fine.grid, dtype=np.int64)
        q = idx >> shift
        t = (idx & (factor - 1)).astype(float) / factor
        left = values[..., q]
        right = values[..., (q + 1) % nc]
        # difference form keeps constants exact
        return left + (right - left) * t

    idx = np.arange(fine.grid, dtype=np.int64)
    q = idx >> shift
    frac = (idx & (factor - 1)).astype(float) / factor
    qx = np.broadcast_to(q[None, :], (fine.grid, fine.grid)).ravel()
    qy = np.broadcast_to(q[:, None], (fine.grid, fine.grid)).ravel()
    s = np.broadcast_to(frac[None, :], (fine.grid, fine.grid)).ravel()
    t = np.broadcast_to(frac[:, None], (fine.grid, fine.grid)).ravel()
    qxp = (qx + 1) % nc
    qyp = (qy + 1) % nc

    a = values[..., qy * nc + qx]    # LL
    b = values[..., qy * nc + qxp]   # LR
    c = values[..., qyp * nc + qxp]  # UR
    d = values[..., qyp * nc + qx]   # UL
    lower = a + (b - a) * s + (c - b) * t
    upper = a + (d - a) * t + (c - d) * s
    return np.where(s >= t, lower, upper)
