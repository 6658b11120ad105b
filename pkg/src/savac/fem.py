"""P1 finite element operators with mass lumping on uniform torus meshes.

Nodal fields are plain float ndarrays whose length equals the node count of
the mesh they live on; every operation validates that length against the
mesh or operator it is given.  The stiffness matrix is assembled once per
mesh from reference-cell element matrices, which keeps seam cells exact (all
cells are congruent translates, so no wrapped coordinates enter the
geometry).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import MeshError
from .mesh import TorusMesh


@dataclass(frozen=True)
class LumpedMass:
    """Diagonal of the lumped P1 mass matrix.

    Entry i is the measure of the cells incident to node i divided by the
    number of cell vertices; on a uniform torus mesh that is ``h`` in 1-D and
    ``h**2`` in 2-D, and the entries sum to the domain measure 1.
    """

    diag: np.ndarray

    @property
    def node_count(self) -> int:
        return self.diag.shape[0]


def _reference_cells(mesh: TorusMesh):
    """Vertex coordinates of the congruence classes of cells, in cell order."""
    h = mesh.spacing
    if mesh.dim == 1:
        return [np.array([[0.0], [h]])]
    lower = np.array([[0.0, 0.0], [h, 0.0], [h, h]])
    upper = np.array([[0.0, 0.0], [h, h], [0.0, h]])
    return [lower, upper]


def _local_stiffness(vertices: np.ndarray) -> np.ndarray:
    """Element stiffness matrix of one simplex from its vertex coordinates."""
    d = vertices.shape[1]
    m = np.hstack([np.ones((d + 1, 1)), vertices])
    coeff = np.linalg.inv(m)
    grads = coeff[1:, :]  # column i holds grad of basis function i
    measure = abs(np.linalg.det(m)) / (1.0 if d == 1 else 2.0)
    return measure * (grads.T @ grads)


def assemble_lumped_mass(mesh: TorusMesh) -> LumpedMass:
    """Assemble the lumped mass diagonal of a mesh."""
    share = mesh.cell_measure() / (mesh.dim + 1)
    diag = np.zeros(mesh.node_count)
    np.add.at(diag, mesh.cells.ravel(), share)
    diag.setflags(write=False)
    return LumpedMass(diag=diag)


def assemble_stiffness(mesh: TorusMesh) -> sp.csr_matrix:
    """Assemble the P1 stiffness matrix of a mesh in CSR form.

    Returns
    -------
    scipy.sparse.csr_matrix
        Symmetric positive semidefinite matrix whose kernel is spanned by
        the constant field.  On the uniform torus mesh the rows reduce to
        the classic stencils: 1-D diagonal ``2/h`` with ``-1/h`` to both
        neighbours, 2-D diagonal 4 with -1 to the four axis neighbours (the
        couplings along the split diagonal cancel).
    """
    refs = _reference_cells(mesh)
    if mesh.dim == 1:
        blocks = [(mesh.cells, _local_stiffness(refs[0]))]
    else:
        half = mesh.cell_count // 2
        blocks = [
            (mesh.cells[:half], _local_stiffness(refs[0])),
            (mesh.cells[half:], _local_stiffness(refs[1])),
        ]
    rows, cols, vals = [], [], []
    for cells, local in blocks:
        nloc = local.shape[0]
        count = cells.shape[0]
        for i in range(nloc):
            for j in range(nloc):
                rows.append(cells[:, i])
                cols.append(cells[:, j])
                vals.append(np.full(count, local[i, j]))
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.node_count, mesh.node_count),
    ).tocsr()
    mat.eliminate_zeros()
    return mat


def _check_length(values: np.ndarray, expected: int, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != expected:
        raise MeshError(
            f"{what}: field has {values.shape[-1]} values, expected {expected}"
        )
    return values


def lumped_inner(f: np.ndarray, g: np.ndarray, mass: LumpedMass) -> float:
    """Lumped L2 inner product sum_i m_i f_i g_i."""
    f = _check_length(f, mass.node_count, "lumped_inner")
    g = _check_length(g, mass.node_count, "lumped_inner")
    return float(np.dot(mass.diag * f, g))


def lumped_norm_sq(f: np.ndarray, mass: LumpedMass) -> float:
    """Squared lumped L2 norm."""
    return lumped_inner(f, f, mass)


def h1_seminorm_sq(f: np.ndarray, stiff: sp.csr_matrix) -> float:
    """Squared H1 seminorm f^T K f."""
    f = _check_length(f, stiff.shape[0], "h1_seminorm_sq")
    return float(np.dot(f, stiff @ f))


def h1_norm_sq(f: np.ndarray, mass: LumpedMass, stiff: sp.csr_matrix) -> float:
    """Squared full H1 norm: lumped L2 part plus seminorm part."""
    return lumped_norm_sq(f, mass) + h1_seminorm_sq(f, stiff)


def discrete_laplacian(f: np.ndarray, mass: LumpedMass,
                       stiff: sp.csr_matrix) -> np.ndarray:
    """Lumped discrete Laplacian, the nodal field -M^{-1} K f.

    Satisfies the defining relation m_i (lap f)_i = -(K f)_i, i.e. testing
    the result with any nodal field under the lumped inner product equals
    minus the stiffness bilinear form.
    """
    f = _check_length(f, mass.node_count, "discrete_laplacian")
    return -(stiff @ f) / mass.diag


def nodal_interpolate(func: Callable, mesh: TorusMesh) -> np.ndarray:
    """Evaluate a callable at the mesh nodes.

    ``func`` receives coordinate arrays (``x`` in 1-D, ``x, y`` in 2-D) and
    must broadcast; a scalar result is expanded to all nodes.
    """
    if mesh.dim == 1:
        raw = func(mesh.nodes[:, 0])
    else:
        raw = func(mesh.nodes[:, 0], mesh.nodes[:, 1])
    out = np.asarray(raw, dtype=float)
    if out.ndim == 0:
        out = np.full(mesh.node_count, float(out))
    if out.shape != (mesh.node_count,):
        raise MeshError(
            f"nodal_interpolate: callable returned shape {out.shape}, "
            f"expected ({mesh.node_count},)"
        )
    return out
