"""Sparse discrete operators L, B_D and B_N built row by row from stencils.

Two collocation modes decide which nodes act as stencil sources (and hence
as the columns of every operator):

* ``FITTED_FULL``: all nodes, interior and boundary alike;
* ``INTERIOR_ONLY``: interior nodes only.  Boundary rows then extrapolate
  from nearby interior nodes.
"""
from __future__ import annotations

import enum

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .exceptions import ConfigError, MissingNormal, SingularStencil
from .geometry import INTERIOR, NodeSet, merge
from .rbf_core import Evaluation, Laplacian, NormalDerivative, StencilConfig, knn_batch, stencil_weights


class CollocationMode(str, enum.Enum):
    FITTED_FULL = "fitted-full"
    INTERIOR_ONLY = "interior-only"


def source_indices(nodes: NodeSet, mode: CollocationMode) -> np.ndarray:
    """Node indices that become operator columns, in column order."""
    if CollocationMode(mode) is CollocationMode.FITTED_FULL:
        return np.arange(len(nodes))
    return nodes.interior


def assemble_rows(
    eval_points: np.ndarray,
    kinds,
    source_points: np.ndarray,
    cfg: StencilConfig,
    row_nodes=None,
) -> sp.csr_matrix:
    """One stencil row per evaluation point over its ``cfg.n`` nearest sources.

    ``kinds`` is a single operator kind or one per row.  ``row_nodes`` maps
    rows to node indices for error messages.
    """
    eval_points = np.atleast_2d(eval_points)
    nrows, n = len(eval_points), cfg.n
    if n > len(source_points):
        raise ConfigError(f"stencil size n={n} exceeds the {len(source_points)} available source nodes")
    if nrows == 0:
        return sp.csr_matrix((0, len(source_points)))
    if not isinstance(kinds, (list, tuple)):
        kinds = [kinds] * nrows
    nbrs = knn_batch(source_points, eval_points, n, tree=cKDTree(source_points))
    values = np.empty((nrows, n))
    for row in range(nrows):
        node = int(row_nodes[row]) if row_nodes is not None else row
        try:
            values[row] = stencil_weights(eval_points[row], source_points[nbrs[row]], kinds[row], cfg, node=node)
        except SingularStencil as exc:
            exc.node = node
            raise
    rows = np.repeat(np.arange(nrows), n)
    # coo -> csr sums any duplicated (row, col) pairs; cardinal rows leave exact zeros behind
    op = sp.coo_matrix((values.ravel(), (rows, nbrs.ravel())), shape=(nrows, len(source_points))).tocsr()
    op.eliminate_zeros()
    return op


def assemble_laplacian(nodes: NodeSet, mode, cfg: StencilConfig) -> sp.csr_matrix:
    src = source_indices(nodes, mode)
    rows = nodes.interior
    return assemble_rows(nodes.points[rows], Laplacian(), nodes.points[src], cfg, rows)


def assemble_dirichlet(nodes: NodeSet, mode, cfg: StencilConfig) -> sp.csr_matrix:
    """Evaluation rows at the Dirichlet nodes.

    When a Dirichlet node is itself a source (fitted-full mode) the row
    is the exact cardinal vector selecting that node.
    """
    src = source_indices(nodes, mode)
    rows = nodes.dirichlet
    return assemble_rows(nodes.points[rows], Evaluation(), nodes.points[src], cfg, rows)


def assemble_neumann(nodes: NodeSet, mode, cfg: StencilConfig) -> sp.csr_matrix:
    src = source_indices(nodes, mode)
    rows = nodes.neumann
    normals = nodes.normals[rows]
    missing = ~np.all(np.isfinite(normals), axis=1)
    if np.any(missing):
        raise MissingNormal(f"Neumann node {int(rows[np.argmax(missing)])} has no normal")
    kinds = [NormalDerivative(n) for n in normals]
    return assemble_rows(nodes.points[rows], kinds, nodes.points[src], cfg, rows)


def collocate_everywhere(nodes: NodeSet) -> NodeSet:
    """Node set in which every node, boundary included, is a collocation node.

    The boundary nodes appear twice: once relabeled interior (carrying a
    Laplacian row and an unknown) and once as constraint points.  Used in
    interior-only mode this reproduces full collocation on a fitted set for
    the Lagrange multiplier methods.
    """
    return merge(nodes.relabel(INTERIOR), nodes.subset(nodes.boundary))


def dump_matrix_market(op: sp.spmatrix, path, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(op), comment=comment)
