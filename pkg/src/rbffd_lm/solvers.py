"""Global Poisson solvers: square collocation and two Lagrange multiplier forms.

``solve_kkt_normal`` minimizes ``1/2 |Ax - b|^2`` subject to ``Cx = c`` via

    [ A^T A  C^T ] [x  ]   [A^T b]
    [ C      0   ] [lam] = [c    ]

and ``solve_kkt_saddle`` solves the same block layout with ``A`` in place
of ``A^T A``.  The end-to-end solvers wrap these around the RBF-FD operators.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

try:
    import cvxopt
    import cvxopt.umfpack as _umfpack
except ImportError:  # pragma: no cover
    _umfpack = None

from .assembly import (
    CollocationMode,
    assemble_dirichlet,
    assemble_laplacian,
    assemble_neumann,
    collocate_everywhere,
)
from .exceptions import SingularGlobalSystem
from .geometry import NodeSet
from .problems import ManufacturedProblem, relative_l2_error
from .rbf_core import StencilConfig

RESIDUAL_TOL = 1e-8
BACKENDS = ("auto", "umfpack", "superlu")


@dataclass
class SolveReport:
    method: str
    u: np.ndarray
    lam: np.ndarray
    points: np.ndarray
    u_exact: np.ndarray | None
    linear_residual: float
    rel_l2_error: float | None
    constraint_residual: float
    wall_times: dict = field(default_factory=dict)
    sizes: dict = field(default_factory=dict)


def _as_sparse(M) -> sp.csr_matrix:
    return M.tocsr() if sp.issparse(M) else sp.csr_matrix(np.atleast_2d(np.asarray(M, dtype=float)))


def _factorize(M: sp.csc_matrix, backend: str):
    """LU factorization of ``M``; returns a function applying ``M^-1``."""
    if backend not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}")
    if backend == "umfpack" and _umfpack is None:
        raise SingularGlobalSystem("UMFPACK backend requested but cvxopt is not installed")
    if backend in ("auto", "umfpack") and _umfpack is not None:
        coo = M.tocoo()
        A = cvxopt.spmatrix(cvxopt.matrix(coo.data), cvxopt.matrix(coo.row.astype(np.int64)),
                            cvxopt.matrix(coo.col.astype(np.int64)), coo.shape)
        try:
            F = _umfpack.numeric(A, _umfpack.symbolic(A))
        except ArithmeticError as exc:
            raise SingularGlobalSystem(f"sparse LU failed: {exc}") from exc

        def apply(rhs):
            b = cvxopt.matrix(np.array(rhs, dtype=float))
            _umfpack.solve(A, F, b)
            return np.array(b).ravel()

        return apply
    try:
        lu = spla.splu(M)
    except RuntimeError as exc:
        raise SingularGlobalSystem(f"sparse LU failed: {exc}") from exc
    return lu.solve


def backward_error(M, z, rhs, norm_m: float | None = None) -> float:
    """Normwise relative residual ``|Mz - rhs| / (|M| |z| + |rhs|)`` in the infinity norm."""
    if norm_m is None:
        norm_m = spla.norm(M, np.inf)
    denom = norm_m * np.max(np.abs(z), initial=0.0) + np.max(np.abs(rhs), initial=0.0)
    r = np.max(np.abs(M @ z - rhs), initial=0.0)
    return float(r / denom) if denom > 0 else float(r)


def solve_sparse(M, rhs, refine: int = 2, backend: str = "auto") -> tuple[np.ndarray, float]:
    """Direct sparse LU solve with a couple of refinement sweeps.

    ``backend="auto"`` uses UMFPACK when cvxopt is importable, else SuperLU.
    Returns the solution and its normwise relative residual (see
    :func:`backward_error`); raises :class:`SingularGlobalSystem` above
    ``RESIDUAL_TOL``.
    """
    M = sp.csc_matrix(M)
    rhs = np.asarray(rhs, dtype=float)
    if M.shape[0] != M.shape[1] or M.shape[0] != len(rhs):
        raise SingularGlobalSystem(f"global system is {M.shape} with rhs of length {len(rhs)}")
    inverse = _factorize(M, backend)
    norm_m = spla.norm(M, np.inf)
    z = inverse(rhs)
    residual = backward_error(M, z, rhs, norm_m)
    for _ in range(refine):
        if not residual > 1e-15:
            break
        step = z + inverse(rhs - M @ z)
        new = backward_error(M, step, rhs, norm_m)
        if not new < residual:
            break
        z, residual = step, new
    if not np.all(np.isfinite(z)) or not residual <= RESIDUAL_TOL:
        raise SingularGlobalSystem(f"global solve failed (relative residual {residual:.2e})")
    return z, residual


def _kkt(top, rhs_top, C, c):
    n = top.shape[0]
    C = _as_sparse(C) if C is not None else sp.csr_matrix((0, n))
    c = np.zeros(0) if c is None else np.asarray(c, dtype=float)
    if C.shape[1] != n or C.shape[0] != len(c):
        raise ValueError(f"constraint block {C.shape} / rhs {len(c)} inconsistent with {n} unknowns")
    M = sp.bmat([[top, C.T], [C, None]], format="csc") if C.shape[0] else sp.csc_matrix(top)
    z, residual = solve_sparse(M, np.concatenate([rhs_top, c]))
    return z[:n], z[n:], residual, M


def normal_matrix(A) -> sp.csr_matrix:
    """``A^T A`` made bitwise symmetric."""
    A = _as_sparse(A)
    G = (A.T @ A).tocsr()
    return ((G + G.T) * 0.5).tocsr()


def solve_kkt_normal(A, b, C=None, c=None):
    """Equality-constrained least squares through its normal-equation KKT system."""
    A = _as_sparse(A)
    x, lam, _, _ = _kkt(normal_matrix(A), A.T @ np.asarray(b, dtype=float), C, c)
    return x, lam


def solve_kkt_saddle(A, b, C=None, c=None):
    """Solve ``[[A, C^T], [C, 0]] [x; lam] = [b; c]`` directly."""
    x, lam, _, _ = _kkt(_as_sparse(A), np.asarray(b, dtype=float), C, c)
    return x, lam


def lm_global_matrix(L, C, formulation: int) -> sp.csc_matrix:
    top = normal_matrix(L) if formulation == 1 else _as_sparse(L)
    return sp.bmat([[top, _as_sparse(C).T], [_as_sparse(C), None]], format="csc")


# --------------------------------------------------------------------------
# end-to-end solvers
# --------------------------------------------------------------------------

def _boundary_data(problem: ManufacturedProblem, nodes: NodeSet):
    g = problem.g(nodes.points[nodes.dirichlet]) if len(nodes.dirichlet) else np.zeros(0)
    nn = nodes.neumann
    h = problem.h(nodes.points[nn], nodes.normals[nn]) if len(nn) else np.zeros(0)
    return g, h


def _sizes(nodes: NodeSet, n_unknowns: int) -> dict:
    counts = nodes.counts
    return {"N_I": counts["I"], "N_D": counts["D"], "N_N": counts["N"], "unknowns": n_unknowns}


def solve_collocation(problem: ManufacturedProblem, nodes: NodeSet, cfg: StencilConfig) -> SolveReport:
    """Square RBF-FD collocation on a boundary-fitted node set; ``u`` on all nodes."""
    t0 = time.perf_counter()
    mode = CollocationMode.FITTED_FULL
    L = assemble_laplacian(nodes, mode, cfg)
    BD = assemble_dirichlet(nodes, mode, cfg)
    BN = assemble_neumann(nodes, mode, cfg)
    t1 = time.perf_counter()
    M = sp.vstack([L, BD, BN], format="csc")
    g, h = _boundary_data(problem, nodes)
    rhs = np.concatenate([problem.f(nodes.points[nodes.interior]), g, h])
    t2 = time.perf_counter()
    u, residual = solve_sparse(M, rhs)
    t3 = time.perf_counter()

    exact = problem.u_exact(nodes.points)
    C = sp.vstack([BD, BN], format="csr")
    c = np.concatenate([g, h])
    return SolveReport(
        method="c",
        u=u,
        lam=np.zeros(0),
        points=nodes.points,
        u_exact=exact,
        linear_residual=residual,
        rel_l2_error=relative_l2_error(u, exact),
        constraint_residual=_constraint_residual(C, u, c),
        wall_times={"weights": t1 - t0, "assembly": t2 - t1, "solve": t3 - t2},
        sizes=_sizes(nodes, len(u)),
    )


def _constraint_residual(C, u, c) -> float:
    if C.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(C @ u - c)) / (1.0 + np.max(np.abs(c))))


def _solve_lm(problem, nodes: NodeSet, mode, cfg: StencilConfig, formulation: int) -> SolveReport:
    mode = CollocationMode(mode)
    if mode is CollocationMode.FITTED_FULL:
        nodes = collocate_everywhere(nodes)
    t0 = time.perf_counter()
    L = assemble_laplacian(nodes, CollocationMode.INTERIOR_ONLY, cfg)
    BD = assemble_dirichlet(nodes, CollocationMode.INTERIOR_ONLY, cfg)
    BN = assemble_neumann(nodes, CollocationMode.INTERIOR_ONLY, cfg)
    t1 = time.perf_counter()

    pts = nodes.points[nodes.interior]
    f = problem.f(pts)
    g, h = _boundary_data(problem, nodes)
    C = sp.vstack([BD, BN], format="csr")
    c = np.concatenate([g, h])
    M = lm_global_matrix(L, C, formulation)
    rhs = np.concatenate([L.T @ f if formulation == 1 else f, c])
    t2 = time.perf_counter()
    z, residual = solve_sparse(M, rhs)
    t3 = time.perf_counter()

    n = len(pts)
    u, lam = z[:n], z[n:]
    exact = problem.u_exact(pts)
    return SolveReport(
        method=f"lm{formulation}",
        u=u,
        lam=lam,
        points=pts,
        u_exact=exact,
        linear_residual=residual,
        rel_l2_error=relative_l2_error(u, exact),
        constraint_residual=_constraint_residual(C, u, c),
        wall_times={"weights": t1 - t0, "assembly": t2 - t1, "solve": t3 - t2},
        sizes=_sizes(nodes, n),
    )


def solve_lm1(problem, nodes: NodeSet, mode, cfg: StencilConfig) -> SolveReport:
    """Constrained least squares: minimize |L u - f| subject to the boundary rows."""
    return _solve_lm(problem, nodes, mode, cfg, 1)


def solve_lm2(problem, nodes: NodeSet, mode, cfg: StencilConfig) -> SolveReport:
    """Saddle-point form carrying L itself in the leading block."""
    return _solve_lm(problem, nodes, mode, cfg, 2)
