"""RBF-FD stencil weights from polyharmonic splines plus monomials.

Weights are found from the local saddle system

    [ A   P ] [w]   [a]
    [ P^T 0 ] [v] = [b]

with ``A_ij = phi(|x_i - x_j|)``, ``P_ij = p_j(x_i)`` and ``a``, ``b`` the
operator applied to the basis at the evaluation point.  ``v`` is thrown away.
Every system is formed in shifted/scaled coordinates ``(x - x_e) / rho``
(``rho`` the stencil radius) and the weights are scaled back analytically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import lapack
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .exceptions import SingularStencil

RCOND_MIN = 1e-14


# --------------------------------------------------------------------------
# operator kinds
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Evaluation:
    order = 0


@dataclass(frozen=True)
class Laplacian:
    order = 2


@dataclass(frozen=True, eq=False)
class NormalDerivative:
    normal: tuple

    order = 1

    def __init__(self, normal):
        n = np.asarray(normal, dtype=float)
        length = np.linalg.norm(n)
        if not length > 0:
            raise ValueError("normal must be nonzero")
        object.__setattr__(self, "normal", tuple((n / length).tolist()))

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.normal)

    def __eq__(self, other):
        return isinstance(other, NormalDerivative) and self.normal == other.normal

    def __hash__(self):
        return hash(("NormalDerivative", self.normal))


OperatorKind = Evaluation | Laplacian | NormalDerivative


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def monomial_count(d: int, m: int) -> int:
    """Number of monomials in ``d`` variables of total degree at most ``m``."""
    return math.comb(d + m, m)


@dataclass(frozen=True)
class StencilConfig:
    """PHS exponent ``2k+1``, polynomial degree ``m`` and relative stencil size.

    ``ratio`` below 1 is accepted here; the resulting stencils raise
    :class:`SingularStencil` when their weights are requested.
    """

    m: int
    ratio: float = 2.0
    k: int = 1
    d: int = 2

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("polynomial degree m must be >= 0")
        if self.k < 1:
            raise ValueError("PHS half-exponent k must be >= 1")
        if not self.ratio > 0:
            raise ValueError("ratio must be positive")

    @property
    def ell(self) -> int:
        return monomial_count(self.d, self.m)

    @property
    def n(self) -> int:
        # tiny slack keeps e.g. 2.5 * 10 from rounding up to 26
        return int(math.ceil(self.ratio * self.ell - 1e-9))

    @property
    def power(self) -> int:
        return 2 * self.k + 1


# --------------------------------------------------------------------------
# basis functions
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def monomial_exponents(d: int, m: int) -> np.ndarray:
    """Exponent multi-indices ordered by total degree, then lexicographically descending."""
    out = []
    for deg in range(m + 1):
        if d == 1:
            out.append((deg,))
            continue
        for first in range(deg, -1, -1):
            for rest in monomial_exponents(d - 1, deg - first):
                if sum(rest) == deg - first:
                    out.append((first, *rest))
    arr = np.array(out, dtype=int).reshape(-1, d)
    arr.setflags(write=False)
    return arr


def phs_values(kind, diff: np.ndarray, k: int = 1) -> np.ndarray:
    """Apply ``kind`` to ``phi(|x - x_i|) = |x - x_i|^(2k+1)``.

    ``diff`` holds ``x - x_i`` row-wise.  The derivatives vanish at ``r = 0``
    for every ``k >= 1`` and are evaluated without division.
    """
    diff = np.atleast_2d(diff)
    d = diff.shape[1]
    p = 2 * k + 1
    r = np.linalg.norm(diff, axis=1)
    if isinstance(kind, Evaluation):
        return r**p
    if isinstance(kind, Laplacian):
        return p * (p + d - 2) * r ** (p - 2)
    if isinstance(kind, NormalDerivative):
        return p * r ** (p - 2) * (diff @ kind.vector)
    raise TypeError(f"unsupported operator kind {kind!r}")


def phs_apply(kind, center, eval_point, k: int = 1) -> float:
    diff = np.asarray(eval_point, dtype=float) - np.asarray(center, dtype=float)
    return float(phs_values(kind, diff[None, :], k)[0])


def _power_table(x: np.ndarray, top: int) -> np.ndarray:
    """``table[k] = x**k`` for k = 0..top, by repeated multiplication."""
    table = np.ones((top + 1, *x.shape))
    for k in range(1, top + 1):
        table[k] = table[k - 1] * x
    return table


def monomial_values(kind, exponents: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``kind`` applied to every monomial in ``exponents`` at every row of ``x``.

    Returns an array of shape ``(len(x), len(exponents))``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    E = np.asarray(exponents)
    d = x.shape[1]
    table = _power_table(x, int(E.max(initial=0)))
    factors = [table[E[:, a], :, a] for a in range(d)]
    if isinstance(kind, Evaluation):
        return np.prod(factors, axis=0).T
    out = np.zeros((len(E), len(x)))
    for a in range(d):
        e = E[:, a]
        if isinstance(kind, Laplacian):
            deriv = (e * (e - 1))[:, None] * table[np.maximum(e - 2, 0), :, a]
        elif isinstance(kind, NormalDerivative):
            deriv = (kind.vector[a] * e)[:, None] * table[np.maximum(e - 1, 0), :, a]
        else:
            raise TypeError(f"unsupported operator kind {kind!r}")
        out += deriv * np.prod(factors[:a] + factors[a + 1 :], axis=0)
    return out.T


def monomial_apply(kind, exponent, eval_point) -> float:
    E = np.asarray(exponent, dtype=int)[None, :]
    return float(monomial_values(kind, E, np.asarray(eval_point, dtype=float))[0, 0])


# --------------------------------------------------------------------------
# neighbor search
# --------------------------------------------------------------------------

def _order_candidates(points, query, cand, n):
    dist = np.linalg.norm(points[cand] - query, axis=1)
    order = np.lexsort((cand, dist))
    return cand[order[:n]]


def knn(points, query, n: int, tree: cKDTree | None = None) -> np.ndarray:
    """Indices of the ``n`` nearest points, by distance then by index."""
    points = np.asarray(points, dtype=float)
    if n > len(points):
        raise ValueError(f"asked for {n} neighbors among {len(points)} points")
    return knn_batch(points, np.asarray(query, dtype=float)[None, :], n, tree)[0]


def knn_batch(points, queries, n: int, tree: cKDTree | None = None) -> np.ndarray:
    """Row-wise :func:`knn` for an ``(M, d)`` array of query points."""
    points = np.asarray(points, dtype=float)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if n > len(points):
        raise ValueError(f"asked for {n} neighbors among {len(points)} points")
    if n == 0:
        return np.zeros((len(queries), 0), dtype=int)
    tree = tree or cKDTree(points)
    extra = min(n + 1, len(points))
    _, idx = tree.query(queries, k=extra)
    idx = np.asarray(idx).reshape(len(queries), extra)
    dist = np.linalg.norm(points[idx] - queries[:, None, :], axis=2)
    order = np.lexsort((idx, dist), axis=1)
    idx = np.take_along_axis(idx, order, axis=1)
    dist = np.take_along_axis(dist, order, axis=1)
    out = idx[:, :n].copy()
    if extra > n:
        # a tie straddling the cut may hide a lower index further out
        tied = np.flatnonzero(dist[:, n] - dist[:, n - 1] <= 1e-14 * np.maximum(1.0, dist[:, n]))
        for row in tied:
            q = queries[row]
            cand = np.asarray(tree.query_ball_point(q, dist[row, n] * (1 + 1e-12) + 1e-300), dtype=int)
            out[row] = _order_candidates(points, q, cand, n)
    return out


# --------------------------------------------------------------------------
# weights
# --------------------------------------------------------------------------

def _saddle_matrix(z: np.ndarray, cfg: StencilConfig) -> np.ndarray:
    n = len(z)
    ell = cfg.ell
    r = cdist(z, z)
    M = np.zeros((n + ell, n + ell))
    M[:n, :n] = r * (r * r) ** cfg.k
    P = monomial_values(Evaluation(), monomial_exponents(cfg.d, cfg.m), z)
    M[:n, n:] = P
    M[n:, :n] = P.T
    return M


def stencil_weights(eval_point, neighbors, kind, cfg: StencilConfig, node: int | None = None) -> np.ndarray:
    """RBF-FD weights at ``eval_point`` for the operator ``kind``.

    Raises
    ------
    SingularStencil
        When fewer neighbors than monomials are given or the local saddle
        matrix has reciprocal condition number below ``RCOND_MIN``.
    """
    x_e = np.asarray(eval_point, dtype=float)
    X = np.atleast_2d(np.asarray(neighbors, dtype=float))
    n, ell = len(X), cfg.ell
    if n < ell:
        raise SingularStencil(f"stencil has {n} nodes but {ell} monomials", node=node)

    diff = X - x_e
    dist = np.linalg.norm(diff, axis=1)
    if isinstance(kind, Evaluation) and np.any(dist == 0.0):
        w = np.zeros(n)
        w[int(np.argmin(dist))] = 1.0
        return w

    rho = dist.max()
    if not rho > 0:
        raise SingularStencil("degenerate stencil: all nodes coincide", node=node)
    z = diff / rho

    M = _saddle_matrix(z, cfg)
    rhs = np.empty(n + ell)
    rhs[:n] = phs_values(kind, -z, cfg.k)
    rhs[n:] = monomial_values(kind, monomial_exponents(cfg.d, cfg.m), np.zeros((1, cfg.d)))[0]
    # equilibrate the monomial columns; w is invariant, only v is rescaled
    col = np.abs(M[:n, n:]).max(axis=0)
    col[col == 0.0] = 1.0
    M[:n, n:] /= col
    M[n:, :n] /= col[:, None]
    rhs[n:] /= col

    anorm = lapack.dlange("1", M)
    lu, piv, info = lapack.dgetrf(M)
    if info > 0:
        raise SingularStencil("exactly singular saddle matrix", node=node, rcond=0.0)
    rcond, _ = lapack.dgecon(lu, anorm, norm="1")
    if not rcond >= RCOND_MIN:
        raise SingularStencil(f"ill-conditioned saddle matrix (rcond={rcond:.2e})", node=node, rcond=rcond)
    sol, info = lapack.dgetrs(lu, piv, rhs)
    return sol[:n] / rho**kind.order
