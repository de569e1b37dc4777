"""Domains, boundary parametrizations and node-set generation.

Three domains are supported: the unit disk, the butterfly curve (a star-shaped
2-D domain given in polar form) and the unit ball.  Node sets are either
*unfitted* (interior nodes scattered with no regard to the boundary) or
*boundary-fitted* (interior nodes repelled away from explicitly placed
boundary nodes).
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import BoundaryPointError, NodeGenerationError

INTERIOR = "I"
DIRICHLET = "D"
NEUMANN = "N"
ROLES = (INTERIOR, DIRICHLET, NEUMANN)

BOUNDARY_TOL = 1e-12


# --------------------------------------------------------------------------
# butterfly curve
# --------------------------------------------------------------------------

def butterfly_radius(theta):
    """Polar radius r(theta) of the butterfly boundary (2*pi periodic, > 0)."""
    theta = np.asarray(theta, dtype=float)
    r = 0.25 * (
        2.0
        + np.sin(2.0 * theta)
        - 0.01 * np.cos(5.0 * theta - 0.5 * np.pi)
        + 0.63 * np.sin(6.0 * theta - 0.1)
    )
    return r if r.ndim else float(r)


def butterfly_radius_derivative(theta):
    """Analytic d r / d theta of :func:`butterfly_radius`."""
    theta = np.asarray(theta, dtype=float)
    dr = 0.25 * (
        2.0 * np.cos(2.0 * theta)
        + 0.05 * np.sin(5.0 * theta - 0.5 * np.pi)
        + 3.78 * np.cos(6.0 * theta - 0.1)
    )
    return dr if dr.ndim else float(dr)


def _butterfly_curve(theta: np.ndarray) -> np.ndarray:
    r = butterfly_radius(theta)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def _butterfly_tangent(theta: np.ndarray) -> np.ndarray:
    r = butterfly_radius(theta)
    dr = butterfly_radius_derivative(theta)
    c, s = np.cos(theta), np.sin(theta)
    return np.column_stack([dr * c - r * s, dr * s + r * c])


# --------------------------------------------------------------------------
# domains
# --------------------------------------------------------------------------

_SHAPES = {"disk": 2, "butterfly": 2, "ball": 3}


@dataclass(frozen=True)
class Domain:
    """A closed, bounded domain of one of the supported shapes."""

    shape: str

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ValueError(f"unknown domain shape {self.shape!r}")

    @property
    def dim(self) -> int:
        return _SHAPES[self.shape]

    @property
    def diameter(self) -> float:
        if self.shape == "butterfly":
            lo, hi = self.bounding_box()
            return float(np.linalg.norm(hi - lo))
        return 2.0

    def measure(self) -> float:
        """Area (2-D) or volume (3-D)."""
        if self.shape == "disk":
            return math.pi
        if self.shape == "ball":
            return 4.0 * math.pi / 3.0
        # periodic trapezoid rule is spectrally accurate here
        theta = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
        return float(0.5 * np.mean(butterfly_radius(theta) ** 2) * 2.0 * np.pi)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.shape == "butterfly":
            theta = np.linspace(0.0, 2.0 * np.pi, 20000, endpoint=False)
            curve = _butterfly_curve(theta)
            return curve.min(axis=0) - 1e-3, curve.max(axis=0) + 1e-3
        return -np.ones(self.dim), np.ones(self.dim)

    def centroid(self) -> np.ndarray:
        if self.shape != "butterfly":
            return np.zeros(self.dim)
        theta = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
        r = butterfly_radius(theta)
        # centroid of a polar region: (2/3) * int r^3 (cos, sin) / int r^2
        w = r**3
        return (2.0 / 3.0) * np.array([np.sum(w * np.cos(theta)), np.sum(w * np.sin(theta))]) / np.sum(r**2)

    def boundary_residual(self, x) -> np.ndarray:
        """Signed implicit function: negative inside, zero on the boundary."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        radius = np.linalg.norm(x, axis=1)
        if self.shape == "butterfly":
            return radius - butterfly_radius(np.arctan2(x[:, 1], x[:, 0]))
        return radius - 1.0


UNIT_DISK = Domain("disk")
BUTTERFLY = Domain("butterfly")
UNIT_BALL = Domain("ball")


def contains(domain: Domain, x, strict: bool = False):
    """Membership test for the closed domain (open interior if ``strict``).

    Accepts a single point or an ``(N, d)`` array.
    """
    arr = np.asarray(x, dtype=float)
    res = domain.boundary_residual(arr)
    inside = res < 0.0 if strict else res <= 0.0
    return bool(inside[0]) if arr.ndim == 1 else inside


def outward_normals(domain: Domain, b, tol: float = 1e-10) -> np.ndarray:
    """Unit outward normals at an ``(N, d)`` array of boundary points."""
    b = np.atleast_2d(np.asarray(b, dtype=float))
    res = domain.boundary_residual(b)
    if np.any(np.abs(res) > tol):
        worst = int(np.argmax(np.abs(res)))
        raise BoundaryPointError(
            f"point {b[worst].tolist()} is off the {domain.shape} boundary by {res[worst]:.3e}"
        )
    if domain.shape == "butterfly":
        t = _butterfly_tangent(np.arctan2(b[:, 1], b[:, 0]))
        # curve runs counter-clockwise, so the outward normal is the tangent turned clockwise
        n = np.column_stack([t[:, 1], -t[:, 0]])
    else:
        n = b.copy()
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def outward_normal(domain: Domain, b, tol: float = 1e-10) -> np.ndarray:
    return outward_normals(domain, np.asarray(b, dtype=float)[None, :], tol)[0]


# --------------------------------------------------------------------------
# node sets
# --------------------------------------------------------------------------

@dataclass
class NodeSet:
    """Scattered nodes with role labels.

    ``normals`` is ``(N, d)`` with NaN rows for nodes that carry no normal.
    ``h`` is the representative spacing (measure / N_I) ** (1 / d) for sets
    with interior nodes, otherwise the spacing the set was generated with.
    """

    points: np.ndarray
    roles: np.ndarray
    normals: np.ndarray
    h: float
    domain: Domain | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.roles = np.asarray(self.roles, dtype="<U1")
        if self.normals is None:
            self.normals = np.full(self.points.shape, np.nan)
        self.normals = np.asarray(self.normals, dtype=float)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    def index(self, role: str) -> np.ndarray:
        return np.flatnonzero(self.roles == role)

    @property
    def interior(self) -> np.ndarray:
        return self.index(INTERIOR)

    @property
    def dirichlet(self) -> np.ndarray:
        return self.index(DIRICHLET)

    @property
    def neumann(self) -> np.ndarray:
        return self.index(NEUMANN)

    @property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero(self.roles != INTERIOR)

    @property
    def counts(self) -> dict[str, int]:
        return {r: int(np.sum(self.roles == r)) for r in ROLES}

    def subset(self, idx) -> NodeSet:
        idx = np.asarray(idx)
        return replace(self, points=self.points[idx], roles=self.roles[idx], normals=self.normals[idx], meta=dict(self.meta))

    def relabel(self, role: str) -> NodeSet:
        return replace(self, roles=np.full(len(self), role), meta=dict(self.meta))


def merge(*sets: NodeSet) -> NodeSet:
    """Concatenate node sets (first set's spacing and domain are kept)."""
    first = sets[0]
    return NodeSet(
        points=np.vstack([s.points for s in sets]),
        roles=np.concatenate([s.roles for s in sets]),
        normals=np.vstack([s.normals for s in sets]),
        h=first.h,
        domain=first.domain,
        meta=dict(first.meta),
    )


def representative_spacing(domain: Domain, n_interior: int) -> float:
    return (domain.measure() / n_interior) ** (1.0 / domain.dim)


# --------------------------------------------------------------------------
# boundary condition split rules
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AllDirichlet:
    def __call__(self, points: np.ndarray) -> np.ndarray:
        return np.zeros(len(points), dtype=bool)


@dataclass(frozen=True)
class AngularSplit:
    """Neumann where the polar angle (in [0, 2*pi)) falls in [start, stop)."""

    start: float = 0.0
    stop: float = math.pi

    def __call__(self, points: np.ndarray) -> np.ndarray:
        theta = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2.0 * np.pi)
        return (theta >= self.start) & (theta < self.stop)


@dataclass(frozen=True)
class HemisphereSplit:
    """Dirichlet on z >= 0, Neumann on z < 0."""

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return points[:, 2] < 0.0


SplitRule = Callable[[np.ndarray], np.ndarray]


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------

def _thin(points: np.ndarray, radius: float) -> np.ndarray:
    """Greedy Poisson-disk thinning: drop the later node of every close pair."""
    pairs = cKDTree(points).query_pairs(radius, output_type="ndarray")
    keep = np.ones(len(points), dtype=bool)
    if len(pairs):
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
        for i, j in pairs:
            if keep[i] and keep[j]:
                keep[j] = False
    return points[keep]


def generate_interior_nodes(domain: Domain, h: float, seed: int = 0, jitter: float = 0.3) -> NodeSet:
    """Quasi-uniform unfitted interior nodes.

    A grid of spacing ``h`` over the covering box is jittered uniformly by up
    to ``jitter * h`` per coordinate, thinned so no two nodes are closer than
    ``h / 2`` and clipped to the open domain.
    """
    if not h > 0:
        raise NodeGenerationError("spacing h must be positive")
    lo, hi = domain.bounding_box()
    axes = [np.arange(a - h, b + 1.5 * h, h) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dim)
    rng = np.random.default_rng(seed)
    pts = grid + rng.uniform(-jitter, jitter, size=grid.shape) * h
    pts = pts[contains(domain, pts, strict=True)]
    pts = _thin(pts, 0.5 * h)
    if len(pts) == 0:
        raise NodeGenerationError(f"h={h} too large: no interior node inside the {domain.shape}")
    return NodeSet(
        points=pts,
        roles=np.full(len(pts), INTERIOR),
        normals=None,
        h=representative_spacing(domain, len(pts)),
        domain=domain,
        meta={"target_h": h, "seed": seed},
    )


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` near-equal-area points on the unit sphere (golden-angle spiral)."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = np.pi * (3.0 - np.sqrt(5.0)) * np.arange(n)
    pts = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def _butterfly_arclength_nodes(h: float, panels: int = 10000) -> np.ndarray:
    theta = np.linspace(0.0, 2.0 * np.pi, panels + 1)
    speed = np.linalg.norm(_butterfly_tangent(theta), axis=1)
    s = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(theta))])
    count = max(3, int(round(s[-1] / h)))
    targets = np.arange(count) * s[-1] / count
    return _butterfly_curve(np.interp(targets, s, theta))


def generate_boundary_nodes(domain: Domain, h: float, split: SplitRule | None = None) -> NodeSet:
    """Boundary nodes with arclength (2-D) or area (3-D) spacing about ``h``."""
    if not h > 0:
        raise NodeGenerationError("spacing h must be positive")
    split = split or AllDirichlet()
    if domain.shape == "disk":
        count = max(3, int(round(2.0 * np.pi / h)))
        theta = 2.0 * np.pi * np.arange(count) / count
        pts = np.column_stack([np.cos(theta), np.sin(theta)])
    elif domain.shape == "butterfly":
        pts = _butterfly_arclength_nodes(h)
    else:
        pts = fibonacci_sphere(max(4, int(round(4.0 * np.pi / h**2))))
    neumann = np.asarray(split(pts), dtype=bool)
    roles = np.where(neumann, NEUMANN, DIRICHLET)
    normals = np.full(pts.shape, np.nan)
    if neumann.any():
        normals[neumann] = outward_normals(domain, pts[neumann])
    return NodeSet(points=pts, roles=roles, normals=normals, h=h, domain=domain, meta={"target_h": h})


def fit_nodes(
    interior: NodeSet,
    boundary: NodeSet,
    iterations: int = 50,
    support: float = 2.0,
    step: float = 0.2,
) -> NodeSet:
    """Repel interior nodes away from boundary nodes (boundary-fitted set).

    Only nodes initially within ``support * h`` of a boundary node move; each
    iteration moves a node at most ``step * h``.  Boundary nodes stay put and
    the node count is preserved.  Emits a ``RuntimeWarning`` when some
    interior node is still closer than ``h / 2`` to a boundary node after
    ``iterations`` steps.
    """
    if iterations <= 0:
        return interior
    domain = interior.domain or boundary.domain
    h = interior.meta.get("target_h", interior.h)
    x = interior.points.copy()
    b = boundary.points
    btree = cKDTree(b)
    active = np.flatnonzero(btree.query(x)[0] < support * h)
    radius = support * h
    if domain is not None:
        inward = -outward_normals(domain, b, tol=1e-8)
    else:
        inward = None

    def strength(r):
        return (h / r) ** 3 - (h / radius) ** 3

    for _ in range(iterations):
        if not len(active):
            break
        xa = x[active]
        force = np.zeros_like(xa)
        pairs = cKDTree(xa).sparse_distance_matrix(cKDTree(x), radius, output_type="ndarray")
        pairs = pairs[pairs["v"] > 0]
        i, j, r = pairs["i"], pairs["j"], pairs["v"]
        np.add.at(force, i, (xa[i] - x[j]) / r[:, None] * strength(r)[:, None])
        # boundary nodes push along their inward normal so that nodes hugging
        # the curve are not merely slid tangentially
        pairs = cKDTree(xa).sparse_distance_matrix(btree, radius, output_type="ndarray")
        i, j, r = pairs["i"], pairs["j"], np.maximum(pairs["v"], 1e-3 * h)
        direction = inward[j] if inward is not None else (xa[i] - b[j]) / r[:, None]
        np.add.at(force, i, direction * strength(r)[:, None])

        norm = np.linalg.norm(force, axis=1, keepdims=True)
        # a few units of force saturate at the maximal step
        length = step * h * np.tanh(norm / 4.0)
        trial = xa + force * (length / np.where(norm > 0, norm, 1.0))
        inside = contains(domain, trial, strict=True) if domain is not None else np.ones(len(trial), bool)
        x[active[inside]] = trial[inside]
        if np.max(length[inside], initial=0.0) < 1e-3 * h:
            break

    dist_b = btree.query(x)[0]
    if dist_b.min() < 0.5 * h:
        warnings.warn(
            f"node repulsion left {int(np.sum(dist_b < 0.5 * h))} interior nodes closer than h/2 to the boundary",
            RuntimeWarning,
            stacklevel=2,
        )
    return replace(interior, points=x, meta={**interior.meta, "fitted": True})


def fitted_node_set(domain: Domain, h: float, seed: int = 0, split: SplitRule | None = None, iterations: int = 50) -> NodeSet:
    boundary = generate_boundary_nodes(domain, h, split)
    interior = fit_nodes(generate_interior_nodes(domain, h, seed), boundary, iterations)
    return merge(interior, boundary)


def unfitted_node_set(domain: Domain, h: float, seed: int = 0, split: SplitRule | None = None) -> NodeSet:
    return merge(generate_interior_nodes(domain, h, seed), generate_boundary_nodes(domain, h, split))


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

_AXES = "xyz"


def write_nodeset_csv(nodes: NodeSet, path) -> None:
    d = nodes.dim
    header = [*_AXES[:d], "role", *("n" + a for a in _AXES[:d])]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for p, role, n in zip(nodes.points, nodes.roles, nodes.normals):
            normal = [repr(float(v)) for v in n] if role == NEUMANN else [""] * d
            out.writerow([*(repr(float(v)) for v in p), role, *normal])


def read_nodeset_csv(path, domain: Domain | None = None) -> NodeSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = header.index("role")
    points = np.array([[float(v) for v in r[:d]] for r in body]).reshape(-1, d)
    roles = np.array([r[d] for r in body], dtype="<U1")
    normals = np.array([[float(v) if v else np.nan for v in r[d + 1 :]] for r in body]).reshape(-1, d)
    n_int = int(np.sum(roles == INTERIOR))
    h = representative_spacing(domain, n_int) if domain is not None and n_int else float("nan")
    return NodeSet(points=points, roles=roles, normals=normals, h=h, domain=domain, meta={"source": str(Path(path))})
