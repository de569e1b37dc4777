"""Manufactured Poisson problems and the relative l2 error metric."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import DegenerateNorm
from .geometry import (
    BUTTERFLY,
    UNIT_BALL,
    UNIT_DISK,
    AllDirichlet,
    AngularSplit,
    Domain,
    HemisphereSplit,
    SplitRule,
    outward_normals,
)

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ManufacturedProblem:
    """Exact solution ``u`` with its gradient and Laplacian, on ``domain``.

    All callables take an ``(N, d)`` array.  ``gradient`` returns ``(N, d)``.
    """

    name: str
    domain: Domain
    u_exact: Field
    gradient: Field
    laplacian: Field
    split: SplitRule

    def f(self, x):
        return self.laplacian(np.atleast_2d(x))

    def g(self, x):
        return self.u_exact(np.atleast_2d(x))

    def h(self, x, normals=None):
        """Normal-derivative data; normals default to the domain's outward normals."""
        x = np.atleast_2d(x)
        n = outward_normals(self.domain, x) if normals is None else np.atleast_2d(normals)
        return np.sum(self.gradient(x) * n, axis=1)


# --------------------------------------------------------------------------
# TP1: sin(10(x + y)) on the unit disk
# --------------------------------------------------------------------------

def _tp1_u(x):
    return np.sin(10.0 * (x[:, 0] + x[:, 1]))


def _tp1_grad(x):
    c = 10.0 * np.cos(10.0 * (x[:, 0] + x[:, 1]))
    return np.column_stack([c, c])


def _tp1_lap(x):
    return -200.0 * np.sin(10.0 * (x[:, 0] + x[:, 1]))


def tp1() -> ManufacturedProblem:
    return ManufacturedProblem("tp1", UNIT_DISK, _tp1_u, _tp1_grad, _tp1_lap, AllDirichlet())


# --------------------------------------------------------------------------
# TP2: Franke's function on the butterfly
# --------------------------------------------------------------------------

# (coefficient, x-rate, x-shift, y-rate, y-shift) for c * exp(-(a (9x - s)^2 + b (9y - t)^2))
FRANKE_TERMS = (
    (0.75, 0.25, 2.0, 0.25, 2.0),
    (0.75, 1.0 / 49.0, -1.0, 0.1, -1.0),
    (0.5, 0.25, 7.0, 0.25, 3.0),
    (-0.2, 1.0, 4.0, 1.0, 7.0),
)


def _franke_parts(x):
    for c, a, s, b, t in FRANKE_TERMS:
        px = 9.0 * x[:, 0] - s
        py = 9.0 * x[:, 1] - t
        e = c * np.exp(-(a * px**2 + b * py**2))
        # d/dx of the exponent is -18 a px, second derivative -162 a
        yield e, -18.0 * a * px, -18.0 * b * py, -162.0 * a, -162.0 * b


def franke(x):
    x = np.atleast_2d(x)
    return sum(e for e, *_ in _franke_parts(x))


def _franke_grad(x):
    x = np.atleast_2d(x)
    return sum(np.column_stack([e * gx, e * gy]) for e, gx, gy, _, _ in _franke_parts(x))


def _franke_lap(x):
    x = np.atleast_2d(x)
    return sum(e * (gx**2 + hx + gy**2 + hy) for e, gx, gy, hx, hy in _franke_parts(x))


def tp2(split: SplitRule | None = None) -> ManufacturedProblem:
    """Butterfly with mixed conditions; Neumann on polar angles in [0, pi) by default."""
    return ManufacturedProblem("tp2", BUTTERFLY, franke, _franke_grad, _franke_lap, split or AngularSplit())


# --------------------------------------------------------------------------
# TP3 / TP4: sin(pi x) + cos(pi y) + sin(pi z) on the unit ball
# --------------------------------------------------------------------------

def _ball_u(x):
    return np.sin(np.pi * x[:, 0]) + np.cos(np.pi * x[:, 1]) + np.sin(np.pi * x[:, 2])


def _ball_grad(x):
    return np.pi * np.column_stack(
        [np.cos(np.pi * x[:, 0]), -np.sin(np.pi * x[:, 1]), np.cos(np.pi * x[:, 2])]
    )


def _ball_lap(x):
    return -np.pi**2 * _ball_u(x)


def tp3() -> ManufacturedProblem:
    return ManufacturedProblem("tp3", UNIT_BALL, _ball_u, _ball_grad, _ball_lap, AllDirichlet())


def tp4() -> ManufacturedProblem:
    return ManufacturedProblem("tp4", UNIT_BALL, _ball_u, _ball_grad, _ball_lap, HemisphereSplit())


PROBLEMS = {"tp1": tp1, "tp2": tp2, "tp3": tp3, "tp4": tp4}


def get_problem(name: str) -> ManufacturedProblem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


def relative_l2_error(u_num, u_exact) -> float:
    u_num = np.asarray(u_num, dtype=float)
    u_exact = np.asarray(u_exact, dtype=float)
    if u_num.shape != u_exact.shape:
        raise ValueError(f"shape mismatch {u_num.shape} vs {u_exact.shape}")
    denom = np.linalg.norm(u_exact)
    if denom == 0.0:
        raise DegenerateNorm("exact solution has zero l2 norm")
    return float(np.linalg.norm(u_num - u_exact) / denom)
