"""Single solves, refinement sweeps, (m, n/l) heatmaps and timing sweeps.

Sweeps never abort on a failing cell; the failure is recorded in the row's
``status`` column and the sweep moves on.  Rows are ordered by
(level, seed, method, m, ratio) so CSV output is deterministic.  Wall-clock
timings go to a separate ``*.timing.csv`` file, leaving the error CSV
byte-reproducible.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .assembly import CollocationMode
from .exceptions import ConfigError, RBFFDError
from .geometry import NodeSet, fitted_node_set, representative_spacing, unfitted_node_set
from .problems import get_problem
from .rbf_core import StencilConfig
from .solvers import SolveReport, solve_collocation, solve_lm1, solve_lm2

log = logging.getLogger(__name__)

METHODS = ("c", "lm1", "lm2")
NODESETS = ("fitted", "fitted-interior", "unfitted")
ORDER_FLOOR = 100 * np.finfo(float).eps


@dataclass
class RunConfig:
    problem: str = "tp1"
    method: str = "lm2"
    nodeset: str = "unfitted"
    m: int = 3
    ratio: float = 2.0
    k: int = 1
    h: float | None = 0.05
    n_interior: int | None = None
    seed: int = 1
    out: str | None = None

    def validate(self) -> RunConfig:
        try:
            get_problem(self.problem)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.nodeset not in NODESETS:
            raise ConfigError(f"nodeset must be one of {NODESETS}, got {self.nodeset!r}")
        if self.method == "c" and self.nodeset != "fitted":
            raise ConfigError("method 'c' needs the boundary-fitted node set with full collocation")
        if self.m < 0 or self.k < 1 or not self.ratio > 0:
            raise ConfigError("need m >= 0, k >= 1 and ratio > 0")
        if self.h is None and self.n_interior is None:
            raise ConfigError("give either h or n_interior")
        if self.h is not None and not self.h > 0:
            raise ConfigError("h must be positive")
        return self

    def spacing(self) -> float:
        if self.n_interior is not None:
            return representative_spacing(get_problem(self.problem).domain, self.n_interior)
        return float(self.h)

    def stencil(self, m: int | None = None, ratio: float | None = None) -> StencilConfig:
        d = get_problem(self.problem).domain.dim
        return StencilConfig(m=self.m if m is None else m, ratio=self.ratio if ratio is None else ratio, k=self.k, d=d)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> RunConfig:
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> RunConfig:
        return cls.from_json(Path(path).read_text())


# --------------------------------------------------------------------------
# single runs
# --------------------------------------------------------------------------

def build_nodes(config: RunConfig, h: float | None = None, seed: int | None = None) -> NodeSet:
    problem = get_problem(config.problem)
    h = config.spacing() if h is None else h
    seed = config.seed if seed is None else seed
    if config.nodeset == "unfitted":
        return unfitted_node_set(problem.domain, h, seed, problem.split)
    return fitted_node_set(problem.domain, h, seed, problem.split)


def solve(config: RunConfig, nodes: NodeSet, method: str | None = None, cfg: StencilConfig | None = None) -> SolveReport:
    problem = get_problem(config.problem)
    method = method or config.method
    cfg = cfg or config.stencil()
    if method == "c":
        return solve_collocation(problem, nodes, cfg)
    mode = CollocationMode.FITTED_FULL if config.nodeset == "fitted" else CollocationMode.INTERIOR_ONLY
    return (solve_lm1 if method == "lm1" else solve_lm2)(problem, nodes, mode, cfg)


def write_solution_csv(report: SolveReport, path) -> None:
    d = report.points.shape[1]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow([*"xyz"[:d], "u_num", "u_exact", "abs_err"])
        for p, u, ue in zip(report.points, report.u, report.u_exact):
            out.writerow([*(repr(float(v)) for v in p), repr(float(u)), repr(float(ue)), repr(abs(float(u - ue)))])


def run_single(config: RunConfig) -> SolveReport:
    config.validate()
    nodes = build_nodes(config)
    try:
        report = solve(config, nodes)
    except RBFFDError as exc:
        raise type(exc)(f"{exc} [problem={config.problem} method={config.method} nodeset={config.nodeset} "
                        f"m={config.m} ratio={config.ratio} h={config.spacing():.4g}]") from exc
    if config.out:
        write_solution_csv(report, config.out)
    return report


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

ROW_FIELDS = ("level", "seed", "h", "N_I", "N", "method", "m", "ratio", "rel_l2_error", "log10_error",
              "linear_residual", "constraint_residual", "status")
TIMING_FIELDS = ("level", "seed", "method", "m", "ratio", "N_I", "weights_time", "assembly_time", "solve_time",
                 "rel_l2_error")


@dataclass
class SweepRow:
    level: int
    seed: int
    h: float
    N_I: int
    N: int
    method: str
    m: int
    ratio: float
    rel_l2_error: float = math.nan
    linear_residual: float = math.nan
    constraint_residual: float = math.nan
    status: str = "ok"
    weights_time: float = math.nan
    assembly_time: float = math.nan
    solve_time: float = math.nan

    @property
    def log10_error(self) -> float:
        return math.log10(self.rel_l2_error) if self.rel_l2_error > 0 else math.nan

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    orders: dict = field(default_factory=dict)

    def select(self, **match) -> list[SweepRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]

    def errors(self, **match) -> np.ndarray:
        return np.array([r.rel_l2_error for r in self.select(**match)])


def fit_order(h, err, floor: float = ORDER_FLOOR) -> float:
    """Least-squares slope of log(err) against log(h), skipping round-off plateaus.

    NaN when fewer than three usable levels remain.
    """
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    use = np.isfinite(err) & (err > floor)
    if len(np.unique(h[use])) < 3:
        return math.nan
    return float(np.polyfit(np.log(h[use]), np.log(err[use]), 1)[0])


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_sweep_csv(result: SweepResult, path) -> None:
    """Deterministic error table plus ``<stem>.timing.csv`` with wall times."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(ROW_FIELDS)
        for row in result.rows:
            out.writerow([_fmt(getattr(row, f)) for f in ROW_FIELDS])
    with open(path.with_suffix(".timing.csv"), "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(TIMING_FIELDS)
        for row in result.rows:
            out.writerow([_fmt(getattr(row, f)) for f in TIMING_FIELDS])


def _run_cell(config, nodes, level, seed, method, m, ratio) -> SweepRow:
    counts = nodes.counts
    row = SweepRow(level=level, seed=seed, h=float(nodes.h), N_I=counts["I"], N=len(nodes),
                   method=method, m=m, ratio=ratio)
    try:
        report = solve(config, nodes, method, config.stencil(m, ratio))
    except RBFFDError as exc:
        row.status = exc.code
        log.warning("cell level=%d seed=%d %s m=%d ratio=%g failed: %s", level, seed, method, m, ratio, exc)
        return row
    row.rel_l2_error = report.rel_l2_error
    row.linear_residual = report.linear_residual
    row.constraint_residual = report.constraint_residual
    row.weights_time = report.wall_times["weights"]
    row.assembly_time = report.wall_times["assembly"]
    row.solve_time = report.wall_times["solve"]
    log.info("level=%d seed=%d N_I=%d %s m=%d ratio=%g e=%.3e", level, seed, row.N_I, method, m, ratio,
             row.rel_l2_error)
    return row


def _check_methods(config: RunConfig, methods) -> list[str]:
    methods = list(methods or [config.method])
    for method in methods:
        RunConfig(**{**asdict(config), "method": method}).validate()
    return methods


def default_levels(h: float, count: int = 3) -> list[float]:
    return [h / 2**i for i in range(count)]


def levels_for_counts(problem: str, counts) -> list[float]:
    """Spacings giving roughly the requested interior node counts."""
    domain = get_problem(problem).domain
    return [representative_spacing(domain, n) for n in counts]


def run_convergence(config: RunConfig, levels=None, ms=None, methods=None, seeds=None) -> SweepResult:
    """Refinement sweep; orders are fitted per (method, m) over all levels and seeds."""
    config.validate()
    levels = list(levels or default_levels(config.spacing()))
    if len(levels) < 3:
        raise ConfigError("a convergence sweep needs at least 3 levels")
    ms = list(ms or [config.m])
    methods = _check_methods(config, methods)
    seeds = list(seeds or [config.seed])
    result = SweepResult()
    for level, h in enumerate(levels):
        for seed in seeds:
            nodes = build_nodes(config, h, seed)
            for method in methods:
                for m in ms:
                    result.rows.append(_run_cell(config, nodes, level, seed, method, m, config.ratio))
    for method in methods:
        for m in ms:
            rows = [r for r in result.select(method=method, m=m) if r.ok]
            result.orders[(method, m)] = fit_order([r.h for r in rows], [r.rel_l2_error for r in rows])
    if config.out:
        write_sweep_csv(result, config.out)
    return result


def run_heatmap(config: RunConfig, ms=None, ratios=None, methods=None) -> SweepResult:
    """Errors over an (m, ratio) grid at fixed spacing; singular cells are recorded, not fatal."""
    config.validate()
    ms = list(ms or range(2, 7))
    ratios = list(ratios or [2.0, 2.5, 3.0])
    if not ms or not ratios:
        raise ConfigError("heatmap ranges must be nonempty")
    methods = _check_methods(config, methods)
    nodes = build_nodes(config)
    result = SweepResult()
    for method in methods:
        for m in ms:
            for ratio in ratios:
                result.rows.append(_run_cell(config, nodes, 0, config.seed, method, m, ratio))
    if config.out:
        write_sweep_csv(result, config.out)
    return result


def run_timing(config: RunConfig, methods=None, levels=None) -> SweepResult:
    """Error against assembly + solve time (stencil weights excluded)."""
    config.validate()
    levels = list(levels or default_levels(config.spacing(), 2))
    if len(levels) < 2:
        raise ConfigError("a timing sweep needs at least 2 levels")
    methods = _check_methods(config, methods or ["lm1", "lm2"])
    result = SweepResult()
    for level, h in enumerate(levels):
        nodes = build_nodes(config, h)
        for method in methods:
            result.rows.append(_run_cell(config, nodes, level, config.seed, method, config.m, config.ratio))
    if config.out:
        write_sweep_csv(result, config.out)
    return result


def format_table(result: SweepResult) -> str:
    lines = [f"{'lvl':>3} {'seed':>4} {'N_I':>7} {'method':>6} {'m':>2} {'ratio':>5} {'rel_l2_error':>12}  status"]
    for r in result.rows:
        lines.append(f"{r.level:>3} {r.seed:>4} {r.N_I:>7} {r.method:>6} {r.m:>2} {r.ratio:>5.2f} "
                     f"{r.rel_l2_error:>12.3e}  {r.status}")
    for (method, m), order in sorted(result.orders.items()):
        lines.append(f"order {method} m={m}: {order:.2f}")
    return "\n".join(lines)
