from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbffd_lm.exceptions import ConfigError
from rbffd_lm.harness import (
    RunConfig,
    fit_order,
    format_table,
    levels_for_counts,
    run_convergence,
    run_heatmap,
    run_single,
    run_timing,
    write_sweep_csv,
)

# regression value from the first verified run (tp1/lm2/unfitted/m=3/ratio=2/h=0.05/seed=1)
TP1_LM2_UNFITTED_M3 = 8.724251178676848e-02


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(method="c", nodeset="unfitted").validate()
    with pytest.raises(ConfigError):
        RunConfig(problem="tp7").validate()
    with pytest.raises(ConfigError):
        RunConfig(h=None, n_interior=None).validate()
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"problem": "tp1", "colour": "red"})
    RunConfig(method="c", nodeset="fitted").validate()


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(["tp1", "tp2", "tp3", "tp4"]),
    st.sampled_from(["lm1", "lm2"]),
    st.sampled_from(["fitted", "fitted-interior", "unfitted"]),
    st.integers(0, 8),
    st.floats(1.0, 4.0),
    st.one_of(st.none(), st.floats(1e-3, 0.5)),
    st.integers(0, 10_000),
)
def test_config_round_trip(problem, method, nodeset, m, ratio, h, seed):
    cfg = RunConfig(problem=problem, method=method, nodeset=nodeset, m=m, ratio=ratio, h=h,
                    n_interior=None if h else 500, seed=seed)
    assert RunConfig.from_json(cfg.to_json()) == cfg


def test_config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"problem": "tp2", "m": 4, "n_interior": 800, "h": None}))
    cfg = RunConfig.load(path).validate()
    assert cfg.m == 4 and cfg.problem == "tp2"
    assert cfg.spacing() == pytest.approx(cfg.spacing())


def test_run_single_regression_and_determinism(tmp_path):
    out = tmp_path / "sol.csv"
    cfg = RunConfig(problem="tp1", method="lm2", nodeset="unfitted", m=3, ratio=2, h=0.05, seed=1, out=str(out))
    a = run_single(cfg)
    b = run_single(RunConfig(**{**cfg.__dict__, "out": None}))
    assert a.rel_l2_error == b.rel_l2_error
    assert a.rel_l2_error == pytest.approx(TP1_LM2_UNFITTED_M3, rel=1e-9)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["x", "y", "u_num", "u_exact", "abs_err"]
    assert len(rows) - 1 == a.sizes["N_I"]


def test_run_single_error_has_context():
    cfg = RunConfig(problem="tp1", method="lm2", nodeset="unfitted", m=4, ratio=0.5, h=0.1)
    with pytest.raises(Exception) as info:
        run_single(cfg)
    assert "m=4" in str(info.value) and "ratio=0.5" in str(info.value)


def test_fit_order():
    h = np.array([0.1, 0.05, 0.025])
    assert fit_order(h, 3 * h**4) == pytest.approx(4.0)
    assert math.isnan(fit_order(h[:2], h[:2] ** 2))
    # round-off plateau levels are skipped
    assert math.isnan(fit_order(h, [1e-3, 1e-16, 1e-17]))


def test_convergence_sweep(tmp_path):
    out = tmp_path / "conv.csv"
    cfg = RunConfig(problem="tp1", method="lm2", nodeset="unfitted", m=2, h=0.1, out=str(out))
    result = run_convergence(cfg, [0.1, 0.07, 0.05], ms=[2, 4])
    assert len(result.rows) == 6
    assert result.orders[("lm2", 4)] > result.orders[("lm2", 2)] > 1
    text = out.read_text()
    assert text.splitlines()[0].startswith("level,seed,h,N_I")
    assert len(text.splitlines()) == 7
    assert out.with_suffix(".timing.csv").exists()
    assert "order lm2 m=4" in format_table(result)
    with pytest.raises(ConfigError):
        run_convergence(cfg, [0.1, 0.05])


def test_sweep_csv_is_deterministic(tmp_path):
    cfg = RunConfig(problem="tp2", method="lm1", nodeset="unfitted", m=3, h=0.08)
    paths = []
    for i in range(2):
        result = run_convergence(cfg, [0.08, 0.06, 0.045], seeds=[1, 2])
        paths.append(tmp_path / f"c{i}.csv")
        write_sweep_csv(result, paths[-1])
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_heatmap_records_singular_cells():
    cfg = RunConfig(problem="tp1", method="lm2", nodeset="fitted", h=0.1)
    result = run_heatmap(cfg, ms=[2, 3], ratios=[0.8, 2.0])
    status = {(r.m, r.ratio): r.status for r in result.rows}
    assert status[(2, 0.8)] == "singular_stencil"
    assert status[(3, 0.8)] == "singular_stencil"
    assert status[(2, 2.0)] == "ok" and status[(3, 2.0)] == "ok"
    assert math.isnan(result.select(m=2, ratio=0.8)[0].rel_l2_error)


def test_timing_rows():
    cfg = RunConfig(problem="tp2", nodeset="unfitted", m=3, h=0.05)
    result = run_timing(cfg, ["lm1", "lm2"], [0.05, 0.035])
    assert len(result.rows) == 4
    assert all(r.solve_time > 0 and r.assembly_time >= 0 for r in result.rows)
    with pytest.raises(ConfigError):
        run_timing(cfg, ["lm1"], [0.05])


def test_levels_for_counts():
    hs = levels_for_counts("tp3", [1000, 8000])
    assert hs[0] == pytest.approx(2 * hs[1])
