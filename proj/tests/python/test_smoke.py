"""Smoke tests for the python bindings: build small problems, solve them,
and sanity-check the invariants the core guarantees."""

import json
import math

import numpy as np
import pytest

import ospde


BASE_CONFIG = {
    "grid": {"dimension": 1, "extents": [1.0], "cells": [16], "diffusion": 1.0},
    "time": {"T": 0.25, "dt": 0.01},
    "noise": {"J": 2, "seeds": [7]},
    "coefficients": {
        "f": {"name": "constant", "value": 0.5},
        "h": {"name": "constant", "values": [0.3, 0.15]},
        "xi": {"name": "sine", "amplitude": 1.0},
        "constants": {"C": 0, "alpha": 0, "beta": 0, "theta": 0},
    },
    "checks": [],
}


def obstacle_config():
    cfg = json.loads(json.dumps(BASE_CONFIG))
    cfg["coefficients"]["f"] = {"name": "constant", "value": -1.0}
    cfg["coefficients"]["xi"] = {"name": "zero"}
    cfg["obstacle"] = {"mode": "direct", "field": {"name": "constant", "value": 0.0}}
    cfg["solver"] = {"n_schedule": [1000.0]}
    return cfg


def test_grid_operator_basics():
    grid = ospde.Grid(1, [1.0], [8])
    assert grid.num_cells == 8
    assert grid.cell_volume == pytest.approx(0.125)
    assert grid.boundary_nodes == [0, 7]

    constant = np.full(8, 3.0)
    assert np.all(grid.apply_operator(constant) == 0.0)
    assert grid.dirichlet_form(constant, np.random.default_rng(0).normal(size=8)) == 0.0
    ones_boundary = np.ones(2)
    assert grid.boundary_integral(np.ones(8), ones_boundary) == pytest.approx(2.0)
    assert grid.trace_norm_estimate(trials=8) >= math.sqrt(2.0) - 1e-9


def test_sample_path_reproducibility():
    a = ospde.sample_path(42, 3, 0.01, 50)
    b = ospde.sample_path(42, 3, 0.01, 50)
    assert np.array_equal(a.increments, b.increments)
    anti = ospde.antithetic(a)
    assert np.array_equal(anti.increments, -a.increments)
    coarse = ospde.coarsen(a, 5)
    assert coarse.steps == 10
    assert np.allclose(coarse.increments.sum(axis=0), a.increments.sum(axis=0))


def test_contraction_gate_values():
    ok, margin = ospde.validate_contraction(0.0, 0.3, 0.5, 0.2, 1.0, 1.0)
    assert ok and margin == pytest.approx(0.75)
    bad, neg = ospde.validate_contraction(0.0, 1.0, 1.0, 0.0, 1.0, 1.0)
    assert not bad and neg == pytest.approx(-1.0)


def test_problem_solve_conserves_mass_without_sources():
    cfg = json.loads(json.dumps(BASE_CONFIG))
    cfg["coefficients"]["f"] = {"name": "zero"}
    cfg["coefficients"]["h"] = {"name": "zero"}
    cfg["noise"]["J"] = 0
    problem = ospde.Problem(cfg)
    values = problem.solve(seed=5)
    assert values.shape == (26, 16)
    dx = 1.0 / 16
    assert values[-1].sum() * dx == pytest.approx(values[0].sum() * dx, abs=1e-10)


def test_problem_obstacle_scalar_oracle():
    problem = ospde.Problem(obstacle_config())
    out = problem.solve_obstacle(seed=11)
    assert out["values"].min() >= -10.0 / 1000.0
    assert out["measure"].min() >= 0.0
    assert out["skorokhod_gap"] >= 0.0
    assert out["max_violation"] <= 10.0 / 1000.0


def test_problem_mild_oracle_close_to_stepper():
    problem = ospde.Problem(BASE_CONFIG)
    numeric = problem.solve(seed=3)
    mild = problem.mild_oracle(seed=3)
    assert np.abs(numeric - mild).max() < 0.05


def test_energy_ledger_residual_is_small():
    cfg = json.loads(json.dumps(BASE_CONFIG))
    cfg["coefficients"]["h"] = {"name": "zero"}
    cfg["noise"]["J"] = 0
    problem = ospde.Problem(cfg)
    ledger = problem.energy_ledger(seed=2)
    assert abs(ledger["residual"]) <= 1e-9


def test_run_writes_manifest(tmp_path):
    out = ospde.run(BASE_CONFIG, str(tmp_path / "run"))
    assert out["exit_code"] == 0
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    for name in manifest["files"]:
        assert (tmp_path / "run" / name).exists()


def test_run_rejects_contraction_violations(tmp_path):
    cfg = json.loads(json.dumps(BASE_CONFIG))
    cfg["coefficients"]["h"] = {"name": "linear", "value": 1.0, "argument": "z"}
    cfg["coefficients"]["constants"] = {"C": 0, "alpha": 1.0, "beta": 1.0, "theta": 0}
    out = ospde.run(cfg, str(tmp_path / "gate"))
    assert out["exit_code"] == 2
    assert "contraction property" in out["summary"]["error"]


def test_sweep_rows(tmp_path):
    out = ospde.sweep(obstacle_config(), "n_max", [10.0, 100.0], str(tmp_path / "sweep"))
    assert out["exit_code"] == 0
    rows = out["summary"]["rows"]
    assert len(rows) == 2
    assert rows[1]["skorokhod_gap"] <= 1.1 * rows[0]["skorokhod_gap"] + 1e-12
