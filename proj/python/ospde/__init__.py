"""Penalization simulator for obstacle problems of quasilinear stochastic PDEs
with Neumann boundary conditions.

The heavy lifting lives in the _ospde extension; this wrapper adds dict/JSON
conveniences on top of it.
"""

import json as _json

from ._ospde import (  # noqa: F401
    Grid,
    Problem as _Problem,
    SamplePath,
    antithetic,
    builtin_check_names,
    builtin_coefficient_names,
    coarsen,
    matrix_exponential,
    run_json as _run_json,
    sample_path,
    sweep_json as _sweep_json,
    validate_contraction,
)

__all__ = [
    "Grid",
    "Problem",
    "SamplePath",
    "antithetic",
    "builtin_check_names",
    "builtin_coefficient_names",
    "coarsen",
    "matrix_exponential",
    "run",
    "sample_path",
    "sweep",
    "validate_contraction",
]


def _as_json_text(config):
    if isinstance(config, str):
        return config
    return _json.dumps(config)


class Problem(_Problem):
    """Problem built from a configuration document (dict or JSON text)."""

    def __init__(self, config):
        super().__init__(_as_json_text(config))

    def energy_ledger(self, seed):
        return _json.loads(super().energy_ledger(seed))


def run(config, out_dir, force=False, threads=1):
    """Runs the solves and checks of a configuration; returns the summary dict
    (including 'exit_code' and the list of files written)."""
    return _json.loads(_run_json(_as_json_text(config), out_dir, force, threads))


def sweep(config, parameter, values, out_dir, force=False, threads=1):
    """Reruns a configuration over a parameter range (dt, n_max, J or cells)."""
    return _json.loads(
        _sweep_json(_as_json_text(config), parameter, list(values), out_dir, force, threads)
    )
