"""Linear Poincare flow toolkit: periodic orbit census, splitting
certificates, basin estimates and cocycle-level perturbations."""

import json

from . import _core
from ._core import (
    SCHEMA_VERSION,
    LpflowError,
    __version__,
    angle_collapse_bound,
    builtin_names,
    divergence,
    field,
    flow_with_tangent,
    linear_poincare,
    wilson_interval,
)

__all__ = [
    "SCHEMA_VERSION",
    "LpflowError",
    "__version__",
    "angle_collapse_bound",
    "builtin_names",
    "choose_budget",
    "divergence",
    "enumerate_orbits",
    "field",
    "find_periodic_orbit",
    "flow_with_tangent",
    "graph_perturbation",
    "linear_poincare",
    "run",
    "sink_via_shear",
    "wilson_interval",
]


def find_periodic_orbit(name, seed, params=None, section=0, tol=1e-11):
    return json.loads(_core.find_periodic_orbit_json(name, params or {}, seed, section, tol))


def enumerate_orbits(name, params=None, seeds=200, period_bound=10.0, seed=0, threads=1):
    return json.loads(_core.enumerate_orbits_json(name, params or {}, seeds, period_bound, seed, threads))


def sink_via_shear(lambda_, mu, gamma):
    return json.loads(_core.sink_via_shear_json(lambda_, mu, gamma))


def choose_budget(C, eps, lambda_rate, alpha):
    return json.loads(_core.choose_budget_json(C, eps, lambda_rate, alpha))


def graph_perturbation(lambda_, mu, gamma, tau, C, eps, lambda_rate, alpha):
    return json.loads(_core.graph_perturbation_json(lambda_, mu, gamma, tau, C, eps, lambda_rate, alpha))


def run(command, config_text="", out_dir="", threads=0):
    """Runs a CLI subcommand in-process. Returns (exit_code, result dict)."""
    code, text = _core.run_command(command, config_text, out_dir, threads)
    return code, json.loads(text)
