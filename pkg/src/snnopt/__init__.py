"""Balanced spiking networks as solvers for NNLS, l1 minimisation and the Lasso."""

from .engine import Cascade, SnnParams, SnnState, StepEvent, Trace, conservation_defect, firing_rate, init, run, spike_vector, step
from .geometry import Wall, active_walls, enumerate_vertices, ideal_coupling, ideal_solution, niceness
from .harness import ExperimentConfig, auto_params, gen_instance, gen_rsm, run_experiment, verify
from .linalg import gram_norm, pinv_gram_norm, project_rowspace, residual_l2, spectral
from .oracles import l1min_oracle, lasso_oracle, least_squares_min_norm, nnls_oracle
from .problems import Instance, Kind, Mode, ProblemKind, duality_gap, energy, objective

__all__ = [
    "Cascade", "SnnParams", "SnnState", "StepEvent", "Trace", "conservation_defect", "firing_rate", "init", "run",
    "spike_vector", "step", "Wall", "active_walls", "enumerate_vertices", "ideal_coupling", "ideal_solution",
    "niceness", "ExperimentConfig", "auto_params", "gen_instance", "gen_rsm", "run_experiment", "verify",
    "gram_norm", "pinv_gram_norm", "project_rowspace", "residual_l2", "spectral", "l1min_oracle", "lasso_oracle",
    "least_squares_min_norm", "nnls_oracle", "Instance", "Kind", "Mode", "ProblemKind", "duality_gap", "energy",
    "objective",
]
