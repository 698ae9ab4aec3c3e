"""Coupled DPG-FEM discretisation of diffusion-advection-reaction problems
on two rectangular subdomains."""
from .assembly import assemble, discretize
from .cli import RunConfig, run_convergence
from .problem import ProblemDef, experiment1, experiment2, zero_data
from .solver import ErrorReport, compute_errors, eoc, solve

__all__ = [
    "ErrorReport",
    "ProblemDef",
    "RunConfig",
    "assemble",
    "compute_errors",
    "discretize",
    "eoc",
    "experiment1",
    "experiment2",
    "run_convergence",
    "solve",
    "zero_data",
]
