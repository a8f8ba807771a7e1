"""Non-local viscous Cahn-Hilliard tumour growth: simulation and optimal therapy control.

The layers build on each other:

- :mod:`nlococ.grid` cell-centred Neumann grids and quadrature,
- :mod:`nlococ.kernels` interaction kernels and FFT convolution,
- :mod:`nlococ.potentials` double-well potentials and Moreau-Yosida tools,
- :mod:`nlococ.state` the implicit time-stepper and diagnostics,
- :mod:`nlococ.tangent` / :mod:`nlococ.adjoint` exact discrete derivatives,
- :mod:`nlococ.optimize` projected-gradient control,
- :mod:`nlococ.io` / :mod:`nlococ.cli` scenarios, exports and the command line.
"""
from .adjoint import AdjointTrajectory, CostWeights, ReducedCost, TargetData, adjoint_solve, cost, reduced_gradient
from .controls import ControlBounds, ControlPair, h1_time_norm
from .grid import GridSpec, TimeGrid, h1_seminorm_sq, inner, laplacian_neumann
from .kernels import KernelSpec, KernelTable, build_kernel_table, check_coercivity, convolve
from .model import AssumptionError, ModelParams, Ramp
from .optimize import (
    OptimizeResult,
    OptimizerConfig,
    fd_gradient_oracle,
    optimize,
    project_U,
    project_V,
)
from .potentials import Logarithmic, RegularQuartic, SeparationError, make_potential, moreau, yosida_prime
from .state import ConvergenceError, StateSnapshot, Trajectory, TumourModel, separation_report
from .tangent import ControlPerturbation, tangent_solve, tangent_step, taylor_test

__version__ = "0.1.0"

__all__ = [
    "AdjointTrajectory", "AssumptionError", "ControlBounds", "ControlPair", "ControlPerturbation",
    "ConvergenceError", "CostWeights", "GridSpec", "KernelSpec", "KernelTable", "Logarithmic",
    "ModelParams", "OptimizeResult", "OptimizerConfig", "Ramp", "ReducedCost", "RegularQuartic",
    "SeparationError", "StateSnapshot", "TargetData", "TimeGrid", "Trajectory", "TumourModel",
    "adjoint_solve", "build_kernel_table", "check_coercivity", "convolve", "cost",
    "fd_gradient_oracle", "h1_seminorm_sq", "h1_time_norm", "inner", "laplacian_neumann",
    "make_potential", "moreau", "optimize", "project_U", "project_V", "reduced_gradient",
    "separation_report", "tangent_solve", "tangent_step", "taylor_test", "yosida_prime",
]
