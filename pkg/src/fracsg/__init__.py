"""Linearized Alikhanov (L2-1sigma) solver for the 2-D time-fractional sine-Gordon equation."""

from fracsg.mesh import FractionalOrder, TemporalMesh, build_graded_mesh, mesh_from_nodes, mesh_ratio_rho
from fracsg.coefficients import CoeffRow, apply_caputo, caputo_exact_power, coeff_a, coeff_b, coeff_row_g, coeff_rows, verify_properties
from fracsg.grid import GridFunction, SpatialGrid
from fracsg.stepper import ProblemSpec, SolverState, run

__all__ = [
    "CoeffRow",
    "FractionalOrder",
    "GridFunction",
    "ProblemSpec",
    "SolverState",
    "SpatialGrid",
    "TemporalMesh",
    "apply_caputo",
    "build_graded_mesh",
    "caputo_exact_power",
    "coeff_a",
    "coeff_b",
    "coeff_row_g",
    "coeff_rows",
    "mesh_from_nodes",
    "mesh_ratio_rho",
    "run",
    "verify_properties",
]

__version__ = "0.1.0"
