"""Galerkin experiments for the quantum Navier-Stokes and quantum Euler systems."""
from .discretization import (Domain, GalerkinBasis, ScalarField, TensorField, VectorField, galerkin_basis,
                             make_domain, scalar)
from .energy import energy_report, total_energy
from .galerkin_solver import SolverConfig, advance, check_density_bounds, make_state, run_simulation
from .physics import FluidParams
from .relative_energy import manufactured_strong_solution, weak_strong_compare
from .semiflow import SelectionFunctional, concatenate, select, shift
from .limits import trajectory_distance
from .state import FluidState
from .trajectory import Trajectory

__version__ = "0.1.0"
