"""Free-energy lattice Boltzmann solver for binary mixtures with droplet-deformation analysis."""
from .analysis import (DropletMetrics, detect_fragments, droplet_shape, interface_points, measure_deformation,
                       measure_inclination)
from .boundaries import BoundarySpec
from .cases import CaseConfig, calibrate_extension_rate, calibrate_sigma_xi, init_fourroller_case, init_shear_case
from .dynamics import RelaxationSetup, Simulation
from .errors import ConfigError, NumericalError, PositivityError
from .free_energy import FreeEnergyParams
from .grid import Grid, SimulationState, allocate_state
from .io import load_config, read_vtk, write_vtk
from .lattice import Stencil, make_stencil, opposite_index
from .runner import RunResult, run_case, run_config
from .units import DimensionlessGroup, solve_lattice_params

__version__ = "0.1.0"
