"""Modelling toolkit for planar (surface-electrode) RF ion traps.

The package computes electrode basis potentials in the gapless-plane
approximation (with a boundary-element cross-check), the pseudopotential of
the RF drive, trap minima, normal modes and depths, control voltages for
micromotion compensation, Coulomb-crystal equilibria and heating-rate
estimates.
"""

from .analysis import (MinimumResult, Modes, TrapCharacterization, characterize, find_minimum,
                       find_rf_null, find_static_null, micromotion_residual, modes_from_hessian,
                       normal_modes, trap_depth)
from .bem import BemSolution, bem_potential, bem_solve, panelize
from .compensation import (CompensationResult, CompensationTarget, VrfFit, VrfFitInput,
                           fit_vrf, format_table, predict_table, solve_static_voltages)
from .config import ConfigError, RunConfig, reference_config
from .crystal import (CrystalConfig, HarmonicModel, TrapModel, equilibrium,
                      two_ion_separation, zigzag_analysis)
from .errors import *  # noqa: F401,F403
from .fields import BasisSolution, FieldModel, StaticField, basis_solution, static_field
from .geometry import (Electrode, FiveWireParams, Kind, Polygon, TrapLayout, mirror_x,
                       reference_layout, validate_layout)
from .heating import (FilterNoiseModel, effective_distance, escape_heating_rate,
                      johnson_heating_rate)
from .pseudo import (DriveConfig, EffectivePotential, IonSpecies, mathieu_q, pseudopotential,
                     total_potential)

__version__ = "0.1.0"
