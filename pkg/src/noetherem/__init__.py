"""Noether point symmetries of planar charged-particle motion.

Build electromagnetic fields that admit a prescribed point symmetry, check
the symmetry conditions on a grid, and integrate trajectories along which
the associated first integral is conserved.
"""

from .dynamics import State, Trajectory, integrate, invariant
from .fields import FieldModel, FieldProfile, build_field, build_potentials
from .scenario import Scenario, load_scenario, random_scenario
from .symmetry import SymmetrySpec, from_canonical, to_canonical
from .verify import faraday_residual, gauge_independence_check, noether_residuals, verify_all

__version__ = "0.1.0"

__all__ = [
    "State", "Trajectory", "integrate", "invariant", "FieldModel", "FieldProfile", "build_field",
    "build_potentials", "Scenario", "load_scenario", "random_scenario", "SymmetrySpec",
    "from_canonical", "to_canonical", "faraday_residual", "gauge_independence_check",
    "noether_residuals", "verify_all",
]
