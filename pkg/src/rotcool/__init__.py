"""Shaped-pulse rotational cooling: rotor model, Krotov control, cycle maps."""

from .basis import (
    BasisState,
    MolecularParams,
    OperatorMatrix,
    RotorModel,
    Surface,
    build_dipole_matrix,
    build_h0,
    build_model,
    dipole_element,
    enumerate_basis,
    n_ground_states,
    raising_part,
    rotational_energy,
    thermal_populations,
)
from .fields import ControlField
from .propagation import (
    StateVector,
    propagate_backward,
    propagate_ensemble,
    propagate_forward,
    step_propagator,
    total_propagator,
)
from .wigner import wigner3j

__version__ = "0.1.0"
