"""Superradiant phase diagrams of three-level atoms with the diamagnetic term."""

from .model import (
    DirectCoupling,
    InvalidParameterError,
    ModelParams,
    TrkCoupling,
    TrkReport,
    rabi_from_trk,
    trk_check,
)
from .meanfield import (
    CoherencePoint,
    GroundState,
    Phase,
    local_minima,
    minimize_global,
    photon_amplitude,
    reduced_energy,
    reduced_gradient,
)
from .diagram import Axis, ScanSpec, classify_order, refine_boundary, scan_2d, scan_3d
from .qwell import PotentialSpec, fit_potential, solve_bound_states, strengths_from_potential

__all__ = [
    "Axis",
    "PotentialSpec",
    "ScanSpec",
    "classify_order",
    "fit_potential",
    "refine_boundary",
    "scan_2d",
    "scan_3d",
    "solve_bound_states",
    "strengths_from_potential",
    "CoherencePoint",
    "DirectCoupling",
    "GroundState",
    "InvalidParameterError",
    "ModelParams",
    "Phase",
    "TrkCoupling",
    "TrkReport",
    "local_minima",
    "minimize_global",
    "photon_amplitude",
    "rabi_from_trk",
    "reduced_energy",
    "reduced_gradient",
    "trk_check",
]

__version__ = "0.1.0"
