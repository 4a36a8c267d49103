"""Constrained lattice gas with slow reservoirs: exact simulation, the
matching degenerate diffusion solver, and tools to compare the two."""

from .model import (
    Configuration,
    ContractViolation,
    ModelParams,
    apply_exchange,
    apply_flip,
    boundary_flip_rate,
    generator_apply,
    pmm_exchange_rate,
    ssep_exchange_rate,
)
from .pde import BoundaryCondition, DensityGrid, NumericalInstability, TestFunction
from .engine import ObservationRecord, ObserverSpec, SimState, rebuild_schedule, simulate
from .analysis import (
    BoxSpec,
    DynkinRecord,
    InsufficientDensity,
    MovePlan,
    box_average,
    detect_blocked,
    empirical_pairing,
    instantaneous_current,
    mobile_cluster_path,
    tau_h,
)

__version__ = "0.1.0"
