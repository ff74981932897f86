"""Energy-aware cooperative computing among nearby devices.

Devices split into resource demanders (RDs), resource providers (RPs) and
standalone UEs by a roommate-style matching, RDs are associated with RPs under
quotas, rotation swaps let envious RDs trade providers, and each cooperation
group's offloading is optimized by successive convex approximation.
"""

from .energy import GroupLoads, standalone_energy, system_energy, tx_power
from .matching import Association, RolePartition, assign_roles, gale_shapley, role_control
from .model import ExperimentConfig, Scenario, SystemParams, UeProfile, generate_scenario
from .oracle import (
    baseline_irving,
    baseline_irving_gs,
    baseline_local,
    baseline_random_pairs,
    exhaustive_search,
)
from .pipeline import ConstraintViolation, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "Association",
    "ConstraintViolation",
    "ExperimentConfig",
    "GroupLoads",
    "RolePartition",
    "Scenario",
    "SystemParams",
    "UeProfile",
    "assign_roles",
    "baseline_irving",
    "baseline_irving_gs",
    "baseline_local",
    "baseline_random_pairs",
    "exhaustive_search",
    "gale_shapley",
    "generate_scenario",
    "role_control",
    "run_pipeline",
    "standalone_energy",
    "system_energy",
    "tx_power",
]
