"""Stochastic coagulation-fragmentation particle systems and their explosion behaviour."""
from .errors import (CapabilityError, DivergenceError, DomainError, ModelError, StepSizeError,
                     UsageError)
from .jump_core import (Atom, DriftReport, ExplosionVerdict, StopReason, StopRule, TestFunction,
                        Trajectory, Verdict, check_region_criterion, classify, drift,
                        martingale_statistic, one_dim_law, pure_birth_law, simulate_chain)
from .particle_state import BoundaryGuards, ParticleSystem, SizeTrap

__version__ = "0.1.0"

__all__ = [
    "Atom", "BoundaryGuards", "CapabilityError", "DivergenceError", "DomainError", "DriftReport",
    "ExplosionVerdict", "ModelError", "ParticleSystem", "SizeTrap", "StepSizeError", "StopReason",
    "StopRule", "TestFunction", "Trajectory", "UsageError", "Verdict", "check_region_criterion",
    "classify", "drift", "martingale_statistic", "one_dim_law", "pure_birth_law", "simulate_chain",
]
