"""
Models package for CarbonShift.
"""

from .lp import Basis, LinearProgram, LpSolution
from .network import Bus, FleetSpec, Fuel, Generator, Line, Load, Network
from .report import ExperimentReport, OrderingCheck, RunRecord
from .results import (
    DispatchResult,
    EmissionSignals,
    ObjectiveKind,
    ObjectiveMode,
    ObjectiveVariant,
    ShiftPlan,
    SignalKind,
    VariantKind,
)
from .scenario import ScenarioConfig

__all__ = [
    'Basis', 'LinearProgram', 'LpSolution',
    'Bus', 'FleetSpec', 'Fuel', 'Generator', 'Line', 'Load', 'Network',
    'ExperimentReport', 'OrderingCheck', 'RunRecord',
    'DispatchResult', 'EmissionSignals', 'ObjectiveKind', 'ObjectiveMode',
    'ObjectiveVariant', 'ShiftPlan', 'SignalKind', 'VariantKind',
    'ScenarioConfig',
]
