"""
Result models: dispatch outcomes, emission signals and shift plans.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from ..config import DEFAULT_RHO, FEASIBILITY_TOL
from .lp import LinearProgram, LpSolution
from .network import FleetSpec


class ObjectiveKind(str, Enum):
    COST = "cost"
    CARBON_PRICED = "carbon_priced"
    CARBON_ONLY = "carbon_only"


@dataclass(frozen=True)
class ObjectiveMode:
    """Market-clearing objective: c, rho*g + c, or rho*g with c = 0."""
    kind: ObjectiveKind = ObjectiveKind.COST
    rho: float = 0.0

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be >= 0")

    @classmethod
    def cost(cls) -> "ObjectiveMode":
        return cls(ObjectiveKind.COST, 0.0)

    @classmethod
    def carbon_priced(cls, rho: float = DEFAULT_RHO) -> "ObjectiveMode":
        return cls(ObjectiveKind.CARBON_PRICED, rho)

    @classmethod
    def carbon_only(cls, rho: float = DEFAULT_RHO) -> "ObjectiveMode":
        return cls(ObjectiveKind.CARBON_ONLY, rho)

    def generator_costs(self, costs: np.ndarray, emission_rates: np.ndarray) -> np.ndarray:
        if self.kind is ObjectiveKind.COST:
            return costs.copy()
        if self.kind is ObjectiveKind.CARBON_PRICED:
            return self.rho * emission_rates + costs
        # A zero price would leave nothing to minimize.
        weight = self.rho if self.rho > 0 else 1.0
        return weight * emission_rates


class VariantKind(str, Enum):
    F_COST = "f_cost"
    F_BALANCE = "f_balance"
    F_CO2 = "f_co2"

    @classmethod
    def parse(cls, value: str) -> "VariantKind":
        """Accept ``cost``/``balance``/``co2`` as well as the full names."""
        value = value.strip().lower()
        aliases = {"cost": cls.F_COST, "balance": cls.F_BALANCE, "both": cls.F_BALANCE,
                   "co2": cls.F_CO2, "carbon": cls.F_CO2}
        if value in aliases:
            return aliases[value]
        return cls(value)


@dataclass(frozen=True)
class ObjectiveVariant:
    """One of the three objective preferences shared by all three models."""
    kind: VariantKind
    rho: float = DEFAULT_RHO

    @property
    def effective_rho(self) -> float:
        return 0.0 if self.kind is VariantKind.F_COST else self.rho

    @property
    def uses_electricity_cost(self) -> bool:
        return self.kind is not VariantKind.F_CO2

    def market_mode(self) -> ObjectiveMode:
        """The clearing objective this variant maps to in the centralized models."""
        if self.kind is VariantKind.F_COST:
            return ObjectiveMode.cost()
        if self.kind is VariantKind.F_BALANCE:
            return ObjectiveMode.carbon_priced(self.rho)
        return ObjectiveMode.carbon_only(self.rho)


class SignalKind(str, Enum):
    MARGINAL = "marginal"
    AVERAGE = "average"


@dataclass(frozen=True, eq=False)
class DispatchResult:
    """Solved DC OPF. ``cost`` is always c'p_g, whatever the objective was."""
    p_g: np.ndarray
    theta: np.ndarray
    flows: np.ndarray
    cost: float
    lmp: np.ndarray
    binding: tuple[str, ...]
    emissions: float
    curtailment: float
    objective_value: float
    mode: ObjectiveMode
    lp: LinearProgram = field(repr=False)
    solution: LpSolution = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.kind.value,
            "rho": self.mode.rho,
            "cost": self.cost,
            "emissions": self.emissions,
            "curtailment": self.curtailment,
            "objective_value": self.objective_value,
            "p_g": self.p_g.tolist(),
            "theta": self.theta.tolist(),
            "flows": self.flows.tolist(),
            "lmp": self.lmp.tolist(),
            "binding": list(self.binding),
        }


@dataclass(frozen=True, eq=False)
class EmissionSignals:
    """Carbon signals at one operating point.

    ``lmce`` is indexed by bus position; ``avg_by_region`` maps region id to
    tCO2/MWh (NaN where a region has no generation).
    """
    lmce: np.ndarray
    avg_by_region: dict[int, float]
    basis_id: str

    def to_dict(self) -> dict:
        return {
            "basis_id": self.basis_id,
            "lmce": self.lmce.tolist(),
            "avg_by_region": {str(k): v for k, v in sorted(self.avg_by_region.items())},
        }


@dataclass(frozen=True, eq=False)
class ShiftPlan:
    """Data-center load shift.

    ``delta_pd`` follows fleet order; ``transfers[i, j]`` is the MW moved from
    data center i to data center j. ``predicted_delta_pg`` is empty when the
    plan was not derived from a basis.
    """
    delta_pd: np.ndarray
    transfers: np.ndarray
    predicted_delta_pg: np.ndarray
    predicted_emission_change: float
    predicted_cost_change: float
    objective_value: float = 0.0
    signal: Optional[SignalKind] = None
    variant: Optional[ObjectiveVariant] = None

    @property
    def total_shifted(self) -> float:
        """MW moved, counted once (sum of the positive load changes)."""
        return float(np.clip(self.delta_pd, 0.0, None).sum())

    def validate(self, fleet: FleetSpec, demand: np.ndarray, tol: float = FEASIBILITY_TOL) -> list[str]:
        """Fleet constraint violations for data-center demands ``demand`` (empty when valid)."""
        demand = np.asarray(demand, dtype=float)
        s = self.transfers
        problems = []
        scale = tol * (1.0 + np.abs(demand).max(initial=0.0))
        if abs(self.delta_pd.sum()) > scale:
            problems.append(f"load changes sum to {self.delta_pd.sum():.6g}, not 0")
        net_inflow = s.sum(axis=0) - s.sum(axis=1)
        if np.any(np.abs(self.delta_pd - net_inflow) > scale):
            problems.append("load changes do not match net transfers")
        limit = fleet.epsilon_array * demand
        if np.any(np.abs(self.delta_pd) > limit + scale):
            problems.append("load change exceeds epsilon * demand")
        if np.any(s < -scale) or np.any(s > fleet.transfer_cap_array + scale):
            problems.append("transfer outside [0, transfer_cap]")
        if np.any(np.abs(np.diag(s)) > scale):
            problems.append("nonzero self-transfer")
        return problems

    def to_dict(self) -> dict:
        return {
            "delta_pd": self.delta_pd.tolist(),
            "transfers": self.transfers.tolist(),
            "predicted_delta_pg": self.predicted_delta_pg.tolist(),
            "predicted_emission_change": self.predicted_emission_change,
            "predicted_cost_change": self.predicted_cost_change,
            "total_shifted": self.total_shifted,
            "signal": self.signal.value if self.signal else None,
            "variant": self.variant.kind.value if self.variant else None,
        }
