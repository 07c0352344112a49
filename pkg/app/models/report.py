"""
Experiment report models for CarbonShift.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from ..errors import MissingCellError

BASE_MODEL = 0


@dataclass
class RunRecord:
    """One solved case: the base OPF (model 0) or a model/variant/signal cell.

    Only absolute values are stored; percentages come from the report's base.
    """
    model: int
    variant: Optional[str] = None
    signal: Optional[str] = None
    cost: float = 0.0
    emissions: float = 0.0
    curtailment: float = 0.0
    shifted: float = 0.0
    objective_value: float = 0.0
    predicted_emission_change: Optional[float] = None
    predicted_curtailment_change: Optional[float] = None
    actual_curtailment_change: Optional[float] = None
    generation_changes: list[dict] = field(default_factory=list)
    plan: Optional[dict] = None

    @property
    def label(self) -> str:
        if self.model == BASE_MODEL:
            return "base"
        parts = [f"M{self.model}", self.variant or "-"]
        if self.signal:
            parts.append(self.signal)
        return "/".join(parts)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OrderingCheck:
    """``lhs <= rhs`` between two report cells."""
    name: str
    lhs: str
    rhs: str
    lhs_value: float
    rhs_value: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.rhs_value - self.lhs_value

    def to_dict(self) -> dict:
        data = asdict(self)
        data["margin"] = self.margin
        return data


def _pct(value: float, reference: float) -> float:
    if reference == 0:
        return math.nan
    return 100.0 * (value - reference) / reference


@dataclass
class ExperimentReport:
    runs: list[RunRecord] = field(default_factory=list)
    base: Optional[RunRecord] = None
    checks: list[OrderingCheck] = field(default_factory=list)
    config_hash: str = ""
    noise_seed: Optional[int] = None
    rho: Optional[float] = None

    def add(self, record: RunRecord) -> None:
        if record.model == BASE_MODEL:
            self.base = record
        else:
            self.runs.append(record)

    def cell(self, model: int, variant: str, signal: Optional[str] = None) -> RunRecord:
        for run in self.runs:
            if run.model == model and run.variant == variant and (signal is None or run.signal == signal):
                return run
        raise MissingCellError([f"M{model}/{variant}" + (f"/{signal}" if signal else "")])

    def missing_cells(self, models=(1, 2, 3), variants=("f_cost", "f_balance", "f_co2")) -> list[str]:
        present = {(run.model, run.variant) for run in self.runs}
        return [f"M{m}/{v}" for m in models for v in variants if (m, v) not in present]

    def cost_change_pct(self, record: RunRecord) -> float:
        return _pct(record.cost, self.base.cost) if self.base else math.nan

    def emissions_change_pct(self, record: RunRecord) -> float:
        return _pct(record.emissions, self.base.emissions) if self.base else math.nan

    @property
    def all_passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def rows(self) -> list[dict]:
        """Flat table rows, base first, then runs in insertion order."""
        records = ([self.base] if self.base else []) + self.runs
        return [
            {
                "model": record.label.split("/")[0],
                "variant": record.variant or "",
                "signal": record.signal or "",
                "cost": record.cost,
                "cost_change_pct": self.cost_change_pct(record),
                "emissions": record.emissions,
                "emissions_change_pct": self.emissions_change_pct(record),
                "curtailment": record.curtailment,
                "shifted": record.shifted,
            }
            for record in records
        ]

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "noise_seed": self.noise_seed,
            "rho": self.rho,
            "base": self.base.to_dict() if self.base else None,
            "runs": [run.to_dict() for run in self.runs],
            "rows": self.rows(),
            "checks": [check.to_dict() for check in self.checks],
        }
