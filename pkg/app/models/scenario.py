"""
Scenario configuration for CarbonShift.

A scenario file is a plain ``KEY=value`` text file:

    NETWORK_DIR=toy5
    RHO=30
    EPSILON=0.2
    DATA_CENTER_BUSES=2,4
    DATA_CENTER_DEMAND=50
    OBJECTIVE=balance
"""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Optional, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, field_validator

from ..config import (
    DEFAULT_EPSILON,
    DEFAULT_NOISE_MAGNITUDE,
    DEFAULT_NOISE_SEED,
    DEFAULT_RHO,
    DEFAULT_SHIFT_COST,
    DEFAULT_TRANSFER_CAP,
)
from ..errors import ConfigError
from .results import ObjectiveVariant, SignalKind, VariantKind

logger = logging.getLogger("carbonshift.models.scenario")


class ScenarioConfig(BaseModel):
    """Validated scenario parameters."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    network_dir: Path = Field(..., description="Directory holding bus/gen/branch/load CSVs")
    rho: float = Field(DEFAULT_RHO, ge=0, description="CO2 price in $/tCO2")
    epsilon: float = Field(DEFAULT_EPSILON, ge=0, le=1, description="Shiftable fraction per data center")
    transfer_cap: float = Field(DEFAULT_TRANSFER_CAP, ge=0, description="Per-pair transfer limit in MW")
    shift_cost: float = Field(DEFAULT_SHIFT_COST, ge=0, description="Per-pair shifting cost in $/MWh")
    data_center_buses: list[int] = Field(default_factory=list)
    data_center_demand: float = Field(0.0, ge=0, description="MW per data center")
    replace_existing_load: bool = False
    noise_seed: int = DEFAULT_NOISE_SEED
    noise_magnitude: float = Field(DEFAULT_NOISE_MAGNITUDE, ge=0)
    objective: VariantKind = VariantKind.F_COST
    signal: SignalKind = SignalKind.MARGINAL

    _scenario_dir: Optional[Path] = PrivateAttr(default=None)

    @field_validator("data_center_buses", mode="before")
    @classmethod
    def split_bus_list(cls, v):
        if isinstance(v, str):
            return [int(part) for part in v.replace(";", ",").split(",") if part.strip()]
        return v

    @field_validator("objective", mode="before")
    @classmethod
    def parse_objective(cls, v):
        if isinstance(v, str):
            return VariantKind.parse(v)
        return v

    @field_validator("signal", mode="before")
    @classmethod
    def parse_signal(cls, v):
        return v.strip().lower() if isinstance(v, str) else v

    @classmethod
    def from_file(cls, path: Union[str, Path], **overrides) -> "ScenarioConfig":
        """Read a KEY=value scenario file; relative NETWORK_DIR resolves against it."""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Scenario file not found: {path}")

        values = {
            key.strip().lower(): value
            for key, value in dotenv_values(path).items()
            if value is not None and value.strip() != ""
        }
        if "network_dir" in values:
            network_dir = Path(values["network_dir"])
            if not network_dir.is_absolute():
                values["network_dir"] = (path.parent / network_dir).resolve()
        values.update({k: v for k, v in overrides.items() if v is not None})

        config = cls.from_mapping(values, source=str(path))
        config._scenario_dir = path.parent.resolve()
        logger.info(f"Loaded scenario {path.name} (hash {config.config_hash()[:12]})")
        return config

    @classmethod
    def from_mapping(cls, values: dict, source: Optional[str] = None) -> "ScenarioConfig":
        try:
            return cls(**values)
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']).upper() or 'config'}: {err['msg']}"
                for err in e.errors()
            )
            raise ConfigError(f"Invalid scenario{f' {source}' if source else ''}: {problems}") from e

    def variant(self) -> ObjectiveVariant:
        return ObjectiveVariant(self.objective, self.rho)

    def portable_network_dir(self) -> str:
        """NETWORK_DIR relative to the scenario file when there is one."""
        if self._scenario_dir is not None and self.network_dir.is_absolute():
            return Path(os.path.relpath(self.network_dir, self._scenario_dir)).as_posix()
        return self.network_dir.as_posix()

    def config_hash(self) -> str:
        """sha256 over the canonical JSON form; report provenance.

        The network directory enters in its portable form, so copies of the
        same scenario hash alike wherever they are checked out.
        """
        data = self.model_dump(mode="json")
        data["network_dir"] = self.portable_network_dir()
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()
