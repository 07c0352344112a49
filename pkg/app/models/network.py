"""
Network models and data structures for CarbonShift.

All quantities are physical units: MW, $/MWh, tCO2/MWh. Bus, generator, line
and load ids are contiguous 1-based integers once a Network has been built by
the loader; positions in the derived numpy arrays are ``id - 1``.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from ..config import CURTAILABLE_FUELS, EMISSION_FACTORS

logger = logging.getLogger("carbonshift.models.network")


class Fuel(str, Enum):
    OIL = "oil"
    COAL = "coal"
    GAS = "gas"
    HYDRO = "hydro"
    NUCLEAR = "nuclear"
    WIND = "wind"
    SOLAR = "solar"
    STORAGE = "storage"
    SYNC_COND = "sync_cond"  # synchronous condensers, zero active power

    @property
    def default_emission_rate(self) -> float:
        return EMISSION_FACTORS.get(self.value, 0.0)

    @property
    def is_curtailable(self) -> bool:
        return self.value in CURTAILABLE_FUELS

    @property
    def is_emitting(self) -> bool:
        return self.default_emission_rate > 0.0


@dataclass(frozen=True)
class Bus:
    """A network node."""
    id: int
    name: str
    region: int
    is_ref: bool = False


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    fuel: Fuel
    cost: float  # $/MWh
    p_min: float  # MW
    p_max: float  # MW
    emission_rate: float  # tCO2/MWh


@dataclass(frozen=True)
class Line:
    """A transmission line; flow from ``from_bus`` to ``to_bus`` is -susceptance * (theta_from - theta_to)."""
    id: int
    from_bus: int
    to_bus: int
    susceptance: float
    flow_limit: float  # MW, symmetric


@dataclass(frozen=True)
class Load:
    id: int
    bus: int
    demand: float  # MW
    is_data_center: bool = False


@dataclass(frozen=True)
class FleetSpec:
    """Shifting limits for the data-center fleet.

    Entries are ordered like ``load_ids``. Diagonal entries of the transfer
    matrices are carried but never used: a data center cannot ship load to
    itself.
    """
    load_ids: tuple[int, ...] = ()
    epsilon: tuple[float, ...] = ()
    transfer_cap: tuple[tuple[float, ...], ...] = ()
    shift_cost: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self):
        k = len(self.load_ids)
        if len(self.epsilon) != k:
            raise ValueError(f"epsilon has {len(self.epsilon)} entries for {k} data centers")
        for name in ("transfer_cap", "shift_cost"):
            matrix = getattr(self, name)
            if len(matrix) != k or any(len(row) != k for row in matrix):
                raise ValueError(f"{name} must be a {k}x{k} matrix")
        if any(e < 0.0 or e > 1.0 for e in self.epsilon):
            raise ValueError("epsilon entries must lie in [0, 1]")
        if any(v < 0.0 for row in self.transfer_cap for v in row):
            raise ValueError("transfer_cap entries must be >= 0")
        if any(v < 0.0 for row in self.shift_cost for v in row):
            raise ValueError("shift_cost entries must be >= 0")

    @classmethod
    def uniform(cls, load_ids: Iterable[int], epsilon: float, transfer_cap: float,
                shift_cost: float) -> "FleetSpec":
        """Build a fleet where every data center and every pair share the same limits."""
        ids = tuple(load_ids)
        k = len(ids)
        return cls(
            load_ids=ids,
            epsilon=tuple(float(epsilon) for _ in ids),
            transfer_cap=tuple(tuple(float(transfer_cap) for _ in range(k)) for _ in range(k)),
            shift_cost=tuple(tuple(float(shift_cost) for _ in range(k)) for _ in range(k)),
        )

    @property
    def size(self) -> int:
        return len(self.load_ids)

    @property
    def epsilon_array(self) -> np.ndarray:
        return np.asarray(self.epsilon, dtype=float)

    @property
    def transfer_cap_array(self) -> np.ndarray:
        return np.asarray(self.transfer_cap, dtype=float).reshape(self.size, self.size)

    @property
    def shift_cost_array(self) -> np.ndarray:
        return np.asarray(self.shift_cost, dtype=float).reshape(self.size, self.size)

    def pairs(self) -> list[tuple[int, int]]:
        """Ordered (i, j) index pairs with i != j; the transfer variables."""
        return [(i, j) for i in range(self.size) for j in range(self.size) if i != j]


@dataclass(frozen=True)
class Network:
    """Immutable DC network: safe to share between threads."""
    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...]
    lines: tuple[Line, ...]
    loads: tuple[Load, ...]
    fleet: FleetSpec = field(default_factory=FleetSpec)

    # -- sizes -----------------------------------------------------------

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    @property
    def n_line(self) -> int:
        return len(self.lines)

    @property
    def reference_bus(self) -> int:
        return next(b.id for b in self.buses if b.is_ref)

    # -- generator arrays ------------------------------------------------

    @cached_property
    def gen_bus_index(self) -> np.ndarray:
        return np.array([g.bus - 1 for g in self.generators], dtype=int)

    @cached_property
    def costs(self) -> np.ndarray:
        return np.array([g.cost for g in self.generators], dtype=float)

    @cached_property
    def emission_rates(self) -> np.ndarray:
        return np.array([g.emission_rate for g in self.generators], dtype=float)

    @cached_property
    def p_min(self) -> np.ndarray:
        return np.array([g.p_min for g in self.generators], dtype=float)

    @cached_property
    def p_max(self) -> np.ndarray:
        return np.array([g.p_max for g in self.generators], dtype=float)

    @cached_property
    def curtailable_mask(self) -> np.ndarray:
        return np.array([g.fuel.is_curtailable for g in self.generators], dtype=bool)

    # -- loads -----------------------------------------------------------

    def demand_by_bus(self) -> np.ndarray:
        demand = np.zeros(self.n_bus)
        for load in self.loads:
            demand[load.bus - 1] += load.demand
        return demand

    @property
    def total_demand(self) -> float:
        return float(sum(load.demand for load in self.loads))

    @property
    def data_center_loads(self) -> tuple[Load, ...]:
        """Data-center loads in fleet order."""
        by_id = {load.id: load for load in self.loads}
        return tuple(by_id[i] for i in self.fleet.load_ids)

    @property
    def data_center_demand(self) -> float:
        return float(sum(load.demand for load in self.loads if load.is_data_center))

    @property
    def non_data_center_demand(self) -> float:
        return float(sum(load.demand for load in self.loads if not load.is_data_center))

    def with_load_changes(self, changes: Mapping[int, float]) -> "Network":
        """Return a copy with ``changes[load_id]`` MW added to each listed load."""
        unknown = set(changes) - {load.id for load in self.loads}
        if unknown:
            raise KeyError(f"Unknown load id(s): {sorted(unknown)}")
        loads = tuple(
            replace(load, demand=load.demand + float(changes[load.id])) if load.id in changes else load
            for load in self.loads
        )
        return replace(self, loads=loads)

    # -- regions ---------------------------------------------------------

    @property
    def regions(self) -> list[int]:
        return sorted({b.region for b in self.buses})

    def region_map(self) -> dict[int, int]:
        """Bus id -> region id."""
        return {b.id: b.region for b in self.buses}

    def summary(self) -> dict:
        return {
            "buses": self.n_bus,
            "generators": self.n_gen,
            "lines": self.n_line,
            "loads": len(self.loads),
            "data_centers": self.fleet.size,
            "total_demand_mw": round(self.total_demand, 3),
            "data_center_demand_mw": round(self.data_center_demand, 3),
        }
