"""
Network ingestion for CarbonShift: native CSV schema, validation,
data-center designation and cost noise.

Native schema (one directory):

    bus.csv     id,name,region,is_ref
    gen.csv     id,bus,fuel,cost,p_min,p_max,emission_rate
    branch.csv  id,from,to,susceptance,limit
    load.csv    id,bus,demand[,is_data_center]

Ids are renumbered to 1..k in file order; references are remapped with them.
"""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..config import DEFAULT_EPSILON, DEFAULT_SHIFT_COST, DEFAULT_TRANSFER_CAP
from ..errors import (
    DanglingReferenceError,
    DisconnectedNetworkError,
    NetworkFileMissingError,
    NetworkSchemaError,
    UnknownBusError,
)
from ..models.network import Bus, FleetSpec, Fuel, Generator, Line, Load, Network
from ..models.scenario import ScenarioConfig

logger = logging.getLogger("carbonshift.services.network_loader")

PathLike = Union[str, Path]

REQUIRED_COLUMNS = {
    "bus": ("id", "name", "region", "is_ref"),
    "gen": ("id", "bus", "fuel", "cost", "p_min", "p_max", "emission_rate"),
    "branch": ("id", "from", "to", "susceptance", "limit"),
    "load": ("id", "bus", "demand"),
}

_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f", ""}


# ---------------------------------------------------------------------------
# Reading
# ---------------------------------------------------------------------------


def _resolve_paths(source: Union[PathLike, Mapping[str, PathLike]]) -> dict[str, Path]:
    if isinstance(source, Mapping):
        missing = [name for name in REQUIRED_COLUMNS if name not in source]
        if missing:
            raise NetworkFileMissingError(f"No path given for table(s): {', '.join(missing)}")
        paths = {name: Path(source[name]) for name in REQUIRED_COLUMNS}
    else:
        directory = Path(source)
        paths = {name: directory / f"{name}.csv" for name in REQUIRED_COLUMNS}

    for name, path in paths.items():
        if not path.is_file():
            raise NetworkFileMissingError(f"Network file not found: {path}")
    return paths


def _read_table(name: str, path: Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise NetworkSchemaError(f"{path.name}: cannot parse ({e})") from e

    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in REQUIRED_COLUMNS[name] if c not in frame.columns]
    if missing:
        raise NetworkSchemaError(f"{path.name}: missing column(s) {', '.join(missing)}")
    return frame


def _numeric(frame: pd.DataFrame, column: str, table: str, allow_blank: bool = False) -> pd.Series:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() & (frame[column].notna() if allow_blank else True)
    if bad.any():
        rows = [int(i) + 2 for i in np.flatnonzero(bad.to_numpy())]
        raise NetworkSchemaError(f"{table}.csv: non-numeric '{column}' on line(s) {rows}")
    return values


def _integer_ids(frame: pd.DataFrame, column: str, table: str) -> list[int]:
    values = _numeric(frame, column, table)
    if not np.all(np.equal(np.mod(values, 1), 0)):
        raise NetworkSchemaError(f"{table}.csv: '{column}' must hold integers")
    return [int(v) for v in values]


def _boolean(frame: pd.DataFrame, column: str, table: str) -> list[bool]:
    out = []
    for raw in frame[column].tolist():
        text = "" if pd.isna(raw) else str(raw).strip().lower()
        if text in _TRUE:
            out.append(True)
        elif text in _FALSE:
            out.append(False)
        else:
            raise NetworkSchemaError(f"{table}.csv: '{column}' value {raw!r} is not a boolean")
    return out


def _renumber(ids: Sequence[int], table: str) -> dict[int, int]:
    if len(set(ids)) != len(ids):
        raise NetworkSchemaError(f"{table}.csv: duplicate ids")
    return {old: new for new, old in enumerate(ids, start=1)}


def _map_bus(bus_ids: dict[int, int], value: int, what: str) -> int:
    if value not in bus_ids:
        raise DanglingReferenceError(f"{what} references unknown bus {value}")
    return bus_ids[value]


def _parse_buses(frame: pd.DataFrame) -> tuple[tuple[Bus, ...], dict[int, int]]:
    ids = _integer_ids(frame, "id", "bus")
    bus_ids = _renumber(ids, "bus")
    regions = _integer_ids(frame, "region", "bus")
    refs = _boolean(frame, "is_ref", "bus")
    if sum(refs) != 1:
        raise NetworkSchemaError(f"bus.csv: exactly one reference bus required, found {sum(refs)}")
    if any(r < 1 for r in regions):
        raise NetworkSchemaError("bus.csv: region ids must be >= 1")

    names = frame["name"].fillna("").astype(str).str.strip().tolist()
    buses = tuple(
        Bus(id=bus_ids[old], name=name or str(old), region=region, is_ref=is_ref)
        for old, name, region, is_ref in zip(ids, names, regions, refs)
    )
    return buses, bus_ids


def _parse_generators(frame: pd.DataFrame, bus_ids: dict[int, int]) -> tuple[Generator, ...]:
    ids = _integer_ids(frame, "id", "gen")
    _renumber(ids, "gen")
    buses = _integer_ids(frame, "bus", "gen")
    cost = _numeric(frame, "cost", "gen")
    p_min = _numeric(frame, "p_min", "gen")
    p_max = _numeric(frame, "p_max", "gen")
    rate = _numeric(frame, "emission_rate", "gen", allow_blank=True)

    generators = []
    for k, old in enumerate(ids):
        raw_fuel = str(frame["fuel"].iloc[k]).strip().lower()
        try:
            fuel = Fuel(raw_fuel)
        except ValueError:
            raise NetworkSchemaError(f"gen.csv: generator {old} has unknown fuel '{raw_fuel}'") from None

        emission_rate = fuel.default_emission_rate if pd.isna(rate.iloc[k]) else float(rate.iloc[k])
        if p_min.iloc[k] > p_max.iloc[k]:
            raise NetworkSchemaError(f"gen.csv: generator {old} has p_min > p_max")
        if emission_rate < 0:
            raise NetworkSchemaError(f"gen.csv: generator {old} has a negative emission rate")
        if emission_rate > 0 and not fuel.is_emitting:
            raise NetworkSchemaError(
                f"gen.csv: generator {old} burns no fuel ({fuel.value}) but has emission rate {emission_rate}"
            )

        generators.append(Generator(
            id=k + 1,
            bus=_map_bus(bus_ids, buses[k], f"generator {old}"),
            fuel=fuel,
            cost=float(cost.iloc[k]),
            p_min=float(p_min.iloc[k]),
            p_max=float(p_max.iloc[k]),
            emission_rate=emission_rate,
        ))
    return tuple(generators)


def _parse_lines(frame: pd.DataFrame, bus_ids: dict[int, int]) -> tuple[Line, ...]:
    ids = _integer_ids(frame, "id", "branch")
    _renumber(ids, "branch")
    frm = _integer_ids(frame, "from", "branch")
    to = _integer_ids(frame, "to", "branch")
    beta = _numeric(frame, "susceptance", "branch")
    limit = _numeric(frame, "limit", "branch")

    lines = []
    for k, old in enumerate(ids):
        if frm[k] == to[k]:
            raise NetworkSchemaError(f"branch.csv: line {old} connects bus {frm[k]} to itself")
        if limit.iloc[k] <= 0:
            raise NetworkSchemaError(f"branch.csv: line {old} needs a positive limit")
        if beta.iloc[k] == 0:
            raise NetworkSchemaError(f"branch.csv: line {old} has zero susceptance")
        lines.append(Line(
            id=k + 1,
            from_bus=_map_bus(bus_ids, frm[k], f"line {old}"),
            to_bus=_map_bus(bus_ids, to[k], f"line {old}"),
            susceptance=float(beta.iloc[k]),
            flow_limit=float(limit.iloc[k]),
        ))
    return tuple(lines)


def _parse_loads(frame: pd.DataFrame, bus_ids: dict[int, int]) -> tuple[Load, ...]:
    ids = _integer_ids(frame, "id", "load")
    _renumber(ids, "load")
    buses = _integer_ids(frame, "bus", "load")
    demand = _numeric(frame, "demand", "load")
    flags = _boolean(frame, "is_data_center", "load") if "is_data_center" in frame.columns else [False] * len(ids)

    loads = []
    for k, old in enumerate(ids):
        if demand.iloc[k] < 0:
            raise NetworkSchemaError(f"load.csv: load {old} has negative demand")
        loads.append(Load(
            id=k + 1,
            bus=_map_bus(bus_ids, buses[k], f"load {old}"),
            demand=float(demand.iloc[k]),
            is_data_center=flags[k],
        ))
    return tuple(loads)


def _check_connected(buses: Sequence[Bus], lines: Sequence[Line]) -> None:
    n = len(buses)
    if n == 0:
        raise NetworkSchemaError("bus.csv: no buses")
    rows = [line.from_bus - 1 for line in lines]
    cols = [line.to_bus - 1 for line in lines]
    graph = coo_matrix((np.ones(len(lines)), (rows, cols)), shape=(n, n))
    n_components, labels = connected_components(graph, directed=False)
    if n_components > 1:
        islands = [
            sorted(b.id for b, label in zip(buses, labels) if label == component)
            for component in range(n_components)
        ]
        raise DisconnectedNetworkError(
            f"Network has {n_components} islands; bus groups {islands}"
        )


def load_network(source: Union[PathLike, Mapping[str, PathLike]]) -> Network:
    """Read and validate a network from a directory or a {table: path} mapping."""
    paths = _resolve_paths(source)
    frames = {name: _read_table(name, path) for name, path in paths.items()}

    buses, bus_ids = _parse_buses(frames["bus"])
    generators = _parse_generators(frames["gen"], bus_ids)
    lines = _parse_lines(frames["branch"], bus_ids)
    loads = _parse_loads(frames["load"], bus_ids)
    _check_connected(buses, lines)

    dc_ids = [load.id for load in loads if load.is_data_center]
    fleet = FleetSpec.uniform(dc_ids, DEFAULT_EPSILON, DEFAULT_TRANSFER_CAP, DEFAULT_SHIFT_COST)
    net = Network(buses=buses, generators=generators, lines=lines, loads=loads, fleet=fleet)

    logger.info(
        f"Loaded network from {paths['bus'].parent}: {net.n_bus} buses, {net.n_gen} generators, "
        f"{net.n_line} lines, {len(loads)} loads ({net.total_demand:,.1f} MW)"
    )
    return net


# ---------------------------------------------------------------------------
# Writing
# ---------------------------------------------------------------------------


def serialize_network(net: Network, directory: PathLike) -> Path:
    """Write ``net`` in the native schema; load_network reads it back unchanged."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    pd.DataFrame(
        [{"id": b.id, "name": b.name, "region": b.region, "is_ref": b.is_ref} for b in net.buses],
        columns=list(REQUIRED_COLUMNS["bus"]),
    ).to_csv(directory / "bus.csv", index=False)
    pd.DataFrame(
        [{"id": g.id, "bus": g.bus, "fuel": g.fuel.value, "cost": g.cost, "p_min": g.p_min,
          "p_max": g.p_max, "emission_rate": g.emission_rate} for g in net.generators],
        columns=list(REQUIRED_COLUMNS["gen"]),
    ).to_csv(directory / "gen.csv", index=False)
    pd.DataFrame(
        [{"id": line.id, "from": line.from_bus, "to": line.to_bus, "susceptance": line.susceptance,
          "limit": line.flow_limit} for line in net.lines],
        columns=list(REQUIRED_COLUMNS["branch"]),
    ).to_csv(directory / "branch.csv", index=False)
    pd.DataFrame(
        [{"id": load.id, "bus": load.bus, "demand": load.demand, "is_data_center": load.is_data_center}
         for load in net.loads],
        columns=[*REQUIRED_COLUMNS["load"], "is_data_center"],
    ).to_csv(directory / "load.csv", index=False)

    logger.info(f"Wrote network ({net.n_bus} buses) to {directory}")
    return directory


# ---------------------------------------------------------------------------
# Scenario transforms
# ---------------------------------------------------------------------------


def _fleet_param(value, k: int, name: str) -> Optional[tuple]:
    """Turn a scalar or an explicit array into the tuple layout FleetSpec expects."""
    array = np.asarray(value, dtype=float)
    if array.ndim == 0:
        return None
    if name == "epsilon" and array.shape == (k,):
        return tuple(float(v) for v in array)
    if name != "epsilon" and array.shape == (k, k):
        return tuple(tuple(float(v) for v in row) for row in array)
    raise ValueError(f"{name} has shape {array.shape}; expected a scalar or {k} data centers")


def designate_data_centers(
    net: Network,
    buses: Iterable[int],
    demand: float,
    epsilon=DEFAULT_EPSILON,
    transfer_cap=DEFAULT_TRANSFER_CAP,
    shift_cost=DEFAULT_SHIFT_COST,
    replace_existing: bool = False,
) -> Network:
    """Attach one ``demand`` MW data-center load to each listed bus.

    Data-center loads from a previous designation are removed first. With
    ``replace_existing`` the ordinary load at each listed bus is dropped as
    well, so the bus carries only the data center. Fleet limits may be
    scalars or per-data-center arrays.
    """
    requested = list(buses)
    known = {b.id for b in net.buses}
    unknown = sorted({b for b in requested if b not in known})
    if unknown:
        raise UnknownBusError(f"Cannot place data centers at unknown bus(es) {unknown}")
    if demand < 0:
        raise ValueError("data-center demand must be >= 0")

    ordered = list(dict.fromkeys(requested))
    if len(ordered) != len(requested):
        logger.warning(f"Duplicate data-center buses ignored: {requested}")
    designated = set(ordered)

    kept = [
        load for load in net.loads
        if not load.is_data_center and not (replace_existing and load.bus in designated)
    ]
    removed = sum(
        load.demand for load in net.loads
        if not load.is_data_center and replace_existing and load.bus in designated
    )

    loads = [replace(load, id=k) for k, load in enumerate(kept, start=1)]
    first_dc = len(loads) + 1
    loads += [
        Load(id=first_dc + k, bus=bus, demand=float(demand), is_data_center=True)
        for k, bus in enumerate(ordered)
    ]
    dc_ids = tuple(range(first_dc, first_dc + len(ordered)))

    k = len(dc_ids)
    fleet = FleetSpec.uniform(
        dc_ids,
        epsilon if np.ndim(epsilon) == 0 else 0.0,
        transfer_cap if np.ndim(transfer_cap) == 0 else 0.0,
        shift_cost if np.ndim(shift_cost) == 0 else 0.0,
    )
    overrides = {
        name: param
        for name, param in (
            ("epsilon", _fleet_param(epsilon, k, "epsilon")),
            ("transfer_cap", _fleet_param(transfer_cap, k, "transfer_cap")),
            ("shift_cost", _fleet_param(shift_cost, k, "shift_cost")),
        )
        if param is not None
    }
    if overrides:
        fleet = replace(fleet, **overrides)

    result = replace(net, loads=tuple(loads), fleet=fleet)
    logger.info(
        f"Designated {k} data centers at buses {ordered}: {result.data_center_demand:,.1f} MW "
        f"({100 * result.data_center_demand / result.total_demand if result.total_demand else 0:.1f}% of "
        f"{result.total_demand:,.1f} MW)"
        + (f", {removed:,.1f} MW of existing load replaced" if replace_existing else "")
    )
    return result


def apply_cost_noise(net: Network, seed: int, magnitude: float) -> Network:
    """Add seeded uniform noise in [0, magnitude] $/MWh to every generator cost."""
    if magnitude < 0:
        raise ValueError("noise magnitude must be >= 0")
    if magnitude == 0:
        return net

    rng = np.random.default_rng(seed)
    noise = rng.uniform(0.0, magnitude, size=net.n_gen)
    generators = tuple(
        replace(gen, cost=gen.cost + float(delta)) for gen, delta in zip(net.generators, noise)
    )
    logger.debug(f"Applied cost noise (seed={seed}, magnitude={magnitude:g}) to {net.n_gen} generators")
    return replace(net, generators=generators)


def build_network(config: ScenarioConfig) -> Network:
    """load_network, then designate_data_centers, then apply_cost_noise."""
    net = load_network(config.network_dir)
    if config.data_center_buses:
        net = designate_data_centers(
            net,
            config.data_center_buses,
            config.data_center_demand,
            epsilon=config.epsilon,
            transfer_cap=config.transfer_cap,
            shift_cost=config.shift_cost,
            replace_existing=config.replace_existing_load,
        )
    elif net.fleet.size:
        # Data centers flagged in load.csv take the scenario's fleet limits.
        net = replace(net, fleet=FleetSpec.uniform(
            net.fleet.load_ids, config.epsilon, config.transfer_cap, config.shift_cost
        ))
    return apply_cost_noise(net, config.noise_seed, config.noise_magnitude)
