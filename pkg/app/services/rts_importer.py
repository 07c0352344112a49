"""
RTS-GMLC importer: download the GridMod source tables and map them onto the
native network schema.

Buses are renumbered 1..73 in file order (so RTS bus 114 becomes bus 14) and
the RTS ``Area`` column becomes the region id.
"""

import logging
from pathlib import Path
from typing import Optional, Union

import httpx
import numpy as np
import pandas as pd

from ..config import (
    EMISSION_FACTORS,
    RTS_GMLC_BASE_MVA,
    RTS_GMLC_BASE_URL,
    RTS_GMLC_DOWNLOAD_TIMEOUT,
    RTS_GMLC_DIR,
)
from ..errors import NetworkError, NetworkFileMissingError, NetworkSchemaError
from ..models.network import Network
from .network_loader import load_network

logger = logging.getLogger("carbonshift.services.rts_importer")

SOURCE_FILES = ("bus.csv", "gen.csv", "branch.csv")

# Data-center buses of the bundled RTS-GMLC scenario (renumbered ids) and their size.
RTS_DATA_CENTER_BUSES = (14, 16, 17, 18, 19, 20, 23, 65, 66, 69, 70)
RTS_DATA_CENTER_DEMAND = 400.0  # MW

FUEL_MAP = {
    "oil": "oil",
    "coal": "coal",
    "ng": "gas",
    "nuclear": "nuclear",
    "hydro": "hydro",
    "solar": "solar",
    "wind": "wind",
    "storage": "storage",
    "sync_cond": "sync_cond",
}


def fetch_rts_gmlc(
    target_dir: Union[str, Path] = RTS_GMLC_DIR / "source",
    base_url: str = RTS_GMLC_BASE_URL,
    timeout: float = RTS_GMLC_DOWNLOAD_TIMEOUT,
    client: Optional[httpx.Client] = None,
) -> Path:
    """Download bus/gen/branch source tables into ``target_dir``."""
    target_dir = Path(target_dir)
    target_dir.mkdir(parents=True, exist_ok=True)

    owns_client = client is None
    client = client or httpx.Client(timeout=timeout, follow_redirects=True)
    try:
        for name in SOURCE_FILES:
            url = f"{base_url.rstrip('/')}/{name}"
            try:
                response = client.get(url)
                response.raise_for_status()
            except httpx.HTTPError as e:
                logger.error(f"Download of {url} failed: {e}")
                raise NetworkError(f"Could not download RTS-GMLC {name}: {e}") from e
            (target_dir / name).write_bytes(response.content)
            logger.info(f"Fetched {name} ({len(response.content):,} bytes)")
    finally:
        if owns_client:
            client.close()
    return target_dir


def _require(frame: pd.DataFrame, columns: tuple[str, ...], name: str) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise NetworkSchemaError(f"RTS-GMLC {name}: missing column(s) {', '.join(missing)}")


def _column(frame: pd.DataFrame, name: str, default: float = 0.0) -> pd.Series:
    if name not in frame.columns:
        return pd.Series(default, index=frame.index, dtype=float)
    return pd.to_numeric(frame[name], errors="coerce").fillna(default)


def convert_rts_gmlc(
    source_dir: Union[str, Path] = RTS_GMLC_DIR / "source",
    target_dir: Union[str, Path] = RTS_GMLC_DIR,
) -> Network:
    """Write the native bus/gen/branch/load tables for RTS-GMLC and load them.

    Generator cost is fuel price x average heat rate / 1000 + VOM ($/MWh);
    line susceptance is -baseMVA / X so that -beta * (theta_i - theta_j) is
    the MW flow; the flow limit is the continuous rating; each bus with a
    positive ``MW Load`` gets one load.
    """
    source_dir, target_dir = Path(source_dir), Path(target_dir)
    frames = {}
    for name in SOURCE_FILES:
        path = source_dir / name
        if not path.is_file():
            raise NetworkFileMissingError(f"RTS-GMLC source file not found: {path}")
        frames[name] = pd.read_csv(path)
        frames[name].columns = [str(c).strip() for c in frames[name].columns]

    bus, gen, branch = frames["bus.csv"], frames["gen.csv"], frames["branch.csv"]
    _require(bus, ("Bus ID", "Bus Name", "Bus Type", "MW Load", "Area"), "bus.csv")
    _require(gen, ("Bus ID", "Fuel", "PMin MW", "PMax MW"), "gen.csv")
    _require(branch, ("From Bus", "To Bus", "X", "Cont Rating"), "branch.csv")

    bus_ids = {int(rts_id): k for k, rts_id in enumerate(bus["Bus ID"], start=1)}

    native_bus = pd.DataFrame({
        "id": range(1, len(bus) + 1),
        "name": bus["Bus Name"].astype(str).str.strip(),
        "region": bus["Area"].astype(int),
        "is_ref": bus["Bus Type"].astype(str).str.strip().str.lower().eq("ref"),
    })

    fuels = gen["Fuel"].astype(str).str.strip().str.lower().map(FUEL_MAP)
    if fuels.isna().any():
        unknown = sorted(set(gen.loc[fuels.isna(), "Fuel"].astype(str)))
        raise NetworkSchemaError(f"RTS-GMLC gen.csv: unmapped fuel(s) {unknown}")
    price = _column(gen, "Fuel Price $/MMBTU")
    heat_rate = _column(gen, "HR_avg_0")
    vom = _column(gen, "VOM")
    native_gen = pd.DataFrame({
        "id": range(1, len(gen) + 1),
        "bus": gen["Bus ID"].astype(int).map(bus_ids),
        "fuel": fuels,
        "cost": price * heat_rate / 1000.0 + vom,
        "p_min": _column(gen, "PMin MW"),
        "p_max": _column(gen, "PMax MW"),
        "emission_rate": fuels.map(lambda f: EMISSION_FACTORS.get(f, 0.0)),
    })

    reactance = _column(branch, "X")
    if (reactance == 0).any():
        raise NetworkSchemaError("RTS-GMLC branch.csv: zero reactance")
    native_branch = pd.DataFrame({
        "id": range(1, len(branch) + 1),
        "from": branch["From Bus"].astype(int).map(bus_ids),
        "to": branch["To Bus"].astype(int).map(bus_ids),
        "susceptance": -RTS_GMLC_BASE_MVA / reactance,
        "limit": _column(branch, "Cont Rating"),
    })

    mw_load = _column(bus, "MW Load")
    loaded = np.flatnonzero(mw_load.to_numpy() > 0)
    native_load = pd.DataFrame({
        "id": range(1, len(loaded) + 1),
        "bus": loaded + 1,
        "demand": mw_load.to_numpy()[loaded],
        "is_data_center": False,
    })

    for name, frame in (("gen", native_gen), ("branch", native_branch)):
        if frame.isna().any().any():
            raise NetworkSchemaError(f"RTS-GMLC {name}.csv references a bus missing from bus.csv")

    target_dir.mkdir(parents=True, exist_ok=True)
    native_bus.to_csv(target_dir / "bus.csv", index=False)
    native_gen.to_csv(target_dir / "gen.csv", index=False)
    native_branch.to_csv(target_dir / "branch.csv", index=False)
    native_load.to_csv(target_dir / "load.csv", index=False)
    logger.info(f"Converted RTS-GMLC tables from {source_dir} into {target_dir}")

    return load_network(target_dir)


def import_rts_gmlc(target_dir: Union[str, Path] = RTS_GMLC_DIR, download: bool = True) -> Network:
    """Fetch (optionally) and convert RTS-GMLC into ``target_dir``."""
    target_dir = Path(target_dir)
    source_dir = target_dir / "source"
    if download:
        fetch_rts_gmlc(source_dir)
    return convert_rts_gmlc(source_dir, target_dir)
