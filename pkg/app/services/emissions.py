"""
Carbon signals: locational marginal CO2 emissions (LMCE) from the optimal
basis, regional average emissions, and a finite-difference oracle.

Sign convention: a load increase at bus i raises the right-hand side of the
bus-i balance row by the same amount (see app/services/dcopf.py). With that
convention ``lmce[i]`` is the change in system emissions per extra MWh
consumed at bus i, e.g. +0.9606 at a bus served by a marginal gas unit.
"""

import logging
from typing import Mapping, Optional

import numpy as np

from ..config import DEFAULT_FD_DELTA
from ..errors import ZeroGenerationRegionError
from ..models.lp import Basis
from ..models.network import Network
from ..models.results import DispatchResult, EmissionSignals, ObjectiveMode
from .dcopf import solve_dcopf
from .lp_solver import extract_optimal_basis, solve_basis_system

logger = logging.getLogger("carbonshift.services.emissions")


def sensitivity_matrix(net: Network, basis: Basis) -> np.ndarray:
    """B (N_g x N): generation response to a unit load increase at each bus.

    One factorization, N right-hand-side columns; A^-1 is never formed. The
    basis must come from an LP whose first N rows are the nodal balances and
    whose variables start with [theta, p_g].
    """
    N, Ng = net.n_bus, net.n_gen
    rhs = np.zeros((basis.size, N))
    rhs[:N, :N] = np.eye(N)
    delta_x = solve_basis_system(basis, rhs)
    return delta_x[N:N + Ng, :]


def compute_lmce(net: Network, basis: Basis) -> np.ndarray:
    """lambda_CO2 = g' B, one entry per bus."""
    B = sensitivity_matrix(net, basis)
    return net.emission_rates @ B


def finite_difference_lmce(
    net: Network,
    bus: int,
    delta: float = DEFAULT_FD_DELTA,
    base: Optional[DispatchResult] = None,
    mode: Optional[ObjectiveMode] = None,
) -> float:
    """Re-solve with ``delta`` MW extra load at ``bus`` and difference the emissions.

    Agrees with compute_lmce only while the perturbation leaves the binding
    set unchanged.
    """
    if delta <= 0:
        raise ValueError("delta must be > 0")
    mode = mode or ObjectiveMode.cost()
    base = base or solve_dcopf(net, mode)
    demand_delta = np.zeros(net.n_bus)
    demand_delta[bus - 1] = delta
    perturbed = solve_dcopf(net, mode, demand_delta)
    return (perturbed.emissions - base.emissions) / delta


def compute_average_emissions(
    net: Network,
    dispatch: DispatchResult,
    region_map: Optional[Mapping[int, int]] = None,
    strict: bool = True,
) -> dict[int, float]:
    """Regional emissions divided by regional generation, per region.

    Regions without generation are an error when ``strict``; otherwise they
    map to NaN and a warning is logged.
    """
    region_map = dict(region_map) if region_map is not None else net.region_map()
    gen_regions = np.array([region_map[g.bus] for g in net.generators])
    emissions = net.emission_rates * dispatch.p_g

    averages: dict[int, float] = {}
    empty: list[int] = []
    for region in sorted(set(region_map.values())):
        mask = gen_regions == region
        generation = float(dispatch.p_g[mask].sum())
        if generation <= 0.0:
            empty.append(region)
            averages[region] = float("nan")
            continue
        averages[region] = float(emissions[mask].sum()) / generation

    if empty:
        if strict:
            raise ZeroGenerationRegionError(empty)
        logger.warning(f"Average emissions undefined for region(s) {empty}: no generation")
    return averages


def compute_signals(net: Network, dispatch: DispatchResult) -> tuple[EmissionSignals, Basis]:
    """Marginal and average signals at the operating point of ``dispatch``."""
    basis = extract_optimal_basis(dispatch.lp, dispatch.solution)
    signals = EmissionSignals(
        lmce=compute_lmce(net, basis),
        avg_by_region=compute_average_emissions(net, dispatch, strict=False),
        basis_id=basis.basis_id,
    )
    logger.info(
        f"Signals from basis {basis.basis_id}: lmce in "
        f"[{signals.lmce.min():.4f}, {signals.lmce.max():.4f}] t/MWh, "
        f"regional averages {', '.join(f'R{r}={v:.2f}' for r, v in signals.avg_by_region.items())}"
    )
    return signals, basis


def emission_attribution(net: Network, dispatch: DispatchResult) -> dict:
    """Spread system emissions over loads in proportion to their demand."""
    total_demand = net.total_demand
    share = net.data_center_demand / total_demand if total_demand > 0 else 0.0
    return {
        "system_emissions": dispatch.emissions,
        "data_center_share": share,
        "data_center_emissions": dispatch.emissions * share,
        "by_load": {
            load.id: dispatch.emissions * load.demand / total_demand if total_demand > 0 else 0.0
            for load in net.loads
        },
    }
