"""
Data-center load shifting for CarbonShift.

Model 1  data centers react to published signals (LMP plus a marginal or
         average carbon signal) and the market re-clears afterwards.
Model 2  the market clears with a carbon-aware objective; loads stay put.
Model 3  the market co-optimizes dispatch and data-center flexibility.

Fleet variables are ``[delta_pd (k), s (k*(k-1))]`` where ``s`` holds one
transfer per ordered pair of distinct data centers. The fleet balance rows
``delta_pd_i - sum_j s_ji + sum_k s_ik = 0`` imply ``sum delta_pd = 0``, so
that row is not added; ShiftPlan.validate checks it afterwards.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from ..config import FEASIBILITY_TOL, PREDICTION_DEVIATION_TOL
from ..errors import ConfigError, NumericalError, ZeroGenerationRegionError
from ..models.lp import Basis, LinearProgram
from ..models.network import Network
from ..models.results import (
    DispatchResult,
    EmissionSignals,
    ObjectiveVariant,
    ShiftPlan,
    SignalKind,
    VariantKind,
)
from .dcopf import build_dcopf, dispatch_from_solution, solve_dcopf
from .emissions import sensitivity_matrix
from .lp_solver import solve_lp

logger = logging.getLogger("carbonshift.services.shifting")


@dataclass(frozen=True)
class FleetBlock:
    """Constraint rows over the fleet variables ``[delta_pd, s]``."""
    pairs: list[tuple[int, int]]
    G: np.ndarray  # k x (k + m) balance rows
    K: np.ndarray  # shift and transfer limits
    f: np.ndarray
    pair_costs: np.ndarray
    var_labels: tuple[str, ...]
    eq_labels: tuple[str, ...]
    ineq_labels: tuple[str, ...]

    @property
    def size(self) -> int:
        return self.G.shape[0]

    @property
    def n_vars(self) -> int:
        return self.G.shape[1]


def _require_fleet(net: Network) -> None:
    if net.fleet.size == 0:
        raise ConfigError("No data centers designated; load shifting needs a nonempty fleet")


def fleet_block(net: Network) -> FleetBlock:
    _require_fleet(net)
    fleet = net.fleet
    loads = net.data_center_loads
    k = fleet.size
    pairs = fleet.pairs()
    m = len(pairs)
    demand = np.array([load.demand for load in loads])

    G = np.zeros((k, k + m))
    G[:, :k] = np.eye(k)
    for p, (a, b) in enumerate(pairs):
        G[a, k + p] = 1.0  # outgoing
        G[b, k + p] = -1.0  # incoming

    limit = fleet.epsilon_array * demand
    cap = fleet.transfer_cap_array
    K = np.vstack([
        np.hstack([np.eye(k), np.zeros((k, m))]),
        np.hstack([-np.eye(k), np.zeros((k, m))]),
        np.hstack([np.zeros((m, k)), np.eye(m)]),
        np.hstack([np.zeros((m, k)), -np.eye(m)]),
    ])
    f = np.concatenate([limit, limit, [cap[a, b] for a, b in pairs], np.zeros(m)])

    ids = [load.id for load in loads]
    pair_names = [f"{ids[a]}:{ids[b]}" for a, b in pairs]
    return FleetBlock(
        pairs=pairs,
        G=G,
        K=K,
        f=f,
        pair_costs=np.array([fleet.shift_cost_array[a, b] for a, b in pairs]),
        var_labels=tuple(f"dp:{i}" for i in ids) + tuple(f"s:{name}" for name in pair_names),
        eq_labels=tuple(f"transfer:{i}" for i in ids),
        ineq_labels=(
            tuple(f"shift:{i}:max" for i in ids)
            + tuple(f"shift:{i}:min" for i in ids)
            + tuple(f"s:{name}:max" for name in pair_names)
            + tuple(f"s:{name}:min" for name in pair_names)
        ),
    )


def _transfer_matrix(block: FleetBlock, s: np.ndarray) -> np.ndarray:
    """k x k transfers with opposite flows netted out; circulations change nothing but cost."""
    k = block.size
    transfers = np.zeros((k, k))
    for (a, b), value in zip(block.pairs, s):
        transfers[a, b] = max(float(value), 0.0)
    both = np.minimum(transfers, transfers.T)
    transfers -= both
    return transfers


def _plan_from(block: FleetBlock, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k = block.size
    delta = np.array(z[:k])
    delta[np.abs(delta) < FEASIBILITY_TOL] = 0.0
    if not np.any(delta):
        return delta, np.zeros((k, k))
    return delta, _transfer_matrix(block, z[k:])


def carbon_weight(variant: ObjectiveVariant) -> float:
    """Weight on the carbon signal in the Model 1 objective."""
    if variant.kind is VariantKind.F_CO2 and variant.rho == 0:
        return 1.0
    return variant.effective_rho


def data_center_signal(
    net: Network,
    signals: EmissionSignals,
    signal_kind: SignalKind = SignalKind.MARGINAL,
) -> np.ndarray:
    """The carbon intensity each data center sees, in fleet order."""
    buses = [load.bus for load in net.data_center_loads]
    if signal_kind is SignalKind.MARGINAL:
        return np.array([signals.lmce[b - 1] for b in buses])

    regions = net.region_map()
    values = np.array([signals.avg_by_region.get(regions[b], np.nan) for b in buses])
    if np.any(np.isnan(values)):
        raise ZeroGenerationRegionError([regions[b] for b, v in zip(buses, values) if np.isnan(v)])
    return values


# ---------------------------------------------------------------------------
# Model 1
# ---------------------------------------------------------------------------


def predicted_generation_change(net: Network, basis: Basis, delta_pd: np.ndarray) -> np.ndarray:
    """B @ delta_pd mapped from fleet order onto buses."""
    B = sensitivity_matrix(net, basis)
    columns = [load.bus - 1 for load in net.data_center_loads]
    return B[:, columns] @ np.asarray(delta_pd, dtype=float)


def predict_shift_effects(
    net: Network,
    plan: ShiftPlan,
    basis: Basis,
    lmp: np.ndarray,
) -> tuple[float, float]:
    """(emission change, cost change) of ``plan`` read off the basis.

    Exact while the shift keeps the base binding set; an estimate beyond it.
    """
    if not np.any(plan.delta_pd):
        return 0.0, 0.0
    delta_pg = predicted_generation_change(net, basis, plan.delta_pd)
    buses = [load.bus - 1 for load in net.data_center_loads]
    shift_cost = float((net.fleet.shift_cost_array * plan.transfers).sum())
    emission_change = float(net.emission_rates @ delta_pg)
    cost_change = float(np.asarray(lmp)[buses] @ plan.delta_pd) + shift_cost
    return emission_change, cost_change


def predicted_curtailment_change(net: Network, delta_pg: np.ndarray) -> float:
    """Change in unused wind/solar capacity implied by a generation change."""
    if len(delta_pg) == 0:
        return 0.0
    return float(-np.asarray(delta_pg)[net.curtailable_mask].sum())


def solve_model1(
    net: Network,
    signals: EmissionSignals,
    lmp: np.ndarray,
    variant: ObjectiveVariant,
    signal_kind: SignalKind = SignalKind.MARGINAL,
    basis: Optional[Basis] = None,
) -> ShiftPlan:
    """Shift data-center load against published prices and carbon signals.

    Minimizes ``(w * lambda + lambda_LMP)' delta_pd + sum d_ij s_ij`` where w
    is the variant's carbon weight and lambda_LMP is dropped under f_co2.
    With a basis, the marginal plan also carries its predicted effect on
    every generator.
    """
    block = fleet_block(net)
    k = block.size
    buses = [load.bus - 1 for load in net.data_center_loads]

    intensity = data_center_signal(net, signals, signal_kind)
    price = np.asarray(lmp, dtype=float)[buses] if variant.uses_electricity_cost else np.zeros(k)
    coefficients = carbon_weight(variant) * intensity + price

    lp = LinearProgram(
        objective=np.concatenate([coefficients, block.pair_costs]),
        G=block.G,
        h=np.zeros(k),
        K=block.K,
        f=block.f,
        var_labels=block.var_labels,
        eq_labels=block.eq_labels,
        ineq_labels=block.ineq_labels,
    )
    sol = solve_lp(lp)
    delta, transfers = _plan_from(block, sol.x_star)

    predicted_pg = np.zeros(0)
    cost_change = float(np.asarray(lmp, dtype=float)[buses] @ delta) + float(
        (net.fleet.shift_cost_array * transfers).sum()
    )
    if signal_kind is SignalKind.MARGINAL and basis is not None:
        predicted_pg = predicted_generation_change(net, basis, delta)
        emission_change = float(net.emission_rates @ predicted_pg)
    else:
        # What the fleet believes it saves under the signal it was given.
        emission_change = float(intensity @ delta)

    plan = ShiftPlan(
        delta_pd=delta,
        transfers=transfers,
        predicted_delta_pg=predicted_pg,
        predicted_emission_change=emission_change,
        predicted_cost_change=cost_change,
        objective_value=sol.objective_value,
        signal=signal_kind,
        variant=variant,
    )
    _check_plan(net, plan)
    logger.info(
        f"Model 1 ({variant.kind.value}, {signal_kind.value}) shifts {plan.total_shifted:,.1f} MW; "
        f"predicted {emission_change:+,.2f} t CO2, {cost_change:+,.2f} $"
    )
    return plan


# ---------------------------------------------------------------------------
# Models 2 and 3
# ---------------------------------------------------------------------------


def solve_model2(net: Network, variant: ObjectiveVariant) -> DispatchResult:
    """Carbon-aware clearing with fixed loads."""
    return solve_dcopf(net, variant.market_mode())


def build_model3(net: Network, variant: ObjectiveVariant) -> tuple[LinearProgram, FleetBlock]:
    """DC OPF over ``[theta, p_g]`` extended with the fleet variables.

    Bus balances read ``... - delta_pd_i = demand`` at each data-center bus.
    """
    block = fleet_block(net)
    base = build_dcopf(net, variant.market_mode())
    n, k, n_fleet = base.n_vars, block.size, block.n_vars

    coupling = np.zeros((base.n_eq, n_fleet))
    for i, load in enumerate(net.data_center_loads):
        coupling[load.bus - 1, i] = -1.0

    G = np.block([
        [base.G, coupling],
        [np.zeros((k, n)), block.G],
    ])
    K = np.block([
        [base.K, np.zeros((base.n_ineq, n_fleet))],
        [np.zeros((block.K.shape[0], n)), block.K],
    ])
    lp = LinearProgram(
        objective=np.concatenate([base.objective, np.zeros(k), block.pair_costs]),
        G=G,
        h=np.concatenate([base.h, np.zeros(k)]),
        K=K,
        f=np.concatenate([base.f, block.f]),
        var_labels=base.var_labels + block.var_labels,
        eq_labels=base.eq_labels + block.eq_labels,
        ineq_labels=base.ineq_labels + block.ineq_labels,
    )
    return lp, block


def solve_model3(net: Network, variant: ObjectiveVariant) -> tuple[DispatchResult, ShiftPlan]:
    """Co-optimize dispatch and data-center flexibility in one LP."""
    lp, block = build_model3(net, variant)
    mode = variant.market_mode()
    sol = solve_lp(lp)

    n_base = net.n_bus + net.n_gen
    delta, transfers = _plan_from(block, sol.x_star[n_base:])
    dispatch = dispatch_from_solution(net, lp, sol, mode)
    plan = ShiftPlan(
        delta_pd=delta,
        transfers=transfers,
        predicted_delta_pg=np.zeros(0),
        predicted_emission_change=0.0,
        predicted_cost_change=0.0,
        objective_value=sol.objective_value,
        variant=variant,
    )
    _check_plan(net, plan)
    logger.info(
        f"Model 3 ({variant.kind.value}, rho={variant.rho:g}) solved: cost ${dispatch.cost:,.2f}, "
        f"emissions {dispatch.emissions:,.1f} t, shifted {plan.total_shifted:,.1f} MW"
    )
    return dispatch, plan


# ---------------------------------------------------------------------------
# Plan utilities
# ---------------------------------------------------------------------------


def check_fleet_constraints(net: Network, plan: ShiftPlan) -> list[str]:
    demand = np.array([load.demand for load in net.data_center_loads])
    return plan.validate(net.fleet, demand)


def _check_plan(net: Network, plan: ShiftPlan) -> None:
    problems = check_fleet_constraints(net, plan)
    if problems:
        # The LP enforces these rows; a violation means the solve went wrong.
        raise NumericalError(f"Shift plan violates fleet constraints: {'; '.join(problems)}")


def apply_shift(net: Network, plan: ShiftPlan) -> Network:
    """Network with each data-center load moved by its ``delta_pd``."""
    changes = {
        load.id: float(delta)
        for load, delta in zip(net.data_center_loads, plan.delta_pd)
        if delta != 0.0
    }
    return net.with_load_changes(changes)


def generation_change_table(
    net: Network,
    predicted: np.ndarray,
    actual: np.ndarray,
    tol: float = PREDICTION_DEVIATION_TOL,
) -> pd.DataFrame:
    """Per-generator predicted vs. re-solved generation change.

    Only generators whose output moves in either column are listed;
    ``deviates`` marks rows where the two disagree by more than ``tol``
    relative to the larger magnitude.
    """
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float) if len(predicted) else np.zeros_like(actual)
    moved = (np.abs(predicted) > FEASIBILITY_TOL) | (np.abs(actual) > FEASIBILITY_TOL)
    scale = np.maximum(np.abs(predicted), np.abs(actual))
    deviates = np.abs(predicted - actual) > np.maximum(tol * scale, FEASIBILITY_TOL)

    table = pd.DataFrame({
        "generator": [g.id for g in net.generators],
        "bus": [g.bus for g in net.generators],
        "fuel": [g.fuel.value for g in net.generators],
        "predicted_mw": predicted,
        "actual_mw": actual,
        "deviates": deviates,
    })[moved].reset_index(drop=True)

    if table["deviates"].any():
        logger.warning(
            f"Predicted generation change deviates from re-clearing for "
            f"{int(table['deviates'].sum())} generator(s)"
        )
    return table
