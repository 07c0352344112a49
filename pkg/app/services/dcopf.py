"""
DC optimal power flow: LP assembly, solve, and dispatch analytics.

Variable order is ``x = [theta (N), p_g (N_g)]``. Equality rows are the N
nodal balances followed by the reference-angle row; inequality rows are
the line limits (max/min per line) followed by the generator limits
(max/min per generator).

Nodal balance for bus i is written as

    sum_{g at i} p_g + sum_{j} beta_ij (theta_i - theta_j) = demand_i

so that the right-hand side carries the load with a positive sign and the
balance duals are the LMPs.
"""

import logging
from typing import Optional

import numpy as np

from ..errors import InfeasibleError
from ..models.lp import LinearProgram, LpSolution
from ..models.network import Network
from ..models.results import DispatchResult, ObjectiveMode
from .lp_solver import solve_lp

logger = logging.getLogger("carbonshift.services.dcopf")


def build_dcopf(
    net: Network,
    mode: Optional[ObjectiveMode] = None,
    demand_delta: Optional[np.ndarray] = None,
) -> LinearProgram:
    """Assemble the DC OPF for ``net`` under the given objective mode.

    ``demand_delta`` (MW per bus position) is added to the nodal demand.
    """
    mode = mode or ObjectiveMode.cost()
    N, Ng, L = net.n_bus, net.n_gen, net.n_line
    n = N + Ng

    G = np.zeros((N + 1, n))
    for line in net.lines:
        i, j, beta = line.from_bus - 1, line.to_bus - 1, line.susceptance
        G[i, i] += beta
        G[i, j] -= beta
        G[j, j] += beta
        G[j, i] -= beta
    G[net.gen_bus_index, N + np.arange(Ng)] = 1.0
    G[N, net.reference_bus - 1] = 1.0

    h = np.zeros(N + 1)
    h[:N] = net.demand_by_bus()
    if demand_delta is not None:
        delta = np.asarray(demand_delta, dtype=float)
        if delta.shape != (N,):
            raise ValueError(f"demand_delta must have {N} entries, got {delta.shape}")
        h[:N] += delta

    K = np.zeros((2 * L + 2 * Ng, n))
    f = np.zeros(2 * L + 2 * Ng)
    ineq_labels = []
    for k, line in enumerate(net.lines):
        i, j, beta = line.from_bus - 1, line.to_bus - 1, line.susceptance
        # flow = -beta * (theta_i - theta_j)
        K[2 * k, i], K[2 * k, j] = -beta, beta
        K[2 * k + 1, i], K[2 * k + 1, j] = beta, -beta
        f[2 * k] = f[2 * k + 1] = line.flow_limit
        ineq_labels += [f"line:{line.id}:max", f"line:{line.id}:min"]
    offset = 2 * L
    for k, gen in enumerate(net.generators):
        K[offset + 2 * k, N + k] = 1.0
        K[offset + 2 * k + 1, N + k] = -1.0
        f[offset + 2 * k] = gen.p_max
        f[offset + 2 * k + 1] = -gen.p_min
        ineq_labels += [f"gen:{gen.id}:max", f"gen:{gen.id}:min"]

    c = np.zeros(n)
    c[N:] = mode.generator_costs(net.costs, net.emission_rates)

    return LinearProgram(
        objective=c,
        G=G,
        h=h,
        K=K,
        f=f,
        var_labels=tuple(f"theta:{b.id}" for b in net.buses) + tuple(f"pg:{g.id}" for g in net.generators),
        eq_labels=tuple(f"balance:{b.id}" for b in net.buses) + ("ref",),
        ineq_labels=tuple(ineq_labels),
    )


def line_flows(net: Network, theta: np.ndarray) -> np.ndarray:
    """MW flow on each line, positive from ``from_bus`` to ``to_bus``."""
    frm = np.array([line.from_bus - 1 for line in net.lines], dtype=int)
    to = np.array([line.to_bus - 1 for line in net.lines], dtype=int)
    beta = np.array([line.susceptance for line in net.lines])
    return -beta * (theta[frm] - theta[to])


def emissions_of(net: Network, p_g: np.ndarray) -> float:
    """Total emissions g'p_g in tCO2."""
    p_g = np.asarray(p_g, dtype=float)
    if p_g.shape != (net.n_gen,):
        raise ValueError(f"p_g must have {net.n_gen} entries, got {p_g.shape}")
    return float(net.emission_rates @ p_g)


def curtailment_of(net: Network, p_g: np.ndarray) -> float:
    """Unused wind and solar capacity in MW."""
    p_g = np.asarray(p_g, dtype=float)
    if p_g.shape != (net.n_gen,):
        raise ValueError(f"p_g must have {net.n_gen} entries, got {p_g.shape}")
    mask = net.curtailable_mask
    return float((net.p_max[mask] - p_g[mask]).sum())


def dispatch_from_solution(
    net: Network,
    lp: LinearProgram,
    sol: LpSolution,
    mode: ObjectiveMode,
) -> DispatchResult:
    """Read dispatch analytics off an LP whose leading variables are [theta, p_g]."""
    N, Ng = net.n_bus, net.n_gen
    theta = np.array(sol.x_star[:N])
    p_g = np.array(sol.x_star[N:N + Ng])
    return DispatchResult(
        p_g=p_g,
        theta=theta,
        flows=line_flows(net, theta),
        cost=float(net.costs @ p_g),
        lmp=np.array(sol.duals_eq[:N]),
        binding=tuple(lp.ineq_labels[j] for j in sol.binding_ineq),
        emissions=emissions_of(net, p_g),
        curtailment=curtailment_of(net, p_g),
        objective_value=sol.objective_value,
        mode=mode,
        lp=lp,
        solution=sol,
    )


def solve_dcopf(
    net: Network,
    mode: Optional[ObjectiveMode] = None,
    demand_delta: Optional[np.ndarray] = None,
) -> DispatchResult:
    """Clear the market with a DC OPF under ``mode`` (cost minimization by default)."""
    mode = mode or ObjectiveMode.cost()
    lp = build_dcopf(net, mode, demand_delta)
    try:
        sol = solve_lp(lp)
    except InfeasibleError as e:
        total = net.total_demand + (float(np.sum(demand_delta)) if demand_delta is not None else 0.0)
        raise InfeasibleError(
            f"DC OPF infeasible: {total:.1f} MW of load cannot be delivered ({e})"
        ) from e

    result = dispatch_from_solution(net, lp, sol, mode)
    logger.info(
        f"DC OPF ({mode.kind.value}, rho={mode.rho:g}) solved: cost ${result.cost:,.2f}, "
        f"emissions {result.emissions:,.1f} t, curtailment {result.curtailment:,.1f} MW, "
        f"{len(result.binding)} binding constraints"
    )
    return result
