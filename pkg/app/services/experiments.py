"""
Experiment harness for CarbonShift: the three-step Model 1 pipeline, the
3 x 3 model comparison, ordering checks and report export.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..config import DEFAULT_RHO
from ..errors import MissingCellError
from ..models.lp import Basis
from ..models.network import Network
from ..models.report import BASE_MODEL, ExperimentReport, OrderingCheck, RunRecord
from ..models.results import (
    DispatchResult,
    EmissionSignals,
    ObjectiveVariant,
    SignalKind,
    VariantKind,
)
from .dcopf import solve_dcopf
from .emissions import compute_signals
from .shifting import (
    apply_shift,
    generation_change_table,
    predicted_curtailment_change,
    solve_model1,
    solve_model2,
    solve_model3,
)

logger = logging.getLogger("carbonshift.services.experiments")

VARIANT_ORDER = (VariantKind.F_COST, VariantKind.F_BALANCE, VariantKind.F_CO2)
ORDERING_TOL = 1e-6

CSV_COLUMNS = [
    "model", "variant", "signal", "cost", "cost_change_pct",
    "emissions", "emissions_change_pct", "curtailment", "shifted",
]


def base_record(dispatch: DispatchResult) -> RunRecord:
    return RunRecord(
        model=BASE_MODEL,
        cost=dispatch.cost,
        emissions=dispatch.emissions,
        curtailment=dispatch.curtailment,
        objective_value=dispatch.objective_value,
    )


def run_pipeline_m1(
    net: Network,
    variant: ObjectiveVariant,
    signal: SignalKind = SignalKind.MARGINAL,
    base: Optional[DispatchResult] = None,
    signals: Optional[EmissionSignals] = None,
    basis: Optional[Basis] = None,
) -> RunRecord:
    """Clear, publish signals, let the fleet shift, clear again.

    ``base``/``signals``/``basis`` let callers share one base solve across
    several pipelines.
    """
    base = base or solve_dcopf(net)
    if signals is None or basis is None:
        signals, basis = compute_signals(net, base)

    plan = solve_model1(net, signals, base.lmp, variant, signal, basis=basis)
    after = solve_dcopf(apply_shift(net, plan))

    actual_delta = after.p_g - base.p_g
    table = generation_change_table(net, plan.predicted_delta_pg, actual_delta)
    record = RunRecord(
        model=1,
        variant=variant.kind.value,
        signal=signal.value,
        cost=after.cost,
        emissions=after.emissions,
        curtailment=after.curtailment,
        shifted=plan.total_shifted,
        objective_value=plan.objective_value,
        predicted_emission_change=plan.predicted_emission_change,
        predicted_curtailment_change=(
            predicted_curtailment_change(net, plan.predicted_delta_pg)
            if len(plan.predicted_delta_pg) else None
        ),
        actual_curtailment_change=after.curtailment - base.curtailment,
        generation_changes=table.to_dict(orient="records"),
        plan=plan.to_dict(),
    )
    logger.info(
        f"Pipeline M1/{variant.kind.value}/{signal.value}: cost ${base.cost:,.0f} -> ${after.cost:,.0f}, "
        f"emissions {base.emissions:,.1f} -> {after.emissions:,.1f} t "
        f"(predicted change {plan.predicted_emission_change:+,.1f} t)"
    )
    return record


def _model2_record(net: Network, variant: ObjectiveVariant) -> RunRecord:
    dispatch = solve_model2(net, variant)
    return RunRecord(
        model=2,
        variant=variant.kind.value,
        cost=dispatch.cost,
        emissions=dispatch.emissions,
        curtailment=dispatch.curtailment,
        objective_value=dispatch.objective_value,
    )


def _model3_record(net: Network, variant: ObjectiveVariant) -> RunRecord:
    dispatch, plan = solve_model3(net, variant)
    return RunRecord(
        model=3,
        variant=variant.kind.value,
        cost=dispatch.cost,
        emissions=dispatch.emissions,
        curtailment=dispatch.curtailment,
        shifted=plan.total_shifted,
        objective_value=dispatch.objective_value,
        plan=plan.to_dict(),
    )


def compare_models(
    net: Network,
    rho: float = DEFAULT_RHO,
    variants: Sequence[VariantKind] = VARIANT_ORDER,
    signal: SignalKind = SignalKind.MARGINAL,
    workers: int = 1,
    config_hash: str = "",
    noise_seed: Optional[int] = None,
) -> ExperimentReport:
    """Solve Models 1-3 under each variant and run the ordering checks.

    Independent solves may run on ``workers`` threads; rows are assembled
    in model-then-variant order either way.
    """
    base = solve_dcopf(net)
    signals, basis = compute_signals(net, base)

    jobs: list[Callable[[], RunRecord]] = []
    for model in (1, 2, 3):
        for kind in variants:
            variant = ObjectiveVariant(kind, rho)
            if model == 1:
                jobs.append(lambda v=variant: run_pipeline_m1(net, v, signal, base, signals, basis))
            elif model == 2:
                jobs.append(lambda v=variant: _model2_record(net, v))
            else:
                jobs.append(lambda v=variant: _model3_record(net, v))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda job: job(), jobs))
    else:
        records = [job() for job in jobs]

    report = ExperimentReport(config_hash=config_hash, noise_seed=noise_seed, rho=rho)
    report.add(base_record(base))
    for record in records:
        report.add(record)

    if len(variants) == len(VARIANT_ORDER):
        report.checks = check_orderings(report)
        failed = [c.name for c in report.checks if not c.passed]
        if failed:
            logger.warning(f"Ordering checks failed: {', '.join(failed)}")
        else:
            logger.info(f"All {len(report.checks)} ordering checks passed (rho={rho:g})")
    return report


def _leq(name: str, report: ExperimentReport, lhs: tuple, rhs: tuple, attr: str) -> OrderingCheck:
    left, right = report.cell(*lhs), report.cell(*rhs)
    lv, rv = getattr(left, attr), getattr(right, attr)
    return OrderingCheck(
        name=name,
        lhs=left.label,
        rhs=right.label,
        lhs_value=lv,
        rhs_value=rv,
        passed=lv <= rv + ORDERING_TOL * (1.0 + abs(rv)),
    )


def check_orderings(report: ExperimentReport) -> list[OrderingCheck]:
    """Cost and emission orderings implied by the feasible-set nesting of the models."""
    missing = report.missing_cells()
    if missing:
        raise MissingCellError(missing)

    cost, bal, co2 = (k.value for k in VARIANT_ORDER)
    checks = [
        _leq("cost: M3 <= M1 (f_cost)", report, (3, cost), (1, cost), "cost"),
        _leq("cost: M1 <= M2 (f_cost)", report, (1, cost), (2, cost), "cost"),
        _leq("emissions: M3 <= M2 (f_co2)", report, (3, co2), (2, co2), "emissions"),
        _leq("emissions: M3 <= M1 (f_co2)", report, (3, co2), (1, co2), "emissions"),
    ]
    for model in (1, 2, 3):
        checks += [
            _leq(f"M{model} cost: f_cost <= f_balance", report, (model, cost), (model, bal), "cost"),
            _leq(f"M{model} cost: f_balance <= f_co2", report, (model, bal), (model, co2), "cost"),
            _leq(f"M{model} emissions: f_co2 <= f_balance", report, (model, co2), (model, bal), "emissions"),
            _leq(f"M{model} emissions: f_balance <= f_cost", report, (model, bal), (model, cost), "emissions"),
        ]
    for variant in (cost, bal, co2):
        checks.append(_leq(f"objective: M3 <= M2 ({variant})", report, (3, variant), (2, variant),
                           "objective_value"))
    return checks


def sweep_rho(net: Network, rhos: Iterable[float], **kwargs) -> dict[float, list[OrderingCheck]]:
    """Ordering checks of compare_models at each CO2 price."""
    return {float(rho): compare_models(net, rho=rho, **kwargs).checks for rho in rhos}


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def _format_row(row: dict) -> dict:
    def fixed(value: float, digits: int) -> str:
        return "" if value is None or math.isnan(value) else f"{value:.{digits}f}"

    return {
        "model": row["model"],
        "variant": row["variant"],
        "signal": row["signal"],
        "cost": fixed(row["cost"], 0),
        "cost_change_pct": fixed(row["cost_change_pct"], 2),
        "emissions": fixed(row["emissions"], 1),
        "emissions_change_pct": fixed(row["emissions_change_pct"], 2),
        "curtailment": fixed(row["curtailment"], 1),
        "shifted": fixed(row["shifted"], 1),
    }


def json_safe(value):
    """Plain-Python copy of ``value`` for json.dumps; non-finite floats become None."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return json_safe(value.item())
    if isinstance(value, np.ndarray):
        return json_safe(value.tolist())
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    return value


def render_report(report: ExperimentReport, fmt: str = "csv") -> str:
    """Deterministic text form of ``report``: CSV table or sorted-key JSON."""
    fmt = fmt.lower()
    if fmt == "csv":
        frame = pd.DataFrame([_format_row(row) for row in report.rows()], columns=CSV_COLUMNS)
        return frame.to_csv(index=False, lineterminator="\n")
    if fmt == "json":
        return json.dumps(json_safe(report.to_dict()), sort_keys=True, indent=2) + "\n"
    raise ValueError(f"Unknown report format '{fmt}' (expected csv or json)")


def export_report(report: ExperimentReport, fmt: str, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_report(report, fmt), encoding="utf-8")
    logger.info(f"Report written to {path} ({fmt}, {len(report.runs)} runs)")
    return path
