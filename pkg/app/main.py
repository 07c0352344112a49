"""
CarbonShift - command-line entry point.

Market clearing, carbon signals and data-center load shifting on DC power
networks. Run ``python run.py --help`` for the command list.
"""

from dotenv import load_dotenv
load_dotenv()

import functools
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import click
import numpy as np
import pandas as pd

from .config import APP_NAME, DEFAULT_FD_DELTA, RTS_GMLC_DIR, VERSION, setup_logging
from .errors import ConfigError, EmissionsError, NetworkError, ReportError, SolverError
from .models.network import Network
from .models.report import ExperimentReport
from .models.results import ObjectiveVariant, SignalKind, VariantKind
from .models.scenario import ScenarioConfig
from .services.dcopf import solve_dcopf
from .services.emissions import compute_signals, emission_attribution, finite_difference_lmce
from .services.experiments import (
    base_record,
    compare_models,
    json_safe,
    render_report,
    run_pipeline_m1,
    sweep_rho,
)
from .services.network_loader import build_network
from .services.rts_importer import import_rts_gmlc
from .services.shifting import apply_shift, solve_model1, solve_model2, solve_model3

logger = logging.getLogger("carbonshift.main")

EXIT_SOLVER = 1
EXIT_CONFIG = 2
EXIT_ORDERING = 3

OBJECTIVE_CHOICES = click.Choice(["cost", "balance", "co2"], case_sensitive=False)
SIGNAL_CHOICES = click.Choice([s.value for s in SignalKind], case_sensitive=False)


@dataclass
class CliState:
    config_path: Optional[Path]
    network_dir: Optional[Path]
    seed: Optional[int]
    out: Optional[Path]
    fmt: str

    def scenario(self) -> ScenarioConfig:
        overrides = {"network_dir": self.network_dir, "noise_seed": self.seed}
        if self.config_path:
            return ScenarioConfig.from_file(self.config_path, **overrides)
        if self.network_dir is None:
            raise ConfigError("Give a scenario with --config or a network directory with --network")
        return ScenarioConfig.from_mapping({k: v for k, v in overrides.items() if v is not None})

    def emit(self, text: str) -> None:
        if self.out:
            self.out.parent.mkdir(parents=True, exist_ok=True)
            self.out.write_text(text, encoding="utf-8")
            logger.info(f"Wrote {self.out}")
        else:
            click.echo(text, nl=not text.endswith("\n"))

    def emit_payload(self, payload: dict, table: pd.DataFrame) -> None:
        """JSON gets the full payload, CSV the flat table."""
        if self.fmt == "csv":
            self.emit(table.to_csv(index=False, lineterminator="\n"))
        else:
            self.emit(json.dumps(json_safe(payload), sort_keys=True, indent=2) + "\n")


def exit_codes(func):
    """Map package errors onto the documented exit codes."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return func(*args, **kwargs)
        except (ConfigError, NetworkError) as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(f"Error: {e}", err=True)
            ctx.exit(EXIT_CONFIG)
        except (SolverError, EmissionsError, ReportError) as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(f"Error: {e}", err=True)
            ctx.exit(EXIT_SOLVER)
    return wrapper


def _variant(scenario: ScenarioConfig, objective: Optional[str], rho: Optional[float]) -> ObjectiveVariant:
    kind = VariantKind.parse(objective) if objective else scenario.objective
    return ObjectiveVariant(kind, scenario.rho if rho is None else rho)


def _signal(scenario: ScenarioConfig, signal: Optional[str]) -> SignalKind:
    return SignalKind(signal.lower()) if signal else scenario.signal


def _dispatch_table(net: Network, p_g: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({
        "generator": [g.id for g in net.generators],
        "bus": [g.bus for g in net.generators],
        "fuel": [g.fuel.value for g in net.generators],
        "p_g": p_g,
    })


def _plan_table(net: Network, delta_pd: np.ndarray) -> pd.DataFrame:
    loads = net.data_center_loads
    return pd.DataFrame({
        "load": [load.id for load in loads],
        "bus": [load.bus for load in loads],
        "demand": [load.demand for load in loads],
        "delta_pd": delta_pd,
    })


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@click.group()
@click.version_option(VERSION, prog_name=APP_NAME)
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path),
              help="Scenario file (KEY=value).")
@click.option("--network", "network_dir", type=click.Path(file_okay=False, path_type=Path),
              help="Network directory; overrides NETWORK_DIR.")
@click.option("--seed", type=int, help="Cost-noise seed; overrides NOISE_SEED.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Write output here instead of stdout.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="json", show_default=True)
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
@click.pass_context
def cli(ctx, config_path, network_dir, seed, out, fmt, verbose):
    """Carbon signals and data-center load shifting on DC networks."""
    setup_logging(logging.DEBUG if verbose else None)
    ctx.obj = CliState(config_path=config_path, network_dir=network_dir, seed=seed, out=out, fmt=fmt)


@cli.command()
@click.option("--objective", type=OBJECTIVE_CHOICES, help="Clearing objective (default: cost).")
@click.option("--rho", type=float, help="CO2 price in $/t.")
@click.pass_obj
@exit_codes
def opf(state: CliState, objective, rho):
    """Solve the DC OPF and print the dispatch."""
    scenario = state.scenario()
    net = build_network(scenario)
    variant = _variant(scenario, objective or "cost", rho)
    dispatch = solve_dcopf(net, variant.market_mode())
    payload = dispatch.to_dict()
    payload["attribution"] = emission_attribution(net, dispatch)
    state.emit_payload(payload, _dispatch_table(net, dispatch.p_g))


@cli.command()
@click.option("--verify", is_flag=True, help="Also difference-check every bus with a perturbed re-solve.")
@click.option("--delta", type=float, default=DEFAULT_FD_DELTA, show_default=True, help="Perturbation in MW.")
@click.pass_obj
@exit_codes
def lmce(state: CliState, verify, delta):
    """Locational marginal emissions and regional averages at the base dispatch."""
    scenario = state.scenario()
    net = build_network(scenario)
    dispatch = solve_dcopf(net)
    signals, _ = compute_signals(net, dispatch)

    regions = net.region_map()
    table = pd.DataFrame({
        "bus": [b.id for b in net.buses],
        "region": [b.region for b in net.buses],
        "lmp": dispatch.lmp,
        "lmce": signals.lmce,
        "avg_emissions": [signals.avg_by_region[regions[b.id]] for b in net.buses],
    })
    if verify:
        table["lmce_fd"] = [finite_difference_lmce(net, b.id, delta, base=dispatch) for b in net.buses]
    payload = {**signals.to_dict(), "lmp": dispatch.lmp, "table": table.to_dict(orient="records")}
    state.emit_payload(payload, table)


@cli.command()
@click.option("--model", type=click.Choice(["1", "2", "3"]), default="1", show_default=True)
@click.option("--objective", type=OBJECTIVE_CHOICES)
@click.option("--signal", type=SIGNAL_CHOICES)
@click.option("--rho", type=float)
@click.pass_obj
@exit_codes
def shift(state: CliState, model, objective, signal, rho):
    """Solve one shifting model and print the plan with before/after dispatch."""
    scenario = state.scenario()
    net = build_network(scenario)
    variant = _variant(scenario, objective, rho)

    if model == "2":
        dispatch = solve_model2(net, variant)
        state.emit_payload({"model": 2, "dispatch": dispatch.to_dict()}, _dispatch_table(net, dispatch.p_g))
        return

    if model == "3":
        dispatch, plan = solve_model3(net, variant)
        payload = {"model": 3, "plan": plan.to_dict(), "after": dispatch.to_dict()}
        state.emit_payload(payload, _plan_table(net, plan.delta_pd))
        return

    signal_kind = _signal(scenario, signal)
    before = solve_dcopf(net)
    signals, basis = compute_signals(net, before)
    plan = solve_model1(net, signals, before.lmp, variant, signal_kind, basis=basis)
    after = solve_dcopf(apply_shift(net, plan))
    payload = {"model": 1, "plan": plan.to_dict(), "before": before.to_dict(), "after": after.to_dict()}
    state.emit_payload(payload, _plan_table(net, plan.delta_pd))


@cli.command()
@click.option("--objective", type=OBJECTIVE_CHOICES)
@click.option("--signal", type=SIGNAL_CHOICES)
@click.option("--rho", type=float)
@click.pass_obj
@exit_codes
def pipeline(state: CliState, objective, signal, rho):
    """Run the three-step Model 1 pipeline and print a base/after report."""
    scenario = state.scenario()
    net = build_network(scenario)
    variant = _variant(scenario, objective, rho)
    base = solve_dcopf(net)
    report = ExperimentReport(config_hash=scenario.config_hash(), noise_seed=scenario.noise_seed, rho=variant.rho)
    report.add(base_record(base))
    report.add(run_pipeline_m1(net, variant, _signal(scenario, signal), base=base))
    state.emit(render_report(report, state.fmt))


@cli.command()
@click.option("--rho", type=float)
@click.option("--signal", type=SIGNAL_CHOICES)
@click.option("--workers", type=int, default=1, show_default=True, help="Threads for independent solves.")
@click.pass_obj
@exit_codes
def compare(state: CliState, rho, signal, workers):
    """Models 1-3 under every objective variant, with ordering checks."""
    scenario = state.scenario()
    net = build_network(scenario)
    report = compare_models(
        net,
        rho=scenario.rho if rho is None else rho,
        signal=_signal(scenario, signal),
        workers=workers,
        config_hash=scenario.config_hash(),
        noise_seed=scenario.noise_seed,
    )
    state.emit(render_report(report, state.fmt))
    if not report.all_passed:
        click.get_current_context().exit(EXIT_ORDERING)


@cli.command()
@click.option("--rho", "rhos", type=float, multiple=True, help="CO2 price; repeat for a sweep.")
@click.pass_obj
@exit_codes
def check(state: CliState, rhos):
    """Ordering checks only; exit code 3 when any fails."""
    scenario = state.scenario()
    net = build_network(scenario)
    results = sweep_rho(net, rhos or (scenario.rho,))
    rows = [{"rho": rho, **c.to_dict()} for rho, checks in results.items() for c in checks]
    table = pd.DataFrame(rows, columns=["rho", "name", "lhs", "rhs", "lhs_value", "rhs_value", "margin", "passed"])
    state.emit_payload({"checks": rows}, table)
    if not all(row["passed"] for row in rows):
        click.get_current_context().exit(EXIT_ORDERING)


@cli.command("import-rts")
@click.option("--target", type=click.Path(file_okay=False, path_type=Path), default=RTS_GMLC_DIR, show_default=True)
@click.option("--download/--no-download", default=True, help="Fetch the source tables first.")
@click.pass_obj
@exit_codes
def import_rts(state: CliState, target, download):
    """Fetch and convert RTS-GMLC into the native schema."""
    net = import_rts_gmlc(target, download=download)
    state.emit(json.dumps(net.summary(), sort_keys=True, indent=2) + "\n")


def main() -> None:
    cli(prog_name="carbonshift")


if __name__ == "__main__":
    main()
