"""
Tests for data-center load shifting: signal-driven shifting (Model 1),
carbon-aware clearing (Model 2) and co-optimization (Model 3).

The 5-bus fixture has a congested 2-3 corridor: the west side (buses 1-2)
is served at the margin by coal at $15, the east side (buses 3-5) by gas
at $25, so every variant wants to move data-center load from bus 4 to bus 2.

Run with: pytest tests/test_shifting.py -v
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from app.config import DATA_DIR  # noqa: E402
from app.errors import ConfigError, NumericalError, ZeroGenerationRegionError  # noqa: E402
from app.models.network import FleetSpec  # noqa: E402
from app.models.results import (  # noqa: E402
    EmissionSignals,
    ObjectiveVariant,
    ShiftPlan,
    SignalKind,
    VariantKind,
)
from app.models.scenario import ScenarioConfig  # noqa: E402
from app.services.dcopf import solve_dcopf  # noqa: E402
from app.services.emissions import compute_signals  # noqa: E402
from app.services.network_loader import (  # noqa: E402
    build_network,
    designate_data_centers,
    load_network,
)
from app.services.shifting import (  # noqa: E402
    apply_shift,
    build_model3,
    carbon_weight,
    check_fleet_constraints,
    data_center_signal,
    fleet_block,
    generation_change_table,
    predict_shift_effects,
    predicted_curtailment_change,
    solve_model1,
    solve_model2,
    solve_model3,
)

COAL, GAS, OIL = 0.6042, 0.9606, 0.7434
COST = ObjectiveVariant(VariantKind.F_COST, 30.0)
BALANCE = ObjectiveVariant(VariantKind.F_BALANCE, 30.0)
CO2 = ObjectiveVariant(VariantKind.F_CO2, 30.0)


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

@pytest.fixture
def toy5_dc():
    """Data centers at buses 2 and 4, 50 MW each, epsilon 0.2."""
    return build_network(ScenarioConfig.from_file(DATA_DIR / "scenarios" / "toy5.env"))


@pytest.fixture
def base(toy5_dc):
    return solve_dcopf(toy5_dc)


@pytest.fixture
def signals_and_basis(toy5_dc, base):
    return compute_signals(toy5_dc, base)


def fake_signals(lmce, avg_by_region) -> EmissionSignals:
    return EmissionSignals(lmce=np.asarray(lmce, dtype=float), avg_by_region=avg_by_region, basis_id="test")


# ===================================================================
# 1. Fleet block and signal plumbing
# ===================================================================


class TestFleetBlock:
    def test_layout(self, toy5_dc):
        block = fleet_block(toy5_dc)
        assert block.size == 2
        assert block.pairs == [(0, 1), (1, 0)]
        assert block.var_labels == ("dp:5", "dp:6", "s:5:6", "s:6:5")
        assert block.eq_labels == ("transfer:5", "transfer:6")
        # shift limits are epsilon * demand = 10 MW, transfers are capped at 400 MW
        assert block.f == pytest.approx([10.0, 10.0, 10.0, 10.0, 400.0, 400.0, 0.0, 0.0])

    def test_balance_rows_imply_zero_sum(self, toy5_dc):
        block = fleet_block(toy5_dc)
        # Column sums over the transfer variables cancel.
        assert block.G[:, block.size:].sum(axis=0) == pytest.approx(np.zeros(2))

    def test_empty_fleet_rejected(self):
        with pytest.raises(ConfigError):
            fleet_block(load_network(DATA_DIR / "toy3"))

    def test_carbon_weight(self):
        assert carbon_weight(COST) == 0.0
        assert carbon_weight(BALANCE) == 30.0
        assert carbon_weight(CO2) == 30.0
        assert carbon_weight(ObjectiveVariant(VariantKind.F_CO2, 0.0)) == 1.0
        assert COST.effective_rho == 0.0
        assert BALANCE.effective_rho == 30.0

    def test_marginal_signal_in_fleet_order(self, toy5_dc, signals_and_basis):
        signals, _ = signals_and_basis
        assert data_center_signal(toy5_dc, signals) == pytest.approx([COAL, GAS])

    def test_average_signal_uses_bus_region(self, toy5_dc, signals_and_basis):
        signals, _ = signals_and_basis
        values = data_center_signal(toy5_dc, signals, SignalKind.AVERAGE)
        assert values == pytest.approx([70 * COAL / 220, 70 * GAS / 150])

    def test_average_signal_without_generation(self, toy5_dc):
        signals = fake_signals(np.zeros(5), {1: 0.2, 2: float("nan")})
        with pytest.raises(ZeroGenerationRegionError) as exc:
            data_center_signal(toy5_dc, signals, SignalKind.AVERAGE)
        assert exc.value.regions == [2]


# ===================================================================
# 2. Model 1
# ===================================================================


class TestModel1:
    @pytest.mark.parametrize("variant", [COST, BALANCE, CO2])
    def test_moves_load_toward_cheap_clean_side(self, toy5_dc, base, signals_and_basis, variant):
        signals, basis = signals_and_basis
        plan = solve_model1(toy5_dc, signals, base.lmp, variant, basis=basis)
        assert plan.delta_pd == pytest.approx([10.0, -10.0])
        assert plan.total_shifted == pytest.approx(10.0)
        # 10 MW travels from the bus-4 data center to the bus-2 one.
        assert plan.transfers == pytest.approx(np.array([[0.0, 0.0], [10.0, 0.0]]))
        assert check_fleet_constraints(toy5_dc, plan) == []

    def test_marginal_prediction(self, toy5_dc, base, signals_and_basis):
        signals, basis = signals_and_basis
        plan = solve_model1(toy5_dc, signals, base.lmp, BALANCE, SignalKind.MARGINAL, basis=basis)
        assert plan.predicted_delta_pg == pytest.approx([0.0, 10.0, -10.0, 0.0, 0.0])
        assert plan.predicted_emission_change == pytest.approx(10 * COAL - 10 * GAS)
        assert plan.predicted_cost_change == pytest.approx(-100.0)

    def test_average_signal_prediction(self, toy5_dc, base, signals_and_basis):
        signals, basis = signals_and_basis
        plan = solve_model1(toy5_dc, signals, base.lmp, CO2, SignalKind.AVERAGE, basis=basis)
        assert plan.delta_pd == pytest.approx([10.0, -10.0])
        assert len(plan.predicted_delta_pg) == 0
        expected = 10 * (70 * COAL / 220) - 10 * (70 * GAS / 150)
        assert plan.predicted_emission_change == pytest.approx(expected)

    def test_co2_variant_ignores_prices(self, toy5_dc):
        # Prices favor bus 4, carbon favors bus 2: only f_co2 follows carbon.
        signals = fake_signals([0.5, 0.5, 0.9, 0.9, 0.9], {1: 0.5, 2: 0.9})
        lmp = np.array([100.0, 100.0, 10.0, 10.0, 10.0])
        assert solve_model1(toy5_dc, signals, lmp, COST).delta_pd == pytest.approx([-10.0, 10.0])
        assert solve_model1(toy5_dc, signals, lmp, CO2).delta_pd == pytest.approx([10.0, -10.0])

    def test_no_incentive_no_shift(self, toy5_dc):
        signals = fake_signals(np.full(5, 0.5), {1: 0.5, 2: 0.5})
        plan = solve_model1(toy5_dc, signals, np.full(5, 20.0), BALANCE)
        assert plan.delta_pd == pytest.approx([0.0, 0.0])
        assert not plan.transfers.any()

    def test_shift_cost_blocks_small_gains(self, toy5_dc, base, signals_and_basis):
        signals, basis = signals_and_basis
        net = designate_data_centers(toy5_dc, [2, 4], 50.0, epsilon=0.2, shift_cost=15.0)
        plan = solve_model1(net, signals, base.lmp, COST, basis=basis)
        # Moving 1 MW saves $10 in energy but costs $15 to transfer.
        assert plan.delta_pd == pytest.approx([0.0, 0.0])

    def test_predict_shift_effects(self, toy5_dc, base, signals_and_basis):
        signals, basis = signals_and_basis
        plan = solve_model1(toy5_dc, signals, base.lmp, COST, basis=basis)
        emission_change, cost_change = predict_shift_effects(toy5_dc, plan, basis, base.lmp)
        assert emission_change == pytest.approx(-3.564)
        assert cost_change == pytest.approx(-100.0)

    def test_reclearing_matches_prediction_within_basis(self, toy5_dc, base, signals_and_basis):
        signals, basis = signals_and_basis
        plan = solve_model1(toy5_dc, signals, base.lmp, BALANCE, basis=basis)
        after = solve_dcopf(apply_shift(toy5_dc, plan))
        assert after.cost == pytest.approx(2700.0)
        assert after.emissions == pytest.approx(105.972)
        assert after.emissions - base.emissions == pytest.approx(plan.predicted_emission_change)
        assert after.p_g - base.p_g == pytest.approx(plan.predicted_delta_pg, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(
        epsilon=st.floats(min_value=0.0, max_value=1.0),
        cap=st.floats(min_value=0.0, max_value=100.0),
        lmce=st.lists(st.floats(min_value=-1.0, max_value=2.0), min_size=5, max_size=5),
        lmp=st.lists(st.floats(min_value=0.0, max_value=100.0), min_size=5, max_size=5),
        kind=st.sampled_from(list(VariantKind)),
    )
    def test_plans_respect_fleet_limits(self, epsilon, cap, lmce, lmp, kind):
        net = designate_data_centers(
            load_network(DATA_DIR / "toy5"), [2, 3, 4], 50.0, epsilon=epsilon, transfer_cap=cap
        )
        signals = fake_signals(lmce, {1: 0.2, 2: 0.4})
        plan = solve_model1(net, signals, np.array(lmp), ObjectiveVariant(kind, 30.0))
        assert check_fleet_constraints(net, plan) == []
        assert abs(plan.delta_pd.sum()) <= 1e-6
        assert np.all(np.abs(plan.delta_pd) <= epsilon * 50.0 + 1e-6)
        # Netted transfers never run both ways between a pair.
        assert not np.any((plan.transfers > 0) & (plan.transfers.T > 0))


# ===================================================================
# 3. Models 2 and 3
# ===================================================================


class TestModel2:
    def test_cost_variant_is_base_clearing(self, toy5_dc, base):
        dispatch = solve_model2(toy5_dc, COST)
        assert dispatch.p_g == pytest.approx(base.p_g)
        assert dispatch.cost == pytest.approx(2800.0)

    def test_co2_variant(self, toy5_dc):
        dispatch = solve_model2(toy5_dc, CO2)
        assert dispatch.cost == pytest.approx(3850.0)
        assert dispatch.emissions == pytest.approx(94.332)

    def test_high_carbon_price_matches_co2_variant(self, toy5_dc):
        priced = solve_model2(toy5_dc, ObjectiveVariant(VariantKind.F_BALANCE, 100.0))
        assert priced.p_g == pytest.approx(solve_model2(toy5_dc, CO2).p_g)


class TestModel3:
    def test_structure(self, toy5_dc):
        lp, block = build_model3(toy5_dc, BALANCE)
        assert lp.n_vars == 5 + 5 + block.n_vars
        assert lp.n_eq == 5 + 1 + block.size
        bus2 = lp.eq_labels.index("balance:2")
        assert lp.G[bus2, lp.var_labels.index("dp:5")] == -1.0
        assert lp.objective[lp.var_labels.index("dp:5")] == 0.0

    @pytest.mark.parametrize("variant", [COST, BALANCE])
    def test_cost_preferences(self, toy5_dc, variant):
        dispatch, plan = solve_model3(toy5_dc, variant)
        assert plan.delta_pd == pytest.approx([10.0, -10.0])
        assert dispatch.cost == pytest.approx(2700.0)
        assert dispatch.emissions == pytest.approx(105.972)
        assert check_fleet_constraints(toy5_dc, plan) == []

    def test_co2_preference(self, toy5_dc):
        dispatch, plan = solve_model3(toy5_dc, CO2)
        assert plan.delta_pd == pytest.approx([10.0, -10.0])
        assert dispatch.p_g == pytest.approx([150.0, 80.0, 0.0, 60.0, 80.0])
        assert dispatch.cost == pytest.approx(3600.0)
        assert dispatch.emissions == pytest.approx(80 * COAL + 60 * OIL)

    def test_never_worse_than_model2(self, toy5_dc):
        for variant in (COST, BALANCE, CO2):
            m3, _ = solve_model3(toy5_dc, variant)
            m2 = solve_model2(toy5_dc, variant)
            assert m3.objective_value <= m2.objective_value + 1e-6

    def test_zero_flexibility_reduces_to_model2(self, toy5_dc):
        rigid = designate_data_centers(load_network(DATA_DIR / "toy5"), [2, 4], 50.0, epsilon=0.0)
        for variant in (COST, CO2):
            dispatch, plan = solve_model3(rigid, variant)
            assert plan.delta_pd == pytest.approx([0.0, 0.0])
            assert not plan.transfers.any()
            assert dispatch.cost == pytest.approx(solve_model2(rigid, variant).cost)


# ===================================================================
# 4. Plan utilities
# ===================================================================


class TestPlanUtilities:
    def test_apply_shift(self, toy5_dc):
        plan = ShiftPlan(
            delta_pd=np.array([10.0, -10.0]),
            transfers=np.array([[0.0, 0.0], [10.0, 0.0]]),
            predicted_delta_pg=np.zeros(0),
            predicted_emission_change=0.0,
            predicted_cost_change=0.0,
        )
        shifted = apply_shift(toy5_dc, plan)
        demand = {load.id: load.demand for load in shifted.loads}
        assert demand[5] == pytest.approx(60.0)
        assert demand[6] == pytest.approx(40.0)
        assert shifted.total_demand == pytest.approx(toy5_dc.total_demand)

    def test_validate_flags_violations(self):
        fleet = FleetSpec.uniform((1, 2), epsilon=0.1, transfer_cap=5.0, shift_cost=0.0)
        plan = ShiftPlan(
            delta_pd=np.array([8.0, -6.0]),
            transfers=np.array([[0.0, 0.0], [8.0, 0.0]]),
            predicted_delta_pg=np.zeros(0),
            predicted_emission_change=0.0,
            predicted_cost_change=0.0,
        )
        problems = plan.validate(fleet, np.array([50.0, 50.0]))
        assert any("sum" in p for p in problems)
        assert any("net transfers" in p for p in problems)
        assert any("epsilon" in p for p in problems)
        assert any("transfer_cap" in p for p in problems)

    def test_plan_breaking_fleet_rows_is_a_solver_error(self, toy5_dc, base, signals_and_basis, monkeypatch):
        signals, basis = signals_and_basis
        monkeypatch.setattr(
            "app.services.shifting._plan_from",
            lambda block, z: (np.array([30.0, -30.0]), np.zeros((2, 2))),
        )
        with pytest.raises(NumericalError, match="fleet constraints"):
            solve_model1(toy5_dc, signals, base.lmp, BALANCE, basis=basis)

    def test_plan_to_dict(self, toy5_dc, base, signals_and_basis):
        signals, basis = signals_and_basis
        data = solve_model1(toy5_dc, signals, base.lmp, CO2, basis=basis).to_dict()
        assert data["signal"] == "marginal"
        assert data["variant"] == "f_co2"
        assert data["total_shifted"] == pytest.approx(10.0)

    def test_predicted_curtailment_change(self, toy5_dc):
        assert predicted_curtailment_change(toy5_dc, np.array([0.0, 10.0, -10.0, 0.0, 0.0])) == 0.0
        assert predicted_curtailment_change(toy5_dc, np.array([-5.0, 0.0, 10.0, 0.0, -5.0])) == 10.0
        assert predicted_curtailment_change(toy5_dc, np.zeros(0)) == 0.0

    def test_generation_change_table(self, toy5_dc):
        predicted = np.array([0.0, 10.0, -10.0, 0.0, 0.0])
        table = generation_change_table(toy5_dc, predicted, predicted.copy())
        assert list(table["generator"]) == [2, 3]
        assert not table["deviates"].any()

        actual = np.array([0.0, 10.0, -5.0, 0.0, -5.0])
        table = generation_change_table(toy5_dc, predicted, actual)
        assert list(table["generator"]) == [2, 3, 5]
        assert list(table["deviates"]) == [False, True, True]
        assert list(table.columns) == ["generator", "bus", "fuel", "predicted_mw", "actual_mw", "deviates"]


# ===================================================================
# 5. Exhaustive shift grid on the triangle network
# ===================================================================

# Data centers at buses 2 and 3, 50 MW each: with epsilon 0.2 every plan is
# (t, -t) for t in [-10, 10], so a fine grid over t contains the optimum.
SHIFT_GRID = np.linspace(-10.0, 10.0, 41)


def toy3_fleet(shift_cost: float = 0.0):
    return designate_data_centers(load_network(DATA_DIR / "toy3"), [2, 3], 50.0, epsilon=0.2, shift_cost=shift_cost)


class TestShiftGrid:
    @settings(max_examples=50, deadline=None)
    @given(
        lmce=st.lists(st.floats(min_value=0.0, max_value=1.5), min_size=3, max_size=3),
        lmp=st.lists(st.floats(min_value=-20.0, max_value=100.0), min_size=3, max_size=3),
        shift_cost=st.floats(min_value=0.0, max_value=20.0),
        rho=st.floats(min_value=0.0, max_value=100.0),
        kind=st.sampled_from(list(VariantKind)),
    )
    def test_model1_matches_grid_minimum(self, lmce, lmp, shift_cost, rho, kind):
        net = toy3_fleet(shift_cost)
        variant = ObjectiveVariant(kind, rho)
        plan = solve_model1(net, fake_signals(lmce, {1: 0.3, 2: 0.5}), np.array(lmp), variant)

        price = np.array(lmp)[1:] if variant.uses_electricity_cost else np.zeros(2)
        a = carbon_weight(variant) * np.array(lmce)[1:] + price
        grid = (a[0] - a[1]) * SHIFT_GRID + shift_cost * np.abs(SHIFT_GRID)
        assert plan.objective_value == pytest.approx(grid.min(), abs=1e-6)
        assert plan.delta_pd[0] == pytest.approx(-plan.delta_pd[1], abs=1e-9)

    def test_model3_beats_every_grid_shift(self):
        net = toy3_fleet()
        dispatch, plan = solve_model3(net, COST)
        best = min(
            solve_dcopf(net, demand_delta=np.array([0.0, t, -t])).cost
            for t in SHIFT_GRID
        )
        assert dispatch.cost <= best + 1e-6
        assert check_fleet_constraints(net, plan) == []
