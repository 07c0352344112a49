"""
Tests for network ingestion, data-center designation, cost noise and
scenario configuration.

Run with: pytest tests/test_network_loader.py -v
"""

import shutil

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from app.config import DATA_DIR  # noqa: E402
from app.errors import (  # noqa: E402
    ConfigError,
    DanglingReferenceError,
    DisconnectedNetworkError,
    NetworkFileMissingError,
    NetworkSchemaError,
    UnknownBusError,
)
from app.models.network import Fuel  # noqa: E402
from app.models.scenario import ScenarioConfig  # noqa: E402
from app.models.results import SignalKind, VariantKind  # noqa: E402
from app.services.dcopf import solve_dcopf  # noqa: E402
from app.services.network_loader import (  # noqa: E402
    apply_cost_noise,
    build_network,
    designate_data_centers,
    load_network,
    serialize_network,
)

TOY3 = DATA_DIR / "toy3"
TOY5 = DATA_DIR / "toy5"
SCENARIOS = DATA_DIR / "scenarios"


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

@pytest.fixture
def toy3():
    return load_network(TOY3)


@pytest.fixture
def toy5():
    return load_network(TOY5)


@pytest.fixture
def toy3_copy(tmp_path):
    """Writable copy of the 3-bus fixture for corruption tests."""
    target = tmp_path / "toy3"
    shutil.copytree(TOY3, target)
    return target


# ===================================================================
# 1. Loading
# ===================================================================


class TestLoadNetwork:
    def test_toy3_counts(self, toy3):
        assert (toy3.n_bus, toy3.n_gen, toy3.n_line) == (3, 3, 3)
        assert len(toy3.loads) == 2
        assert toy3.total_demand == pytest.approx(150.0)

    def test_reference_bus_and_regions(self, toy3):
        assert toy3.reference_bus == 1
        assert toy3.region_map() == {1: 1, 2: 1, 3: 2}
        assert toy3.regions == [1, 2]

    def test_generator_fields(self, toy3):
        coal, gas, wind = toy3.generators
        assert coal.fuel is Fuel.COAL and coal.emission_rate == pytest.approx(0.6042)
        assert gas.fuel is Fuel.GAS and gas.cost == pytest.approx(30.0)
        assert wind.fuel is Fuel.WIND and wind.emission_rate == 0.0
        assert toy3.curtailable_mask.tolist() == [False, False, True]

    def test_no_data_centers_by_default(self, toy3):
        assert toy3.fleet.size == 0
        assert toy3.data_center_demand == 0.0

    def test_mapping_source(self):
        net = load_network({name: TOY3 / f"{name}.csv" for name in ("bus", "gen", "branch", "load")})
        assert net.n_bus == 3

    def test_ids_renumbered_in_file_order(self, toy3_copy):
        (toy3_copy / "bus.csv").write_text(
            "id,name,region,is_ref\n101,North,1,true\n102,Central,1,false\n103,South,2,false\n"
        )
        (toy3_copy / "gen.csv").write_text(
            "id,bus,fuel,cost,p_min,p_max,emission_rate\n"
            "7,101,coal,20,0,200,0.6042\n8,102,gas,30,0,200,0.9606\n9,103,wind,0,0,60,0\n"
        )
        (toy3_copy / "branch.csv").write_text(
            "id,from,to,susceptance,limit\n1,101,102,-10,100\n2,102,103,-10,100\n3,101,103,-10,100\n"
        )
        (toy3_copy / "load.csv").write_text("id,bus,demand\n1,102,100\n2,103,50\n")
        net = load_network(toy3_copy)
        assert [b.id for b in net.buses] == [1, 2, 3]
        assert [g.id for g in net.generators] == [1, 2, 3]
        assert [g.bus for g in net.generators] == [1, 2, 3]
        assert [b.name for b in net.buses] == ["North", "Central", "South"]

    def test_blank_emission_rate_takes_fuel_default(self, toy3_copy):
        (toy3_copy / "gen.csv").write_text(
            "id,bus,fuel,cost,p_min,p_max,emission_rate\n1,1,coal,20,0,200,\n2,2,gas,30,0,200,\n3,3,wind,0,0,60,\n"
        )
        net = load_network(toy3_copy)
        assert net.emission_rates.tolist() == pytest.approx([0.6042, 0.9606, 0.0])


class TestValidation:
    def test_missing_file(self, toy3_copy):
        (toy3_copy / "branch.csv").unlink()
        with pytest.raises(NetworkFileMissingError):
            load_network(toy3_copy)

    def test_missing_column(self, toy3_copy):
        (toy3_copy / "load.csv").write_text("id,bus\n1,2\n")
        with pytest.raises(NetworkSchemaError, match="demand"):
            load_network(toy3_copy)

    def test_generator_at_unknown_bus(self, toy3_copy):
        (toy3_copy / "gen.csv").write_text(
            "id,bus,fuel,cost,p_min,p_max,emission_rate\n1,9,coal,20,0,200,0.6042\n"
        )
        with pytest.raises(DanglingReferenceError, match="bus 9"):
            load_network(toy3_copy)

    def test_load_at_unknown_bus(self, toy3_copy):
        (toy3_copy / "load.csv").write_text("id,bus,demand\n1,4,10\n")
        with pytest.raises(DanglingReferenceError):
            load_network(toy3_copy)

    def test_disconnected(self, toy3_copy):
        (toy3_copy / "branch.csv").write_text("id,from,to,susceptance,limit\n1,1,2,-10,100\n")
        with pytest.raises(DisconnectedNetworkError):
            load_network(toy3_copy)

    def test_two_reference_buses(self, toy3_copy):
        (toy3_copy / "bus.csv").write_text(
            "id,name,region,is_ref\n1,a,1,true\n2,b,1,true\n3,c,2,false\n"
        )
        with pytest.raises(NetworkSchemaError, match="reference"):
            load_network(toy3_copy)

    def test_unknown_fuel(self, toy3_copy):
        (toy3_copy / "gen.csv").write_text(
            "id,bus,fuel,cost,p_min,p_max,emission_rate\n1,1,peat,20,0,200,0.9\n"
        )
        with pytest.raises(NetworkSchemaError, match="peat"):
            load_network(toy3_copy)

    def test_p_min_above_p_max(self, toy3_copy):
        (toy3_copy / "gen.csv").write_text(
            "id,bus,fuel,cost,p_min,p_max,emission_rate\n1,1,coal,20,50,10,0.6042\n"
        )
        with pytest.raises(NetworkSchemaError, match="p_min"):
            load_network(toy3_copy)

    def test_emitting_renewable_rejected(self, toy3_copy):
        (toy3_copy / "gen.csv").write_text(
            "id,bus,fuel,cost,p_min,p_max,emission_rate\n1,1,wind,0,0,60,0.5\n"
        )
        with pytest.raises(NetworkSchemaError):
            load_network(toy3_copy)

    def test_self_loop_line(self, toy3_copy):
        (toy3_copy / "branch.csv").write_text(
            "id,from,to,susceptance,limit\n1,1,1,-10,100\n2,1,2,-10,100\n3,2,3,-10,100\n"
        )
        with pytest.raises(NetworkSchemaError, match="itself"):
            load_network(toy3_copy)

    def test_negative_demand(self, toy3_copy):
        (toy3_copy / "load.csv").write_text("id,bus,demand\n1,2,-5\n")
        with pytest.raises(NetworkSchemaError, match="negative"):
            load_network(toy3_copy)

    def test_non_numeric_cost(self, toy3_copy):
        (toy3_copy / "gen.csv").write_text(
            "id,bus,fuel,cost,p_min,p_max,emission_rate\n1,1,coal,cheap,0,200,0.6042\n"
        )
        with pytest.raises(NetworkSchemaError, match="cost"):
            load_network(toy3_copy)


class TestSerialize:
    def test_round_trip(self, toy5, tmp_path):
        serialize_network(toy5, tmp_path / "out")
        assert load_network(tmp_path / "out") == toy5

    def test_round_trip_keeps_data_centers(self, toy5, tmp_path):
        net = designate_data_centers(toy5, [2, 4], 50.0)
        serialize_network(net, tmp_path / "out")
        again = load_network(tmp_path / "out")
        assert again.loads == net.loads
        assert again.fleet.load_ids == net.fleet.load_ids


# ===================================================================
# 2. Data centers
# ===================================================================


class TestDesignateDataCenters:
    def test_single_data_center(self, toy3):
        net = designate_data_centers(toy3, [2], 50.0)
        (dc,) = net.data_center_loads
        assert dc.bus == 2 and dc.demand == 50.0 and dc.is_data_center
        assert net.data_center_demand == 50.0
        assert net.fleet.size == 1

    def test_empty_list(self, toy3):
        net = designate_data_centers(toy3, [], 100.0)
        assert net.data_center_demand == 0.0
        assert net.fleet.size == 0

    def test_unknown_bus(self, toy3):
        with pytest.raises(UnknownBusError):
            designate_data_centers(toy3, [2, 7], 50.0)

    def test_non_data_center_load_preserved(self, toy5):
        net = designate_data_centers(toy5, [2, 4], 50.0)
        assert net.non_data_center_demand == toy5.total_demand
        assert net.total_demand == pytest.approx(toy5.total_demand + 100.0)

    def test_redesignation_clears_previous_fleet(self, toy5):
        first = designate_data_centers(toy5, [2, 4], 50.0)
        second = designate_data_centers(first, [3], 30.0)
        assert [load.bus for load in second.data_center_loads] == [3]
        assert second.data_center_demand == 30.0
        assert second.non_data_center_demand == toy5.total_demand

    def test_replace_existing(self, toy5):
        net = designate_data_centers(toy5, [2, 4], 50.0, replace_existing=True)
        # 270 MW stock load, 50 + 40 removed, 100 MW of data centers added.
        assert net.total_demand == pytest.approx(270.0 - 90.0 + 100.0)
        assert net.demand_by_bus()[[1, 3]].tolist() == [50.0, 50.0]

    def test_load_ids_stay_contiguous(self, toy5):
        net = designate_data_centers(toy5, [2, 4], 50.0, replace_existing=True)
        assert [load.id for load in net.loads] == list(range(1, len(net.loads) + 1))

    def test_fleet_defaults_and_arrays(self, toy5):
        net = designate_data_centers(toy5, [2, 4], 50.0, epsilon=[0.1, 0.3], transfer_cap=25.0)
        assert net.fleet.epsilon == (0.1, 0.3)
        assert net.fleet.transfer_cap_array.tolist() == [[25.0, 25.0], [25.0, 25.0]]
        assert net.fleet.pairs() == [(0, 1), (1, 0)]

    def test_bad_epsilon_shape(self, toy5):
        with pytest.raises(ValueError):
            designate_data_centers(toy5, [2, 4], 50.0, epsilon=[0.1, 0.2, 0.3])

    def test_with_load_changes(self, toy5):
        net = designate_data_centers(toy5, [2, 4], 50.0)
        a, b = net.fleet.load_ids
        moved = net.with_load_changes({a: 10.0, b: -10.0})
        assert moved.total_demand == pytest.approx(net.total_demand)
        assert [load.demand for load in moved.data_center_loads] == [60.0, 40.0]
        with pytest.raises(KeyError):
            net.with_load_changes({99: 1.0})


# ===================================================================
# 3. Cost noise
# ===================================================================


class TestCostNoise:
    def test_zero_magnitude_is_identity(self, toy5):
        assert apply_cost_noise(toy5, seed=3, magnitude=0.0) == toy5

    def test_negative_magnitude(self, toy5):
        with pytest.raises(ValueError):
            apply_cost_noise(toy5, seed=0, magnitude=-1.0)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_same_seed_same_network(self, seed):
        net = load_network(TOY5)
        assert apply_cost_noise(net, seed, 1e-3) == apply_cost_noise(net, seed, 1e-3)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_noise_within_bounds_and_strict(self, seed):
        net = load_network(TOY5)
        noisy = apply_cost_noise(net, seed, 1e-3)
        delta = noisy.costs - net.costs
        assert np.all(delta >= 0.0) and np.all(delta <= 1e-3)
        assert len(set(noisy.costs.tolist())) == net.n_gen

    def test_objective_moves_at_most_magnitude_times_generation(self, toy5):
        net = designate_data_centers(toy5, [2, 4], 50.0)
        base = solve_dcopf(net)
        noisy = solve_dcopf(apply_cost_noise(net, seed=11, magnitude=1e-3))
        assert abs(noisy.objective_value - base.objective_value) <= 1e-3 * base.p_g.sum() + 1e-9


# ===================================================================
# 4. Scenario configuration
# ===================================================================


class TestScenarioConfig:
    def test_toy5_scenario(self):
        config = ScenarioConfig.from_file(SCENARIOS / "toy5.env")
        assert config.network_dir == TOY5.resolve()
        assert config.data_center_buses == [2, 4]
        assert config.epsilon == 0.2
        assert config.objective is VariantKind.F_BALANCE
        assert config.signal is SignalKind.MARGINAL

    def test_overrides(self):
        config = ScenarioConfig.from_file(SCENARIOS / "toy5.env", noise_seed=9, network_dir=TOY3)
        assert config.noise_seed == 9
        assert config.network_dir == TOY3

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.env"
        path.write_text(f"NETWORK_DIR={TOY3}\nCARBON_TAX=5\n")
        with pytest.raises(ConfigError, match="CARBON_TAX"):
            ScenarioConfig.from_file(path)

    def test_epsilon_out_of_range(self, tmp_path):
        path = tmp_path / "bad.env"
        path.write_text(f"NETWORK_DIR={TOY3}\nEPSILON=1.5\n")
        with pytest.raises(ConfigError, match="EPSILON"):
            ScenarioConfig.from_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_file(tmp_path / "nope.env")

    def test_hash_is_stable_and_sensitive(self):
        a = ScenarioConfig.from_file(SCENARIOS / "toy5.env")
        b = ScenarioConfig.from_file(SCENARIOS / "toy5.env")
        c = ScenarioConfig.from_file(SCENARIOS / "toy5.env", noise_seed=1)
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()
        assert len(a.config_hash()) == 64

    def test_hash_independent_of_checkout_location(self, tmp_path):
        hashes = []
        for checkout in ("first", "second"):
            root = tmp_path / checkout
            shutil.copytree(TOY5, root / "toy5")
            (root / "scenarios").mkdir()
            shutil.copy(SCENARIOS / "toy5.env", root / "scenarios" / "toy5.env")
            config = ScenarioConfig.from_file(root / "scenarios" / "toy5.env")
            assert config.portable_network_dir() == "../toy5"
            hashes.append(config.config_hash())
        assert hashes[0] == hashes[1]
        assert hashes[0] == ScenarioConfig.from_file(SCENARIOS / "toy5.env").config_hash()

    def test_build_network(self):
        net = build_network(ScenarioConfig.from_file(SCENARIOS / "toy5.env"))
        assert net.fleet.size == 2
        assert net.fleet.epsilon == (0.2, 0.2)
        assert net.total_demand == pytest.approx(370.0)
