import math

import pytest

from dqsim.costs import MODELS, cost_table, cost_tables, params_from_hamiltonian, taylor_factor
from dqsim.errors import ConfigError, DomainError
from dqsim.pauli import cluster, contiguous_partition, parse_pauli_sum

PARAMS = {
    "gamma": 4,
    "edges": 6,
    "alpha": 3.0,
    "alpha_comm": 5.0,
    "n": 2,
    "k": 2,
    "induced_norm": 1.5,
    "t": 4.0,
    "epsilon": 1e-2,
    "p": 2,
}


def test_nearest_neighbour_product_formula_cost():
    table = cost_table("nn", {"gamma": 8, "alpha": 1.0, "t": 4.0, "epsilon": 1e-2, "p": 2})
    dpf = table[table["protocol"] == "dpf"].iloc[0]
    assert dpf["predicted_cost"] == pytest.approx(1810.19, abs=0.01)
    assert dpf["driver"] == "gamma"


def test_single_node_costs_nothing():
    for model in MODELS:
        table = cost_table(model, {**PARAMS, "gamma": 1})
        assert (table["predicted_cost"] == 0.0).all()


def test_klocal_formula_mentions_locality_cap():
    table = cost_table("klocal", PARAMS)
    assert table["formula"].str.contains("min(k, Gamma)", regex=False).any()
    assert list(table["protocol"]) == ["dpf", "dts", "dqsp"]


@pytest.mark.parametrize("model", MODELS)
def test_doubling_ratio(model):
    table = cost_table(model, PARAMS)
    for _, row in table.iterrows():
        doubled = cost_table(model, {**PARAMS, row["driver"]: PARAMS[row["driver"]] * 2})
        after = doubled[doubled["protocol"] == row["protocol"]].iloc[0]["predicted_cost"]
        assert after / row["predicted_cost"] == pytest.approx(row["doubling_ratio"], rel=1e-9)


def test_taylor_factor():
    assert taylor_factor(1.0) == taylor_factor(math.e**math.e)
    assert taylor_factor(1e6) == pytest.approx(math.log(1e6) / math.log(math.log(1e6)))


def test_parameter_errors():
    with pytest.raises(ConfigError, match="Unknown cost model"):
        cost_table("dense", PARAMS)
    with pytest.raises(ConfigError, match="needs parameters"):
        cost_table("general", {"gamma": 2})
    with pytest.raises(DomainError):
        cost_table("nn", {**PARAMS, "epsilon": 0.0})


def test_params_from_hamiltonian():
    ch = cluster(parse_pauli_sum("1 XXI\n1 IZZ"), contiguous_partition(3, 2))
    params = params_from_hamiltonian(ch, 1.0, 1e-2)
    assert (params["gamma"], params["edges"], params["k"]) == (2, 1, 2)
    assert params["alpha"] == 2.0
    assert params["alpha_comm"] == pytest.approx(4.0)
    assert params["n"] == 1.5
    assert len(cost_tables(MODELS, params)) == 9
