import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcgame.entropy import EntropyModel
from dcgame.equilibrium import (
    check_nash_conditions,
    check_wardrop_conditions,
    exchange_ratio,
    fd_terminal_edge_derivatives,
    solve_wardrop,
)
from dcgame.instances import make_fig1_instance, make_fig2_instance, random_instance, symmetric_fig2_point
from dcgame.network import (
    AggregatorConfig,
    Edge,
    FlowRate,
    Instance,
    Monomial,
    Network,
    UnsupportedError,
    social_cost,
    terminal_edge_derivatives,
)
from dcgame.optimum import check_opt_conditions, solve_opt

import oracles


def test_fig2_wardrop_rate():
    res = solve_wardrop(make_fig2_instance(4, 8))
    np.testing.assert_allclose(res.flow_rate.rates[0], 0.5695, atol=5e-3)


def test_power_source_rule_unsupported():
    with pytest.raises(UnsupportedError):
        solve_wardrop(make_fig2_instance(4, 8, source_rule="power"))


@pytest.mark.parametrize("seed", range(3))
def test_degree_equal_to_terminals_gives_opt(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 2, 2, 2.0)
    assert solve_wardrop(inst).cost == pytest.approx(solve_opt(inst).cost, rel=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_independent_sources_wardrop_cost_is_opt(seed):
    rng = np.random.default_rng(10 + seed)
    inst = random_instance(rng, 3, 3, 2.0, correlated=False)
    assert solve_wardrop(inst).cost == pytest.approx(solve_opt(inst).cost, rel=1e-6)


def test_fig1_equilibrium_passes():
    ex = make_fig1_instance(8, 8, 1.0, 64, 23)
    assert ex.equilibrium_regime
    assert check_wardrop_conditions(ex.instance, ex.wardrop, 1e-9).ok


@pytest.mark.parametrize("c1", [100.0, 192.0, 400.0])
def test_fig1_inflated_source_cost_breaks_condition_four(c1):
    nt, h, c2 = 8, 1.0, 23.0
    ex = make_fig1_instance(8, nt, h, c1, c2)
    assert not ex.equilibrium_regime
    rep = check_wardrop_conditions(ex.instance, ex.wardrop, 1e-9)
    assert rep.passed[:3] == (True, True, True)
    # source 1 pays 2 C1 h / N_T^2 per unit, the relay path costs (1 + C2)/N_T more
    assert rep.residuals[3] == pytest.approx((2 * c1 * h / nt - (1 + c2)) / nt)


def test_single_pair_single_path_passes():
    net = Network(("s", "t"), (Edge("e", "s", "t"),), ("s",), ("t",))
    inst = Instance(net, (Monomial(2.0, 2),), (Monomial(1.0, 2),), EntropyModel.identical(0.8, 1),
                    AggregatorConfig(16, 16))
    fr = FlowRate(np.array([0.8]), np.array([[0.8]]))
    assert check_wardrop_conditions(inst, fr, 1e-12).ok
    assert check_nash_conditions(inst, fr, 1e-12).ok


def test_nash_equals_opt_with_one_terminal(rng):
    inst = random_instance(rng, 3, 1, 3.0)
    fr = solve_opt(inst).flow_rate
    nash = check_nash_conditions(inst, fr, 1e-6)
    opt = check_opt_conditions(inst, fr, 1e-6)
    assert nash.ok and opt.ok
    np.testing.assert_allclose(nash.residuals, opt.residuals, atol=1e-12)


def test_wardrop_and_nash_coincide_for_linear_edges(rng):
    inst = random_instance(rng, 2, 3, 1.0)
    fr = solve_wardrop(inst).flow_rate
    w = check_wardrop_conditions(inst, fr)
    n = check_nash_conditions(inst, fr)
    np.testing.assert_allclose(w.residuals, n.residuals, atol=1e-12)


def test_power_rule_on_fig2_optimum_fails_nash():
    inst = make_fig2_instance(4, 8, source_rule="power")
    fr = solve_opt(inst).flow_rate
    judge = inst.limit_mode()
    rep = check_nash_conditions(judge, fr)
    assert not rep.passed[3]
    assert exchange_ratio(judge, fr, 0, 0, 1) == pytest.approx(0.8333, abs=5e-3)


def test_exchange_ratio_closed_form():
    # ratio of the divergent parts of the two source marginals: C1 h^2 / (C2 (1 - h)^2)
    inst = make_fig2_instance(4, 8, source_rule="power").limit_mode()
    h = oracles.fig2_closed_form(4, 8)[1]
    expect = 4 * h**2 / (8 * (1 - h) ** 2)
    assert exchange_ratio(inst, symmetric_fig2_point(inst, h), 0, 0, 1) == pytest.approx(expect, rel=1e-9)


@st.composite
def positive_points(draw):
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    nt = int(rng.integers(1, 4))
    agg = AggregatorConfig(*rng.choice([2.0, 3.0, 8.0], 2))
    inst = random_instance(rng, int(rng.integers(1, 3)), nt, float(rng.integers(1, 4)), aggregator=agg)
    fr = FlowRate(rng.uniform(0.05, 1, inst.num_paths), rng.uniform(0.05, 1, (inst.num_sources, nt)))
    return inst, fr


@given(positive_points())
def test_nash_derivatives_match_finite_differences(pt):
    inst, fr = pt
    _, analytic = terminal_edge_derivatives(inst, fr)
    fd = fd_terminal_edge_derivatives(inst, fr)
    np.testing.assert_allclose(fd, analytic, rtol=1e-5, atol=1e-8)


@given(positive_points())
def test_condition_three_bounded_by_condition_four(pt):
    inst, fr = pt
    for rep in (check_wardrop_conditions(inst, fr), check_nash_conditions(inst, fr), check_opt_conditions(inst, fr)):
        assert rep.residuals[2] <= rep.residuals[3] + 1e-12


@st.composite
def smooth_instances(draw, min_degree=1):
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    ns, nt = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    return random_instance(rng, ns, nt, float(rng.integers(min_degree, 4)))


@settings(max_examples=20)
@given(smooth_instances())
def test_wardrop_cost_equals_opt_of_transformed(inst):
    w = solve_wardrop(inst)
    o = solve_opt(inst.transformed())
    assert social_cost(inst.transformed(), w.flow_rate) == pytest.approx(o.cost, rel=1e-6)
    # dual route: the transformed optimum is judged by marginal path costs of the original
    assert check_wardrop_conditions(inst, o.flow_rate, 1e-5).ok
    assert w.flow_rate.rates.sum(axis=0) == pytest.approx(np.full(inst.num_terminals, inst.entropy.total), abs=1e-8)


@settings(max_examples=20)
@given(smooth_instances(min_degree=2))
def test_optimum_is_wardrop_for_inverse_transformed_costs(inst):
    fr = solve_opt(inst).flow_rate
    assert check_wardrop_conditions(inst.inverse_transformed(), fr, 1e-5).ok
