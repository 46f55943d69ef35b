import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcgame.anarchy import (
    build_family_instance,
    fig2_analytic,
    poa_upper_bound,
    price_of_anarchy,
    sweep,
)
from dcgame.instances import make_fig1_instance, make_fig2_instance, random_instance
from dcgame.network import AggregatorConfig, Monomial, UnsupportedError

import oracles


@pytest.mark.parametrize("nt,k,expect", [(4, 1, 4.0), (2, 2, 1.0), (2, 3, 1.5)])
def test_upper_bound_values(nt, k, expect):
    assert poa_upper_bound(nt, k) == expect


def test_upper_bound_rejects_bad_input():
    with pytest.raises(ValueError):
        poa_upper_bound(0, 1)


def test_fig2_analytic_published_values():
    a = fig2_analytic(4, 8)
    assert a.h == pytest.approx(0.5695, abs=5e-4)
    assert a.h_star == pytest.approx(0.5635, abs=5e-4)
    assert a.wardrop_cost == pytest.approx(1.9061, abs=5e-4)
    assert a.opt_cost == pytest.approx(1.9052, abs=5e-4)


def test_fig2_analytic_matches_hand_oracle():
    a = fig2_analytic(4, 8)
    np.testing.assert_allclose([a.h, a.h_star, a.wardrop_cost, a.opt_cost], oracles.fig2_closed_form(4, 8),
                               rtol=1e-12)


@given(st.floats(0.1, 50), st.floats(0.1, 50))
def test_fig2_fixed_point_residuals(c1, c2):
    a = fig2_analytic(c1, c2)
    assert abs(a.h / (1 - a.h) - math.sqrt((0.75 * c2 + 1) / (0.75 * c1 + 1))) <= 1e-12
    assert abs(a.h_star / (1 - a.h_star) - math.sqrt((0.75 * c2 + 1.5) / (0.75 * c1 + 1.5))) <= 1e-12


def test_fig2_symmetric_costs_give_half():
    a = fig2_analytic(3, 3)
    assert a.h == a.h_star == pytest.approx(0.5)


def test_fig2_numeric_matches_analytic():
    a = fig2_analytic(4, 8)
    res = price_of_anarchy(make_fig2_instance(4, 8, AggregatorConfig(64, 64)))
    assert res.wardrop.rates[0, 0] == pytest.approx(a.h, abs=1e-2)
    assert res.opt.rates[0, 0] == pytest.approx(a.h_star, abs=1e-2)
    assert res.ratio > 1


def test_fig1_regime_flags():
    ex = make_fig1_instance(8, 8, 1.0, 64, 23)
    assert ex.equilibrium_regime and ex.anarchy_regime
    assert (ex.wardrop_cost, ex.opt_candidate_cost) == pytest.approx((72, 40))
    assert ex.analytic_ratio == pytest.approx(1.8)
    assert not make_fig1_instance(8, 8, 1.0, 64, 200).anarchy_regime


def test_limit_mode_instance_is_refused():
    with pytest.raises(UnsupportedError):
        price_of_anarchy(make_fig2_instance(4, 8, AggregatorConfig.limit()))


def test_bad_evaluation_mode():
    with pytest.raises(ValueError):
        price_of_anarchy(make_fig2_instance(4, 8), evaluation="median")


@pytest.mark.parametrize("alpha", [0.01, 3.0, 250.0])
def test_ratio_invariant_under_cost_scaling(alpha, rng):
    inst = random_instance(rng, 2, 3, 2.0)
    scaled = inst.with_edge_costs([Monomial(alpha * c.a, c.k) for c in inst.edge_costs]).with_source_costs(
        [Monomial(alpha * c.a, c.k) for c in inst.source_costs])
    assert price_of_anarchy(scaled).ratio == pytest.approx(price_of_anarchy(inst).ratio, rel=1e-9)


@settings(max_examples=15)
@given(st.integers(0, 2**31 - 1))
def test_ratio_within_degree_bound(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, int(rng.integers(1, 4)), int(rng.integers(1, 4)), float(rng.integers(1, 4)))
    res = price_of_anarchy(inst)
    assert res.ratio <= res.upper_bound + 1e-3


@pytest.mark.parametrize("seed", range(4))
def test_independent_sources_ratio_one(seed):
    rng = np.random.default_rng(100 + seed)
    assert price_of_anarchy(random_instance(rng, 3, 2, 3.0, correlated=False)).ratio == pytest.approx(1, abs=1e-3)


def test_degree_equal_to_terminals_ratio_one(rng):
    assert price_of_anarchy(random_instance(rng, 3, 3, 3.0)).ratio == pytest.approx(1, abs=1e-9)


def test_linear_edges_flag_non_uniqueness(rng):
    assert price_of_anarchy(random_instance(rng, 2, 2, 1.0)).flags["wardrop_may_be_non_unique"]


def test_sweep_keeps_grid_order_and_records_errors():
    grid = [{"c1": 4, "c2": 8}, {"c1": -1, "c2": 8}, {"c1": 8, "c2": 4}]
    rows = sweep("fig2", grid, AggregatorConfig(16, 16))
    assert [r.params for r in rows] == grid
    assert rows[1].error and not rows[0].error and not rows[2].error
    assert math.isnan(rows[1].ratio)
    assert rows[0].ratio == pytest.approx(rows[2].ratio, rel=1e-6)


def test_sweep_parallel_matches_serial():
    grid = [{"seed": s, "num_sources": 2, "num_terminals": 2, "degree": 1} for s in range(4)]
    serial = sweep("random", grid, AggregatorConfig(8, 8))
    parallel = sweep("random", grid, AggregatorConfig(8, 8), jobs=2)
    assert [r.ratio for r in serial] == [r.ratio for r in parallel]


def test_unknown_family():
    with pytest.raises(ValueError):
        build_family_instance("fig3", {}, AggregatorConfig())


def test_fig1_family_sweep_exceeds_lower_bound():
    grid = [{"num_sources": nt, "num_terminals": nt, "h": 1.0, "c1": nt**2, "c2": 3 * nt - 1} for nt in (5, 6)]
    for row in sweep("fig1", grid, AggregatorConfig(32, 32)):
        nt = row.params["num_terminals"]
        assert (1 + nt) / 5 < row.ratio <= row.bound + 1e-3
