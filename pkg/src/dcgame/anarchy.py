"""Price of anarchy: measurement, the degree bound, closed forms and parameter sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import solve_wardrop
from .instances import (
    Fig1Example,
    make_fig1_instance,
    make_fig2_instance,
    random_instance,
    symmetric_fig2_point,
)
from .network import AggregatorConfig, FlowRate, Instance, social_cost
from .optimum import SolverConfig, solve_opt

__all__ = [
    "Fig1Example", "Fig2Analytic", "PoaResult", "SweepRow", "build_family_instance", "fig2_analytic",
    "make_fig1_instance", "make_fig2_instance", "poa_upper_bound", "price_of_anarchy", "sweep",
]


def poa_upper_bound(num_terminals: int, k: float) -> float:
    """``max(N_T / k, k / N_T)`` for edge costs of uniform degree ``k``."""
    if num_terminals < 1 or k < 1:
        raise ValueError("need N_T >= 1 and k >= 1")
    return max(num_terminals / k, k / num_terminals)


def uniform_edge_degree(instance: Instance) -> float | None:
    ks = {float(c.k) for c in instance.edge_costs}
    return ks.pop() if len(ks) == 1 else None


@dataclass
class PoaResult:
    wardrop_cost: float
    opt_cost: float
    upper_bound: float | None
    descriptor: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    wardrop: FlowRate | None = None
    opt: FlowRate | None = None

    @property
    def ratio(self) -> float:
        return self.wardrop_cost / self.opt_cost if self.opt_cost > 0 else math.nan


def price_of_anarchy(instance: Instance, config: SolverConfig | None = None,
                     evaluation: str = "limit", descriptor: dict | None = None) -> PoaResult:
    """Ratio of the social costs of the computed Wardrop and optimal flow-rates.

    Both points are solved at the instance's finite exponents.  With
    ``evaluation="limit"`` their costs are evaluated with exact maxima;
    ``"native"`` keeps the instance's exponents.
    """
    if evaluation not in ("limit", "native"):
        raise ValueError("evaluation must be 'limit' or 'native'")
    ward = solve_wardrop(instance, config)
    opt = solve_opt(instance, config)
    judge = instance.limit_mode() if evaluation == "limit" else instance
    k = uniform_edge_degree(instance)
    return PoaResult(
        wardrop_cost=social_cost(judge, ward.flow_rate),
        opt_cost=social_cost(judge, opt.flow_rate),
        upper_bound=poa_upper_bound(instance.num_terminals, k) if k is not None else None,
        descriptor=dict(descriptor or {}),
        flags={
            "wardrop_converged": ward.converged,
            "opt_converged": opt.converged,
            "wardrop_gap": ward.gap,
            "opt_gap": opt.gap,
            # linear edge costs leave the transformed program non-strictly convex
            "wardrop_may_be_non_unique": any(float(c.k) == 1.0 for c in instance.edge_costs),
            "evaluation": evaluation,
        },
        wardrop=ward.flow_rate,
        opt=opt.flow_rate,
    )


@dataclass(frozen=True)
class Fig2Analytic:
    h: float
    h_star: float
    wardrop_cost: float
    opt_cost: float

    @property
    def ratio(self) -> float:
        return self.wardrop_cost / self.opt_cost


def fig2_analytic(c1: float, c2: float) -> Fig2Analytic:
    """Closed-form equilibrium and optimum of the two-source, two-terminal example.

    ``h`` balances ``(3/4) c1 h^2 + h^2`` against the same expression for source 2;
    ``h*`` balances ``(3/4) c1 h^2 + (3/2) h^2``.  Costs use exact maxima.
    """
    if min(c1, c2) <= 0:
        raise ValueError("c1 and c2 must be positive")
    r = math.sqrt((0.75 * c2 + 1.0) / (0.75 * c1 + 1.0))
    r_star = math.sqrt((0.75 * c2 + 1.5) / (0.75 * c1 + 1.5))
    h = r / (1.0 + r)
    h_star = r_star / (1.0 + r_star)
    inst = make_fig2_instance(c1, c2, AggregatorConfig.limit())
    return Fig2Analytic(h, h_star,
                        social_cost(inst, symmetric_fig2_point(inst, h)),
                        social_cost(inst, symmetric_fig2_point(inst, h_star)))


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

FAMILIES = ("fig1", "fig2", "random")


@dataclass
class SweepRow:
    family: str
    params: dict
    wardrop_cost: float = math.nan
    opt_cost: float = math.nan
    ratio: float = math.nan
    bound: float | None = None
    flags: dict = field(default_factory=dict)
    error: str = ""


def build_family_instance(family: str, params: dict, aggregator: AggregatorConfig) -> Instance:
    """Instance for one grid point of a named family.

    ``fig1``: ``num_sources, num_terminals, h, c1, c2``; ``fig2``: ``c1, c2``;
    ``random``: ``seed, num_sources, num_terminals, degree, correlated``.
    """
    if family == "fig1":
        return make_fig1_instance(int(params["num_sources"]), int(params["num_terminals"]), float(params["h"]),
                                  float(params["c1"]), float(params["c2"]), aggregator).instance
    if family == "fig2":
        return make_fig2_instance(float(params["c1"]), float(params["c2"]), aggregator)
    if family == "random":
        rng = np.random.default_rng(int(params["seed"]))
        return random_instance(rng, int(params["num_sources"]), int(params["num_terminals"]),
                               float(params["degree"]), bool(params.get("correlated", True)),
                               aggregator=aggregator)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def _row(args) -> SweepRow:
    family, params, aggregator, config, evaluation = args
    row = SweepRow(family, dict(params))
    try:
        inst = build_family_instance(family, params, aggregator)
        res = price_of_anarchy(inst, config, evaluation)
        row.wardrop_cost, row.opt_cost, row.ratio = res.wardrop_cost, res.opt_cost, res.ratio
        row.bound = res.upper_bound
        row.flags = res.flags
    except Exception as exc:  # recorded in-row; the sweep carries on
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def sweep(family: str, grid: list[dict], aggregator: AggregatorConfig | None = None,
          config: SolverConfig | None = None, evaluation: str = "limit", jobs: int = 1) -> list[SweepRow]:
    """Price of anarchy over a parameter grid, rows in grid order."""
    aggregator = aggregator or AggregatorConfig()
    tasks = [(family, p, aggregator, config, evaluation) for p in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_row, tasks))
    return [_row(t) for t in tasks]
