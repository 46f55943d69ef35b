"""Wardrop flow-rates by cost transformation, and the Wardrop/Nash condition checkers."""

from __future__ import annotations

import math

import numpy as np

from .conditions import DEFAULT_CHECK_TOL, DEFAULT_TIGHT_TOL, EquilibriumReport, evaluate
from .network import (
    FlowRate,
    Instance,
    UnsupportedError,
    marginal_path_costs,
    source_marginal_expansion,
    terminal_edge_costs,
    terminal_edge_derivatives,
)
from .optimum import SolveResult, SolverConfig, solve_opt


def solve_wardrop(instance: Instance, config: SolverConfig | None = None) -> SolveResult:
    """Wardrop flow-rate = social optimum of the instance with edge costs ``N_T * integral(c/x)``.

    The returned ``cost`` field is the social cost of the *original* instance.
    """
    if instance.splitting.source != "uniform":
        raise UnsupportedError("the cost transformation needs uniform source splitting")
    res = solve_opt(instance.transformed(), config)
    from .network import social_cost

    res.cost = social_cost(instance, res.flow_rate)
    return res


def check_wardrop_conditions(instance: Instance, fr: FlowRate, tol: float = DEFAULT_CHECK_TOL,
                             tight_tol: float = DEFAULT_TIGHT_TOL) -> EquilibriumReport:
    """Residuals of the four Wardrop conditions (marginal path costs ``C_P``)."""
    cp = marginal_path_costs(instance, fr)
    rg, rv = source_marginal_expansion(instance, fr)
    return evaluate(instance, fr, "wardrop", np.zeros_like(cp), cp, rg, rv, tol, tight_tol)


def fd_terminal_edge_derivatives(instance: Instance, fr: FlowRate, rel_step: float = 1e-6) -> np.ndarray:
    """Central differences of ``C_E^(t)`` in ``f_P`` (``t`` the terminal of ``P``).

    Paths carrying less than the step are differenced one-sidedly from zero.
    """
    if instance.aggregator.is_limit:
        raise UnsupportedError("finite differences need a finite edge exponent")
    scale = max(float(np.abs(fr.flows).max(initial=0.0)), 1.0)
    h = rel_step * scale
    out = np.zeros(instance.num_paths)
    for p in instance.paths:
        t = p.terminal
        up = fr.copy()
        up.flows[p.index] += h
        lo = fr.copy()
        if fr.flows[p.index] >= h:
            lo.flows[p.index] -= h
            step = 2 * h
        else:
            step = h
        out[p.index] = (terminal_edge_costs(instance, up)[t] - terminal_edge_costs(instance, lo)[t]) / step
    return out


def check_nash_conditions(instance: Instance, fr: FlowRate, tol: float = DEFAULT_CHECK_TOL,
                          tight_tol: float = DEFAULT_TIGHT_TOL, method: str = "analytic") -> EquilibriumReport:
    """Residuals of the four Nash conditions (exact derivatives of each terminal's edge cost)."""
    if method == "analytic":
        pg, pv = terminal_edge_derivatives(instance, fr)
    elif method == "fd":
        pv = fd_terminal_edge_derivatives(instance, fr)
        pg = np.zeros_like(pv)
    else:
        raise ValueError("method must be 'analytic' or 'fd'")
    rg, rv = source_marginal_expansion(instance, fr)
    rep = evaluate(instance, fr, "nash", pg, pv, rg, rv, tol, tight_tol)
    rep.extras["derivatives"] = method
    return rep


def exchange_ratio(instance: Instance, fr: FlowRate, t: int, i: int, j: int) -> float:
    """``(dC_E/df_P + dC_S/dR_i) / (dC_E/df_Q + dC_S/dR_j)`` for the cheapest ``P``, ``Q``.

    For a terminal indifferent between sources ``i`` and ``j`` this equals 1.
    When both sides diverge with the exponent (limit mode) the ratio of the
    divergent parts is returned.
    """
    pg, pv = terminal_edge_derivatives(instance, fr)
    rg, rv = source_marginal_expansion(instance, fr)

    def side(s: int) -> tuple[float, float]:
        idx = instance.paths_by_pair[s, t]
        best = min(idx, key=lambda p: (pg[p], pv[p]))
        return pg[best] + rg[s, t], pv[best] + rv[s, t]

    gi, vi = side(i)
    gj, vj = side(j)
    if gi > 0 or gj > 0:
        return gi / gj if gj > 0 else math.inf
    return vi / vj if vj != 0 else math.inf
