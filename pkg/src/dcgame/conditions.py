"""The four-condition report shared by the optimality, Wardrop and Nash checkers.

All three condition systems have the same shape and differ only in which
per-path and per-rate "price" is compared:

1. ``sum_{P in P_{s,t}} f_P = R_{s,t}``
2. ``sum_s R_{s,t} = H(S)``
3. a used path ``P`` is no more expensive than any ``Q`` serving the same pair
4. for ``j`` in every tight set containing ``i``: ``price(P) + rate_price(i)
   <= price(Q) + rate_price(j)`` for used ``P in P_{i,t}``, any ``Q in P_{j,t}``

Prices are passed as ``(growth, value)`` pairs so that limit-mode derivatives,
which behave like ``growth * p + value`` as the exponent ``p`` grows, are
compared lexicographically.  With finite exponents ``growth`` is zero and the
comparison is plain.  Residuals are absolute violations of the inequalities
and absolute deviations of the equalities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .entropy import lower_bounds, subset_sums
from .network import FlowRate, Instance, pair_flows, social_cost, terminal_costs

FLOW_FLOOR = 1e-9
DEFAULT_CHECK_TOL = 1e-4
DEFAULT_TIGHT_TOL = 1e-7

CONDITION_NAMES = (
    "flow covers rate",
    "sum-rate equals joint entropy",
    "used paths are cheapest",
    "rate exchange over tight sets",
)


@dataclass
class EquilibriumReport:
    kind: str
    residuals: tuple[float, float, float, float]
    tol: float
    social_cost: float
    terminal_costs: tuple[float, ...]
    worst: tuple[str, str, str, str] = ("", "", "", "")
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> tuple[bool, bool, bool, bool]:
        return tuple(bool(r <= self.tol) for r in self.residuals)  # type: ignore[return-value]

    @property
    def ok(self) -> bool:
        return all(self.passed)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "tol": self.tol,
            "residuals": [_num(r) for r in self.residuals],
            "passed": list(self.passed),
            "worst": list(self.worst),
            "social_cost": self.social_cost,
            "terminal_costs": list(self.terminal_costs),
            "extras": dict(self.extras),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EquilibriumReport":
        return cls(
            kind=d["kind"],
            residuals=tuple(_unnum(r) for r in d["residuals"]),  # type: ignore[arg-type]
            tol=float(d["tol"]),
            social_cost=float(d["social_cost"]),
            terminal_costs=tuple(float(c) for c in d["terminal_costs"]),
            worst=tuple(d.get("worst", ("", "", "", ""))),  # type: ignore[arg-type]
            extras=dict(d.get("extras", {})),
        )


def _num(x: float):
    return "inf" if math.isinf(x) else float(x)


def _unnum(x) -> float:
    return math.inf if x == "inf" else float(x)


def _violation(vl: float, gl: float, vr: float, gr: float) -> float:
    """How much ``(gl, vl) <= (gr, vr)`` fails, growth terms dominating."""
    dg = gl - gr
    eps = 1e-9 * (1.0 + abs(gl) + abs(gr))
    if dg > eps:
        return math.inf
    if dg < -eps:
        return 0.0
    return max(0.0, vl - vr)


def tight_masks(instance: Instance, rates_t: np.ndarray, tol: float) -> list[int]:
    """Masks whose rate inequality is tight (or violated) at ``rates_t``."""
    s = subset_sums(rates_t) - lower_bounds(instance.entropy)
    return [m for m in range(1, len(s)) if s[m] <= tol]


def qualifying_pairs(instance: Instance, rates_t: np.ndarray, tol: float) -> list[tuple[int, int]]:
    """``(i, j)`` with ``j`` in every tight set containing ``i`` (``i = j`` included)."""
    n = instance.num_sources
    tight = tight_masks(instance, rates_t, tol)
    out = []
    for i in range(n):
        minimal = instance.entropy.full
        for m in tight:
            if m >> i & 1:
                minimal &= m
        for j in range(n):
            if i == j or minimal >> j & 1:
                out.append((i, j))
    return out


def evaluate(instance: Instance, fr: FlowRate, kind: str, path_growth: np.ndarray, path_value: np.ndarray,
             rate_growth: np.ndarray, rate_value: np.ndarray, tol: float,
             tight_tol: float = DEFAULT_TIGHT_TOL, flow_floor: float = FLOW_FLOOR) -> EquilibriumReport:
    worst = ["", "", "", ""]
    res = [0.0, 0.0, 0.0, 0.0]
    net = instance.network

    dev = np.abs(pair_flows(instance, fr) - fr.rates)
    res[0] = float(dev.max(initial=0.0))
    if dev.size:
        s, t = np.unravel_index(int(dev.argmax()), dev.shape)
        worst[0] = f"({net.sources[s]}, {net.terminals[t]})"

    dev2 = np.abs(fr.rates.sum(axis=0) - instance.entropy.total)
    res[1] = float(dev2.max(initial=0.0))
    if dev2.size:
        worst[1] = net.terminals[int(dev2.argmax())]

    used = fr.flows > flow_floor
    paths = instance.paths
    for (s, t), idx in instance.paths_by_pair.items():
        for p in idx:
            if not used[p]:
                continue
            for q in idx:
                v = _violation(path_value[p], path_growth[p], path_value[q], path_growth[q])
                if v > res[2]:
                    res[2] = v
                    worst[2] = f"{paths[p].id} vs {paths[q].id}"

    for t in range(instance.num_terminals):
        for i, j in qualifying_pairs(instance, fr.rates[:, t], tight_tol):
            for p in instance.paths_by_pair[i, t]:
                if not used[p]:
                    continue
                gl = path_growth[p] + rate_growth[i, t]
                vl = path_value[p] + rate_value[i, t]
                for q in instance.paths_by_pair[j, t]:
                    v = _violation(vl, gl, path_value[q] + rate_value[j, t], path_growth[q] + rate_growth[j, t])
                    if v > res[3]:
                        res[3] = v
                        worst[3] = f"{paths[p].id} vs {paths[q].id} (sources {net.sources[i]}, {net.sources[j]})"

    return EquilibriumReport(
        kind=kind,
        residuals=tuple(res),  # type: ignore[arg-type]
        tol=tol,
        social_cost=social_cost(instance, fr),
        terminal_costs=tuple(float(c) for c in terminal_costs(instance, fr)),
        worst=tuple(worst),  # type: ignore[arg-type]
    )
