"""Networks, cost functions, flow-rates and every cost/marginal evaluation.

Conventions
-----------
* Sources and terminals are indexed 0-based in the order given in the network.
* Aggregator and splitting exponents are floats; ``math.inf`` selects the exact
  limit mode (``z = max``, split equally among tied maxima).
* Quantities at an all-zero aggregate are the limits along the direction in
  which every terminal able to load that edge (or source) carries the same
  ``eps -> 0``.  Terminals that have no path through an edge never load it and
  are excluded from that direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .entropy import EntropyModel, SchemaError, is_member

LIMIT = math.inf
PATH_CAP = 10_000
# In limit mode, entries within this relative distance of the maximum count as tied.
LIMIT_TIE_RTOL = 1e-6


class NetworkError(SchemaError):
    """Structural problem with a network (unknown node, unreachable terminal, ...)."""


class PathLimitError(RuntimeError):
    """Simple-path enumeration exceeded the cap."""


class UnsupportedError(ValueError):
    """Requested operation is outside what the model supports."""


# ---------------------------------------------------------------------------
# cost functions and configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Monomial:
    """``c(x) = a * x**k`` with ``a > 0`` and ``k >= 1``."""

    a: float | Fraction
    k: float = 1.0

    def __post_init__(self):
        if not float(self.a) > 0:
            raise SchemaError(f"cost coefficient must be positive, got {self.a}")
        if not float(self.k) >= 1:
            raise SchemaError(f"cost degree must be >= 1, got {self.k}")

    def __call__(self, x):
        return float(self.a) * np.power(x, float(self.k))

    def derivative(self, x):
        k = float(self.k)
        return float(self.a) * k * np.power(x, k - 1)


def transform_cost(c: Monomial, num_terminals: int) -> Monomial:
    """``N_T * integral(c(x)/x)``: ``a x^k -> (N_T/k) a x^k``."""
    if not isinstance(c, Monomial):
        raise UnsupportedError("cost transforms are defined for monomials only")
    return Monomial(Fraction(c.a) * Fraction(num_terminals) / Fraction(c.k), c.k)


def inverse_transform_cost(c: Monomial, num_terminals: int) -> Monomial:
    """``x c'(x) / N_T``: ``a x^k -> (k/N_T) a x^k``."""
    if not isinstance(c, Monomial):
        raise UnsupportedError("cost transforms are defined for monomials only")
    return Monomial(Fraction(c.a) * Fraction(c.k) / Fraction(num_terminals), c.k)


@dataclass(frozen=True)
class AggregatorConfig:
    """L_p aggregation exponents for edges (``n``) and sources (``m``)."""

    n: float = 16.0
    m: float = 16.0

    def __post_init__(self):
        for name in ("n", "m"):
            v = getattr(self, name)
            if not v >= 1:
                raise SchemaError(f"aggregator exponent {name} must be >= 1, got {v}")

    @property
    def is_limit(self) -> bool:
        return math.isinf(self.n) or math.isinf(self.m)

    @classmethod
    def limit(cls) -> "AggregatorConfig":
        return cls(LIMIT, LIMIT)


@dataclass(frozen=True)
class SplittingConfig:
    edge: str = "power"
    source: str = "uniform"

    def __post_init__(self):
        if self.edge != "power":
            raise SchemaError(f"edge splitting rule must be 'power', got {self.edge!r}")
        if self.source not in ("uniform", "power"):
            raise SchemaError(f"source splitting rule must be 'uniform' or 'power', got {self.source!r}")


# ---------------------------------------------------------------------------
# graph
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    id: str
    tail: str
    head: str


@dataclass(frozen=True)
class Path:
    index: int
    source: int
    terminal: int
    edges: tuple[int, ...]
    id: str


@dataclass(frozen=True)
class Network:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    sources: tuple[str, ...]
    terminals: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "terminals", tuple(self.terminals))

    @property
    def num_sources(self) -> int:
        return len(self.sources)

    @property
    def num_terminals(self) -> int:
        return len(self.terminals)

    @cached_property
    def out_edges(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {v: [] for v in self.nodes}
        for i, e in enumerate(self.edges):
            out[e.tail].append(i)
        return out

    def validate(self) -> None:
        """Raise :class:`NetworkError` on the first broken structural invariant."""
        nodes = set(self.nodes)
        if len(nodes) != len(self.nodes):
            raise NetworkError("duplicate node names")
        ids = [e.id for e in self.edges]
        if len(set(ids)) != len(ids):
            raise NetworkError("duplicate edge ids")
        for e in self.edges:
            if e.tail not in nodes or e.head not in nodes:
                raise NetworkError(f"edge {e.id} references an unknown node")
        if not self.sources or not self.terminals:
            raise NetworkError("need at least one source and one terminal")
        for group in (self.sources, self.terminals):
            if len(set(group)) != len(group) or not set(group) <= nodes:
                raise NetworkError("sources/terminals must be distinct known nodes")
        if set(self.sources) & set(self.terminals):
            raise NetworkError("sources and terminals must be disjoint")
        for s in self.sources:
            seen = {s}
            stack = [s]
            while stack:
                v = stack.pop()
                for i in self.out_edges[v]:
                    w = self.edges[i].head
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            for t in self.terminals:
                if t not in seen:
                    raise NetworkError(f"terminal {t} is not reachable from source {s}")


def enumerate_paths(network: Network, s: str, t: str, cap: int = PATH_CAP) -> list[tuple[int, ...]]:
    """All simple directed ``s -> t`` paths as edge-index tuples, lexicographic order."""
    if s not in network.out_edges or t not in network.out_edges:
        raise NetworkError(f"unknown node in path query {s!r} -> {t!r}")
    out: list[tuple[int, ...]] = []
    stack: list[int] = []
    visited = {s}

    def dfs(v: str) -> None:
        for i in network.out_edges[v]:
            w = network.edges[i].head
            if w in visited:
                continue
            stack.append(i)
            if w == t:
                if len(out) >= cap:
                    raise PathLimitError(f"more than {cap} simple paths from {s} to {t}")
                out.append(tuple(stack))
            else:
                visited.add(w)
                dfs(w)
                visited.discard(w)
            stack.pop()

    if s != t:
        dfs(s)
    return out


# ---------------------------------------------------------------------------
# instance and flow-rate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Instance:
    network: Network
    edge_costs: tuple[Monomial, ...]
    source_costs: tuple[Monomial, ...]
    entropy: EntropyModel
    aggregator: AggregatorConfig = field(default_factory=AggregatorConfig)
    splitting: SplittingConfig = field(default_factory=SplittingConfig)

    def __post_init__(self):
        object.__setattr__(self, "edge_costs", tuple(self.edge_costs))
        object.__setattr__(self, "source_costs", tuple(self.source_costs))
        if len(self.edge_costs) != len(self.network.edges):
            raise SchemaError("need exactly one cost per edge")
        if len(self.source_costs) != self.network.num_sources:
            raise SchemaError("need exactly one cost per source")
        if self.entropy.num_sources != self.network.num_sources:
            raise SchemaError("entropy model and network disagree on the number of sources")

    @property
    def num_sources(self) -> int:
        return self.network.num_sources

    @property
    def num_terminals(self) -> int:
        return self.network.num_terminals

    @property
    def num_edges(self) -> int:
        return len(self.network.edges)

    @cached_property
    def paths(self) -> tuple[Path, ...]:
        """Paths ordered by terminal, then source, then edge sequence."""
        net = self.network
        out = []
        for ti, t in enumerate(net.terminals):
            for si, s in enumerate(net.sources):
                for edges in enumerate_paths(net, s, t):
                    pid = f"{s}->{t}:" + ">".join(net.edges[e].id for e in edges)
                    out.append(Path(len(out), si, ti, edges, pid))
        return tuple(out)

    @property
    def num_paths(self) -> int:
        return len(self.paths)

    @cached_property
    def path_index(self) -> dict[str, int]:
        return {p.id: p.index for p in self.paths}

    @cached_property
    def paths_by_pair(self) -> dict[tuple[int, int], list[int]]:
        out = {(s, t): [] for s in range(self.num_sources) for t in range(self.num_terminals)}
        for p in self.paths:
            out[p.source, p.terminal].append(p.index)
        return out

    @cached_property
    def incidence(self) -> np.ndarray:
        """Edge-by-path 0/1 matrix."""
        m = np.zeros((self.num_edges, self.num_paths))
        for p in self.paths:
            m[list(p.edges), p.index] = 1.0
        return m

    @cached_property
    def path_terminal(self) -> np.ndarray:
        return np.array([p.terminal for p in self.paths], dtype=int)

    @cached_property
    def path_source(self) -> np.ndarray:
        return np.array([p.source for p in self.paths], dtype=int)

    @cached_property
    def terminal_onehot(self) -> np.ndarray:
        oh = np.zeros((self.num_paths, self.num_terminals))
        oh[np.arange(self.num_paths), self.path_terminal] = 1.0
        return oh

    @cached_property
    def pair_onehot(self) -> np.ndarray:
        """Path-by-(source*N_T + terminal) 0/1 matrix."""
        oh = np.zeros((self.num_paths, self.num_sources * self.num_terminals))
        oh[np.arange(self.num_paths), self.path_source * self.num_terminals + self.path_terminal] = 1.0
        return oh

    @cached_property
    def edge_eligible(self) -> np.ndarray:
        """``[e, t]`` true when some path to terminal ``t`` uses edge ``e``."""
        return (self.incidence @ self.terminal_onehot) > 0

    @cached_property
    def edge_a(self) -> np.ndarray:
        return np.array([float(c.a) for c in self.edge_costs])

    @cached_property
    def edge_k(self) -> np.ndarray:
        return np.array([float(c.k) for c in self.edge_costs])

    @cached_property
    def source_a(self) -> np.ndarray:
        return np.array([float(c.a) for c in self.source_costs])

    @cached_property
    def source_k(self) -> np.ndarray:
        return np.array([float(c.k) for c in self.source_costs])

    def validate(self) -> None:
        from .entropy import validate as validate_entropy

        self.network.validate()
        rep = validate_entropy(self.entropy)
        if not rep.ok:
            raise SchemaError(rep.describe(self.entropy.num_sources))
        for s in range(self.num_sources):
            for t in range(self.num_terminals):
                if not self.paths_by_pair[s, t]:
                    raise NetworkError(f"no path from source {self.network.sources[s]} "
                                       f"to terminal {self.network.terminals[t]}")

    # -- derived instances ------------------------------------------------

    def with_aggregator(self, n: float | None = None, m: float | None = None) -> "Instance":
        agg = AggregatorConfig(self.aggregator.n if n is None else n, self.aggregator.m if m is None else m)
        return replace(self, aggregator=agg)

    def limit_mode(self) -> "Instance":
        return replace(self, aggregator=AggregatorConfig.limit())

    def with_edge_costs(self, costs: Sequence[Monomial]) -> "Instance":
        return replace(self, edge_costs=tuple(costs))

    def with_source_costs(self, costs: Sequence[Monomial]) -> "Instance":
        return replace(self, source_costs=tuple(costs))

    def transformed(self) -> "Instance":
        """Edge costs replaced by ``N_T * integral(c/x)``."""
        return self.with_edge_costs([transform_cost(c, self.num_terminals) for c in self.edge_costs])

    def inverse_transformed(self) -> "Instance":
        """Edge costs replaced by ``x c'(x) / N_T``."""
        return self.with_edge_costs([inverse_transform_cost(c, self.num_terminals) for c in self.edge_costs])

    def zero_flow_rate(self) -> "FlowRate":
        return FlowRate(np.zeros(self.num_paths), np.zeros((self.num_sources, self.num_terminals)))


@dataclass
class FlowRate:
    """Path flows (indexed like ``Instance.paths``) and the rate matrix ``R[s, t]``."""

    flows: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        self.flows = np.asarray(self.flows, dtype=float)
        self.rates = np.asarray(self.rates, dtype=float)
        if self.flows.ndim != 1 or self.rates.ndim != 2:
            raise SchemaError("flows must be a vector and rates a matrix")

    def copy(self) -> "FlowRate":
        return FlowRate(self.flows.copy(), self.rates.copy())

    @classmethod
    def from_mapping(cls, instance: Instance, flows: dict[str, float], rates) -> "FlowRate":
        f = np.zeros(instance.num_paths)
        for pid, val in flows.items():
            if pid not in instance.path_index:
                raise SchemaError(f"unknown path id {pid!r}")
            f[instance.path_index[pid]] = val
        return cls(f, np.asarray(rates, dtype=float))

    def flow_mapping(self, instance: Instance) -> dict[str, float]:
        return {p.id: float(self.flows[p.index]) for p in instance.paths}


def _check(instance: Instance, fr: FlowRate) -> None:
    if fr.flows.shape != (instance.num_paths,):
        raise SchemaError(f"flow vector has {fr.flows.shape[0]} entries, instance has {instance.num_paths} paths")
    if fr.rates.shape != (instance.num_sources, instance.num_terminals):
        raise SchemaError("rate matrix shape does not match the instance")


# ---------------------------------------------------------------------------
# aggregation and splitting
# ---------------------------------------------------------------------------


@dataclass
class Split:
    """Row-wise aggregate ``z``, splitting fractions, partial derivatives ``dz/dv_t``."""

    z: np.ndarray
    frac: np.ndarray
    partial: np.ndarray
    ties: np.ndarray  # number of tied maxima (limit mode) or eligible count (zero rows)
    p: float


def split(values: np.ndarray, eligible: np.ndarray, p: float) -> Split:
    """Aggregate each row of ``values`` with the L_p norm (or max when ``p`` is inf)."""
    v = np.asarray(values, dtype=float)
    elig = np.asarray(eligible, dtype=bool)
    rows, cols = v.shape
    M = v.max(axis=1) if cols else np.zeros(rows)
    zero = M <= 0
    n_elig = elig.sum(axis=1).astype(float)
    z = np.zeros(rows)
    frac = np.zeros_like(v)
    partial = np.zeros_like(v)
    ties = np.zeros(rows)

    zr = zero & (n_elig > 0)
    if np.any(zr):
        frac[zr] = elig[zr] / n_elig[zr, None]
        if math.isinf(p):
            partial[zr] = frac[zr]
        else:
            partial[zr] = frac[zr] * (n_elig[zr] ** (1.0 / p))[:, None]
        ties[zr] = n_elig[zr]

    nz = ~zero
    if np.any(nz):
        Mn = M[nz, None]
        if math.isinf(p):
            tied = v[nz] >= Mn * (1.0 - LIMIT_TIE_RTOL)
            k = tied.sum(axis=1)
            z[nz] = M[nz]
            frac[nz] = tied / k[:, None]
            partial[nz] = frac[nz]
            ties[nz] = k
        else:
            u = v[nz] / Mn
            up = u ** p
            S = up.sum(axis=1)
            z[nz] = M[nz] * S ** (1.0 / p)
            frac[nz] = up / S[:, None]
            partial[nz] = (u / S[:, None] ** (1.0 / p)) ** (p - 1.0)
            ties[nz] = 1.0
    return Split(z, frac, partial, ties, p)


def _pow_km1(z: np.ndarray, k: np.ndarray) -> np.ndarray:
    """``z**(k-1)`` with the zero-load limit (1 for linear costs, else 0)."""
    out = np.where(k == 1.0, 1.0, 0.0)
    pos = z > 0
    out = np.where(pos, np.power(np.where(pos, z, 1.0), k - 1.0), out)
    return out


@dataclass
class CostTerms:
    """Per-(row, terminal) marginal quantities for a block of monomial costs."""

    value: np.ndarray        # c(z) per row
    gradient: np.ndarray     # c'(z) dz/dv_t  (social-cost gradient)
    per_unit: np.ndarray     # c(z) Psi_t / v_t  (marginal cost share per unit)
    own_growth: np.ndarray   # d[c(z) Psi_t]/dv_t ~ own_growth * p + own_value as p -> inf
    own_value: np.ndarray
    share: np.ndarray        # Psi_t


def cost_terms(values: np.ndarray, eligible: np.ndarray, p: float, a: np.ndarray, k: np.ndarray) -> CostTerms:
    sp = split(values, eligible, p)
    a_ = a[:, None]
    k_ = k[:, None]
    zk1 = _pow_km1(sp.z, k)[:, None]
    cval = a * np.power(sp.z, k)
    cprime = a_ * k_ * zk1
    gradient = cprime * sp.partial
    per_unit = a_ * zk1 * sp.partial
    if math.isinf(p):
        fr = sp.frac
        growth = a_ * zk1 * fr * (1.0 - fr)
        logk = np.log(np.maximum(sp.ties, 1.0))[:, None]
        own = cprime * fr * fr + k_ * logk * a_ * zk1 * fr * (1.0 - fr)
    else:
        growth = np.zeros_like(gradient)
        own = cprime * sp.partial * sp.frac + p * a_ * zk1 * sp.partial * (1.0 - sp.frac)
    return CostTerms(cval, gradient, per_unit, growth, own, sp.frac)


# ---------------------------------------------------------------------------
# evaluations
# ---------------------------------------------------------------------------


def edge_loads(instance: Instance, fr: FlowRate) -> np.ndarray:
    """``x[e, t]``: total flow to terminal ``t`` on edge ``e``."""
    _check(instance, fr)
    return instance.incidence @ (fr.flows[:, None] * instance.terminal_onehot)


def edge_terms(instance: Instance, fr: FlowRate) -> CostTerms:
    x = edge_loads(instance, fr)
    return cost_terms(x, instance.edge_eligible, instance.aggregator.n, instance.edge_a, instance.edge_k)


def source_terms(instance: Instance, fr: FlowRate) -> CostTerms:
    _check(instance, fr)
    elig = np.ones_like(fr.rates, dtype=bool)
    return cost_terms(fr.rates, elig, instance.aggregator.m, instance.source_a, instance.source_k)


def edge_aggregates(instance: Instance, fr: FlowRate) -> np.ndarray:
    return split(edge_loads(instance, fr), instance.edge_eligible, instance.aggregator.n).z


def source_aggregates(instance: Instance, fr: FlowRate) -> np.ndarray:
    _check(instance, fr)
    return split(fr.rates, np.ones_like(fr.rates, dtype=bool), instance.aggregator.m).z


def social_cost(instance: Instance, fr: FlowRate) -> float:
    """``sum_e c_e(z_e) + sum_s d_s(y_s)``."""
    z = edge_aggregates(instance, fr)
    y = source_aggregates(instance, fr)
    return float(np.sum(instance.edge_a * z ** instance.edge_k) + np.sum(instance.source_a * y ** instance.source_k))


def source_shares(instance: Instance, fr: FlowRate) -> np.ndarray:
    """``Phi[s, t]``."""
    if instance.splitting.source == "uniform":
        return np.full(fr.rates.shape, 1.0 / instance.num_terminals)
    return source_terms(instance, fr).share


def terminal_costs(instance: Instance, fr: FlowRate) -> np.ndarray:
    """``C^(t) = sum_e c_e Psi_{e,t} + sum_s d_s Phi_{s,t}`` for every terminal."""
    et = edge_terms(instance, fr)
    st = source_terms(instance, fr)
    edge_part = et.value @ et.share
    return edge_part + st.value @ source_shares(instance, fr)


def terminal_cost(instance: Instance, fr: FlowRate, t: int) -> float:
    return float(terminal_costs(instance, fr)[t])


def terminal_edge_costs(instance: Instance, fr: FlowRate) -> np.ndarray:
    """``C_E^(t)`` for every terminal."""
    et = edge_terms(instance, fr)
    return et.value @ et.share


def terminal_source_costs(instance: Instance, fr: FlowRate) -> np.ndarray:
    """``C_S^(t)`` for every terminal."""
    return source_terms(instance, fr).value @ source_shares(instance, fr)


def _sum_over_path(instance: Instance, per_edge_terminal: np.ndarray) -> np.ndarray:
    """For every path ``P`` (to terminal ``t``): ``sum_{e in P} q[e, t]``."""
    q = per_edge_terminal[:, instance.path_terminal]  # (E, paths)
    return np.sum(instance.incidence * q, axis=0)


def differential_path_costs(instance: Instance, fr: FlowRate) -> np.ndarray:
    """``sum_{e in P} c_e'(z_e) dz_e/dx_{e,t}`` for every path: the social-cost gradient."""
    return _sum_over_path(instance, edge_terms(instance, fr).gradient)


def differential_path_cost(instance: Instance, fr: FlowRate, path: int) -> float:
    return float(differential_path_costs(instance, fr)[path])


def marginal_path_costs(instance: Instance, fr: FlowRate) -> np.ndarray:
    """``C_P(f) = sum_{e in P} c_e(z_e) Psi_{e,t} / x_{e,t}`` for every path."""
    return _sum_over_path(instance, edge_terms(instance, fr).per_unit)


def marginal_path_cost(instance: Instance, fr: FlowRate, path: int) -> float:
    return float(marginal_path_costs(instance, fr)[path])


def terminal_edge_derivatives(instance: Instance, fr: FlowRate) -> tuple[np.ndarray, np.ndarray]:
    """``dC_E^(t)/df_P`` per path as ``(growth, value)``.

    With a finite edge exponent ``growth`` is zero and ``value`` is the exact
    derivative.  In limit mode the derivative behaves like ``growth * n + value``.
    """
    et = edge_terms(instance, fr)
    return _sum_over_path(instance, et.own_growth), _sum_over_path(instance, et.own_value)


def source_gradient(instance: Instance, fr: FlowRate) -> np.ndarray:
    """``d_s'(y_s) dy_s/dR_{s,t}``: the social-cost gradient in the rates."""
    return source_terms(instance, fr).gradient


def source_marginal_expansion(instance: Instance, fr: FlowRate) -> tuple[np.ndarray, np.ndarray]:
    """``dC_S^(t)/dR_{s,t}`` as ``(growth, value)``, see :func:`terminal_edge_derivatives`."""
    st = source_terms(instance, fr)
    if instance.splitting.source == "uniform":
        return np.zeros_like(st.gradient), st.gradient / instance.num_terminals
    return st.own_growth, st.own_value


def source_marginals(instance: Instance, fr: FlowRate) -> np.ndarray:
    """``dC_S^(t)/dR_{s,t}``; infinite where the limit-mode derivative diverges."""
    growth, value = source_marginal_expansion(instance, fr)
    return np.where(growth > 0, np.inf, value)


def source_marginal(instance: Instance, fr: FlowRate, i: int, t: int) -> float:
    return float(source_marginals(instance, fr)[i, t])


def pair_flows(instance: Instance, fr: FlowRate) -> np.ndarray:
    """``sum_{P in P_{s,t}} f_P`` as an ``(N_S, N_T)`` matrix."""
    _check(instance, fr)
    return (fr.flows @ instance.pair_onehot).reshape(instance.num_sources, instance.num_terminals)


def is_feasible(instance: Instance, fr: FlowRate, tol: float = 1e-9) -> bool:
    _check(instance, fr)
    if not (np.all(np.isfinite(fr.flows)) and np.all(np.isfinite(fr.rates))):
        return False
    if fr.flows.min(initial=0.0) < -tol or fr.rates.min(initial=0.0) < -tol:
        return False
    if np.any(pair_flows(instance, fr) < fr.rates - tol):
        return False
    return all(is_member(instance.entropy, fr.rates[:, t], tol) for t in range(instance.num_terminals))
