"""Instance generators: the two worked examples and randomized families."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .entropy import EntropyModel
from .network import (
    AggregatorConfig,
    Edge,
    FlowRate,
    Instance,
    Monomial,
    Network,
    SplittingConfig,
)


@dataclass(frozen=True)
class Fig1Example:
    """Relay network whose equilibrium wastes the shared relay."""

    instance: Instance
    wardrop: FlowRate
    opt_candidate: FlowRate
    wardrop_cost: float
    opt_candidate_cost: float
    equilibrium_regime: bool  # 2 C1 h / N_T <= 1 + C2
    anarchy_regime: bool      # (1 + C2) / C1 < h (1 - 1/N_S)

    @property
    def analytic_ratio(self) -> float:
        return self.wardrop_cost / self.opt_candidate_cost


def make_fig1_instance(num_sources: int, num_terminals: int, h: float, c1: float, c2: float,
                       aggregator: AggregatorConfig | None = None) -> Fig1Example:
    """Sources ``s1..sN`` share a relay ``u -> v`` (cost ``c2 x``) to every terminal.

    Source ``s1`` additionally has a direct edge to each terminal.  All other
    edges cost ``x``, every source costs ``c1 y^2`` and the sources are copies of
    one source with entropy ``h``.
    """
    if num_sources < 1 or num_terminals < 1:
        raise ValueError("need at least one source and one terminal")
    if min(h, c1, c2) <= 0:
        raise ValueError("h, c1 and c2 must be positive")
    sources = tuple(f"s{i + 1}" for i in range(num_sources))
    terminals = tuple(f"t{j + 1}" for j in range(num_terminals))
    edges: list[Edge] = []
    costs: list[Monomial] = []
    for t in terminals:
        edges.append(Edge(f"s1-{t}", "s1", t))
        costs.append(Monomial(1.0, 1))
    for s in sources:
        edges.append(Edge(f"{s}-u", s, "u"))
        costs.append(Monomial(1.0, 1))
    edges.append(Edge("u-v", "u", "v"))
    costs.append(Monomial(float(c2), 1))
    for t in terminals:
        edges.append(Edge(f"v-{t}", "v", t))
        costs.append(Monomial(1.0, 1))
    net = Network(sources + ("u", "v") + terminals, tuple(edges), sources, terminals)
    inst = Instance(net, tuple(costs), tuple(Monomial(float(c1), 2) for _ in sources),
                    EntropyModel.identical(h, num_sources),
                    aggregator or AggregatorConfig.limit(), SplittingConfig())

    ward = inst.zero_flow_rate()
    ward.rates[0, :] = h
    opt = inst.zero_flow_rate()
    opt.rates[:, :] = h / num_sources
    for p in inst.paths:
        if len(p.edges) == 1:
            ward.flows[p.index] = h
        else:
            opt.flows[p.index] = h / num_sources

    return Fig1Example(
        instance=inst,
        wardrop=ward,
        opt_candidate=opt,
        wardrop_cost=num_terminals * h + c1 * h * h,
        opt_candidate_cost=h * (1 + c2 + num_terminals) + c1 * h * h / num_sources,
        equilibrium_regime=2 * c1 * h / num_terminals <= 1 + c2,
        anarchy_regime=(1 + c2) / c1 < h * (1 - 1 / num_sources),
    )


def make_fig2_instance(c1: float, c2: float, aggregator: AggregatorConfig | None = None,
                       source_rule: str = "uniform") -> Instance:
    """Two identical unit-entropy sources wired directly to two terminals.

    Edges cost ``x^3``; source ``i`` costs ``c_i y^3``.
    """
    if min(c1, c2) <= 0:
        raise ValueError("c1 and c2 must be positive")
    sources = ("s1", "s2")
    terminals = ("t1", "t2")
    edges = tuple(Edge(f"{s}-{t}", s, t) for s in sources for t in terminals)
    net = Network(sources + terminals, edges, sources, terminals)
    return Instance(net, tuple(Monomial(1.0, 3) for _ in edges),
                    (Monomial(float(c1), 3), Monomial(float(c2), 3)),
                    EntropyModel.identical(1.0, 2),
                    aggregator or AggregatorConfig(64.0, 64.0), SplittingConfig(source=source_rule))


def symmetric_fig2_point(instance: Instance, h: float) -> FlowRate:
    """Flow-rate on the two-source example with ``R_{1,t} = h``, ``R_{2,t} = 1 - h``."""
    fr = instance.zero_flow_rate()
    fr.rates[0, :] = h
    fr.rates[1, :] = 1.0 - h
    for p in instance.paths:
        fr.flows[p.index] = fr.rates[p.source, p.terminal]
    return fr


# ---------------------------------------------------------------------------
# randomized families
# ---------------------------------------------------------------------------


def random_entropy(rng: np.random.Generator, num_sources: int, alphabet: int = 2) -> EntropyModel:
    """Entropy table of a random joint pmf (so always a valid rank function)."""
    shape = (alphabet,) * num_sources
    pmf = rng.dirichlet(np.full(alphabet ** num_sources, 0.7)).reshape(shape)
    return EntropyModel.from_distribution(pmf)


def random_network(rng: np.random.Generator, num_sources: int, num_terminals: int,
                   num_relays: int | None = None, edge_prob: float = 0.5) -> Network:
    """Layered random DAG in which every terminal is reachable from every source."""
    if num_relays is None:
        num_relays = int(rng.integers(1, 3))
    sources = tuple(f"s{i + 1}" for i in range(num_sources))
    terminals = tuple(f"t{j + 1}" for j in range(num_terminals))
    relays = tuple(f"r{k + 1}" for k in range(num_relays))
    edges: list[tuple[str, str]] = []
    for s in sources:
        for r in relays:
            if rng.random() < edge_prob:
                edges.append((s, r))
    for a in range(num_relays):
        for b in range(a + 1, num_relays):
            if rng.random() < edge_prob:
                edges.append((relays[a], relays[b]))
    for r in relays:
        for t in terminals:
            if rng.random() < edge_prob:
                edges.append((r, t))
    for s in sources:
        for t in terminals:
            if rng.random() < edge_prob / 2:
                edges.append((s, t))

    def reaches(s: str, t: str) -> bool:
        seen, stack = {s}, [s]
        while stack:
            v = stack.pop()
            for a, b in edges:
                if a == v and b not in seen:
                    seen.add(b)
                    stack.append(b)
        return t in seen

    for s in sources:
        for t in terminals:
            if not reaches(s, t):
                edges.append((s, t))
    return Network(sources + relays + terminals,
                   tuple(Edge(f"e{i}", a, b) for i, (a, b) in enumerate(edges)), sources, terminals)


def random_instance(rng: np.random.Generator, num_sources: int, num_terminals: int, degree: float,
                    correlated: bool = True, source_degree: float | None = None,
                    coef_range: tuple[float, float] = (0.5, 2.0),
                    aggregator: AggregatorConfig | None = None) -> Instance:
    """Random network with monomial edge costs of uniform degree ``degree``.

    Source costs have degree ``source_degree`` (random in {1, 2, 3} if omitted).
    Correlated instances draw the entropy table from a random pmf; independent
    ones use per-source entropies in [0.5, 1.5].
    """
    net = random_network(rng, num_sources, num_terminals)
    lo, hi = coef_range
    edge_costs = tuple(Monomial(float(rng.uniform(lo, hi)), degree) for _ in net.edges)
    src_costs = tuple(
        Monomial(float(rng.uniform(lo, hi)),
                 float(source_degree if source_degree is not None else rng.integers(1, 4)))
        for _ in net.sources)
    if correlated:
        entropy = random_entropy(rng, num_sources)
    else:
        entropy = EntropyModel.independent(rng.uniform(0.5, 1.5, size=num_sources))
    return Instance(net, edge_costs, src_costs, entropy, aggregator or AggregatorConfig(), SplittingConfig())
