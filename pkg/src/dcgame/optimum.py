"""Social optimum: Frank-Wolfe solver, optimality checker and KKT certificates."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .conditions import DEFAULT_CHECK_TOL, DEFAULT_TIGHT_TOL, EquilibriumReport, evaluate
from .entropy import linear_minimize, lower_bounds, subset_sums
from .network import (
    FlowRate,
    Instance,
    NetworkError,
    UnsupportedError,
    differential_path_costs,
    pair_flows,
    social_cost,
    source_gradient,
)

STEP_RULES = ("corrective", "pairwise", "line_search", "diminishing")


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 500
    gap_tolerance: float = 1e-8
    step_rule: str = "corrective"
    initial_point_rule: str = "oracle_at_zero"
    time_limit: float | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.gap_tolerance > 0:
            raise ValueError("gap_tolerance must be positive")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}")
        if self.initial_point_rule != "oracle_at_zero":
            raise ValueError("the only initial point rule is 'oracle_at_zero'")


@dataclass
class SolveResult:
    flow_rate: FlowRate
    cost: float
    gap: float
    iterations: int
    converged: bool
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    seconds: float = 0.0


def gradient(instance: Instance, fr: FlowRate) -> tuple[np.ndarray, np.ndarray]:
    """Social-cost gradient in path flows and in rates."""
    return differential_path_costs(instance, fr), source_gradient(instance, fr)


def linear_oracle(instance: Instance, grad_flows: np.ndarray, grad_rates: np.ndarray) -> FlowRate:
    """Vertex of the feasible set minimising the linearised cost.

    Terminals decouple.  For each one, every source's cheapest path sets an
    effective price for its rate, the greedy rate vertex follows, and each
    source's whole rate goes on its cheapest path (lowest index on ties).
    """
    grad_flows = np.asarray(grad_flows, dtype=float)
    grad_rates = np.asarray(grad_rates, dtype=float)
    if not (np.all(np.isfinite(grad_flows)) and np.all(np.isfinite(grad_rates))):
        raise ValueError("gradient must be finite")
    flows = np.zeros(instance.num_paths)
    rates = np.zeros((instance.num_sources, instance.num_terminals))
    for t in range(instance.num_terminals):
        best = []
        w = np.zeros(instance.num_sources)
        for s in range(instance.num_sources):
            idx = instance.paths_by_pair[s, t]
            if not idx:
                raise NetworkError(f"no path from source {instance.network.sources[s]} "
                                   f"to terminal {instance.network.terminals[t]}")
            k = int(np.argmin(grad_flows[idx]))
            best.append(idx[k])
            w[s] = grad_flows[idx[k]] + grad_rates[s, t]
        r = linear_minimize(instance.entropy, np.maximum(w, 0.0))
        rates[:, t] = r
        for s in range(instance.num_sources):
            flows[best[s]] = r[s]
    return FlowRate(flows, rates)


def _pack(fr: FlowRate) -> np.ndarray:
    return np.concatenate([fr.flows, fr.rates.ravel()])


def _unpack(instance: Instance, x: np.ndarray) -> FlowRate:
    n = instance.num_paths
    return FlowRate(x[:n], x[n:].reshape(instance.num_sources, instance.num_terminals))


def _terminal_part(instance: Instance, v: FlowRate, t: int) -> np.ndarray:
    """The slice of vertex ``v`` that belongs to terminal ``t``."""
    f = np.where(instance.path_terminal == t, v.flows, 0.0)
    r = np.zeros_like(v.rates)
    r[:, t] = v.rates[:, t]
    return np.concatenate([f, r.ravel()])


class _Active:
    """Per-terminal convex combinations of oracle vertices."""

    def __init__(self, instance: Instance, v0: FlowRate):
        self.instance = instance
        self.cols: list[list[np.ndarray]] = [[_terminal_part(instance, v0, t)] for t in range(instance.num_terminals)]
        self.weights: list[np.ndarray] = [np.ones(1) for _ in range(instance.num_terminals)]

    def add(self, v: FlowRate) -> None:
        for t in range(self.instance.num_terminals):
            col = _terminal_part(self.instance, v, t)
            for c in self.cols[t]:
                if np.array_equal(c, col):
                    break
            else:
                self.cols[t].append(col)
                self.weights[t] = np.append(self.weights[t], 0.0)

    def matrix(self) -> tuple[np.ndarray, list[slice]]:
        blocks, slices, start = [], [], 0
        for cols in self.cols:
            blocks.extend(cols)
            slices.append(slice(start, start + len(cols)))
            start += len(cols)
        return np.array(blocks).T, slices

    def point(self) -> np.ndarray:
        A, _ = self.matrix()
        return A @ np.concatenate(self.weights)

    def pairwise_direction(self, g: np.ndarray, v: FlowRate):
        """Shift weight from each terminal's worst active vertex to its oracle vertex."""
        d = np.zeros_like(g)
        gamma_max = math.inf
        moves = []
        for t in range(self.instance.num_terminals):
            col_v = _terminal_part(self.instance, v, t)
            iv = next(i for i, c in enumerate(self.cols[t]) if np.array_equal(c, col_v))
            scores = [float(g @ c) if w > 0 else -math.inf for c, w in zip(self.cols[t], self.weights[t])]
            ia = int(np.argmax(scores))
            if ia == iv:
                continue
            d += col_v - self.cols[t][ia]
            gamma_max = min(gamma_max, float(self.weights[t][ia]))
            moves.append((t, ia, iv))
        return d, (0.0 if math.isinf(gamma_max) else gamma_max), moves

    def apply(self, moves, gamma: float) -> None:
        for t, ia, iv in moves:
            w = self.weights[t]
            w[ia] -= gamma
            w[iv] += gamma
            if w[ia] <= 1e-15:
                w[ia] = 0.0
        for t in range(len(self.cols)):
            keep = self.weights[t] > 0
            self.cols[t] = [c for c, k in zip(self.cols[t], keep) if k]
            self.weights[t] = self.weights[t][keep]


def _reoptimize_weights(instance: Instance, active: _Active, scale: float) -> None:
    """Minimise the cost over the convex hull of the active vertices (SLSQP on the weights)."""
    A, slices = active.matrix()
    w0 = np.concatenate(active.weights)

    def fun(w):
        fr = _unpack(instance, A @ w)
        gf, gr = gradient(instance, fr)
        return social_cost(instance, fr) / scale, (A.T @ np.concatenate([gf, gr.ravel()])) / scale

    cons = []
    for sl in slices:
        row = np.zeros(len(w0))
        row[sl] = 1.0
        cons.append({"type": "eq", "fun": lambda w, row=row: row @ w - 1.0, "jac": lambda w, row=row: row})
    res = minimize(fun, w0, jac=True, method="SLSQP", bounds=[(0.0, 1.0)] * len(w0),
                   constraints=cons, options={"ftol": 1e-15, "maxiter": 100})
    w = np.clip(res.x, 0.0, None)
    weights = [w[sl] / w[sl].sum() if w[sl].sum() > 0 else active.weights[i] for i, sl in enumerate(slices)]
    if fun(np.concatenate(weights))[0] < fun(w0)[0]:
        active.weights = weights
    for t in range(len(active.cols)):
        keep = active.weights[t] > 1e-12
        active.cols[t] = [c for c, k in zip(active.cols[t], keep) if k]
        w = active.weights[t][keep]
        active.weights[t] = w / w.sum()


def _exact_step(instance: Instance, x: np.ndarray, d: np.ndarray, gamma_max: float) -> float:
    """Minimise the cost along ``x + gamma d`` by a root of the directional derivative."""

    def slope(gamma: float) -> float:
        gf, gr = gradient(instance, _unpack(instance, x + gamma * d))
        return float(np.concatenate([gf, gr.ravel()]) @ d)

    if slope(0.0) >= 0.0:
        return 0.0
    if slope(gamma_max) <= 0.0:
        return gamma_max
    return float(brentq(slope, 0.0, gamma_max, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200))


def solve_opt(instance: Instance, config: SolverConfig | None = None) -> SolveResult:
    """Minimise the social cost by Frank-Wolfe over the path-flow/rate polytope."""
    config = config or SolverConfig()
    if instance.aggregator.is_limit:
        raise UnsupportedError("the limit-mode objective is not smooth; solve at finite exponents")
    t0 = time.perf_counter()
    zero = instance.zero_flow_rate()
    x_fr = linear_oracle(instance, *gradient(instance, zero))
    x = _pack(x_fr)
    active = _Active(instance, x_fr) if config.step_rule in ("corrective", "pairwise") else None
    c0 = social_cost(instance, x_fr)
    scale = c0 if c0 > 0 else 1.0

    best_x, best_c = x.copy(), social_cost(instance, x_fr)
    best_lower = -math.inf
    gap = math.inf
    trace: list[tuple[int, float, float]] = []
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        fr = _unpack(instance, x)
        c = social_cost(instance, fr)
        gf, gr = gradient(instance, fr)
        g = np.concatenate([gf, gr.ravel()])
        v_fr = linear_oracle(instance, gf, gr)
        v = _pack(v_fr)
        fw_gap = float(g @ (x - v))
        best_lower = max(best_lower, c - fw_gap)
        if c < best_c:
            best_x, best_c = x.copy(), c
        gap = max(best_c - best_lower, 0.0)
        trace.append((it, best_c, gap))
        if gap <= config.gap_tolerance * (1.0 + abs(best_c)):
            converged = True
            break
        if config.time_limit is not None and time.perf_counter() - t0 > config.time_limit:
            break

        if config.step_rule in ("corrective", "pairwise"):
            active.add(v_fr)
            if config.step_rule == "corrective":
                _reoptimize_weights(instance, active, scale)
                x = active.point()
                gf, gr = gradient(instance, _unpack(instance, x))
                g = np.concatenate([gf, gr.ravel()])
                v_fr = linear_oracle(instance, gf, gr)
                active.add(v_fr)
            d, gamma_max, moves = active.pairwise_direction(g, v_fr)
            gamma = _exact_step(instance, x, d, gamma_max)
            active.apply(moves, gamma)
            x = active.point()
        else:
            d = v - x
            if config.step_rule == "diminishing":
                gamma = 2.0 / (it + 2.0)
            else:
                gamma = _exact_step(instance, x, d, 1.0)
            x = x + gamma * d

    out = _unpack(instance, best_x)
    return SolveResult(out.copy(), float(best_c), float(gap), it, converged, trace, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# optimality conditions and certificates
# ---------------------------------------------------------------------------


def check_opt_conditions(instance: Instance, fr: FlowRate, tol: float = DEFAULT_CHECK_TOL,
                         tight_tol: float = DEFAULT_TIGHT_TOL) -> EquilibriumReport:
    """Residuals of the four optimality conditions (differential path costs)."""
    diff = differential_path_costs(instance, fr)
    grad_r = source_gradient(instance, fr)
    zeros_p = np.zeros_like(diff)
    zeros_r = np.zeros_like(grad_r)
    return evaluate(instance, fr, "opt", zeros_p, diff, zeros_r, grad_r, tol, tight_tol)


class CertificateError(ValueError):
    def __init__(self, message: str, report: EquilibriumReport):
        super().__init__(message)
        self.report = report


@dataclass
class KktCertificate:
    """Multipliers for flow-covers-rate (``lam``), flow sign (``mu``) and rate inequalities (``nu``).

    ``nu`` maps ``(mask, terminal)`` to its multiplier and is supported on the
    nested chain ``{perm[k], ..., perm[-1]}`` of each terminal.
    """

    lam: np.ndarray
    mu: np.ndarray
    nu: dict[tuple[int, int], float]
    h: np.ndarray
    perm: np.ndarray  # (N_T, N_S): terminal t's sources sorted by ascending h


def build_kkt_certificate(instance: Instance, fr: FlowRate, tol: float = 1e-6,
                          tight_tol: float = DEFAULT_TIGHT_TOL) -> KktCertificate:
    report = check_opt_conditions(instance, fr, tol, tight_tol)
    if not report.ok:
        raise CertificateError("flow-rate does not satisfy the optimality conditions", report)
    diff = differential_path_costs(instance, fr)
    grad_r = source_gradient(instance, fr)
    ns, nt = instance.num_sources, instance.num_terminals
    lam = np.zeros((ns, nt))
    for (s, t), idx in instance.paths_by_pair.items():
        lam[s, t] = diff[idx].min()
    mu = diff - lam[instance.path_source, instance.path_terminal]
    h = grad_r + lam
    perm = np.zeros((nt, ns), dtype=int)
    nu: dict[tuple[int, int], float] = {}
    for t in range(nt):
        order = np.argsort(h[:, t], kind="stable")
        perm[t] = order
        prev = 0.0
        for k in range(ns):
            mask = 0
            for s in order[k:]:
                mask |= 1 << int(s)
            nu[mask, t] = float(h[order[k], t] - prev)
            prev = float(h[order[k], t])
    return KktCertificate(lam, mu, nu, h, perm)


@dataclass
class CertificateReport:
    stationarity_flow: float
    stationarity_rate: float
    slack_flow: float
    slack_cover: float
    slack_rate: float
    dual_infeasibility: float

    @property
    def max_residual(self) -> float:
        return max(self.stationarity_flow, self.stationarity_rate, self.slack_flow,
                   self.slack_cover, self.slack_rate, self.dual_infeasibility)

    def ok(self, tol: float = 1e-6) -> bool:
        return self.max_residual <= tol


def verify_certificate(instance: Instance, fr: FlowRate, cert: KktCertificate) -> CertificateReport:
    """Residuals of both stationarity equations, complementary slackness and dual signs."""
    diff = differential_path_costs(instance, fr)
    grad_r = source_gradient(instance, fr)
    ps, pt = instance.path_source, instance.path_terminal
    st_flow = np.abs(diff - cert.mu - cert.lam[ps, pt])

    ns, nt = instance.num_sources, instance.num_terminals
    nu_sum = np.zeros((ns, nt))
    g = lower_bounds(instance.entropy)
    slack_rate = 0.0
    neg_nu = 0.0
    for (mask, t), val in cert.nu.items():
        for s in range(ns):
            if mask >> s & 1:
                nu_sum[s, t] += val
        slack = subset_sums(fr.rates[:, t])[mask] - g[mask]
        slack_rate = max(slack_rate, abs(val * slack))
        neg_nu = max(neg_nu, -val)
    st_rate = np.abs(grad_r + cert.lam - nu_sum)
    cover = pair_flows(instance, fr) - fr.rates
    return CertificateReport(
        stationarity_flow=float(st_flow.max(initial=0.0)),
        stationarity_rate=float(st_rate.max(initial=0.0)),
        slack_flow=float(np.abs(cert.mu * fr.flows).max(initial=0.0)),
        slack_cover=float(np.abs(cert.lam * cover).max(initial=0.0)),
        slack_rate=float(slack_rate),
        dual_infeasibility=float(max(neg_nu, -cert.mu.min(initial=0.0), -cert.lam.min(initial=0.0), 0.0)),
    )


def greedy_prefix_check(instance: Instance, fr: FlowRate, cert: KktCertificate, tol: float = 1e-6) -> bool | None:
    """Do prefix sums of rates (sources by ascending ``h``) equal prefix joint entropies?

    Returns ``None`` when some terminal has tied ``h`` values.
    """
    H = instance.entropy
    for t in range(instance.num_terminals):
        order = np.argsort(cert.h[:, t], kind="stable")
        hs = cert.h[order, t]
        if np.any(np.diff(hs) <= tol):
            return None
    for t in range(instance.num_terminals):
        order = np.argsort(cert.h[:, t], kind="stable")
        mask = 0
        acc = 0.0
        for s in order:
            mask |= 1 << int(s)
            acc += fr.rates[s, t]
            if abs(acc - H[mask]) > tol:
                return False
    return True
