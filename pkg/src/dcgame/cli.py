"""Command-line interface.

Exit status: 0 success, 1 invalid input, 2 solver did not converge,
3 a checked condition failed (only with ``--assert``).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import io as dio
from .anarchy import FAMILIES, fig2_analytic, make_fig1_instance, make_fig2_instance, price_of_anarchy, sweep
from .entropy import DomainError, SchemaError
from .equilibrium import check_nash_conditions, check_wardrop_conditions, solve_wardrop
from .instances import symmetric_fig2_point
from .network import AggregatorConfig, FlowRate, Instance, PathLimitError, UnsupportedError, social_cost
from .optimum import STEP_RULES, SolverConfig, check_opt_conditions, solve_opt

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_CHECK_FAILED = 0, 1, 2, 3

COMMANDS = ("solve-opt", "solve-wardrop", "check-opt", "check-wardrop", "check-nash", "poa", "sweep", "example")
EXAMPLE_EXPONENT = {"fig1": 32.0, "fig2": 64.0}


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    instance_path: str | None = None
    example: str | None = None
    example_params: dict = field(default_factory=dict)
    n: float | None = None
    m: float | None = None
    limit_mode: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig)
    tol: float = 1e-4
    fmt: str = "human"
    out: str | None = None
    trace: str | None = None
    point: str = "solve"
    flow_rate_path: str | None = None
    assert_mode: bool = False
    derivatives: str = "analytic"
    sweep_family: str | None = None
    grid_file: str | None = None
    preset: str | None = None
    count: int = 50
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        if not self.tol > 0:
            raise InputError("--tol must be positive")


# ---------------------------------------------------------------------------
# instance assembly
# ---------------------------------------------------------------------------


def _example_instance(cfg: RunConfig, aggregator: AggregatorConfig):
    p = cfg.example_params
    if cfg.example == "fig1":
        ex = make_fig1_instance(int(p.get("ns", 8)), int(p.get("nt", 8)), float(p.get("h", 1.0)),
                                float(p.get("c1", 64.0)), float(p.get("c2", 23.0)), aggregator)
        return ex.instance, ex
    if cfg.example == "fig2":
        inst = make_fig2_instance(float(p.get("c1", 4.0)), float(p.get("c2", 8.0)), aggregator,
                                  str(p.get("source_rule", "uniform")))
        return inst, fig2_analytic(float(p.get("c1", 4.0)), float(p.get("c2", 8.0)))
    raise InputError(f"unknown example {cfg.example!r}")


def build_instances(cfg: RunConfig) -> tuple[Instance, Instance, object]:
    """(instance to solve at finite exponents, instance to judge, analytic companion)."""
    if (cfg.instance_path is None) == (cfg.example is None):
        raise InputError("give exactly one of --instance or --example")
    if cfg.example is not None:
        base = EXAMPLE_EXPONENT[cfg.example] if cfg.example in EXAMPLE_EXPONENT else 16.0
        agg = AggregatorConfig(cfg.n if cfg.n is not None else base, cfg.m if cfg.m is not None else base)
        inst, companion = _example_instance(cfg, agg)
    else:
        inst = dio.load_instance(cfg.instance_path)
        companion = None
        if cfg.n is not None or cfg.m is not None:
            inst = inst.with_aggregator(cfg.n, cfg.m)
    judge = inst.limit_mode() if cfg.limit_mode else inst
    return inst, judge, companion


def _needs_finite(inst: Instance) -> None:
    if inst.aggregator.is_limit:
        raise UnsupportedError("solving needs finite exponents; pass --n and --m (and --limit-mode to judge)")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _solve(cfg: RunConfig, wardrop: bool):
    inst, judge, _ = build_instances(cfg)
    _needs_finite(inst)
    res = solve_wardrop(inst, cfg.solver) if wardrop else solve_opt(inst, cfg.solver)
    extra = {"problem": "wardrop" if wardrop else "opt",
             "judged_cost": social_cost(judge, res.flow_rate),
             "judged_in_limit_mode": judge.aggregator.is_limit}
    doc = dio.solve_to_dict(inst, res, extra)
    status = EXIT_OK if res.converged else EXIT_NONCONVERGED
    return doc, status, res.trace


def _point(cfg: RunConfig, inst: Instance, companion, default_wardrop: bool):
    if cfg.flow_rate_path:
        return dio.load_flow_rate(inst, cfg.flow_rate_path), None
    if cfg.point == "solve":
        _needs_finite(inst)
        res = solve_wardrop(inst, cfg.solver) if default_wardrop else solve_opt(inst, cfg.solver)
        return res.flow_rate, res
    if companion is None:
        raise InputError("analytic points exist only for --example instances")
    if cfg.example == "fig1":
        return (companion.wardrop if cfg.point == "analytic-wardrop" else companion.opt_candidate).copy(), None
    h = companion.h if cfg.point == "analytic-wardrop" else companion.h_star
    return symmetric_fig2_point(inst, h), None


def _check(cfg: RunConfig):
    inst, judge, companion = build_instances(cfg)
    wardrop_like = cfg.command == "check-wardrop"
    fr, res = _point(cfg, inst, companion, wardrop_like)
    if cfg.command == "check-opt":
        rep = check_opt_conditions(judge, fr, cfg.tol)
    elif cfg.command == "check-wardrop":
        rep = check_wardrop_conditions(judge, fr, cfg.tol)
    else:
        rep = check_nash_conditions(judge, fr, cfg.tol, method=cfg.derivatives)
    doc = dio.report_to_dict(rep)
    status = EXIT_OK
    if res is not None and not res.converged:
        status = EXIT_NONCONVERGED
    if cfg.assert_mode and not rep.ok:
        status = EXIT_CHECK_FAILED
    return doc, status, res.trace if res is not None else None


def _poa(cfg: RunConfig):
    inst, judge, companion = build_instances(cfg)
    _needs_finite(inst)
    res = price_of_anarchy(inst, cfg.solver, "limit" if cfg.limit_mode or cfg.example else "native",
                           descriptor={"source": cfg.example or cfg.instance_path, **cfg.example_params})
    extra: dict = {}
    if cfg.example == "fig2":
        extra = {"h": float(res.wardrop.rates[0, 0]), "h_star": float(res.opt.rates[0, 0]),
                 "analytic": {"h": companion.h, "h_star": companion.h_star,
                              "wardrop_cost": companion.wardrop_cost, "opt_cost": companion.opt_cost,
                              "ratio": companion.ratio}}
    elif cfg.example == "fig1":
        extra = {"analytic": {"wardrop_cost": companion.wardrop_cost, "opt_cost": companion.opt_candidate_cost,
                              "ratio": companion.analytic_ratio,
                              "equilibrium_regime": companion.equilibrium_regime,
                              "anarchy_regime": companion.anarchy_regime}}
    doc = dio.poa_to_dict(res, extra)
    ok = res.flags["wardrop_converged"] and res.flags["opt_converged"]
    return doc, EXIT_OK if ok else EXIT_NONCONVERGED, None


def _grid(cfg: RunConfig) -> tuple[str, list[dict]]:
    fam = cfg.sweep_family or "random"
    if fam not in FAMILIES:
        raise InputError(f"unknown family {fam!r}")
    if cfg.grid_file:
        try:
            with open(cfg.grid_file) as fh:
                grid = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read grid file: {exc}") from exc
        if not isinstance(grid, list) or not all(isinstance(g, dict) for g in grid):
            raise InputError("grid file must hold a list of parameter objects")
        return fam, grid
    if fam == "fig1":
        # h = 1, C1 = N_T^2, 1 + C2 = 3 N_T, N_S = N_T
        return fam, [dict(num_sources=n, num_terminals=n, h=1.0, c1=float(n * n), c2=float(3 * n - 1))
                     for n in range(5, 11)]
    if fam == "fig2":
        return fam, [dict(c1=4.0, c2=c2) for c2 in (4.0, 6.0, 8.0, 12.0, 16.0)]
    rng = np.random.default_rng(cfg.seed)
    grid = []
    for i in range(cfg.count):
        nt = int(rng.integers(2, 4))
        k = nt if cfg.preset == "degree-equals-terminals" else int(rng.integers(1, 4))
        grid.append(dict(seed=cfg.seed * 100_000 + i, num_sources=int(rng.integers(1, 4)), num_terminals=nt,
                         degree=k, correlated=cfg.preset != "independent"))
    return fam, grid


def _sweep(cfg: RunConfig):
    fam, grid = _grid(cfg)
    if cfg.n is not None and math.isinf(cfg.n):
        raise UnsupportedError("sweeps solve at finite exponents")
    base = EXAMPLE_EXPONENT.get(fam, 16.0)
    agg = AggregatorConfig(cfg.n or base, cfg.m or base)
    rows = sweep(fam, grid, agg, cfg.solver, "limit", cfg.jobs)
    return dio.sweep_to_dicts(rows), EXIT_OK, None


def _example(cfg: RunConfig):
    if cfg.example is None:
        raise InputError("example needs a generator name (fig1 or fig2)")
    inst, _, _ = build_instances(cfg)
    return dio.instance_to_dict(inst), EXIT_OK, None


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute one command; returns (exit status, emitted text)."""
    handlers = {
        "solve-opt": lambda c: _solve(c, False),
        "solve-wardrop": lambda c: _solve(c, True),
        "check-opt": _check,
        "check-wardrop": _check,
        "check-nash": _check,
        "poa": _poa,
        "sweep": _sweep,
        "example": _example,
    }
    doc, status, trace = handlers[cfg.command](cfg)
    if cfg.command == "example":
        text = json.dumps(doc, indent=2) + "\n"
    elif cfg.command == "sweep" and cfg.fmt == "human" and cfg.out:
        text = dio.emit_report(doc, "csv")
    else:
        text = dio.emit_report(doc, cfg.fmt)
    if cfg.out:
        dio.write_atomic(cfg.out, text)
    if cfg.trace and trace is not None:
        dio.write_atomic(cfg.trace, dio.trace_csv(trace))
    return status, text


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _exponent(text: str) -> float:
    if text in ("limit", "inf"):
        return math.inf
    v = float(text)
    if v < 1:
        raise argparse.ArgumentTypeError("exponent must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcgame", description="Min-cost multicast with correlated sources: "
                                "optima, Wardrop equilibria and the price of anarchy.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("generator", nargs="?", choices=("fig1", "fig2"), help="generator for the example command")
    src = p.add_argument_group("instance")
    src.add_argument("--instance", help="instance JSON file")
    src.add_argument("--example", choices=("fig1", "fig2"))
    src.add_argument("--ns", type=int, help="fig1: number of sources")
    src.add_argument("--nt", type=int, help="fig1: number of terminals")
    src.add_argument("--h", type=float, help="fig1: source entropy")
    src.add_argument("--c1", type=float)
    src.add_argument("--c2", type=float)
    src.add_argument("--source-rule", choices=("uniform", "power"), help="fig2: source cost splitting")
    src.add_argument("--n", type=_exponent, help="edge aggregation exponent")
    src.add_argument("--m", type=_exponent, help="source aggregation exponent")
    src.add_argument("--limit-mode", action="store_true", help="judge costs and conditions with exact maxima")
    sol = p.add_argument_group("solver")
    sol.add_argument("--gap", type=float, default=1e-8)
    sol.add_argument("--max-iters", type=int, default=500)
    sol.add_argument("--step-rule", choices=STEP_RULES, default="corrective")
    chk = p.add_argument_group("checks")
    chk.add_argument("--tol", type=float, default=1e-4)
    chk.add_argument("--point", choices=("solve", "analytic-wardrop", "analytic-opt"), default="solve")
    chk.add_argument("--flow-rate", help="flow-rate JSON file to check")
    chk.add_argument("--assert", dest="assert_mode", action="store_true", help="exit 3 when a condition fails")
    chk.add_argument("--fd", action="store_true", help="check-nash: finite-difference derivatives")
    sw = p.add_argument_group("sweep")
    sw.add_argument("--family", choices=FAMILIES)
    sw.add_argument("--grid", help="JSON file with a list of parameter objects")
    sw.add_argument("--preset", choices=("correlated", "independent", "degree-equals-terminals"))
    sw.add_argument("--count", type=int, default=50)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--jobs", type=int, default=1)
    out = p.add_argument_group("output")
    out.add_argument("--format", choices=dio.FORMATS, default="human")
    out.add_argument("--out")
    out.add_argument("--trace", help="write the solver trace as CSV")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    example = args.example or (args.generator if args.command == "example" else None)
    params = {k: getattr(args, k) for k in ("ns", "nt", "h", "c1", "c2", "source_rule")
              if getattr(args, k) is not None}
    try:
        solver = SolverConfig(max_iterations=args.max_iters, gap_tolerance=args.gap, step_rule=args.step_rule)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    return RunConfig(
        command=args.command, instance_path=args.instance, example=example, example_params=params,
        n=args.n, m=args.m, limit_mode=args.limit_mode, solver=solver, tol=args.tol, fmt=args.format,
        out=args.out, trace=args.trace, point=args.point, flow_rate_path=args.flow_rate,
        assert_mode=args.assert_mode, derivatives="fd" if args.fd else "analytic",
        sweep_family=args.family, grid_file=args.grid, preset=args.preset, count=args.count,
        seed=args.seed, jobs=args.jobs,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        status, text = run(cfg)
    except (InputError, SchemaError, DomainError, UnsupportedError, PathLimitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if not cfg.out:
        sys.stdout.write(text)
    if status == EXIT_NONCONVERGED:
        print("warning: solver stopped before reaching the gap tolerance", file=sys.stderr)
    elif status == EXIT_CHECK_FAILED:
        print("check failed: at least one condition is violated", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
