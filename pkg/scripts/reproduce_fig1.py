"""Relay example: analytic equilibrium and candidate, numeric solves, and the N_T sweep."""

import argparse
from dataclasses import dataclass

from dcgame.anarchy import sweep
from dcgame.equilibrium import check_wardrop_conditions, solve_wardrop
from dcgame.instances import make_fig1_instance
from dcgame.network import AggregatorConfig, social_cost
from dcgame.optimum import solve_opt


@dataclass
class Config:
    num_sources: int = 8
    num_terminals: int = 8
    h: float = 1.0
    c1: float = 64.0
    c2: float = 23.0
    exponent: float = 32.0
    sweep_terminals: tuple[int, ...] = (5, 6, 7, 8, 9, 10)


def main(cfg: Config) -> None:
    agg = AggregatorConfig(cfg.exponent, cfg.exponent)
    ex = make_fig1_instance(cfg.num_sources, cfg.num_terminals, cfg.h, cfg.c1, cfg.c2, agg)
    judge = ex.instance.limit_mode()
    rep = check_wardrop_conditions(judge, ex.wardrop)
    print(f"analytic wardrop cost {ex.wardrop_cost:g}, candidate cost {ex.opt_candidate_cost:g}, "
          f"ratio {ex.analytic_ratio:g}; wardrop conditions {'hold' if rep.ok else 'fail'} {rep.residuals}")
    ward = social_cost(judge, solve_wardrop(ex.instance).flow_rate)
    opt = social_cost(judge, solve_opt(ex.instance).flow_rate)
    print(f"numeric wardrop cost {ward:.4f}, numeric optimum {opt:.4f}, ratio {ward / opt:.4f}")

    grid = [dict(num_sources=n, num_terminals=n, h=1.0, c1=float(n * n), c2=float(3 * n - 1))
            for n in cfg.sweep_terminals]
    print(f"\n{'N_T':>4} {'ratio':>8} {'(1+N_T)/5':>10} {'bound':>6}")
    for row in sweep("fig1", grid, agg):
        n = row.params["num_terminals"]
        print(f"{n:4d} {row.ratio:8.4f} {(1 + n) / 5:10.2f} {row.bound:6.1f} {row.error}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--num-sources", type=int, default=Config.num_sources)
    p.add_argument("--num-terminals", type=int, default=Config.num_terminals)
    p.add_argument("--h", type=float, default=Config.h)
    p.add_argument("--c1", type=float, default=Config.c1)
    p.add_argument("--c2", type=float, default=Config.c2)
    p.add_argument("--exponent", type=float, default=Config.exponent)
    main(Config(**vars(p.parse_args())))
