"""Min-cost multicast with correlated sources and its distributed compression game."""

from .anarchy import PoaResult, fig2_analytic, poa_upper_bound, price_of_anarchy, sweep
from .entropy import EntropyModel, is_member, linear_minimize, reduce_to_base, tight_sets
from .equilibrium import check_nash_conditions, check_wardrop_conditions, solve_wardrop
from .instances import make_fig1_instance, make_fig2_instance
from .network import AggregatorConfig, FlowRate, Instance, Monomial, Network, SplittingConfig, social_cost
from .optimum import SolverConfig, build_kkt_certificate, check_opt_conditions, solve_opt, verify_certificate

__all__ = [
    "AggregatorConfig", "EntropyModel", "FlowRate", "Instance", "Monomial", "Network", "PoaResult",
    "SolverConfig", "SplittingConfig", "build_kkt_certificate", "check_nash_conditions",
    "check_opt_conditions", "check_wardrop_conditions", "fig2_analytic", "is_member", "linear_minimize",
    "make_fig1_instance", "make_fig2_instance", "poa_upper_bound", "price_of_anarchy", "reduce_to_base",
    "social_cost", "solve_opt", "solve_wardrop", "sweep", "tight_sets", "verify_certificate",
]
