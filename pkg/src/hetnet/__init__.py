"""Stochastic-geometry toolkit for two-tier cache-enabled cellular networks.

Point-process sampling, Monte Carlo delivery-rate estimation, and the
closed-form approximations of the average delivery rate for macro and
small-cell users under coverage-aided and capacity-aided deployments.
"""
from .analytic import TheoremBreakdown, TheoryOptions, avg_rate_mu, avg_rate_su
from .montecarlo import estimate_avg_rates, simulate_records
from .params import NetworkParams, ParameterError, Topology, fig3_params, fig4_params, validate
from .specfun import QuadratureSpec, hyp2f1_neg
from .sweep import ConfigError, load_config, run_sweep

__all__ = [
    "ConfigError", "NetworkParams", "ParameterError", "QuadratureSpec", "TheoremBreakdown",
    "TheoryOptions", "Topology", "avg_rate_mu", "avg_rate_su", "estimate_avg_rates", "fig3_params",
    "fig4_params", "hyp2f1_neg", "load_config", "run_sweep", "simulate_records", "validate",
]
__version__ = "0.1.0"
