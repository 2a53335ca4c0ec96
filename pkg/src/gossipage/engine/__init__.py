"""Discrete-event simulation of gossip networks."""
from .clocks import (Deterministic, Distribution, EventClock, Exponential, Gamma, Pareto, Uniform,
                     parse_distribution)
from .renewal import run_renewal_line, run_renewal_replications
from .simulate import Metrics, aggregate, run, run_replications, split_seeds

__all__ = [
    "Deterministic", "Distribution", "EventClock", "Exponential", "Gamma", "Pareto", "Uniform",
    "parse_distribution", "run_renewal_line", "run_renewal_replications", "Metrics", "aggregate", "run",
    "run_replications", "split_seeds",
]
