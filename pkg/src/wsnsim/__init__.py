"""Seed-reproducible round-based simulator for clustered wireless sensor networks."""

__version__ = "0.1.0"

from .model import (ConfigError, EcrMode, NodeState, Protocol, RadioModel, ScenarioConfig, Tier,
                    aggregation_cost, build_network, rx_cost, total_initial_energy, tx_cost)
from .protocols import ElectionContext, ProtocolState, elect_cluster_heads, threshold
from .engine import RoundMetrics, SimulationSummary, form_clusters, run_simulation
from .metrics import ComparisonReport, compare, summarize, write_series_csv

__all__ = [
    "ConfigError", "EcrMode", "NodeState", "Protocol", "RadioModel", "ScenarioConfig", "Tier",
    "aggregation_cost", "build_network", "rx_cost", "total_initial_energy", "tx_cost",
    "ElectionContext", "ProtocolState", "elect_cluster_heads", "threshold",
    "RoundMetrics", "SimulationSummary", "form_clusters", "run_simulation",
    "ComparisonReport", "compare", "summarize", "write_series_csv",
]
