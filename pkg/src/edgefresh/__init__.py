"""Freshness-aware edge caching: queueing analysis, control optimization,
and discrete-event simulation of three cache-update schemes.

A roadside cache serves Poisson content requests over a shared band split
between fetching fresh versions from publishers (uplink) and delivering
to consumers (downlink). The package evaluates closed-form mean latency
and mean age of information for the conventional fetch-per-request
pipeline, a round-robin cache updater, and a per-request probabilistic
refresh policy; optimizes their control knobs; and cross-checks the
formulas against simulation.
"""

from .errors import (
    ConfigError,
    DegenerateSplitError,
    EdgeFreshError,
    InfeasibleAoIError,
    InfeasibleLoadError,
    InvalidParameterError,
    OverloadError,
    SimulationDiverged,
    UnboundedAoIError,
)
from .model import (
    ChannelRates,
    Conventional,
    PerfPoint,
    Popularity,
    RadioParams,
    Rea,
    Rsuc,
    Scenario,
    SchemeParams,
    load_config,
    parse_config,
    rates_from_radio,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelRates",
    "ConfigError",
    "Conventional",
    "DegenerateSplitError",
    "EdgeFreshError",
    "InfeasibleAoIError",
    "InfeasibleLoadError",
    "InvalidParameterError",
    "OverloadError",
    "PerfPoint",
    "Popularity",
    "RadioParams",
    "Rea",
    "Rsuc",
    "Scenario",
    "SchemeParams",
    "SimulationDiverged",
    "UnboundedAoIError",
    "__version__",
    "load_config",
    "parse_config",
    "rates_from_radio",
]
