"""Exception types shared across the package.

Everything expected (bad inputs, infeasible problems, overloaded queues)
derives from EdgeFreshError so frontends can separate "the user asked for
something impossible" from genuine bugs.
"""

from __future__ import annotations


class EdgeFreshError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidParameterError(EdgeFreshError, ValueError):
    """A parameter is outside its documented domain (wrong sign, length, ...)."""


class ConfigError(InvalidParameterError):
    """A config file or config mapping failed validation."""


class OverloadError(EdgeFreshError):
    """A queue cannot be stable under the requested load.

    `queue` names the violated server ("uplink", "downlink", "shared").
    """

    def __init__(self, message: str, *, queue: str | None = None):
        super().__init__(message)
        self.queue = queue


class DegenerateSplitError(EdgeFreshError):
    """Bandwidth split at 0 or 1: one of the two functions gets no channel."""


class UnboundedAoIError(EdgeFreshError):
    """An update probability of 0 leaves the cache permanently stale."""


class InfeasibleAoIError(EdgeFreshError):
    """The requested AoI cap lies below what any control setting can achieve."""


class InfeasibleLoadError(EdgeFreshError):
    """The control value required by the AoI cap leaves too little capacity
    for the offered load."""


class SimulationDiverged(OverloadError):
    """A simulated queue exceeded the divergence bound.

    Carries the partial statistics gathered before the abort so sweeps can
    record the point as overloaded instead of losing it.
    """

    def __init__(self, message: str, *, queue: str | None = None,
                 sim_time: float | None = None, partial=None):
        super().__init__(message, queue=queue)
        self.sim_time = sim_time
        self.partial = partial
