"""Discrete-event simulation of the three cache-update schemes.

Two interchangeable engines (array-based and event-calendar) consume the
same pre-drawn randomness, so their outputs agree to floating-point noise
and each acts as a check on the other.
"""

from .engine import (
    DEFAULT_SEED,
    LittleCheck,
    RepDiagnostics,
    SimConfig,
    SimResult,
    assign_item,
    assign_items,
    ci_halfwidth,
    draw_exponential,
    measure_bounds,
    perf_from_reps,
    purpose_rng,
    run_replication,
    simulate,
)
from .events import EventQueue, run_events
from .records import RECORD_COLUMNS, DeliveryLog, DeliveryRecord, ExpStream, RepInputs, RepOutputs
from .vectorized import run_vectorized

__all__ = [
    "DEFAULT_SEED",
    "DeliveryLog",
    "DeliveryRecord",
    "EventQueue",
    "ExpStream",
    "LittleCheck",
    "RECORD_COLUMNS",
    "RepDiagnostics",
    "RepInputs",
    "RepOutputs",
    "SimConfig",
    "SimResult",
    "assign_item",
    "assign_items",
    "ci_halfwidth",
    "draw_exponential",
    "measure_bounds",
    "perf_from_reps",
    "purpose_rng",
    "run_events",
    "run_replication",
    "run_vectorized",
    "simulate",
]
