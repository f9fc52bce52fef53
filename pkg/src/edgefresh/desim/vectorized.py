"""Array-based simulation engine.

Single-server FCFS queues admit a running-maximum form of the waiting-time
recursion, so a whole replication reduces to cumulative sums, running
maxima, and sorted lookups. This is the default engine; the event-driven
engine in events.py walks the same sample path request by request and is
kept for cross-validation.
"""

from __future__ import annotations

import numpy as np

from ..model import Conventional, Rea, Rsuc
from .records import DeliveryLog, RepInputs, RepOutputs

__all__ = ["run_vectorized"]


def _lindley(arrivals: np.ndarray, service: np.ndarray):
    """Service start and completion times of an FCFS single server."""
    cum = np.cumsum(service)
    offset = cum - service  # total service of all predecessors
    start = np.maximum.accumulate(arrivals - offset) + offset
    return start, start + service


def _first_over(entries: np.ndarray, exits: np.ndarray, bound: int) -> int:
    """Index of the first entry that finds more than `bound` jobs present,
    or -1. Exits must be nondecreasing (FCFS order)."""
    in_system = np.arange(len(entries)) - np.searchsorted(exits, entries, side="left")
    over = in_system > bound
    if over.any():
        return int(np.argmax(over))
    return -1


def _divergence(out: RepOutputs, bound: int, checks) -> None:
    """checks: iterable of (queue_name, entries, exits)."""
    earliest = None
    for name, entries, exits in checks:
        idx = _first_over(entries, exits, bound)
        if idx >= 0:
            when = float(entries[idx])
            if earliest is None or when < earliest[0]:
                earliest = (when, name)
    if earliest is not None:
        out.diverged = True
        out.diverged_time, out.diverged_queue = earliest
        # Records up to the first offending arrival are unaffected by what
        # happens later under FCFS.
        out.n_completed = int(np.searchsorted(out.log.arrival_time, earliest[0],
                                              side="left"))
    else:
        out.n_completed = len(out.log)


def _run_conventional(inputs: RepInputs) -> RepOutputs:
    ul_start, ul_complete = _lindley(inputs.arrivals, inputs.ul_service)
    dl_start, dl_complete = _lindley(ul_complete, inputs.dl_service)
    log = DeliveryLog(inputs.items, inputs.arrivals, dl_start, dl_complete, ul_start)
    out = RepOutputs(log=log, aux={"ul_complete": ul_complete})
    _divergence(out, inputs.divergence_bound,
                [("uplink", inputs.arrivals, ul_complete),
                 ("downlink", ul_complete, dl_complete)])
    return out


def _update_schedule(inputs: RepInputs, horizon: float):
    """Back-to-back round-robin refresh completions covering `horizon`."""
    stream = inputs.update_stream
    chunks = []
    last = 0.0
    while last <= horizon:
        remaining = horizon - last
        if np.isfinite(stream.mean) and stream.mean > 0:
            est = int(remaining / stream.mean * 1.05) + 1024
        else:
            est = 1024
        durations = stream.take(est)
        cum = last + np.cumsum(durations)
        chunks.append(cum)
        last = float(cum[-1])
        if not np.isfinite(last):
            break
    completions = np.concatenate(chunks) if chunks else np.empty(0)
    starts = np.empty_like(completions)
    if len(completions):
        starts[0] = 0.0
        starts[1:] = completions[:-1]
    return starts, completions


def _run_rsuc(inputs: RepInputs) -> RepOutputs:
    dl_start, dl_complete = _lindley(inputs.arrivals, inputs.dl_service)
    horizon = float(dl_start[-1]) if len(dl_start) else 0.0
    starts, completions = _update_schedule(inputs, horizon)

    s = inputs.item_count
    generation = np.zeros(len(inputs.arrivals))
    for item in range(s):
        mask = inputs.items == item
        if not mask.any():
            continue
        # Update k refreshes item k mod S, so this item's refreshes are
        # every S-th entry of the schedule.
        comp_item = completions[item::s]
        if not len(comp_item):
            continue  # initial version only; generation stays 0
        start_item = starts[item::s]
        idx = np.searchsorted(comp_item, dl_start[mask], side="right") - 1
        generation[mask] = np.where(idx >= 0, start_item[np.maximum(idx, 0)], 0.0)

    log = DeliveryLog(inputs.items, inputs.arrivals, dl_start, dl_complete, generation)
    out = RepOutputs(log=log, aux={"update_completions": completions,
                                   "update_horizon": horizon})
    _divergence(out, inputs.divergence_bound,
                [("downlink", inputs.arrivals, dl_complete)])
    return out


def _run_rea(inputs: RepInputs) -> RepOutputs:
    fetch = np.where(inputs.update_flags, inputs.ul_service, 0.0)
    service = fetch + inputs.dl_service
    start, complete = _lindley(inputs.arrivals, service)
    dl_start = start + fetch

    generation = np.zeros(len(inputs.arrivals))
    for item in range(inputs.item_count):
        mask = inputs.items == item
        if not mask.any():
            continue
        flags = inputs.update_flags[mask]
        start_item = start[mask]
        m = mask.sum()
        # A refreshing request regenerates at its own service start; the
        # install lands before any later request of this item is served.
        order = np.arange(m)
        last_update = np.maximum.accumulate(np.where(flags, order, -1))
        previous = np.empty(m, dtype=np.int64)
        previous[0] = -1
        previous[1:] = last_update[:-1]
        cached = np.where(previous >= 0, start_item[np.maximum(previous, 0)], 0.0)
        generation[mask] = np.where(flags, start_item, cached)

    log = DeliveryLog(inputs.items, inputs.arrivals, dl_start, complete, generation)
    out = RepOutputs(log=log, aux={"update_flags": inputs.update_flags})
    _divergence(out, inputs.divergence_bound,
                [("shared", inputs.arrivals, complete)])
    return out


def run_vectorized(inputs: RepInputs) -> RepOutputs:
    if isinstance(inputs.scheme, Conventional):
        return _run_conventional(inputs)
    if isinstance(inputs.scheme, Rsuc):
        return _run_rsuc(inputs)
    if isinstance(inputs.scheme, Rea):
        return _run_rea(inputs)
    raise TypeError(f"unknown scheme {inputs.scheme!r}")
