"""Event-driven simulation engine.

A classic heap-backed event loop over four event kinds: request arrival,
uplink service completion, downlink service completion, and cache-refresh
completion. Consumes the same pre-drawn RepInputs as the array engine, so
for stable configurations both engines produce the same delivery records
up to floating-point summation order. Roughly two orders of magnitude
slower than the array engine; used for cross-validation and small runs.
"""

from __future__ import annotations

import heapq
import itertools
from collections import deque

import numpy as np

from ..model import Conventional, Rea, Rsuc
from .records import DeliveryLog, RepInputs, RepOutputs

__all__ = ["EventQueue", "run_events",
           "ARRIVAL", "UPLINK_COMPLETE", "DOWNLINK_COMPLETE", "UPDATE_COMPLETE"]

ARRIVAL = "arrival"
UPLINK_COMPLETE = "uplink_complete"
DOWNLINK_COMPLETE = "downlink_complete"
UPDATE_COMPLETE = "update_complete"


class EventQueue:
    """Time-ordered event heap; equal times dispatch in insertion order."""

    def __init__(self):
        self._heap: list = []
        self._seq = itertools.count()

    def push(self, time: float, kind: str, payload=None) -> None:
        heapq.heappush(self._heap, (time, next(self._seq), kind, payload))

    def pop(self):
        time, _, kind, payload = heapq.heappop(self._heap)
        return time, kind, payload

    def __len__(self) -> int:
        return len(self._heap)

    def peek_time(self) -> float:
        return self._heap[0][0]


class _Run:
    """Mutable state shared by the per-scheme loops."""

    def __init__(self, inputs: RepInputs):
        self.inputs = inputs
        n = len(inputs.arrivals)
        self.n = n
        self.queue = EventQueue()
        self.dl_start = np.zeros(n)
        self.complete = np.zeros(n)
        self.generation = np.zeros(n)
        self.delivered = 0
        self.diverged = False
        self.diverged_queue: str | None = None
        self.diverged_time: float | None = None

    def finish(self, extra_aux: dict | None = None) -> RepOutputs:
        inputs = self.inputs
        if self.diverged:
            # Keep the already-delivered prefix; under FCFS those records
            # are unaffected by the congested tail.
            keep = self.delivered
        else:
            keep = self.n
        log = DeliveryLog(inputs.items[:keep], inputs.arrivals[:keep],
                          self.dl_start[:keep], self.complete[:keep],
                          self.generation[:keep])
        return RepOutputs(log=log, diverged=self.diverged,
                          diverged_queue=self.diverged_queue,
                          diverged_time=self.diverged_time,
                          n_completed=keep, aux=dict(extra_aux or {}))


def _run_conventional(inputs: RepInputs) -> RepOutputs:
    run = _Run(inputs)
    q = run.queue
    ul_wait: deque = deque()
    dl_wait: deque = deque()
    ul_busy = dl_busy = False
    ul_in = dl_in = 0  # waiting plus in service
    ul_complete = np.zeros(run.n)
    admitted = 0

    def start_ul(now: float) -> None:
        nonlocal ul_busy
        if not ul_busy and ul_wait:
            i = ul_wait.popleft()
            ul_busy = True
            run.generation[i] = now
            q.push(now + inputs.ul_service[i], UPLINK_COMPLETE, i)

    def start_dl(now: float) -> None:
        nonlocal dl_busy
        if not dl_busy and dl_wait:
            i = dl_wait.popleft()
            dl_busy = True
            run.dl_start[i] = now
            q.push(now + inputs.dl_service[i], DOWNLINK_COMPLETE, i)

    q.push(inputs.arrivals[0], ARRIVAL, 0)
    while q and run.delivered < (admitted if run.diverged else run.n):
        now, kind, i = q.pop()
        if kind == ARRIVAL:
            # Once the bound trips no further work is admitted, but requests
            # already in the system drain normally: under FCFS their records
            # do not depend on the rejected tail, so both engines keep the
            # same prefix.
            if run.diverged:
                continue
            if i + 1 < run.n:
                q.push(inputs.arrivals[i + 1], ARRIVAL, i + 1)
            if ul_in > inputs.divergence_bound:
                run.diverged = True
                run.diverged_queue = "uplink"
                run.diverged_time = now
                continue
            ul_in += 1
            admitted += 1
            ul_wait.append(i)
            start_ul(now)
        elif kind == UPLINK_COMPLETE:
            ul_busy = False
            ul_in -= 1
            ul_complete[i] = now
            if dl_in > inputs.divergence_bound and not run.diverged:
                run.diverged = True
                run.diverged_queue = "downlink"
                run.diverged_time = now
            dl_in += 1
            dl_wait.append(i)
            start_ul(now)
            start_dl(now)
        else:  # DOWNLINK_COMPLETE
            dl_busy = False
            dl_in -= 1
            run.complete[i] = now
            run.delivered += 1
            start_dl(now)
    keep = run.delivered if run.diverged else run.n
    out = run.finish({"ul_complete": ul_complete[:keep]})
    return out


def _run_rsuc(inputs: RepInputs) -> RepOutputs:
    run = _Run(inputs)
    q = run.queue
    s = inputs.item_count
    stream = inputs.update_stream
    cache_generation = np.zeros(s)
    wait: deque = deque()
    busy = False
    in_system = 0
    refresh_completions: list = []

    def start_dl(now: float) -> None:
        nonlocal busy
        if not busy and wait:
            i = wait.popleft()
            busy = True
            run.dl_start[i] = now
            run.generation[i] = cache_generation[inputs.items[i]]
            q.push(now + inputs.dl_service[i], DOWNLINK_COMPLETE, i)

    admitted = 0
    # Updater cycles continuously from t = 0.
    q.push(stream.next(), UPDATE_COMPLETE, (0, 0.0))
    q.push(inputs.arrivals[0], ARRIVAL, 0)
    while q and run.delivered < (admitted if run.diverged else run.n):
        now, kind, payload = q.pop()
        if kind == ARRIVAL:
            i = payload
            if run.diverged:
                continue  # drain admitted requests, admit nothing new
            if i + 1 < run.n:
                q.push(inputs.arrivals[i + 1], ARRIVAL, i + 1)
            if in_system > inputs.divergence_bound:
                run.diverged = True
                run.diverged_queue = "downlink"
                run.diverged_time = now
                continue
            in_system += 1
            admitted += 1
            wait.append(i)
            start_dl(now)
        elif kind == UPDATE_COMPLETE:
            item, started = payload
            cache_generation[item] = started
            refresh_completions.append(now)
            q.push(now + stream.next(), UPDATE_COMPLETE, ((item + 1) % s, now))
        else:  # DOWNLINK_COMPLETE
            i = payload
            busy = False
            in_system -= 1
            run.complete[i] = now
            run.delivered += 1
            start_dl(now)
    keep = run.delivered if run.diverged else run.n
    horizon = float(run.dl_start[:keep].max()) if keep else 0.0
    completions = np.asarray(refresh_completions)
    return run.finish({"update_completions": completions[completions <= horizon],
                       "update_horizon": horizon})


def _run_rea(inputs: RepInputs) -> RepOutputs:
    run = _Run(inputs)
    q = run.queue
    cache_generation = np.zeros(inputs.item_count)
    wait: deque = deque()
    busy = False
    in_system = 0

    def start_service(now: float) -> None:
        nonlocal busy
        if not busy and wait:
            i = wait.popleft()
            busy = True
            if inputs.update_flags[i]:
                run.generation[i] = now
                q.push(now + inputs.ul_service[i], UPLINK_COMPLETE, i)
            else:
                run.generation[i] = cache_generation[inputs.items[i]]
                run.dl_start[i] = now
                q.push(now + inputs.dl_service[i], DOWNLINK_COMPLETE, i)

    admitted = 0
    q.push(inputs.arrivals[0], ARRIVAL, 0)
    while q and run.delivered < (admitted if run.diverged else run.n):
        now, kind, i = q.pop()
        if kind == ARRIVAL:
            if run.diverged:
                continue  # drain admitted requests, admit nothing new
            if i + 1 < run.n:
                q.push(inputs.arrivals[i + 1], ARRIVAL, i + 1)
            if in_system > inputs.divergence_bound:
                run.diverged = True
                run.diverged_queue = "shared"
                run.diverged_time = now
                continue
            in_system += 1
            admitted += 1
            wait.append(i)
            start_service(now)
        elif kind == UPLINK_COMPLETE:
            # Fetch done: install the new version, then transmit it.
            cache_generation[inputs.items[i]] = run.generation[i]
            run.dl_start[i] = now
            q.push(now + inputs.dl_service[i], DOWNLINK_COMPLETE, i)
        else:  # DOWNLINK_COMPLETE
            busy = False
            in_system -= 1
            run.complete[i] = now
            run.delivered += 1
            start_service(now)
    keep = run.delivered if run.diverged else run.n
    return run.finish({"update_flags": inputs.update_flags[:keep]})


def run_events(inputs: RepInputs) -> RepOutputs:
    if isinstance(inputs.scheme, Conventional):
        return _run_conventional(inputs)
    if isinstance(inputs.scheme, Rsuc):
        return _run_rsuc(inputs)
    if isinstance(inputs.scheme, Rea):
        return _run_rea(inputs)
    raise TypeError(f"unknown scheme {inputs.scheme!r}")
