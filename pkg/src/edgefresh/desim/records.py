"""Data carriers shared by the two simulation engines.

A replication run consumes a RepInputs bundle (pre-drawn randomness plus
scheme parameters) and produces a RepOutputs bundle (per-request delivery
records plus engine-specific arrays for diagnostics). Pre-drawing all
randomness per purpose means the array engine and the event engine walk
identical sample paths.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from ..errors import InvalidParameterError
from ..model import SchemeParams

__all__ = [
    "DeliveryRecord",
    "DeliveryLog",
    "ExpStream",
    "RepInputs",
    "RepOutputs",
    "RECORD_COLUMNS",
]

RECORD_COLUMNS = ("item", "arrival_time", "delivery_start", "delivery_complete",
                  "content_generation_time", "latency", "aoi")


@dataclass(frozen=True)
class DeliveryRecord:
    """One completed delivery."""

    item: int
    arrival_time: float
    delivery_start: float
    delivery_complete: float
    content_generation_time: float

    @property
    def latency(self) -> float:
        return self.delivery_complete - self.arrival_time

    @property
    def aoi(self) -> float:
        return self.delivery_complete - self.content_generation_time


class DeliveryLog:
    """Column-oriented store of delivery records."""

    __slots__ = ("item", "arrival_time", "delivery_start", "delivery_complete",
                 "content_generation_time")

    def __init__(self, item, arrival_time, delivery_start, delivery_complete,
                 content_generation_time):
        self.item = np.asarray(item, dtype=np.int64)
        self.arrival_time = np.asarray(arrival_time, dtype=float)
        self.delivery_start = np.asarray(delivery_start, dtype=float)
        self.delivery_complete = np.asarray(delivery_complete, dtype=float)
        self.content_generation_time = np.asarray(content_generation_time, dtype=float)
        n = len(self.item)
        for name in self.__slots__:
            if len(getattr(self, name)) != n:
                raise InvalidParameterError("delivery log columns differ in length")

    def __len__(self) -> int:
        return len(self.item)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return DeliveryLog(*(getattr(self, name)[index] for name in self.__slots__))
        return DeliveryRecord(
            item=int(self.item[index]),
            arrival_time=float(self.arrival_time[index]),
            delivery_start=float(self.delivery_start[index]),
            delivery_complete=float(self.delivery_complete[index]),
            content_generation_time=float(self.content_generation_time[index]),
        )

    def __iter__(self) -> Iterator[DeliveryRecord]:
        for i in range(len(self)):
            yield self[i]

    @property
    def latency(self) -> np.ndarray:
        return self.delivery_complete - self.arrival_time

    @property
    def aoi(self) -> np.ndarray:
        return self.delivery_complete - self.content_generation_time

    @classmethod
    def empty(cls) -> "DeliveryLog":
        return cls(*([],) * 5)

    @classmethod
    def concat(cls, logs) -> "DeliveryLog":
        logs = list(logs)
        if not logs:
            return cls.empty()
        return cls(*(np.concatenate([getattr(log, name) for log in logs])
                     for name in cls.__slots__))

    def write_csv(self, target) -> None:
        """Write one row per delivery; times keep 12 significant digits."""
        if hasattr(target, "write"):
            self._write(target)
        else:
            with open(target, "w", encoding="utf-8", newline="") as fh:
                self._write(fh)

    def _write(self, fh) -> None:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        latency = self.latency
        aoi = self.aoi
        for i in range(len(self)):
            writer.writerow((
                int(self.item[i]),
                format(self.arrival_time[i], ".12g"),
                format(self.delivery_start[i], ".12g"),
                format(self.delivery_complete[i], ".12g"),
                format(self.content_generation_time[i], ".12g"),
                format(latency[i], ".12g"),
                format(aoi[i], ".12g"),
            ))


class ExpStream:
    """Deterministic sequence of exponential durations.

    Both engines pull from the same underlying uniform stream, so chunked
    and one-at-a-time consumption see identical values (the generator's
    block draws match its sequential draws).
    """

    def __init__(self, rng, mean: float, constant: bool = False):
        if mean < 0:
            raise InvalidParameterError(f"stream mean must be >= 0, got {mean!r}")
        self._rng = rng
        self.mean = float(mean)
        self.constant = bool(constant)
        self._buffer = np.empty(0)
        self._pos = 0

    def take(self, n: int) -> np.ndarray:
        n = int(n)
        if n <= 0:
            return np.empty(0)
        if self.constant:
            return np.full(n, self.mean)
        if not math.isfinite(self.mean):
            return np.full(n, np.inf)
        # u = 1 - random() lies in (0, 1], so log1p(-random()) is safe.
        return -self.mean * np.log1p(-self._rng.random(n))

    def next(self) -> float:
        if self._pos >= len(self._buffer):
            self._buffer = self.take(4096)
            self._pos = 0
        value = float(self._buffer[self._pos])
        self._pos += 1
        return value


@dataclass
class RepInputs:
    """Everything one replication needs, with all randomness pre-drawn."""

    scheme: SchemeParams
    item_count: int
    arrivals: np.ndarray
    items: np.ndarray
    dl_service: np.ndarray
    ul_service: np.ndarray | None = None
    update_flags: np.ndarray | None = None
    update_stream: ExpStream | None = None
    divergence_bound: int = 10_000_000


@dataclass
class RepOutputs:
    """Per-request results of one replication."""

    log: DeliveryLog
    diverged: bool = False
    diverged_queue: str | None = None
    diverged_time: float | None = None
    n_completed: int = 0
    aux: dict = field(default_factory=dict)
