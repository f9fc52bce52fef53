"""Replication orchestration: RNG streams, config, aggregation, diagnostics.

Randomness is split into independent streams keyed by (seed, replication,
purpose) so the arrival process, item choices, service draws, refresh
durations, and update coin flips never interleave. Identical configs
therefore reproduce bit-identical results, on either engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import InvalidParameterError, OverloadError, SimulationDiverged
from ..model import Conventional, PerfPoint, Rea, Rsuc, Scenario, SchemeParams, check_scheme
from .events import run_events
from .records import DeliveryLog, ExpStream, RepInputs, RepOutputs
from .vectorized import run_vectorized

__all__ = [
    "DEFAULT_SEED",
    "SimConfig",
    "SimResult",
    "LittleCheck",
    "RepDiagnostics",
    "draw_exponential",
    "assign_item",
    "assign_items",
    "purpose_rng",
    "run_replication",
    "measure_bounds",
    "perf_from_reps",
    "simulate",
]

DEFAULT_SEED = 12345

# Stream purposes; the numbers are part of the reproducibility contract.
ARRIVAL_STREAM = 1
ITEM_STREAM = 2
UPLINK_STREAM = 3
DOWNLINK_STREAM = 4
UPDATE_STREAM = 5
FLAG_STREAM = 6


def purpose_rng(seed: int, replication: int, purpose: int) -> np.random.Generator:
    """Independent generator for one (seed, replication, purpose) triple."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((int(seed), int(replication), int(purpose)))))


def draw_exponential(rng: np.random.Generator, mean: float, size=None):
    """Inverse-transform exponential draw(s): -mean * ln(u) with u in (0, 1]."""
    mean = float(mean)
    if not mean > 0:
        raise InvalidParameterError(f"mean must be > 0, got {mean!r}")
    if size is None:
        return float(-mean * np.log1p(-rng.random()))
    return -mean * np.log1p(-rng.random(size))


def assign_item(rng: np.random.Generator, weights) -> int:
    """Categorical draw of a single item index."""
    return int(assign_items(rng, weights, 1)[0])


def assign_items(rng: np.random.Generator, weights, size: int) -> np.ndarray:
    """Categorical draws via one uniform each against the weight CDF."""
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or len(weights) == 0 or np.any(weights < 0):
        raise InvalidParameterError("weights must be a nonempty nonnegative vector")
    total = weights.sum()
    if not np.isclose(total, 1.0, atol=1e-9):
        raise InvalidParameterError(f"weights must sum to 1, got {total!r}")
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0  # guard the top edge against rounding
    draws = np.searchsorted(cdf, rng.random(int(size)), side="right")
    return np.minimum(draws, len(weights) - 1).astype(np.int64)


@dataclass(frozen=True)
class SimConfig:
    """One simulation request: scenario, scheme, and run protocol.

    Exactly one stop rule applies: a post-warmup request count (default
    10^6) or a wall-clock duration in simulated seconds. Warmup is a
    request fraction (default 10%) or, with a duration stop, a time
    cutoff.
    """

    scenario: Scenario
    scheme: SchemeParams
    seed: int = DEFAULT_SEED
    replications: int = 10
    warmup_fraction: float | None = None
    warmup_duration: float | None = None
    stop_requests: int | None = None
    stop_duration: float | None = None
    divergence_bound: int = 10_000_000
    engine: str = "vectorized"
    constant_service: bool = False

    def __post_init__(self):
        check_scheme(self.scheme, self.scenario)
        if int(self.replications) < 1:
            raise InvalidParameterError("replications must be >= 1")
        object.__setattr__(self, "replications", int(self.replications))
        if self.engine not in ("vectorized", "events"):
            raise InvalidParameterError(
                f"engine must be 'vectorized' or 'events', got {self.engine!r}")
        if int(self.divergence_bound) < 1:
            raise InvalidParameterError("divergence_bound must be >= 1")
        object.__setattr__(self, "divergence_bound", int(self.divergence_bound))

        if self.stop_requests is not None and self.stop_duration is not None:
            raise InvalidParameterError("choose one of stop_requests or stop_duration")
        if self.stop_requests is None and self.stop_duration is None:
            object.__setattr__(self, "stop_requests", 1_000_000)
        if self.stop_requests is not None and int(self.stop_requests) < 1:
            raise InvalidParameterError("stop_requests must be >= 1")
        if self.stop_duration is not None and not self.stop_duration > 0:
            raise InvalidParameterError("stop_duration must be > 0")

        if self.warmup_fraction is not None and self.warmup_duration is not None:
            raise InvalidParameterError("choose one of warmup_fraction or warmup_duration")
        if self.warmup_duration is not None:
            if self.stop_duration is None:
                raise InvalidParameterError("warmup_duration requires stop_duration")
            if not 0.0 <= self.warmup_duration < self.stop_duration:
                raise InvalidParameterError(
                    "warmup_duration must lie in [0, stop_duration)")
        if self.warmup_fraction is None and self.warmup_duration is None:
            object.__setattr__(self, "warmup_fraction", 0.1)
        if self.warmup_fraction is not None and not 0.0 <= self.warmup_fraction < 1.0:
            raise InvalidParameterError("warmup_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class LittleCheck:
    """Time-average occupancy against throughput times mean sojourn."""

    time_avg_in_system: float
    throughput: float
    mean_sojourn: float

    @property
    def ratio(self) -> float:
        return self.time_avg_in_system / (self.throughput * self.mean_sojourn)


@dataclass(frozen=True)
class RepDiagnostics:
    """Engine-soundness measurements for one replication."""

    little: dict
    update_interval_mean: float | None = None
    update_interval_var: float | None = None
    update_interval_count: int = 0
    inter_update_mean: tuple | None = None
    inter_update_count: tuple | None = None


@dataclass(frozen=True)
class SimResult:
    perf: PerfPoint
    rep_latency: tuple
    rep_aoi: tuple
    records: DeliveryLog | None = None
    diagnostics: tuple | None = None


def _service_draw(rng, mean: float, n: int, constant: bool) -> np.ndarray:
    if constant:
        return np.full(n, mean)
    return -mean * np.log1p(-rng.random(n))


def run_replication(scenario: Scenario, scheme: SchemeParams, arrivals: np.ndarray,
                    *, seed: int, replication: int, engine: str = "vectorized",
                    constant_service: bool = False,
                    divergence_bound: int = 10_000_000) -> RepOutputs:
    """Run one replication over an externally supplied arrival sequence.

    Item choices, service times, refresh durations, and update flags come
    from the (seed, replication, purpose) streams, so the arrival process
    can be swapped (stationary, trace-driven, ...) without touching the
    rest of the randomness.
    """
    n = len(arrivals)
    rates = scenario.rates
    items = assign_items(purpose_rng(seed, replication, ITEM_STREAM),
                         scenario.request_weights(), n)
    inputs = RepInputs(scheme=scheme, item_count=scenario.item_count,
                       arrivals=np.asarray(arrivals, dtype=float), items=items,
                       dl_service=np.empty(0), divergence_bound=int(divergence_bound))

    if isinstance(scheme, Conventional):
        mu_ul = scheme.beta * rates.r_ul
        mu_dl = (1.0 - scheme.beta) * rates.r_dl
        if mu_ul <= 0.0:
            raise OverloadError("beta = 0 gives the fetch path no bandwidth; "
                                "nothing can ever be delivered", queue="uplink")
        if mu_dl <= 0.0:
            raise OverloadError("beta = 1 gives delivery no bandwidth", queue="downlink")
        inputs.ul_service = _service_draw(
            purpose_rng(seed, replication, UPLINK_STREAM), 1.0 / mu_ul, n, constant_service)
        inputs.dl_service = _service_draw(
            purpose_rng(seed, replication, DOWNLINK_STREAM), 1.0 / mu_dl, n, constant_service)
    elif isinstance(scheme, Rsuc):
        mu_dl = (1.0 - scheme.beta) * rates.r_dl
        if mu_dl <= 0.0:
            raise OverloadError("beta = 1 gives delivery no bandwidth", queue="downlink")
        inputs.dl_service = _service_draw(
            purpose_rng(seed, replication, DOWNLINK_STREAM), 1.0 / mu_dl, n, constant_service)
        mu_up = scheme.beta * rates.r_ul
        mean_up = 1.0 / mu_up if mu_up > 0.0 else math.inf
        inputs.update_stream = ExpStream(
            purpose_rng(seed, replication, UPDATE_STREAM), mean_up, constant_service)
    elif isinstance(scheme, Rea):
        probs = np.asarray(scheme.p)
        flags_rng = purpose_rng(seed, replication, FLAG_STREAM)
        inputs.update_flags = flags_rng.random(n) < probs[items]
        inputs.ul_service = _service_draw(
            purpose_rng(seed, replication, UPLINK_STREAM), 1.0 / rates.r_ul, n,
            constant_service)
        inputs.dl_service = _service_draw(
            purpose_rng(seed, replication, DOWNLINK_STREAM), 1.0 / rates.r_dl, n,
            constant_service)
    else:
        raise InvalidParameterError(f"unknown scheme {scheme!r}")

    runner = run_vectorized if engine == "vectorized" else run_events
    return runner(inputs)


def _gen_arrivals(cfg: SimConfig, replication: int) -> np.ndarray:
    lam = cfg.scenario.total_lambda
    rng = purpose_rng(cfg.seed, replication, ARRIVAL_STREAM)
    if cfg.stop_requests is not None:
        if lam <= 0:
            raise InvalidParameterError(
                "a request-count stop needs lambda_total > 0")
        n_measure = cfg.stop_requests
        frac = cfg.warmup_fraction
        n_warm = math.ceil(n_measure * frac / (1.0 - frac)) if frac > 0 else 0
        gaps = draw_exponential(rng, 1.0 / lam, n_warm + n_measure)
        return np.cumsum(gaps)
    # Duration stop: extend in chunks until past the horizon, then trim.
    horizon = cfg.stop_duration
    if lam <= 0:
        return np.empty(0)
    chunks = []
    last = 0.0
    while last <= horizon:
        expect = lam * (horizon - last)
        size = int(expect + 4.0 * math.sqrt(max(expect, 1.0))) + 64
        gaps = draw_exponential(rng, 1.0 / lam, size)
        cum = last + np.cumsum(gaps)
        chunks.append(cum)
        last = float(cum[-1])
    arrivals = np.concatenate(chunks)
    return arrivals[:np.searchsorted(arrivals, horizon, side="right")]


def measure_bounds(cfg: SimConfig, n_total: int, arrivals: np.ndarray) -> tuple[int, int]:
    """Index range [lo, hi) of measured requests for one replication."""
    if cfg.stop_requests is not None:
        return n_total - cfg.stop_requests, n_total
    if cfg.warmup_duration is not None:
        lo = int(np.searchsorted(arrivals, cfg.warmup_duration, side="right"))
    else:
        lo = math.ceil(cfg.warmup_fraction * n_total)
    return lo, n_total


def ci_halfwidth(values) -> float:
    """95% Student-t confidence half-width across replication means."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n < 2:
        return 0.0
    return float(stats.t.ppf(0.975, n - 1) * values.std(ddof=1) / math.sqrt(n))


def perf_from_reps(rep_latency, rep_aoi, n_delivered: int) -> PerfPoint:
    return PerfPoint(
        mean_latency=float(np.mean(rep_latency)) if len(rep_latency) else 0.0,
        mean_aoi=float(np.mean(rep_aoi)) if len(rep_aoi) else 0.0,
        latency_ci95=ci_halfwidth(rep_latency),
        aoi_ci95=ci_halfwidth(rep_aoi),
        n_delivered=int(n_delivered),
    )


def _little(entries, exits, meas_entries, meas_exits, t0: float, t1: float) -> LittleCheck:
    window = t1 - t0
    occupancy = np.clip(np.minimum(exits, t1) - np.maximum(entries, t0), 0.0, None).sum()
    return LittleCheck(
        time_avg_in_system=float(occupancy / window),
        throughput=len(meas_entries) / window,
        mean_sojourn=float(np.mean(meas_exits - meas_entries)),
    )


def _rep_diagnostics(out: RepOutputs, lo: int, hi: int, scheme: SchemeParams,
                     item_count: int) -> RepDiagnostics:
    log = out.log
    t0 = float(log.arrival_time[lo])
    t1 = float(log.arrival_time[hi - 1])
    little = {"system": _little(log.arrival_time, log.delivery_complete,
                                log.arrival_time[lo:hi], log.delivery_complete[lo:hi],
                                t0, t1)}
    extra: dict = {}
    if isinstance(scheme, Conventional):
        ul_complete = out.aux["ul_complete"]
        little["uplink"] = _little(log.arrival_time, ul_complete,
                                   log.arrival_time[lo:hi], ul_complete[lo:hi], t0, t1)
        little["downlink"] = _little(ul_complete, log.delivery_complete,
                                     ul_complete[lo:hi], log.delivery_complete[lo:hi],
                                     t0, t1)
    elif isinstance(scheme, Rsuc):
        comps = out.aux["update_completions"]
        s = item_count
        if len(comps) > s:
            # Per-item refresh interval: S consecutive refresh durations.
            gaps = comps[s:] - comps[:-s]
            extra = {"update_interval_mean": float(gaps.mean()),
                     "update_interval_var": float(gaps.var(ddof=1)) if len(gaps) > 1 else None,
                     "update_interval_count": len(gaps)}
    elif isinstance(scheme, Rea):
        flags = np.asarray(out.aux["update_flags"])[lo:hi]
        items = log.item[lo:hi]
        means, counts = [], []
        for item in range(item_count):
            positions = np.flatnonzero(flags[items == item])
            diffs = np.diff(positions)
            counts.append(int(len(diffs)))
            means.append(float(diffs.mean()) if len(diffs) else math.nan)
        extra = {"inter_update_mean": tuple(means), "inter_update_count": tuple(counts)}
    return RepDiagnostics(little=little, **extra)


def simulate(cfg: SimConfig, *, collect_records: bool = False,
             collect_diagnostics: bool = False) -> SimResult:
    """Run all replications and aggregate into a PerfPoint.

    Raises SimulationDiverged (with partial statistics attached) as soon
    as any replication trips the divergence bound.
    """
    rep_latency: list = []
    rep_aoi: list = []
    n_delivered = 0
    logs: list = []
    diagnostics: list = []

    for replication in range(cfg.replications):
        arrivals = _gen_arrivals(cfg, replication)
        lo, hi = measure_bounds(cfg, len(arrivals), arrivals)
        if hi <= lo:
            raise InvalidParameterError(
                "measurement window contains no requests; lengthen the run "
                "or shrink the warmup")
        out = run_replication(
            cfg.scenario, cfg.scheme, arrivals, seed=cfg.seed, replication=replication,
            engine=cfg.engine, constant_service=cfg.constant_service,
            divergence_bound=cfg.divergence_bound)
        if out.diverged:
            upto = min(hi, out.n_completed, len(out.log))
            if upto > lo:
                part = out.log[lo:upto]
                rep_latency.append(float(part.latency.mean()))
                rep_aoi.append(float(part.aoi.mean()))
                n_delivered += upto - lo
            partial = perf_from_reps(rep_latency, rep_aoi, n_delivered)
            raise SimulationDiverged(
                f"{out.diverged_queue} queue exceeded {cfg.divergence_bound} jobs "
                f"at t = {out.diverged_time:.6g} s (replication {replication})",
                queue=out.diverged_queue, sim_time=out.diverged_time, partial=partial)
        measured = out.log[lo:hi]
        rep_latency.append(float(measured.latency.mean()))
        rep_aoi.append(float(measured.aoi.mean()))
        n_delivered += hi - lo
        if collect_records:
            logs.append(measured)
        if collect_diagnostics:
            diagnostics.append(_rep_diagnostics(out, lo, hi, cfg.scheme,
                                                cfg.scenario.item_count))

    return SimResult(
        perf=perf_from_reps(rep_latency, rep_aoi, n_delivered),
        rep_latency=tuple(rep_latency),
        rep_aoi=tuple(rep_aoi),
        records=DeliveryLog.concat(logs) if collect_records else None,
        diagnostics=tuple(diagnostics) if collect_diagnostics else None,
    )
