"""Experiment families over the three schemes, emitting plot-ready tables.

Five families: closed-form-vs-simulation validation, freshness-latency
trade-off curves, freshness-capacity curves, multi-item scheme comparison,
and runs driven by a piecewise-constant arrival-rate trace. Every family
returns a list of plain row dicts; ``write_table`` serializes them to CSV
or JSON by file extension.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytic, optimize
from .desim import DEFAULT_SEED, SimConfig, ci_halfwidth, run_replication, simulate
from .desim.engine import ARRIVAL_STREAM, purpose_rng
from .errors import (
    InfeasibleAoIError,
    InvalidParameterError,
    OverloadError,
    SimulationDiverged,
)
from .model import (
    ChannelRates,
    Conventional,
    Popularity,
    Rea,
    Rsuc,
    Scenario,
    SchemeParams,
)

__all__ = [
    "FAMILIES",
    "SweepSpec",
    "ArrivalTrace",
    "analytic_point",
    "default_cap_grid",
    "rea_capacity_at_aoi",
    "run_validation",
    "run_aoi_latency_tradeoff",
    "run_capacity_aoi",
    "run_scheme_compare",
    "run_trace",
    "run_sweep",
    "json_safe",
    "rows_to_csv",
    "write_table",
]

FAMILIES = ("validation", "aoi_latency_tradeoff", "capacity_aoi",
            "scheme_compare", "trace")

LATENCY_TOL = 0.03
# Delivery freshness rides on an approximate departure process, so its
# validation band is wider for the request-adaptive scheme.
AOI_TOL = {"conventional": 0.03, "rsuc": 0.03, "rea": 0.05}


# --- sweep description -------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """One experiment-family run: what to sweep, over which fixed scenario.

    ``grid`` is the swept variable: total request rates for the
    validation family, mean-AoI caps for the trade-off and capacity
    families. An empty grid asks for the family default (30 log-spaced
    caps from 1.05x to 100x the feasibility floor).
    """

    family: str
    rates: ChannelRates
    items: int = 1
    popularity: Popularity = field(default_factory=Popularity.uniform)
    schemes: tuple[SchemeParams, ...] = ()
    grid: tuple[float, ...] = ()
    lambda_total: float = 0.0
    items_grid: tuple[int, ...] = ()
    popularities: tuple[Popularity, ...] = ()
    trace: "ArrivalTrace | None" = None
    simulate: bool = False
    seed: int = DEFAULT_SEED
    replications: int = 10
    stop_requests: int = 1_000_000
    divergence_bound: int = 10_000_000
    engine: str = "vectorized"
    workers: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameterError(
                f"family must be one of {FAMILIES}, got {self.family!r}")
        if int(self.items) < 1:
            raise InvalidParameterError("items must be >= 1")
        grid = tuple(float(g) for g in self.grid)
        if any(not math.isfinite(g) or g <= 0 for g in grid):
            raise InvalidParameterError("grid values must be finite and > 0")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidParameterError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        if self.family == "validation" and not self.schemes:
            raise InvalidParameterError("validation needs at least one scheme")
        if self.family == "validation" and not grid:
            raise InvalidParameterError("validation needs a lambda_total grid")
        if self.family in ("aoi_latency_tradeoff", "capacity_aoi", "scheme_compare"):
            if not float(self.lambda_total) >= 0.0:
                raise InvalidParameterError("lambda_total must be >= 0")
        if self.family == "trace" and self.trace is None:
            raise InvalidParameterError("trace family needs an ArrivalTrace")
        if int(self.workers) < 1:
            raise InvalidParameterError("workers must be >= 1")


def default_cap_grid(floor: float, points: int = 30) -> tuple[float, ...]:
    """Log-spaced AoI caps from just above the floor to well past it."""
    if not floor > 0:
        raise InvalidParameterError("floor must be > 0")
    return tuple(float(x) for x in np.geomspace(1.05 * floor, 100.0 * floor, points))


# --- shared helpers ----------------------------------------------------------

def _scheme_desc(scheme: SchemeParams) -> str:
    if isinstance(scheme, (Conventional, Rsuc)):
        return f"beta={scheme.beta:.6g}"
    probs = scheme.p
    if len(set(probs)) == 1:
        return f"p={probs[0]:.6g}"
    return "p=" + ";".join(format(x, ".6g") for x in probs)


def analytic_point(scenario: Scenario, scheme: SchemeParams) -> dict:
    """Closed-form mean latency and mean AoI for one operating point."""
    rates = scenario.rates
    lam = scenario.total_lambda
    if isinstance(scheme, Conventional):
        return {"latency": analytic.conv_latency(rates, lam, scheme.beta),
                "aoi": analytic.conv_aoi_at_beta(rates, lam, scheme.beta)}
    if isinstance(scheme, Rsuc):
        return {"latency": analytic.rsuc_latency(rates, lam, scheme.beta),
                "aoi": analytic.rsuc_aoi(rates, scenario.item_count, scheme.beta)}
    if isinstance(scheme, Rea):
        ratio = analytic.rea_update_ratio(scenario, scheme.p)
        return {"latency": analytic.rea_latency(rates, lam, ratio),
                "aoi": analytic.rea_aoi_avg(rates, scenario, scheme.p)}
    raise InvalidParameterError(f"unknown scheme {scheme!r}")


def _sim_config(spec: SweepSpec, scenario: Scenario, scheme: SchemeParams) -> SimConfig:
    return SimConfig(scenario=scenario, scheme=scheme, seed=spec.seed,
                     replications=spec.replications, stop_requests=spec.stop_requests,
                     divergence_bound=spec.divergence_bound, engine=spec.engine)


def _map_points(spec: SweepSpec, fn, points):
    """Evaluate fn over points, fanning out when workers > 1.

    Rows come back in point order either way, so output tables are
    deterministic regardless of worker count.
    """
    points = list(points)
    if spec.workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            return list(pool.map(fn, points))
    return [fn(pt) for pt in points]


# --- validation --------------------------------------------------------------

def _validation_point(args) -> dict:
    spec, lambda_total, scheme = args
    scenario = Scenario.from_popularity(spec.rates, spec.items, lambda_total,
                                        spec.popularity)
    row = {"family": "validation", "scheme": scheme.kind,
           "params": _scheme_desc(scheme), "lambda_total": lambda_total,
           "analytic_latency": math.nan, "analytic_aoi": math.nan,
           "sim_latency": math.nan, "sim_aoi": math.nan,
           "latency_ci95": math.nan, "aoi_ci95": math.nan,
           "latency_rel_err": math.nan, "aoi_rel_err": math.nan,
           "latency_ok": False, "aoi_ok": False,
           "n_delivered": 0, "status": "ok"}
    try:
        point = analytic_point(scenario, scheme)
    except OverloadError:
        row["status"] = "overloaded"
        return row
    row["analytic_latency"] = point["latency"]
    row["analytic_aoi"] = point["aoi"]
    try:
        result = simulate(_sim_config(spec, scenario, scheme))
        perf = result.perf
    except SimulationDiverged as exc:
        row["status"] = "overloaded"
        perf = exc.partial
        if perf is None:
            return row
    row.update(sim_latency=perf.mean_latency, sim_aoi=perf.mean_aoi,
               latency_ci95=perf.latency_ci95, aoi_ci95=perf.aoi_ci95,
               n_delivered=perf.n_delivered)
    if row["status"] != "ok":
        return row
    aoi_tol = AOI_TOL[scheme.kind]
    row["latency_rel_err"] = abs(perf.mean_latency - point["latency"]) / point["latency"]
    row["aoi_rel_err"] = abs(perf.mean_aoi - point["aoi"]) / point["aoi"]
    # Agreement: analytic value inside the simulated CI widened by the
    # family tolerance.
    row["latency_ok"] = (abs(point["latency"] - perf.mean_latency)
                         <= perf.latency_ci95 + LATENCY_TOL * point["latency"])
    row["aoi_ok"] = (abs(point["aoi"] - perf.mean_aoi)
                     <= perf.aoi_ci95 + aoi_tol * point["aoi"])
    return row


def run_validation(spec: SweepSpec) -> list[dict]:
    """Pair closed-form and simulated metrics over a request-rate grid."""
    points = [(spec, lam, scheme) for lam in spec.grid for scheme in spec.schemes]
    return _map_points(spec, _validation_point, points)


# --- AoI-latency trade-off ---------------------------------------------------

def _tradeoff_rows(rates: ChannelRates, scenario: Scenario, caps) -> list[dict]:
    lam = scenario.total_lambda
    items = scenario.item_count
    rows = []
    for cap in caps:
        row = {"family": "aoi_latency_tradeoff", "scheme": "rsuc", "aoi_cap": cap,
               "latency": math.nan, "aoi": math.nan, "knob": math.nan,
               "reserved": math.nan, "status": "ok"}
        try:
            beta = optimize.p3_min_beta(rates, lam, items, cap)
            row.update(knob=beta, reserved=1.0 - beta,
                       latency=analytic.rsuc_latency(rates, lam, beta),
                       aoi=analytic.rsuc_aoi(rates, items, beta))
        except InfeasibleAoIError:
            row["status"] = "infeasible"
        except OverloadError:
            row["status"] = "overloaded"
        rows.append(row)
    for cap in caps:
        row = {"family": "aoi_latency_tradeoff", "scheme": "rea", "aoi_cap": cap,
               "latency": math.nan, "aoi": math.nan, "knob": math.nan,
               "reserved": math.nan, "p_items": None, "aoi_items": None,
               "status": "ok"}
        try:
            sol = optimize.p4_solve(rates, scenario, cap)
            row.update(knob=sol.update_ratio, reserved=1.0 - sol.update_ratio,
                       latency=analytic.rea_latency(rates, lam, sol.update_ratio),
                       aoi=analytic.rea_aoi_avg(rates, scenario, sol.p),
                       p_items=list(sol.p),
                       aoi_items=[analytic.rea_aoi_item(rates, ls, ps)
                                  for ls, ps in zip(scenario.lambda_s, sol.p)])
        except InfeasibleAoIError:
            row["status"] = "infeasible"
        except OverloadError:
            row["status"] = "overloaded"
        rows.append(row)
    return rows


def run_aoi_latency_tradeoff(spec: SweepSpec) -> list[dict]:
    """Minimum latency achievable at each mean-AoI cap, per scheme."""
    if not spec.lambda_total > 0:
        raise InvalidParameterError("aoi_latency_tradeoff needs lambda_total > 0")
    scenario = Scenario.from_popularity(spec.rates, spec.items, spec.lambda_total,
                                        spec.popularity)
    if spec.grid:
        return _tradeoff_rows(spec.rates, scenario, spec.grid)
    rows = _tradeoff_rows(
        spec.rates, scenario,
        default_cap_grid(optimize.rsuc_min_aoi(spec.rates, spec.items)))
    rsuc_rows = [r for r in rows if r["scheme"] == "rsuc"]
    rea = _tradeoff_rows(
        spec.rates, scenario,
        default_cap_grid(optimize.rea_min_aoi(spec.rates, scenario)))
    return rsuc_rows + [r for r in rea if r["scheme"] == "rea"]


# --- capacity as a function of the AoI cap -----------------------------------

def rea_capacity_at_aoi(rates: ChannelRates, items: int, popularity: Popularity,
                        aoi_cap: float, *, rel_tol: float = 1e-6) -> float:
    """Largest total request rate the shared channel can carry under a cap.

    The minimum-update-ratio allocation for a trial rate either fits
    under the cap with utilization below one or it does not; feasibility
    is monotone in the rate, so plain bisection on (0, R_DL) applies.
    """
    cap = float(aoi_cap)
    if cap <= 1.0 / rates.r_ul + 1.0 / rates.r_dl:
        raise InfeasibleAoIError(
            f"aoi_cap = {cap:g} s does not exceed the always-update floor "
            f"{1.0 / rates.r_ul + 1.0 / rates.r_dl:g} s")

    def feasible(lam: float) -> bool:
        scenario = Scenario.from_popularity(rates, items, lam, popularity)
        try:
            sol = optimize.p4_solve(rates, scenario, cap)
        except InfeasibleAoIError:
            return False
        return analytic.rea_utilization(rates, lam, sol.update_ratio) < 1.0

    hi = rates.r_dl
    lo = min(1e-9 * hi, 0.5 * hi)
    if not feasible(lo):
        raise InfeasibleAoIError(f"aoi_cap = {cap:g} s admits no positive rate")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def run_capacity_aoi(spec: SweepSpec) -> list[dict]:
    """Supportable request rate at each mean-AoI cap, per scheme."""
    rsuc_caps = spec.grid or default_cap_grid(
        optimize.rsuc_min_aoi(spec.rates, spec.items))
    rea_caps = spec.grid or default_cap_grid(
        1.0 / spec.rates.r_ul + 1.0 / spec.rates.r_dl)
    rows = []
    for cap in rsuc_caps:
        row = {"family": "capacity_aoi", "scheme": "rsuc", "aoi_cap": cap,
               "capacity": math.nan, "status": "ok"}
        try:
            row["capacity"] = optimize.rsuc_capacity_at_aoi(spec.rates, spec.items, cap)
        except InfeasibleAoIError:
            row["status"] = "infeasible"
        rows.append(row)
    for cap in rea_caps:
        row = {"family": "capacity_aoi", "scheme": "rea", "aoi_cap": cap,
               "capacity": math.nan, "status": "ok"}
        try:
            row["capacity"] = rea_capacity_at_aoi(spec.rates, spec.items,
                                                  spec.popularity, cap)
        except InfeasibleAoIError:
            row["status"] = "infeasible"
        rows.append(row)
    return rows


# --- multi-item scheme comparison --------------------------------------------

def run_scheme_compare(spec: SweepSpec) -> list[dict]:
    """Trade-off curves across item counts and popularity profiles.

    One row per (items, popularity, scheme, aoi_cap); request-adaptive
    rows carry the per-item probabilities and per-item AoI so
    heterogeneity across ranks stays visible.
    """
    if not spec.lambda_total > 0:
        raise InvalidParameterError("scheme_compare needs lambda_total > 0")
    items_grid = spec.items_grid or (spec.items,)
    pops = spec.popularities or (spec.popularity,)
    rows = []
    for items in items_grid:
        for pop in pops:
            scenario = Scenario.from_popularity(spec.rates, items,
                                                spec.lambda_total, pop)
            caps = spec.grid or default_cap_grid(
                max(optimize.rsuc_min_aoi(spec.rates, items),
                    optimize.rea_min_aoi(spec.rates, scenario)))
            for row in _tradeoff_rows(spec.rates, scenario, caps):
                row.update(family="scheme_compare", items=items, popularity=pop.spec())
                rows.append(row)
    return rows


# --- trace-driven runs -------------------------------------------------------

@dataclass(frozen=True)
class ArrivalTrace:
    """Piecewise-constant arrival rate: segment start times and rates.

    ``horizon`` closes the final segment; a trailing zero-rate row in the
    CSV can stand in for it.
    """

    times: tuple[float, ...]
    rates: tuple[float, ...]
    horizon: float

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        rates = tuple(float(r) for r in self.rates)
        if not times or len(times) != len(rates):
            raise InvalidParameterError("trace needs matching times and rates")
        if times[0] != 0.0:
            raise InvalidParameterError("trace must start at time 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidParameterError("trace times must be strictly increasing")
        if any(r < 0 for r in rates):
            raise InvalidParameterError("trace rates must be >= 0")
        if not self.horizon > times[-1]:
            raise InvalidParameterError("horizon must exceed the last segment start")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "horizon", float(self.horizon))

    @classmethod
    def constant(cls, lambda_total: float, horizon: float) -> "ArrivalTrace":
        return cls(times=(0.0,), rates=(float(lambda_total),), horizon=horizon)

    @classmethod
    def from_csv(cls, path, horizon: float | None = None) -> "ArrivalTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip().lower() for c in header] != ["time", "lambda"]:
                raise InvalidParameterError(
                    f"{path}: expected header 'time,lambda', got {header!r}")
            rows = []
            for lineno, parts in enumerate(reader, start=2):
                if not parts or (len(parts) == 1 and not parts[0].strip()):
                    continue
                if len(parts) != 2:
                    raise InvalidParameterError(f"{path}:{lineno}: expected 2 fields")
                try:
                    rows.append((float(parts[0]), float(parts[1])))
                except ValueError as exc:
                    raise InvalidParameterError(f"{path}:{lineno}: {exc}") from exc
        if not rows:
            raise InvalidParameterError(f"{path}: trace has no segments")
        if horizon is None:
            if rows[-1][1] == 0.0 and len(rows) > 1:
                horizon = rows[-1][0]
                rows = rows[:-1]
            else:
                raise InvalidParameterError(
                    f"{path}: give a horizon or end the trace with a zero-rate row")
        return cls(times=tuple(t for t, _ in rows),
                   rates=tuple(r for _, r in rows), horizon=float(horizon))

    def segments(self) -> list[tuple[float, float, float]]:
        """(start, end, rate) triples covering [0, horizon)."""
        ends = self.times[1:] + (self.horizon,)
        return [(t0, t1, r) for t0, t1, r in zip(self.times, ends, self.rates)]

    def mean_rate(self) -> float:
        return sum((t1 - t0) * r for t0, t1, r in self.segments()) / self.horizon

    def sample_arrivals(self, rng: np.random.Generator) -> np.ndarray:
        """One arrival-time realization: per-segment counts, then sorted
        uniform positions within the segment."""
        parts = []
        for t0, t1, rate in self.segments():
            if rate <= 0:
                continue
            count = rng.poisson(rate * (t1 - t0))
            if count:
                parts.append(t0 + np.sort(rng.random(count)) * (t1 - t0))
        if not parts:
            return np.empty(0)
        return np.concatenate(parts)


def run_trace(trace: ArrivalTrace, schemes, rates: ChannelRates, *, items: int = 1,
              popularity: Popularity | None = None, seed: int = DEFAULT_SEED,
              replications: int = 10, warmup_duration: float = 0.0,
              divergence_bound: int = 10_000_000,
              engine: str = "vectorized") -> list[dict]:
    """Simulate each scheme against the trace; report per-segment means.

    Buckets are the trace's own segments. Quasi-static closed-form columns
    evaluate each segment's rate as if it were stationary; segments whose
    rate exceeds a scheme's capacity get infinite predictions and, if the
    backlog trips the divergence bound, an ``overloaded`` status from
    that bucket onward.
    """
    popularity = popularity or Popularity.uniform()
    if not 0.0 <= warmup_duration < trace.horizon:
        raise InvalidParameterError("warmup_duration must lie in [0, horizon)")
    segs = trace.segments()
    rows: list[dict] = []
    for scheme in schemes:
        # bucket stats across replications: list of per-rep means
        lat = [[] for _ in segs]
        aoi = [[] for _ in segs]
        counts = [0 for _ in segs]
        overall_lat, overall_aoi = [], []
        total_count = 0
        diverged_at: float | None = None
        # Only the item weights matter here; arrivals are supplied explicitly.
        scenario = Scenario.from_popularity(rates, items, 1.0, popularity)
        for rep in range(replications):
            arrivals = trace.sample_arrivals(purpose_rng(seed, rep, ARRIVAL_STREAM))
            if len(arrivals) == 0:
                continue
            out = run_replication(scenario, scheme, arrivals, seed=seed,
                                  replication=rep, engine=engine,
                                  divergence_bound=divergence_bound)
            log = out.log[:out.n_completed] if out.diverged else out.log
            if out.diverged:
                diverged_at = out.diverged_time if diverged_at is None else min(
                    diverged_at, out.diverged_time)
            arr = log.arrival_time
            keep = arr >= warmup_duration
            if keep.any():
                overall_lat.append(float(log.latency[keep].mean()))
                overall_aoi.append(float(log.aoi[keep].mean()))
                total_count += int(keep.sum())
            for k, (t0, t1, _rate) in enumerate(segs):
                mask = keep & (arr >= t0) & (arr < t1)
                if mask.any():
                    lat[k].append(float(log.latency[mask].mean()))
                    aoi[k].append(float(log.aoi[mask].mean()))
                    counts[k] += int(mask.sum())
        for k, (t0, t1, rate) in enumerate(segs):
            row = {"family": "trace", "scheme": scheme.kind,
                   "params": _scheme_desc(scheme), "bucket": k,
                   "t_start": t0, "t_end": t1, "lambda_total": rate,
                   "n_delivered": counts[k],
                   "sim_latency": float(np.mean(lat[k])) if lat[k] else math.nan,
                   "sim_aoi": float(np.mean(aoi[k])) if aoi[k] else math.nan,
                   "latency_ci95": ci_halfwidth(lat[k]),
                   "aoi_ci95": ci_halfwidth(aoi[k]),
                   "analytic_latency": math.nan, "analytic_aoi": math.nan,
                   "status": "ok"}
            if rate > 0:
                try:
                    seg_scenario = Scenario.from_popularity(rates, items, rate, popularity)
                    point = analytic_point(seg_scenario, scheme)
                    row["analytic_latency"] = point["latency"]
                    row["analytic_aoi"] = point["aoi"]
                except OverloadError:
                    row["analytic_latency"] = math.inf
                    row["analytic_aoi"] = math.inf
                    row["status"] = "unstable"
            if diverged_at is not None and t1 > diverged_at:
                row["status"] = "overloaded"
            rows.append(row)
        rows.append({"family": "trace", "scheme": scheme.kind,
                     "params": _scheme_desc(scheme), "bucket": "overall",
                     "t_start": warmup_duration, "t_end": trace.horizon,
                     "lambda_total": trace.mean_rate(), "n_delivered": total_count,
                     "sim_latency": float(np.mean(overall_lat)) if overall_lat else math.nan,
                     "sim_aoi": float(np.mean(overall_aoi)) if overall_aoi else math.nan,
                     "latency_ci95": ci_halfwidth(overall_lat),
                     "aoi_ci95": ci_halfwidth(overall_aoi),
                     "analytic_latency": math.nan, "analytic_aoi": math.nan,
                     "status": "overloaded" if diverged_at is not None else "ok"})
    return rows


# --- dispatch and serialization ----------------------------------------------

def run_sweep(spec: SweepSpec) -> list[dict]:
    if spec.family == "validation":
        return run_validation(spec)
    if spec.family == "aoi_latency_tradeoff":
        return run_aoi_latency_tradeoff(spec)
    if spec.family == "capacity_aoi":
        return run_capacity_aoi(spec)
    if spec.family == "scheme_compare":
        return run_scheme_compare(spec)
    return run_trace(spec.trace, spec.schemes or _default_trace_schemes(),
                     spec.rates, items=spec.items, popularity=spec.popularity,
                     seed=spec.seed, replications=spec.replications,
                     divergence_bound=spec.divergence_bound, engine=spec.engine)


def _default_trace_schemes() -> tuple[SchemeParams, ...]:
    return (Conventional(beta=0.5), Rsuc(beta=0.2), Rea(p=(1.0,)))


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    if isinstance(value, (list, tuple)):
        return ";".join(format(float(v), ".12g") for v in value)
    return str(value)


def json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    return value


def rows_to_csv(rows: list[dict]) -> str:
    """RFC-4180-style CSV text with a header row; '.' decimal separator."""
    if not rows:
        raise InvalidParameterError("no rows to write")
    header = list(rows[0].keys())
    for row in rows[1:]:
        for key in row:
            if key not in header:
                header.append(key)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(row.get(key)) for key in header])
    return buffer.getvalue()


def write_table(rows: list[dict], path) -> None:
    """Serialize rows to CSV or JSON depending on the file extension."""
    path = str(path)
    if not rows:
        raise InvalidParameterError("no rows to write")
    if path.endswith(".json"):
        safe = [{k: json_safe(v) for k, v in row.items()} for row in rows]
        with open(path, "w") as fh:
            json.dump(safe, fh, indent=2)
            fh.write("\n")
        return
    if not path.endswith(".csv"):
        raise InvalidParameterError(f"unsupported table extension in {path!r}")
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))
