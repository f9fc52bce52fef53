"""Request/response bodies for the HTTP service.

These mirror the config-file keys one to one; payloads are converted to
domain objects through the same parsing helpers the config loader uses,
so flag, file, and API inputs cannot drift apart.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict

from ..model import (
    Popularity,
    Scenario,
    SchemeParams,
    parse_popularity_value,
    parse_scenario_mapping,
    parse_scheme_mapping,
)

SchemeKind = Literal["conventional", "rsuc", "rea"]

ANALYTIC_METRICS = ("latency", "aoi", "capacity", "opt_beta", "min_latency",
                    "threshold", "min_aoi", "moments", "update_ratio",
                    "item_aoi", "opt_p")


class ScenarioPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    r_ul: float
    r_dl: float
    items: int = 1
    lambda_total: float | None = None
    popularity: str | dict | None = None
    lambda_list: list[float] | None = None

    def build(self) -> Scenario:
        mapping: dict = {"r_ul": self.r_ul, "r_dl": self.r_dl}
        if self.lambda_list is not None:
            mapping["lambda_list"] = list(self.lambda_list)
            if "items" in self.model_fields_set:
                mapping["items"] = self.items
        else:
            mapping["items"] = self.items
            mapping["lambda_total"] = (
                0.0 if self.lambda_total is None else self.lambda_total)
            mapping["popularity"] = self.popularity or "uniform"
        return parse_scenario_mapping(mapping)


class SchemePayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: SchemeKind
    beta: float | None = None
    p: float | list[float] | None = None

    def build(self, items: int) -> SchemeParams:
        mapping: dict = {"kind": self.kind}
        if self.beta is not None:
            mapping["beta"] = self.beta
        if self.p is not None:
            mapping["p"] = self.p
        return parse_scheme_mapping(mapping, items)


class RadioPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bandwidth_hz: float
    content_bits: float
    sinr_ul: float
    sinr_dl: float


class RatesResponse(BaseModel):
    r_ul: float
    r_dl: float


class PopularityRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    items: int
    popularity: str | dict = "uniform"


class PopularityResponse(BaseModel):
    items: int
    popularity: str
    weights: list[float]


class AnalyticRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: ScenarioPayload
    metric: Literal[ANALYTIC_METRICS]  # type: ignore[valid-type]
    scheme: SchemePayload | None = None
    scheme_kind: SchemeKind | None = None
    aoi_cap: float | None = None


class AnalyticResponse(BaseModel):
    metric: str
    scheme: str
    value: float | None = None
    values: dict[str, float] | None = None
    item_values: list[float] | None = None


class OptimizeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: ScenarioPayload
    problem: Literal["p1", "p2", "p3", "p4"]
    weight_aoi: float | None = None
    aoi_cap: float | None = None


class OptimizeResponse(BaseModel):
    problem: str
    beta: float | None = None
    p: list[float] | None = None
    update_ratio: float | None = None
    latency: float | None = None
    aoi: float | None = None
    residual: float | None = None
    iterations: int | None = None
    boundary: bool | None = None
    clamped: list[int] | None = None


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: ScenarioPayload
    scheme: SchemePayload
    seed: int = 12345
    replications: int = 10
    warmup_fraction: float | None = None
    warmup_duration: float | None = None
    stop_requests: int | None = None
    stop_duration: float | None = None
    divergence_bound: int = 10_000_000
    engine: Literal["vectorized", "events"] = "vectorized"
    constant_service: bool = False
    diagnostics: bool = False
    records: bool = False


class DiagnosticsSummary(BaseModel):
    little_ratio: dict[str, float]
    update_interval_mean: float | None = None
    update_interval_var: float | None = None
    inter_update_mean: list[float] | None = None


class SimulateResponse(BaseModel):
    scheme: str
    latency: float
    aoi: float
    latency_ci95: float
    aoi_ci95: float
    n_delivered: int
    rep_latency: list[float]
    rep_aoi: list[float]
    diagnostics: DiagnosticsSummary | None = None
    records_csv: str | None = None


class TracePayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    times: list[float]
    rates: list[float]
    horizon: float


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: Literal["validation", "aoi_latency_tradeoff", "capacity_aoi",
                    "scheme_compare", "trace"]
    r_ul: float
    r_dl: float
    items: int = 1
    popularity: str | dict = "uniform"
    schemes: list[SchemePayload] = []
    grid: list[float] = []
    lambda_total: float = 0.0
    items_grid: list[int] = []
    popularities: list[str | dict] = []
    trace: TracePayload | None = None
    seed: int = 12345
    replications: int = 10
    stop_requests: int = 1_000_000
    divergence_bound: int = 10_000_000
    engine: Literal["vectorized", "events"] = "vectorized"
    workers: int = 1


class SweepResponse(BaseModel):
    family: str
    rows: list[dict]


class ErrorBody(BaseModel):
    kind: Literal["usage", "infeasible", "overload"]
    error: str
    message: str
    extra: dict | None = None


def parse_popularity_field(value) -> Popularity:
    return parse_popularity_value(value)
