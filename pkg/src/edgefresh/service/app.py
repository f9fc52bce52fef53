"""FastAPI application exposing the closed forms, optimizers, simulator,
and sweep families over HTTP.

The CLI talks to this app (in-process or over the wire) rather than to
the core modules, so there is exactly one computation path. Domain errors
map to a stable JSON shape with a ``kind`` the client can turn into an
exit code: usage (422), infeasible (409), overload (409).
"""

from __future__ import annotations

import io

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse

from .. import analytic, experiments, optimize
from ..desim import SimConfig, simulate
from ..errors import (
    DegenerateSplitError,
    EdgeFreshError,
    InfeasibleAoIError,
    InfeasibleLoadError,
    InvalidParameterError,
    OverloadError,
    UnboundedAoIError,
)
from ..model import (
    ChannelRates,
    Popularity,
    RadioParams,
    Rea,
    Rsuc,
    Scenario,
    check_scheme,
    popularity_weights,
    rates_from_radio,
)
from .schemas import (
    AnalyticRequest,
    AnalyticResponse,
    DiagnosticsSummary,
    ErrorBody,
    OptimizeRequest,
    OptimizeResponse,
    PopularityRequest,
    PopularityResponse,
    RadioPayload,
    RatesResponse,
    SimulateRequest,
    SimulateResponse,
    SweepRequest,
    SweepResponse,
    parse_popularity_field,
)

__all__ = ["create_app", "error_kind"]


def error_kind(exc: EdgeFreshError) -> str:
    if isinstance(exc, OverloadError):
        return "overload"
    if isinstance(exc, (InfeasibleAoIError, InfeasibleLoadError,
                        UnboundedAoIError, DegenerateSplitError)):
        return "infeasible"
    return "usage"


def _scheme_for(req: AnalyticRequest, scenario: Scenario):
    if req.scheme is None:
        raise InvalidParameterError(
            f"metric {req.metric!r} needs a scheme block with its parameters")
    scheme = req.scheme.build(scenario.item_count)
    check_scheme(scheme, scenario)
    return scheme


def _require_kind(req: AnalyticRequest) -> str:
    kind = req.scheme.kind if req.scheme is not None else req.scheme_kind
    if kind is None:
        raise InvalidParameterError(
            f"metric {req.metric!r} needs a scheme or scheme_kind")
    return kind


def _analytic_value(req: AnalyticRequest) -> AnalyticResponse:
    scenario = req.scenario.build()
    rates = scenario.rates
    items = scenario.item_count
    lam = scenario.total_lambda
    metric = req.metric

    if metric in ("latency", "aoi"):
        scheme = _scheme_for(req, scenario)
        point = experiments.analytic_point(scenario, scheme)
        return AnalyticResponse(metric=metric, scheme=scheme.kind, value=point[metric])

    kind = _require_kind(req)
    if metric == "capacity":
        if kind == "conventional":
            return AnalyticResponse(metric=metric, scheme=kind,
                                    value=analytic.conv_capacity(rates))
        if kind == "rsuc":
            if req.aoi_cap is None:
                raise InvalidParameterError("rsuc capacity needs an aoi_cap")
            return AnalyticResponse(
                metric=metric, scheme=kind,
                value=optimize.rsuc_capacity_at_aoi(rates, items, req.aoi_cap))
        if req.scheme is not None and req.scheme.p is not None:
            scheme = _scheme_for(req, scenario)
            ratio = float(np.dot(scenario.request_weights(), scheme.p))
            return AnalyticResponse(metric=metric, scheme=kind,
                                    value=analytic.rea_capacity(rates, ratio))
        if req.aoi_cap is not None:
            pop = Popularity.explicit(tuple(scenario.request_weights()))
            return AnalyticResponse(
                metric=metric, scheme=kind,
                value=experiments.rea_capacity_at_aoi(rates, items, pop, req.aoi_cap))
        raise InvalidParameterError("rea capacity needs p or an aoi_cap")
    if metric == "opt_beta":
        if kind == "conventional":
            return AnalyticResponse(metric=metric, scheme=kind,
                                    value=analytic.conv_opt_beta(rates, lam))
        if kind == "rsuc":
            return AnalyticResponse(metric=metric, scheme=kind,
                                    value=optimize.rsuc_aoi_opt_beta(rates, items))
        raise InvalidParameterError("opt_beta applies to conventional or rsuc")
    if metric == "min_latency":
        if kind != "conventional":
            raise InvalidParameterError("min_latency applies to conventional")
        return AnalyticResponse(metric=metric, scheme=kind,
                                value=analytic.conv_min_latency(rates, lam))
    if metric == "threshold":
        if kind != "rsuc":
            raise InvalidParameterError("threshold applies to rsuc")
        return AnalyticResponse(metric=metric, scheme=kind,
                                value=analytic.rsuc_tradeoff_threshold(rates, items))
    if metric == "min_aoi":
        if kind == "rsuc":
            return AnalyticResponse(metric=metric, scheme=kind,
                                    value=optimize.rsuc_min_aoi(rates, items))
        if kind == "rea":
            return AnalyticResponse(metric=metric, scheme=kind,
                                    value=optimize.rea_min_aoi(rates, scenario))
        raise InvalidParameterError("min_aoi applies to rsuc or rea")
    if metric in ("moments", "update_ratio"):
        if kind != "rea":
            raise InvalidParameterError(f"{metric} applies to rea")
        scheme = _scheme_for(req, scenario)
        moments = analytic.rea_service_moments(rates, scenario, scheme.p)
        if metric == "update_ratio":
            return AnalyticResponse(metric=metric, scheme=kind,
                                    value=moments.update_ratio)
        return AnalyticResponse(
            metric=metric, scheme=kind,
            values={"mean_x": moments.mean_x, "mean_x2": moments.mean_x2,
                    "update_ratio": moments.update_ratio,
                    "utilization": analytic.rea_utilization(
                        rates, lam, moments.update_ratio)})
    if metric == "item_aoi":
        if kind != "rea":
            raise InvalidParameterError("item_aoi applies to rea")
        scheme = _scheme_for(req, scenario)
        return AnalyticResponse(
            metric=metric, scheme=kind,
            item_values=[analytic.rea_aoi_item(rates, ls, ps)
                         for ls, ps in zip(scenario.lambda_s, scheme.p)])
    if metric == "opt_p":
        if kind != "rea":
            raise InvalidParameterError("opt_p applies to rea")
        return AnalyticResponse(
            metric=metric, scheme=kind,
            item_values=[analytic.rea_aoi_opt_p(rates, ls)
                         for ls in scenario.lambda_s])
    raise InvalidParameterError(f"unknown metric {metric!r}")


def _optimize(req: OptimizeRequest) -> OptimizeResponse:
    scenario = req.scenario.build()
    rates = scenario.rates
    lam = scenario.total_lambda
    items = scenario.item_count
    if req.problem == "p1":
        beta = optimize.p1_opt_beta(rates, lam)
        return OptimizeResponse(problem="p1", beta=beta,
                                latency=analytic.conv_latency(rates, lam, beta),
                                aoi=analytic.conv_aoi_at_beta(rates, lam, beta))
    if req.problem == "p2":
        if req.weight_aoi is None:
            raise InvalidParameterError("p2 needs weight_aoi")
        sol = optimize.p2_solve(rates, lam, items,
                                optimize.P2Config(weight_aoi=req.weight_aoi))
        return OptimizeResponse(problem="p2", beta=sol.beta, residual=sol.residual,
                                iterations=sol.iterations, boundary=sol.boundary,
                                latency=analytic.rsuc_latency(rates, lam, sol.beta),
                                aoi=analytic.rsuc_aoi(rates, items, sol.beta))
    if req.problem == "p3":
        if req.aoi_cap is None:
            raise InvalidParameterError("p3 needs aoi_cap")
        beta = optimize.p3_min_beta(rates, lam, items, req.aoi_cap)
        return OptimizeResponse(problem="p3", beta=beta,
                                latency=analytic.rsuc_latency(rates, lam, beta),
                                aoi=analytic.rsuc_aoi(rates, items, beta))
    if req.aoi_cap is None:
        raise InvalidParameterError("p4 needs aoi_cap")
    sol = optimize.p4_solve(rates, scenario, req.aoi_cap)
    return OptimizeResponse(problem="p4", p=list(sol.p),
                            update_ratio=sol.update_ratio,
                            clamped=sorted(sol.clamped), iterations=sol.iterations,
                            latency=analytic.rea_latency(rates, lam, sol.update_ratio),
                            aoi=analytic.rea_aoi_avg(rates, scenario, sol.p))


def _sim_config(req: SimulateRequest) -> SimConfig:
    scenario = req.scenario.build()
    scheme = req.scheme.build(scenario.item_count)
    return SimConfig(scenario=scenario, scheme=scheme, seed=req.seed,
                     replications=req.replications,
                     warmup_fraction=req.warmup_fraction,
                     warmup_duration=req.warmup_duration,
                     stop_requests=req.stop_requests,
                     stop_duration=req.stop_duration,
                     divergence_bound=req.divergence_bound,
                     engine=req.engine, constant_service=req.constant_service)


def _diag_summary(diags, scheme) -> DiagnosticsSummary:
    ratios: dict[str, list[float]] = {}
    for diag in diags:
        for name, check in diag.little.items():
            ratios.setdefault(name, []).append(check.ratio)
    summary = DiagnosticsSummary(
        little_ratio={name: float(np.mean(vals)) for name, vals in sorted(ratios.items())})
    if isinstance(scheme, Rsuc):
        means = [d.update_interval_mean for d in diags if d.update_interval_mean is not None]
        variances = [d.update_interval_var for d in diags if d.update_interval_var is not None]
        if means:
            summary.update_interval_mean = float(np.mean(means))
        if variances:
            summary.update_interval_var = float(np.mean(variances))
    elif isinstance(scheme, Rea):
        stacked = [d.inter_update_mean for d in diags if d.inter_update_mean is not None]
        if stacked:
            summary.inter_update_mean = [
                float(x) for x in np.nanmean(np.asarray(stacked, dtype=float), axis=0)]
    return summary


def _sweep_spec(req: SweepRequest) -> experiments.SweepSpec:
    rates = ChannelRates(req.r_ul, req.r_dl)
    schemes = tuple(s.build(req.items) for s in req.schemes)
    trace = None
    if req.trace is not None:
        trace = experiments.ArrivalTrace(times=tuple(req.trace.times),
                                         rates=tuple(req.trace.rates),
                                         horizon=req.trace.horizon)
    return experiments.SweepSpec(
        family=req.family, rates=rates, items=req.items,
        popularity=parse_popularity_field(req.popularity), schemes=schemes,
        grid=tuple(req.grid), lambda_total=req.lambda_total,
        items_grid=tuple(req.items_grid),
        popularities=tuple(parse_popularity_field(p) for p in req.popularities),
        trace=trace, seed=req.seed, replications=req.replications,
        stop_requests=req.stop_requests, divergence_bound=req.divergence_bound,
        engine=req.engine, workers=req.workers)


def create_app() -> FastAPI:
    from .. import __version__

    app = FastAPI(title="edgefresh", version=__version__)

    @app.exception_handler(EdgeFreshError)
    async def _domain_error(_request: Request, exc: EdgeFreshError):
        kind = error_kind(exc)
        extra = {}
        if isinstance(exc, OverloadError) and exc.queue:
            extra["queue"] = exc.queue
        partial = getattr(exc, "partial", None)
        if partial is not None:
            extra["partial"] = {"latency": partial.mean_latency,
                                "aoi": partial.mean_aoi,
                                "n_delivered": partial.n_delivered}
        body = ErrorBody(kind=kind, error=type(exc).__name__, message=str(exc),
                         extra=extra or None)
        status = 422 if kind == "usage" else 409
        return JSONResponse(status_code=status, content=body.model_dump())

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_request: Request, exc: RequestValidationError):
        body = ErrorBody(kind="usage", error="RequestValidationError",
                         message="; ".join(
                             f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}"
                             for err in exc.errors()))
        return JSONResponse(status_code=422, content=body.model_dump())

    @app.get("/health")
    async def health():
        return {"status": "ok", "version": __version__}

    @app.post("/rates", response_model=RatesResponse)
    async def rates(req: RadioPayload):
        channel = rates_from_radio(RadioParams(
            bandwidth_hz=req.bandwidth_hz, content_bits=req.content_bits,
            sinr_ul=req.sinr_ul, sinr_dl=req.sinr_dl))
        return RatesResponse(r_ul=channel.r_ul, r_dl=channel.r_dl)

    @app.post("/popularity", response_model=PopularityResponse)
    async def popularity(req: PopularityRequest):
        pop = parse_popularity_field(req.popularity)
        weights = popularity_weights(pop, req.items)
        return PopularityResponse(items=req.items, popularity=pop.spec(),
                                  weights=[float(w) for w in weights])

    @app.post("/analytic", response_model=AnalyticResponse,
              response_model_exclude_none=True)
    async def analytic_endpoint(req: AnalyticRequest):
        return _analytic_value(req)

    @app.post("/optimize", response_model=OptimizeResponse,
              response_model_exclude_none=True)
    async def optimize_endpoint(req: OptimizeRequest):
        return _optimize(req)

    @app.post("/simulate", response_model=SimulateResponse,
              response_model_exclude_none=True)
    async def simulate_endpoint(req: SimulateRequest):
        cfg = _sim_config(req)
        result = simulate(cfg, collect_records=req.records,
                          collect_diagnostics=req.diagnostics)
        diagnostics = (_diag_summary(result.diagnostics, cfg.scheme)
                       if req.diagnostics else None)
        records_csv = None
        if req.records:
            buffer = io.StringIO()
            result.records.write_csv(buffer)
            records_csv = buffer.getvalue()
        perf = result.perf
        return SimulateResponse(
            scheme=cfg.scheme.kind, latency=perf.mean_latency, aoi=perf.mean_aoi,
            latency_ci95=perf.latency_ci95, aoi_ci95=perf.aoi_ci95,
            n_delivered=perf.n_delivered, rep_latency=list(result.rep_latency),
            rep_aoi=list(result.rep_aoi), diagnostics=diagnostics,
            records_csv=records_csv)

    @app.post("/simulate/records")
    async def simulate_records(req: SimulateRequest):
        """Same run as /simulate, but the body is the records CSV itself."""
        cfg = _sim_config(req)
        result = simulate(cfg, collect_records=True)
        buffer = io.StringIO()
        result.records.write_csv(buffer)
        return PlainTextResponse(buffer.getvalue(), media_type="text/csv")

    @app.post("/sweep", response_model=SweepResponse)
    async def sweep(req: SweepRequest):
        spec = _sweep_spec(req)
        rows = [{key: experiments.json_safe(value) for key, value in row.items()}
                for row in experiments.run_sweep(spec)]
        return SweepResponse(family=spec.family, rows=rows)

    return app
