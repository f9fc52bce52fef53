"""Command-line frontend.

The CLI is a thin client of the HTTP service: every computation goes
through the FastAPI app, normally mounted in-process, or over the wire
when ``--server`` points at a running instance. The client side only
parses flags, reads local files, and formats output.

Exit codes: 0 success, 2 usage error, 3 infeasible problem, 4 overload.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

from .desim import DEFAULT_SEED
from .errors import ConfigError, InvalidParameterError
from .experiments import FAMILIES, ArrivalTrace, rows_to_csv, write_table
from .model import CONFIG_KEYS, load_config_mapping

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_OVERLOAD = 4

_EXIT_BY_KIND = {"usage": EXIT_USAGE, "infeasible": EXIT_INFEASIBLE,
                 "overload": EXIT_OVERLOAD}

METRICS = ("latency", "aoi", "capacity", "opt_beta", "min_latency", "threshold",
           "min_aoi", "moments", "update_ratio", "item_aoi", "opt_p",
           "rates", "popularity")


class Client:
    """POSTs JSON either to an in-process app or to a remote server."""

    def __init__(self, server: str | None):
        if server:
            self._http = httpx.Client(base_url=server, timeout=None)
        else:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from starlette.testclient import TestClient

            from .service import create_app

            self._http = TestClient(create_app(), raise_server_exceptions=False)

    def post(self, path: str, payload: dict) -> httpx.Response:
        return self._http.post(path, json=payload)

    def close(self) -> None:
        self._http.close()


def _fail(message: str, code: int) -> "SystemExit":
    print(f"error: {message}", file=sys.stderr)
    return SystemExit(code)


def _call(client: Client, path: str, payload: dict) -> dict:
    response = client.post(path, payload)
    if response.status_code == 200:
        return response.json()
    try:
        body = response.json()
        kind = body.get("kind", "usage")
        message = body.get("message", response.text)
    except ValueError:
        kind, message = "usage", response.text or f"HTTP {response.status_code}"
    raise _fail(message, _EXIT_BY_KIND.get(kind, EXIT_USAGE))


# --- flag plumbing -----------------------------------------------------------

def _add_scenario_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("scenario")
    group.add_argument("--config", help="YAML config file; flags override its values")
    group.add_argument("--r-ul", type=float, help="uplink service rate, items/s")
    group.add_argument("--r-dl", type=float, help="downlink service rate, items/s")
    group.add_argument("--items", type=int, help="number of content items")
    group.add_argument("--lambda-total", type=float, help="total request rate, /s")
    group.add_argument("--popularity",
                       help="'uniform', 'zipf:THETA', or 'explicit:w1,w2,...'")
    group.add_argument("--lambda-list",
                       help="comma-separated per-item request rates")


def _add_scheme_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("scheme")
    group.add_argument("--scheme", choices=("conventional", "rsuc", "rea"),
                       help="cache-update scheme")
    group.add_argument("--beta", type=float,
                       help="uplink bandwidth share (conventional, rsuc)")
    group.add_argument("--p", help="update probability, scalar or comma list (rea)")


def _add_output_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=("table", "json"), default="table",
                        help="output style (default table)")
    parser.add_argument("--digits", type=int, default=6,
                        help="significant digits for table output (default 6)")


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise _fail(f"{flag} expects comma-separated numbers: {exc}", EXIT_USAGE)


def _config_mapping(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    try:
        mapping = load_config_mapping(args.config)
    except (ConfigError, OSError) as exc:
        raise _fail(str(exc), EXIT_USAGE)
    # Typos in a config file must not pass silently.
    unknown = set(mapping) - CONFIG_KEYS
    if unknown:
        raise _fail(f"{args.config}: unknown config keys {sorted(unknown)}",
                    EXIT_USAGE)
    return mapping


def _scenario_payload(args, cfg: dict) -> dict:
    payload = {key: cfg[key] for key in
               ("r_ul", "r_dl", "items", "lambda_total", "popularity", "lambda_list")
               if key in cfg}
    if args.r_ul is not None:
        payload["r_ul"] = args.r_ul
    if args.r_dl is not None:
        payload["r_dl"] = args.r_dl
    if args.items is not None:
        payload["items"] = args.items
    if args.lambda_total is not None:
        payload["lambda_total"] = args.lambda_total
        payload.pop("lambda_list", None)
    if args.popularity is not None:
        payload["popularity"] = args.popularity
    if args.lambda_list is not None:
        payload["lambda_list"] = _parse_float_list(args.lambda_list, "--lambda-list")
        payload.pop("lambda_total", None)
        payload.pop("popularity", None)
    if "r_ul" not in payload or "r_dl" not in payload:
        raise _fail("missing --r-ul/--r-dl (or a --config providing them)", EXIT_USAGE)
    if "lambda_total" not in payload and "lambda_list" not in payload:
        payload["lambda_total"] = 0.0
    return payload


def _scheme_payload(args, cfg: dict) -> dict | None:
    block = dict(cfg.get("scheme") or {})
    if args.scheme is not None:
        if block.get("kind") not in (None, args.scheme):
            # switching kinds drops the other kind's knob
            block = {}
        block["kind"] = args.scheme
    if args.beta is not None:
        block["beta"] = args.beta
        block.pop("p", None)
    if getattr(args, "p", None) is not None:
        values = _parse_float_list(args.p, "--p")
        block["p"] = values[0] if len(values) == 1 else values
        block.pop("beta", None)
    return block or None


def _fmt(value, digits: int) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, f".{digits}g")
    if isinstance(value, (list, tuple)):
        return " ".join(_fmt(v, digits) for v in value) if value else "-"
    if value is None:
        return "-"
    return str(value)


def _print_pairs(pairs, args) -> None:
    if args.format == "json":
        print(json.dumps({key: value for key, value in pairs}, indent=2))
        return
    width = max(len(key) for key, _ in pairs)
    for key, value in pairs:
        print(f"{key:<{width}}  {_fmt(value, args.digits)}")


# --- subcommands -------------------------------------------------------------

def _cmd_analytic(args, client: Client) -> int:
    if args.metric == "rates":
        for flag in ("bandwidth_hz", "content_bits", "sinr_ul", "sinr_dl"):
            if getattr(args, flag) is None:
                raise _fail(f"--metric rates needs --{flag.replace('_', '-')}",
                            EXIT_USAGE)
        body = _call(client, "/rates", {
            "bandwidth_hz": args.bandwidth_hz, "content_bits": args.content_bits,
            "sinr_ul": args.sinr_ul, "sinr_dl": args.sinr_dl})
        _print_pairs([("r_ul", body["r_ul"]), ("r_dl", body["r_dl"])], args)
        return EXIT_OK
    if args.metric == "popularity":
        if args.items is None:
            raise _fail("--metric popularity needs --items", EXIT_USAGE)
        body = _call(client, "/popularity", {
            "items": args.items, "popularity": args.popularity or "uniform"})
        _print_pairs([("popularity", body["popularity"]),
                      ("weights", body["weights"])], args)
        return EXIT_OK

    cfg = _config_mapping(args)
    payload: dict = {"scenario": _scenario_payload(args, cfg), "metric": args.metric}
    scheme = _scheme_payload(args, cfg)
    if scheme is not None:
        if len(scheme) == 1 and "kind" in scheme:
            payload["scheme_kind"] = scheme["kind"]
        else:
            payload["scheme"] = scheme
    if args.aoi_cap is not None:
        payload["aoi_cap"] = args.aoi_cap
    body = _call(client, "/analytic", payload)
    pairs = [("metric", body["metric"]), ("scheme", body["scheme"])]
    if "value" in body:
        pairs.append((body["metric"], body["value"]))
    if "values" in body:
        pairs.extend(body["values"].items())
    if "item_values" in body:
        pairs.append((body["metric"], body["item_values"]))
    _print_pairs(pairs, args)
    return EXIT_OK


def _cmd_optimize(args, client: Client) -> int:
    cfg = _config_mapping(args)
    payload: dict = {"scenario": _scenario_payload(args, cfg), "problem": args.problem}
    if args.weight_aoi is not None:
        payload["weight_aoi"] = args.weight_aoi
    if args.aoi_cap is not None:
        payload["aoi_cap"] = args.aoi_cap
    body = _call(client, "/optimize", payload)
    order = ("problem", "beta", "p", "update_ratio", "latency", "aoi",
             "residual", "iterations", "boundary", "clamped")
    _print_pairs([(key, body[key]) for key in order if key in body], args)
    return EXIT_OK


def _cmd_simulate(args, client: Client) -> int:
    cfg = _config_mapping(args)
    scheme = _scheme_payload(args, cfg)
    if scheme is None:
        raise _fail("simulate needs a scheme (--scheme plus --beta/--p, "
                    "or a config file)", EXIT_USAGE)
    payload: dict = {
        "scenario": _scenario_payload(args, cfg), "scheme": scheme,
        "seed": args.seed, "replications": args.replications,
        "divergence_bound": args.divergence_bound, "engine": args.engine,
        "constant_service": args.constant_service,
        "diagnostics": args.diagnostics, "records": args.records is not None,
    }
    for key in ("warmup_fraction", "warmup_duration", "stop_requests", "stop_duration"):
        value = getattr(args, key)
        if value is not None:
            payload[key] = value
    body = _call(client, "/simulate", payload)
    if args.records is not None:
        csv_text = body.pop("records_csv", "") or ""
        with open(args.records, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
    pairs = [(key, body[key]) for key in
             ("scheme", "latency", "aoi", "latency_ci95", "aoi_ci95", "n_delivered")]
    if args.diagnostics and body.get("diagnostics"):
        diag = body["diagnostics"]
        for name, ratio in diag.get("little_ratio", {}).items():
            pairs.append((f"little_{name}", ratio))
        for key in ("update_interval_mean", "update_interval_var", "inter_update_mean"):
            if diag.get(key) is not None:
                pairs.append((key, diag[key]))
    _print_pairs(pairs, args)
    return EXIT_OK


def _parse_scheme_token(token: str) -> dict:
    kind, _, value = token.partition(":")
    kind = kind.strip()
    if kind in ("conventional", "rsuc"):
        if not value:
            raise _fail(f"scheme token {token!r} needs ':beta'", EXIT_USAGE)
        return {"kind": kind, "beta": float(value)}
    if kind == "rea":
        if not value:
            raise _fail(f"scheme token {token!r} needs ':p'", EXIT_USAGE)
        parts = [float(x) for x in value.split(";")]
        return {"kind": "rea", "p": parts[0] if len(parts) == 1 else parts}
    raise _fail(f"unknown scheme kind in token {token!r}", EXIT_USAGE)


def _cmd_sweep(args, client: Client) -> int:
    payload: dict = {
        "family": args.family,
        "items": args.items if args.items is not None else 1,
        "popularity": args.popularity or "uniform",
        "seed": args.seed, "replications": args.replications,
        "stop_requests": args.stop_requests,
        "divergence_bound": args.divergence_bound,
        "engine": args.engine, "workers": args.workers,
    }
    if args.r_ul is None or args.r_dl is None:
        raise _fail("sweep needs --r-ul and --r-dl", EXIT_USAGE)
    payload["r_ul"] = args.r_ul
    payload["r_dl"] = args.r_dl
    if args.lambda_total is not None:
        payload["lambda_total"] = args.lambda_total
    if args.grid:
        payload["grid"] = _parse_float_list(args.grid, "--grid")
    if args.schemes:
        payload["schemes"] = [_parse_scheme_token(tok)
                              for tok in args.schemes.split(",") if tok.strip()]
    if args.items_grid:
        payload["items_grid"] = [int(x) for x in
                                 _parse_float_list(args.items_grid, "--items-grid")]
    if args.popularities:
        payload["popularities"] = [tok.strip() for tok in args.popularities.split(",")]
    if args.trace:
        try:
            trace = ArrivalTrace.from_csv(args.trace, horizon=args.horizon)
        except (InvalidParameterError, OSError) as exc:
            raise _fail(str(exc), EXIT_USAGE)
        payload["trace"] = {"times": list(trace.times), "rates": list(trace.rates),
                            "horizon": trace.horizon}
    body = _call(client, "/sweep", payload)
    rows = body["rows"]
    if not rows:
        raise _fail("sweep produced no rows", EXIT_USAGE)
    if args.output:
        write_table(rows, args.output)
        print(f"wrote {len(rows)} rows to {args.output}")
    else:
        sys.stdout.write(rows_to_csv(rows))
    return EXIT_OK


def _cmd_serve(args, _client) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgefresh",
        description="Freshness-aware edge caching: closed forms, optimizers, "
                    "simulation, and experiment sweeps.")
    parser.add_argument("--server",
                        help="base URL of a running service; default runs in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analytic", help="evaluate a closed-form metric")
    _add_scenario_flags(p_an)
    _add_scheme_flags(p_an)
    _add_output_flags(p_an)
    p_an.add_argument("--metric", choices=METRICS, required=True)
    p_an.add_argument("--aoi-cap", type=float,
                      help="mean-AoI cap (capacity metrics)")
    radio = p_an.add_argument_group("radio (--metric rates)")
    radio.add_argument("--bandwidth-hz", type=float)
    radio.add_argument("--content-bits", type=float)
    radio.add_argument("--sinr-ul", type=float)
    radio.add_argument("--sinr-dl", type=float)
    p_an.set_defaults(func=_cmd_analytic)

    p_opt = sub.add_parser("optimize", help="solve one of the four control problems")
    _add_scenario_flags(p_opt)
    _add_output_flags(p_opt)
    p_opt.add_argument("--problem", choices=("p1", "p2", "p3", "p4"), required=True)
    p_opt.add_argument("--weight-aoi", type=float, help="AoI weight (p2)")
    p_opt.add_argument("--aoi-cap", type=float, help="mean-AoI cap (p3, p4)")
    p_opt.set_defaults(func=_cmd_optimize)

    p_sim = sub.add_parser("simulate", help="run the discrete-event simulator")
    _add_scenario_flags(p_sim)
    _add_scheme_flags(p_sim)
    _add_output_flags(p_sim)
    p_sim.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_sim.add_argument("--replications", type=int, default=10)
    p_sim.add_argument("--warmup-fraction", type=float)
    p_sim.add_argument("--warmup-duration", type=float)
    p_sim.add_argument("--stop-requests", type=int)
    p_sim.add_argument("--stop-duration", type=float)
    p_sim.add_argument("--divergence-bound", type=int, default=10_000_000)
    p_sim.add_argument("--engine", choices=("vectorized", "events"),
                       default="vectorized")
    p_sim.add_argument("--constant-service", action="store_true",
                       help="deterministic service times (debugging aid)")
    p_sim.add_argument("--diagnostics", action="store_true",
                       help="report Little's-law and update-process checks")
    p_sim.add_argument("--records", metavar="PATH",
                       help="also write per-delivery records CSV to PATH")
    p_sim.set_defaults(func=_cmd_simulate)

    p_sw = sub.add_parser("sweep", help="run an experiment family")
    _add_scenario_flags(p_sw)
    _add_output_flags(p_sw)
    p_sw.add_argument("--family", choices=FAMILIES, required=True)
    p_sw.add_argument("--grid", help="comma-separated swept values "
                                     "(rates for validation, AoI caps otherwise)")
    p_sw.add_argument("--schemes",
                      help="comma-separated operating points, e.g. "
                           "'conventional:0.5,rsuc:0.2,rea:1.0'")
    p_sw.add_argument("--items-grid", help="comma-separated item counts "
                                           "(scheme_compare)")
    p_sw.add_argument("--popularities", help="comma-separated popularity specs "
                                             "(scheme_compare)")
    p_sw.add_argument("--trace", metavar="PATH",
                      help="arrival-rate trace CSV with header time,lambda")
    p_sw.add_argument("--horizon", type=float,
                      help="end time of the last trace segment")
    p_sw.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_sw.add_argument("--replications", type=int, default=10)
    p_sw.add_argument("--stop-requests", type=int, default=1_000_000)
    p_sw.add_argument("--divergence-bound", type=int, default=10_000_000)
    p_sw.add_argument("--engine", choices=("vectorized", "events"),
                      default="vectorized")
    p_sw.add_argument("--workers", type=int, default=1,
                      help="parallel worker processes for sweep points")
    p_sw.add_argument("--output", metavar="PATH",
                      help="write the table to PATH (.csv or .json); "
                           "default prints CSV to stdout")
    p_sw.set_defaults(func=_cmd_sweep)

    p_srv = sub.add_parser("serve", help="run the HTTP service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return _cmd_serve(args, None)
    client = Client(args.server)
    try:
        return args.func(args, client)
    except SystemExit:
        raise
    finally:
        client.close()


if __name__ == "__main__":
    sys.exit(main())
