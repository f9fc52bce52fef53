"""Domain types shared by every other module.

Times are seconds and rates are items-or-requests per second throughout;
there is no unit polymorphism. All types are immutable value objects and
safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError, InvalidParameterError

__all__ = [
    "CONFIG_KEYS",
    "ChannelRates",
    "RadioParams",
    "Popularity",
    "Scenario",
    "Conventional",
    "Rsuc",
    "Rea",
    "SchemeParams",
    "PerfPoint",
    "rates_from_radio",
    "popularity_weights",
    "check_scheme",
    "parse_config",
    "load_config",
    "dump_config",
]


def _require_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise InvalidParameterError(f"{name} must be a positive finite number, got {value!r}")
    return value


@dataclass(frozen=True)
class ChannelRates:
    """Normalized full-band service rates, in content items per second."""

    r_ul: float
    r_dl: float

    def __post_init__(self):
        object.__setattr__(self, "r_ul", _require_positive("r_ul", self.r_ul))
        object.__setattr__(self, "r_dl", _require_positive("r_dl", self.r_dl))


@dataclass(frozen=True)
class RadioParams:
    """Raw radio-level description used only to derive ChannelRates."""

    bandwidth_hz: float
    content_bits: float
    sinr_ul: float
    sinr_dl: float

    def __post_init__(self):
        for name in ("bandwidth_hz", "content_bits", "sinr_ul", "sinr_dl"):
            object.__setattr__(self, name, _require_positive(name, getattr(self, name)))


def rates_from_radio(params: RadioParams) -> ChannelRates:
    """Convert a radio description to normalized service rates.

    Each direction transmits one item in content_bits / (bandwidth * log2(1 + sinr))
    seconds, so the rate is the reciprocal.
    """
    per_bit = params.bandwidth_hz / params.content_bits
    return ChannelRates(
        r_ul=per_bit * math.log2(1.0 + params.sinr_ul),
        r_dl=per_bit * math.log2(1.0 + params.sinr_dl),
    )


@dataclass(frozen=True)
class Popularity:
    """Request-probability model over item ranks.

    kind is one of "uniform", "zipf" (power-law in rank with exponent
    theta), or "explicit" (caller-provided weights, normalized here).
    """

    kind: str
    theta: float = 0.0
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "zipf", "explicit"):
            raise InvalidParameterError(f"unknown popularity kind {self.kind!r}")
        if self.kind == "zipf":
            theta = float(self.theta)
            if not math.isfinite(theta) or theta < 0:
                raise InvalidParameterError(f"zipf exponent must be >= 0, got {theta!r}")
            object.__setattr__(self, "theta", theta)
        if self.kind == "explicit":
            if not self.weights:
                raise InvalidParameterError("explicit popularity requires a weights list")
            ws = tuple(float(w) for w in self.weights)
            if any(not math.isfinite(w) or w < 0 for w in ws):
                raise InvalidParameterError("explicit popularity weights must be >= 0")
            total = sum(ws)
            if total <= 0:
                raise InvalidParameterError("explicit popularity weights must not all be zero")
            object.__setattr__(self, "weights", tuple(w / total for w in ws))

    @classmethod
    def uniform(cls) -> "Popularity":
        return cls("uniform")

    @classmethod
    def zipf(cls, theta: float) -> "Popularity":
        return cls("zipf", theta=theta)

    @classmethod
    def explicit(cls, weights) -> "Popularity":
        return cls("explicit", weights=tuple(weights))

    @classmethod
    def parse(cls, text: str) -> "Popularity":
        """Parse the compact string form: "uniform", "zipf:0.56",
        "explicit:0.5,0.3,0.2"."""
        head, _, rest = str(text).partition(":")
        head = head.strip().lower()
        if head == "uniform":
            return cls.uniform()
        if head == "zipf":
            try:
                return cls.zipf(float(rest))
            except ValueError as exc:
                raise InvalidParameterError(f"bad zipf exponent {rest!r}") from exc
        if head == "explicit":
            try:
                weights = [float(tok) for tok in rest.split(",") if tok.strip()]
            except ValueError as exc:
                raise InvalidParameterError(f"bad explicit weights {rest!r}") from exc
            return cls.explicit(weights)
        raise InvalidParameterError(f"unknown popularity {text!r}")

    def spec(self) -> str:
        """Inverse of parse()."""
        if self.kind == "uniform":
            return "uniform"
        if self.kind == "zipf":
            return f"zipf:{self.theta:g}"
        return "explicit:" + ",".join(repr(w) for w in self.weights)


def popularity_weights(pop: Popularity, s: int) -> np.ndarray:
    """Request-probability vector of length s; sums to 1, non-increasing in
    rank for zipf."""
    s = int(s)
    if s < 1:
        raise InvalidParameterError(f"item count must be >= 1, got {s}")
    if pop.kind == "uniform":
        return np.full(s, 1.0 / s)
    if pop.kind == "zipf":
        raw = np.arange(1, s + 1, dtype=float) ** (-pop.theta)
        return raw / raw.sum()
    if len(pop.weights) != s:
        raise InvalidParameterError(
            f"explicit popularity has {len(pop.weights)} weights, expected {s}")
    return np.asarray(pop.weights, dtype=float)


@dataclass(frozen=True)
class Scenario:
    """Offered load: per-item Poisson request rates plus channel rates."""

    rates: ChannelRates
    lambda_s: tuple[float, ...]

    def __post_init__(self):
        if not self.lambda_s:
            raise InvalidParameterError("scenario needs at least one item")
        lam = tuple(float(x) for x in self.lambda_s)
        if any(not math.isfinite(x) or x < 0 for x in lam):
            raise InvalidParameterError("request rates must be finite and >= 0")
        object.__setattr__(self, "lambda_s", lam)

    @property
    def item_count(self) -> int:
        return len(self.lambda_s)

    @property
    def total_lambda(self) -> float:
        return float(sum(self.lambda_s))

    def request_weights(self) -> np.ndarray:
        """Per-item request probabilities; uniform when the total rate is 0."""
        total = self.total_lambda
        if total <= 0:
            return np.full(self.item_count, 1.0 / self.item_count)
        return np.asarray(self.lambda_s) / total

    @classmethod
    def from_popularity(cls, rates: ChannelRates, items: int, lambda_total: float,
                        popularity: Popularity) -> "Scenario":
        lambda_total = float(lambda_total)
        if not math.isfinite(lambda_total) or lambda_total < 0:
            raise InvalidParameterError(f"lambda_total must be >= 0, got {lambda_total!r}")
        weights = popularity_weights(popularity, items)
        return cls(rates=rates, lambda_s=tuple(lambda_total * w for w in weights))

    @classmethod
    def single(cls, rates: ChannelRates, lambda_total: float) -> "Scenario":
        return cls(rates=rates, lambda_s=(float(lambda_total),))


def _check_fraction(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise InvalidParameterError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class Conventional:
    """Fetch-then-deliver through a tandem uplink/downlink queue pair;
    beta is the uplink share of the band."""

    beta: float

    def __post_init__(self):
        object.__setattr__(self, "beta", _check_fraction("beta", self.beta))

    kind = "conventional"


@dataclass(frozen=True)
class Rsuc:
    """Continuous round-robin cache updater on the uplink share beta,
    cache-only delivery on the rest."""

    beta: float

    def __post_init__(self):
        object.__setattr__(self, "beta", _check_fraction("beta", self.beta))

    kind = "rsuc"


@dataclass(frozen=True)
class Rea:
    """Shared single channel; a request for item s refreshes the cache
    first with probability p[s]."""

    p: tuple[float, ...]

    def __post_init__(self):
        if not self.p:
            raise InvalidParameterError("rea needs at least one update probability")
        ps = tuple(_check_fraction("p", x) for x in self.p)
        object.__setattr__(self, "p", ps)

    kind = "rea"

    @classmethod
    def uniform(cls, p: float, items: int) -> "Rea":
        return cls(p=(float(p),) * int(items))


SchemeParams = Conventional | Rsuc | Rea


def check_scheme(scheme: SchemeParams, scenario: Scenario) -> None:
    """Validate scheme parameters against a scenario (vector lengths)."""
    if isinstance(scheme, Rea) and len(scheme.p) != scenario.item_count:
        raise InvalidParameterError(
            f"rea p-vector has {len(scheme.p)} entries, scenario has "
            f"{scenario.item_count} items")


@dataclass(frozen=True)
class PerfPoint:
    """Mean latency and mean AoI with 95% confidence half-widths.

    Analytic points carry zero CIs and n_delivered = 0.
    """

    mean_latency: float
    mean_aoi: float
    latency_ci95: float = 0.0
    aoi_ci95: float = 0.0
    n_delivered: int = 0

    def __post_init__(self):
        for name in ("mean_latency", "mean_aoi", "latency_ci95", "aoi_ci95"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise InvalidParameterError(f"{name} must be finite and >= 0, got {value!r}")
            object.__setattr__(self, name, value)
        if int(self.n_delivered) < 0:
            raise InvalidParameterError("n_delivered must be >= 0")
        object.__setattr__(self, "n_delivered", int(self.n_delivered))


# --- config files -----------------------------------------------------------
#
# A config is a flat mapping with keys r_ul, r_dl, items, either
# lambda_total + popularity or lambda_list, and a scheme block.
# Unknown keys are rejected so typos fail fast.

CONFIG_KEYS = {"r_ul", "r_dl", "items", "lambda_total", "popularity", "lambda_list", "scheme"}
_SCHEME_KEYS = {"kind", "beta", "p"}


def _cfg_float(mapping, key: str) -> float:
    # YAML leaves forms like "1e6" as strings; accept anything float() takes.
    value = mapping[key]
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r} must be a number, got {value!r}") from exc


def parse_popularity_value(value) -> Popularity:
    if isinstance(value, Popularity):
        return value
    if isinstance(value, str):
        return Popularity.parse(value)
    if isinstance(value, dict):
        unknown = set(value) - {"kind", "theta", "weights"}
        if unknown:
            raise ConfigError(f"unknown popularity keys {sorted(unknown)}")
        kind = value.get("kind")
        if kind == "uniform":
            return Popularity.uniform()
        if kind == "zipf":
            return Popularity.zipf(float(value.get("theta", 0.0)))
        if kind == "explicit":
            return Popularity.explicit(value.get("weights") or ())
        raise ConfigError(f"unknown popularity kind {kind!r}")
    raise ConfigError(f"cannot interpret popularity {value!r}")


def parse_scheme_mapping(value, items: int) -> SchemeParams:
    """Build SchemeParams from a config scheme block."""
    if isinstance(value, (Conventional, Rsuc, Rea)):
        return value
    if not isinstance(value, dict):
        raise ConfigError(f"scheme block must be a mapping, got {value!r}")
    unknown = set(value) - _SCHEME_KEYS
    if unknown:
        raise ConfigError(f"unknown scheme keys {sorted(unknown)}")
    kind = value.get("kind")
    if kind in ("conventional", "rsuc"):
        if "p" in value:
            raise ConfigError(f"scheme {kind!r} takes beta, not p")
        if "beta" not in value:
            raise ConfigError(f"scheme {kind!r} requires beta")
        beta = _cfg_float(value, "beta")
        return Conventional(beta) if kind == "conventional" else Rsuc(beta)
    if kind == "rea":
        if "beta" in value:
            raise ConfigError("scheme 'rea' takes p, not beta")
        if "p" not in value:
            raise ConfigError("scheme 'rea' requires p")
        p = value["p"]
        if isinstance(p, (list, tuple)):
            return Rea(tuple(float(x) for x in p))
        return Rea.uniform(float(p), items)
    raise ConfigError(f"unknown scheme kind {kind!r}")


def parse_scenario_mapping(mapping: dict) -> Scenario:
    """Build a Scenario from the non-scheme config keys."""
    if not isinstance(mapping, dict):
        raise ConfigError(f"config root must be a mapping, got {type(mapping).__name__}")
    unknown = set(mapping) - (CONFIG_KEYS - {"scheme"})
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    for key in ("r_ul", "r_dl"):
        if key not in mapping:
            raise ConfigError(f"config requires {key!r}")
    rates = ChannelRates(_cfg_float(mapping, "r_ul"), _cfg_float(mapping, "r_dl"))

    has_list = "lambda_list" in mapping
    has_total = "lambda_total" in mapping
    if has_list == has_total:
        raise ConfigError("config requires exactly one of lambda_list or "
                          "lambda_total + popularity")
    if has_list:
        if "popularity" in mapping:
            raise ConfigError("popularity is only valid with lambda_total")
        raw = mapping["lambda_list"]
        if not isinstance(raw, (list, tuple)) or not raw:
            raise ConfigError("lambda_list must be a nonempty list")
        lam = tuple(float(x) for x in raw)
        if "items" in mapping and int(mapping["items"]) != len(lam):
            raise ConfigError(
                f"items={mapping['items']} disagrees with lambda_list length {len(lam)}")
        return Scenario(rates=rates, lambda_s=lam)
    if "items" not in mapping:
        raise ConfigError("config requires 'items' with lambda_total")
    if "popularity" not in mapping:
        raise ConfigError("config requires 'popularity' with lambda_total")
    return Scenario.from_popularity(
        rates, int(mapping["items"]), _cfg_float(mapping, "lambda_total"),
        parse_popularity_value(mapping["popularity"]))


def parse_config(mapping: dict) -> tuple[Scenario, SchemeParams]:
    """Validate a config mapping and build (Scenario, SchemeParams)."""
    if not isinstance(mapping, dict):
        raise ConfigError(f"config root must be a mapping, got {type(mapping).__name__}")
    unknown = set(mapping) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    scenario = parse_scenario_mapping({k: v for k, v in mapping.items() if k != "scheme"})
    if "scheme" not in mapping:
        raise ConfigError("config requires a 'scheme' block")
    scheme = parse_scheme_mapping(mapping["scheme"], scenario.item_count)
    check_scheme(scheme, scenario)
    return scenario, scheme


def load_config_mapping(path) -> dict:
    """Read a YAML config file into a raw mapping, without validating it."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            mapping = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path}: config root must be a mapping")
    return mapping


def load_config(path) -> tuple[Scenario, SchemeParams]:
    """Read a YAML config file and build (Scenario, SchemeParams)."""
    return parse_config(load_config_mapping(path))


def dump_config(scenario: Scenario, scheme: SchemeParams) -> str:
    """Serialize back to the YAML config format (explicit lambda_list form)."""
    block: dict = {"kind": scheme.kind}
    if isinstance(scheme, Rea):
        block["p"] = list(scheme.p)
    else:
        block["beta"] = scheme.beta
    doc = {
        "r_ul": scenario.rates.r_ul,
        "r_dl": scenario.rates.r_dl,
        "items": scenario.item_count,
        "lambda_list": list(scenario.lambda_s),
        "scheme": block,
    }
    return yaml.safe_dump(doc, sort_keys=False)
