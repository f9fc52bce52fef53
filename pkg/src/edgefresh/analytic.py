"""Closed-form steady-state performance of the three cache-update schemes.

Conventional: every request is fetched fresh through an uplink M/M/1 queue
(share beta of the band) in tandem with a downlink M/M/1 queue (share
1-beta). RSUC: a round-robin updater keeps the cache fresh on the uplink
share while requests are served from cache through the downlink share.
ReA: one shared channel; a request triggers fetch-then-deliver with a
per-item probability, else it is served from cache (M/G/1 with a two-phase
service mix).

Everything here is a pure function of immutable inputs. Stability checks
are strict inequalities with no epsilon margin: evaluation arbitrarily
close to capacity is allowed and simply returns large values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSplitError,
    InvalidParameterError,
    OverloadError,
    UnboundedAoIError,
)
from .model import ChannelRates, Scenario

__all__ = [
    "conv_latency",
    "conv_capacity",
    "conv_opt_beta",
    "conv_min_latency",
    "conv_aoi",
    "conv_aoi_at_beta",
    "rsuc_latency",
    "rsuc_aoi",
    "rsuc_tradeoff_threshold",
    "ReaServiceMoments",
    "rea_update_ratio",
    "rea_service_moments",
    "rea_latency",
    "rea_capacity",
    "rea_utilization",
    "rea_aoi_item",
    "rea_aoi_opt_p",
    "rea_aoi_avg",
]


def _check_lambda(lambda_total: float) -> float:
    lam = float(lambda_total)
    if not math.isfinite(lam) or lam < 0:
        raise InvalidParameterError(f"lambda_total must be finite and >= 0, got {lam!r}")
    return lam


def _check_beta(beta: float) -> float:
    b = float(beta)
    if not (0.0 <= b <= 1.0):
        raise InvalidParameterError(f"beta must lie in [0, 1], got {b!r}")
    return b


def _check_items(item_count: int) -> int:
    s = int(item_count)
    if s < 1:
        raise InvalidParameterError(f"item_count must be >= 1, got {item_count!r}")
    return s


def _check_ratio(update_ratio: float) -> float:
    p = float(update_ratio)
    if not (0.0 <= p <= 1.0):
        raise InvalidParameterError(f"update_ratio must lie in [0, 1], got {p!r}")
    return p


# --- conventional scheme ----------------------------------------------------

def conv_latency(rates: ChannelRates, lambda_total: float, beta: float) -> float:
    """Mean request latency of the tandem fetch-then-deliver pipeline.

    Sum of two M/M/1 sojourn times at service rates beta*r_ul and
    (1-beta)*r_dl, both fed by the full Poisson request stream.
    """
    lam = _check_lambda(lambda_total)
    b = _check_beta(beta)
    mu_ul = b * rates.r_ul
    mu_dl = (1.0 - b) * rates.r_dl
    if mu_ul <= lam:
        raise OverloadError(
            f"uplink unstable: beta*r_ul = {mu_ul:g} <= lambda_total = {lam:g}",
            queue="uplink")
    if mu_dl <= lam:
        raise OverloadError(
            f"downlink unstable: (1-beta)*r_dl = {mu_dl:g} <= lambda_total = {lam:g}",
            queue="downlink")
    return 1.0 / (mu_ul - lam) + 1.0 / (mu_dl - lam)


def conv_capacity(rates: ChannelRates) -> float:
    """Largest sustainable request rate over all bandwidth splits."""
    return 1.0 / (1.0 / rates.r_ul + 1.0 / rates.r_dl)


def conv_opt_beta(rates: ChannelRates, lambda_total: float) -> float:
    """Latency-minimizing bandwidth split for the conventional scheme."""
    lam = _check_lambda(lambda_total)
    cap = conv_capacity(rates)
    if lam >= cap:
        raise OverloadError(
            f"lambda_total = {lam:g} is at or above capacity {cap:g}")
    root = math.sqrt(rates.r_ul * rates.r_dl)
    return (root + lam * (1.0 - math.sqrt(rates.r_ul / rates.r_dl))) / (rates.r_ul + root)


def conv_min_latency(rates: ChannelRates, lambda_total: float) -> float:
    """Latency at the optimal split; equals conv_latency(conv_opt_beta)."""
    lam = _check_lambda(lambda_total)
    cap = conv_capacity(rates)
    if lam >= cap:
        raise OverloadError(
            f"lambda_total = {lam:g} is at or above capacity {cap:g}")
    num = (1.0 / math.sqrt(rates.r_ul) + 1.0 / math.sqrt(rates.r_dl)) ** 2
    return num / (1.0 - lam * (1.0 / rates.r_ul + 1.0 / rates.r_dl))


def conv_aoi_at_beta(rates: ChannelRates, lambda_total: float, beta: float) -> float:
    """Mean AoI at delivery for an explicit split.

    Age accrues from the uplink service start (queueing before the fetch
    does not stale the content), so this is one uplink service time plus
    one downlink sojourn.
    """
    lam = _check_lambda(lambda_total)
    b = _check_beta(beta)
    mu_ul = b * rates.r_ul
    mu_dl = (1.0 - b) * rates.r_dl
    if mu_ul <= lam:
        raise OverloadError(
            f"uplink unstable: beta*r_ul = {mu_ul:g} <= lambda_total = {lam:g}",
            queue="uplink")
    if mu_dl <= lam:
        raise OverloadError(
            f"downlink unstable: (1-beta)*r_dl = {mu_dl:g} <= lambda_total = {lam:g}",
            queue="downlink")
    return 1.0 / mu_ul + 1.0 / (mu_dl - lam)


def conv_aoi(rates: ChannelRates, lambda_total: float) -> float:
    """Mean AoI at delivery, evaluated at the latency-optimal split."""
    return conv_aoi_at_beta(rates, lambda_total, conv_opt_beta(rates, lambda_total))


# --- RSUC scheme ------------------------------------------------------------

def rsuc_latency(rates: ChannelRates, lambda_total: float, beta: float) -> float:
    """Mean request latency: a single M/M/1 sojourn on the downlink share."""
    lam = _check_lambda(lambda_total)
    b = _check_beta(beta)
    mu_dl = (1.0 - b) * rates.r_dl
    if mu_dl <= lam:
        raise OverloadError(
            f"downlink unstable: (1-beta)*r_dl = {mu_dl:g} <= lambda_total = {lam:g}",
            queue="downlink")
    return 1.0 / (mu_dl - lam)


def rsuc_aoi(rates: ChannelRates, item_count: int, beta: float) -> float:
    """Mean AoI at delivery under round-robin refresh.

    Age of the snapshot taken when the downlink transmission begins is the
    spent time in the per-item refresh cycle (an S-stage Erlang renewal)
    plus the fetch duration of the installed version; one downlink service
    time is added on top. Independent of the request rate.
    """
    s = _check_items(item_count)
    b = _check_beta(beta)
    if b == 0.0 or b == 1.0:
        raise DegenerateSplitError(
            f"beta = {b:g} starves {'the updater' if b == 0.0 else 'delivery'}; "
            "AoI is undefined")
    return (s + 3.0) / (2.0 * b * rates.r_ul) + 1.0 / ((1.0 - b) * rates.r_dl)


def rsuc_tradeoff_threshold(rates: ChannelRates, item_count: int) -> float:
    """Split below which AoI improves with more uplink share while latency
    worsens; above it both metrics degrade together."""
    s = _check_items(item_count)
    return 1.0 / (math.sqrt(2.0 * rates.r_ul / ((s + 3.0) * rates.r_dl)) + 1.0)


# --- ReA scheme -------------------------------------------------------------

@dataclass(frozen=True)
class ReaServiceMoments:
    """First two moments of the mixed fetch+deliver service time."""

    mean_x: float
    mean_x2: float
    update_ratio: float

    def __post_init__(self):
        if self.mean_x2 < self.mean_x ** 2:
            raise InvalidParameterError("service variance cannot be negative")


def _moments(r_ul: float, r_dl: float, p: float) -> tuple[float, float]:
    ex = p / r_ul + 1.0 / r_dl
    ex2 = 2.0 * p / r_ul ** 2 + 2.0 / r_dl ** 2 + 2.0 * p / (r_ul * r_dl)
    return ex, ex2


def rea_update_ratio(scenario: Scenario, p) -> float:
    """Request-rate-weighted mean update probability; 0 when no traffic."""
    probs = np.asarray(p, dtype=float)
    if probs.ndim != 1 or len(probs) != scenario.item_count:
        raise InvalidParameterError(
            f"p-vector length {probs.size} does not match {scenario.item_count} items")
    if np.any((probs < 0) | (probs > 1)):
        raise InvalidParameterError("update probabilities must lie in [0, 1]")
    lam = scenario.total_lambda
    if lam <= 0:
        return 0.0
    return float(np.dot(probs, scenario.lambda_s) / lam)


def rea_service_moments(rates: ChannelRates, scenario: Scenario, p) -> ReaServiceMoments:
    """Moments of the service time seen by the shared-channel queue."""
    ratio = rea_update_ratio(scenario, p)
    ex, ex2 = _moments(rates.r_ul, rates.r_dl, ratio)
    return ReaServiceMoments(mean_x=ex, mean_x2=ex2, update_ratio=ratio)


def rea_utilization(rates: ChannelRates, lambda_total: float, update_ratio: float) -> float:
    """Server utilization of the shared channel; stable iff < 1."""
    lam = _check_lambda(lambda_total)
    ratio = _check_ratio(update_ratio)
    return lam * (ratio / rates.r_ul + 1.0 / rates.r_dl)


def rea_latency(rates: ChannelRates, lambda_total: float, update_ratio: float) -> float:
    """Mean request latency of the shared channel at a given update ratio."""
    lam = _check_lambda(lambda_total)
    ratio = _check_ratio(update_ratio)
    rho = rea_utilization(rates, lam, ratio)
    if rho >= 1.0:
        raise OverloadError(
            f"shared channel unstable: utilization {rho:g} >= 1", queue="shared")
    r_ul, r_dl = rates.r_ul, rates.r_dl
    return ((1.0 / r_dl + ratio * lam / r_ul ** 2) / (1.0 - rho)) + ratio / r_ul


def rea_capacity(rates: ChannelRates, update_ratio: float) -> float:
    """Largest sustainable request rate at a given update ratio."""
    ratio = _check_ratio(update_ratio)
    return 1.0 / (ratio / rates.r_ul + 1.0 / rates.r_dl)


def rea_aoi_item(rates: ChannelRates, lambda_s: float, p_s: float) -> float:
    """Mean AoI of deliveries of one item.

    Fetch time scaled by the update probability, one downlink service, and
    the expected staleness accumulated over the geometric number of
    requests between refreshes.
    """
    lam = float(lambda_s)
    if not math.isfinite(lam) or lam <= 0:
        raise InvalidParameterError(f"lambda_s must be > 0, got {lambda_s!r}")
    p = float(p_s)
    if not (0.0 <= p <= 1.0):
        raise InvalidParameterError(f"p_s must lie in [0, 1], got {p_s!r}")
    if p == 0.0:
        raise UnboundedAoIError(
            "p_s = 0 never refreshes the cache; AoI grows without bound")
    return p / rates.r_ul + 1.0 / rates.r_dl + (1.0 - p) / (p * lam)


def rea_aoi_opt_p(rates: ChannelRates, lambda_s: float) -> float:
    """Per-item update probability minimizing rea_aoi_item.

    Unconstrained minimizer is sqrt(r_ul / lambda_s); clipped to 1 when the
    item is requested more slowly than the channel can fetch.
    """
    lam = float(lambda_s)
    if not math.isfinite(lam) or lam <= 0:
        raise InvalidParameterError(f"lambda_s must be > 0, got {lambda_s!r}")
    return min(1.0, math.sqrt(rates.r_ul / lam))


def rea_aoi_avg(rates: ChannelRates, scenario: Scenario, p) -> float:
    """Request-rate-weighted mean AoI over all items.

    Evaluated in the algebraically expanded form so items with vanishing
    request rate contribute their finite limit (1-p_s)/p_s per unit of
    total rate instead of 0 * inf.
    """
    probs = np.asarray(p, dtype=float)
    if probs.ndim != 1 or len(probs) != scenario.item_count:
        raise InvalidParameterError(
            f"p-vector length {probs.size} does not match {scenario.item_count} items")
    if np.any((probs < 0) | (probs > 1)):
        raise InvalidParameterError("update probabilities must lie in [0, 1]")
    if np.any(probs == 0.0):
        raise UnboundedAoIError(
            "p_s = 0 never refreshes the cache; AoI grows without bound")
    lam_total = scenario.total_lambda
    if lam_total <= 0:
        raise InvalidParameterError("rea_aoi_avg requires lambda_total > 0")
    lam = np.asarray(scenario.lambda_s)
    per_rate = lam * (probs / rates.r_ul + 1.0 / rates.r_dl) + (1.0 - probs) / probs
    return float(per_rate.sum() / lam_total)
