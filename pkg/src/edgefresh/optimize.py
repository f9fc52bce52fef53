"""Solvers for the four control-tuning problems exposed by the CLI.

p1: bandwidth split minimizing conventional-scheme latency (closed form).
p2: split minimizing a weighted sum of RSUC latency and AoI (bisection on
    the stationarity condition).
p3: smallest split meeting a hard AoI cap, which also minimizes RSUC
    latency under that cap (quadratic root plus bisection refinement).
p4: per-item update probabilities minimizing the ReA update ratio under a
    mean-AoI cap (waterfilling-style proportionality with iterative
    clamping at 1).

All solvers are pure functions and raise typed errors for infeasible
inputs instead of returning sentinels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import (
    conv_opt_beta,
    rea_aoi_item,
    rea_aoi_opt_p,
    rsuc_aoi,
)
from .errors import (
    InfeasibleAoIError,
    InfeasibleLoadError,
    InvalidParameterError,
    OverloadError,
)
from .model import ChannelRates, Scenario

__all__ = [
    "p1_opt_beta",
    "P2Config",
    "P2Result",
    "p2_solve",
    "rsuc_min_aoi",
    "rsuc_aoi_opt_beta",
    "p3_min_beta",
    "rsuc_capacity_at_aoi",
    "rea_min_aoi",
    "P4Solution",
    "p4_solve",
]

_MAX_BISECT = 200


def p1_opt_beta(rates: ChannelRates, lambda_total: float) -> float:
    """Latency-optimal conventional split; feasible whenever the load is
    below conv_capacity."""
    return conv_opt_beta(rates, lambda_total)


@dataclass(frozen=True)
class P2Config:
    """Weight and numerics for the latency+AoI split objective."""

    weight_aoi: float
    tol: float = 1e-12
    max_iter: int = _MAX_BISECT

    def __post_init__(self):
        if not math.isfinite(self.weight_aoi) or self.weight_aoi < 0:
            raise InvalidParameterError(
                f"weight_aoi must be finite and >= 0, got {self.weight_aoi!r}")
        if self.tol <= 0:
            raise InvalidParameterError(f"tol must be > 0, got {self.tol!r}")
        if self.max_iter < 1:
            raise InvalidParameterError("max_iter must be >= 1")


@dataclass(frozen=True)
class P2Result:
    """Solution of the weighted split problem.

    boundary is True when the optimum sits at the lower edge of the split
    range (weight 0 turns the objective into pure latency, which always
    prefers less uplink).
    """

    beta: float
    residual: float
    iterations: int
    boundary: bool = False

    def __float__(self) -> float:
        return self.beta


def p2_solve(rates: ChannelRates, lambda_total: float, item_count: int,
             cfg: P2Config) -> P2Result:
    """Minimize rsuc_latency + weight_aoi * rsuc_aoi over the split.

    The stationarity condition equates a strictly increasing function of
    beta with a constant, so the root on (0, 1 - lambda/r_dl) is unique
    and bisection suffices.
    """
    lam = float(lambda_total)
    if not math.isfinite(lam) or lam < 0:
        raise InvalidParameterError(f"lambda_total must be >= 0, got {lambda_total!r}")
    s = int(item_count)
    if s < 1:
        raise InvalidParameterError(f"item_count must be >= 1, got {item_count!r}")
    if lam >= rates.r_dl:
        raise OverloadError(
            f"lambda_total = {lam:g} >= r_dl = {rates.r_dl:g}: no split can "
            "stabilize delivery", queue="downlink")

    beta_max = 1.0 - lam / rates.r_dl
    if cfg.weight_aoi == 0.0:
        return P2Result(beta=min(cfg.tol, beta_max / 2), residual=0.0,
                        iterations=0, boundary=True)

    target = (s + 3.0) * cfg.weight_aoi * rates.r_dl / (2.0 * rates.r_ul)

    def gap(beta: float) -> float:
        lat_term = 1.0 / (beta_max / beta - 1.0) ** 2
        aoi_term = cfg.weight_aoi / (1.0 / beta - 1.0) ** 2
        return lat_term + aoi_term - target

    lo, hi = 0.0, beta_max * (1.0 - 1e-15)
    iterations = 0
    while hi - lo > cfg.tol:
        if iterations >= cfg.max_iter:
            raise RuntimeError("p2_solve bisection failed to converge")
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0.0:
            hi = mid
        else:
            lo = mid
        iterations += 1
    beta = 0.5 * (lo + hi)
    return P2Result(beta=beta, residual=abs(gap(beta)), iterations=iterations)


# --- RSUC AoI cap inversion -------------------------------------------------

def rsuc_min_aoi(rates: ChannelRates, item_count: int) -> float:
    """Smallest mean AoI any split can achieve under round-robin refresh."""
    s = int(item_count)
    if s < 1:
        raise InvalidParameterError(f"item_count must be >= 1, got {item_count!r}")
    return (1.0 / math.sqrt(rates.r_dl)
            + math.sqrt((s + 3.0) / (2.0 * rates.r_ul))) ** 2


def rsuc_aoi_opt_beta(rates: ChannelRates, item_count: int) -> float:
    """Split achieving rsuc_min_aoi; algebraically equal to
    rsuc_tradeoff_threshold."""
    s = int(item_count)
    if s < 1:
        raise InvalidParameterError(f"item_count must be >= 1, got {item_count!r}")
    return 1.0 - 1.0 / (1.0 + math.sqrt((s + 3.0) * rates.r_dl / (2.0 * rates.r_ul)))


def _rsuc_beta_for_cap(rates: ChannelRates, item_count: int, aoi_cap: float) -> float:
    """Smallest split with rsuc_aoi(beta) <= aoi_cap, ignoring load."""
    s = int(item_count)
    if s < 1:
        raise InvalidParameterError(f"item_count must be >= 1, got {item_count!r}")
    cap = float(aoi_cap)
    if not math.isfinite(cap) or cap <= 0:
        raise InvalidParameterError(f"aoi_cap must be > 0, got {aoi_cap!r}")
    floor = rsuc_min_aoi(rates, s)
    if cap < floor * (1.0 - 1e-12):
        raise InfeasibleAoIError(
            f"aoi_cap = {cap:g} s is below the achievable minimum {floor:g} s")
    beta_hat = rsuc_aoi_opt_beta(rates, s)
    if cap <= floor * (1.0 + 1e-12):
        return beta_hat

    def gap(beta: float) -> float:
        return rsuc_aoi(rates, s, beta) - cap

    # AoI is decreasing on (0, beta_hat], so the smaller crossing lies there.
    lo = beta_hat
    while gap(lo) <= 0.0:
        lo *= 0.5
        if lo < 1e-300:
            raise RuntimeError("_rsuc_beta_for_cap lost its bracket")
    hi = beta_hat
    for _ in range(_MAX_BISECT):
        if hi - lo <= 1e-12:
            break
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    beta = 0.5 * (lo + hi)

    # Cross-check against the closed-form smaller root of the cap equation.
    a = (s + 3.0) / (2.0 * rates.r_ul)
    b = 1.0 / rates.r_dl
    half_sum = cap + a - b
    disc = half_sum * half_sum - 4.0 * cap * a
    if disc > 0.0:
        closed = 2.0 * a / (half_sum + math.sqrt(disc))
        if abs(closed - beta) > 1e-9:
            raise RuntimeError(
                f"cap inversion mismatch: bisection {beta!r} vs root {closed!r}")
        beta = closed
    return beta


def p3_min_beta(rates: ChannelRates, lambda_total: float, item_count: int,
                aoi_cap: float) -> float:
    """Latency-minimizing split subject to a hard mean-AoI cap.

    Latency only worsens with more uplink share, so the optimum is the
    smallest split that still satisfies the cap.
    """
    lam = float(lambda_total)
    if not math.isfinite(lam) or lam < 0:
        raise InvalidParameterError(f"lambda_total must be >= 0, got {lambda_total!r}")
    beta = _rsuc_beta_for_cap(rates, item_count, aoi_cap)
    if (1.0 - beta) * rates.r_dl <= lam:
        raise InfeasibleLoadError(
            f"aoi_cap = {float(aoi_cap):g} s forces beta = {beta:g}, leaving "
            f"{(1.0 - beta) * rates.r_dl:g} /s of delivery capacity for "
            f"lambda_total = {lam:g} /s")
    return beta


def rsuc_capacity_at_aoi(rates: ChannelRates, item_count: int, aoi_cap: float) -> float:
    """Largest sustainable request rate once the split is pinned by the cap."""
    beta = _rsuc_beta_for_cap(rates, item_count, aoi_cap)
    return (1.0 - beta) * rates.r_dl


# --- ReA update-probability allocation --------------------------------------

def rea_min_aoi(rates: ChannelRates, scenario: Scenario) -> float:
    """Smallest achievable mean AoI with each item at its own optimum."""
    if any(lam <= 0 for lam in scenario.lambda_s):
        raise InvalidParameterError("rea_min_aoi requires every lambda_s > 0")
    total = scenario.total_lambda
    best = sum(lam * rea_aoi_item(rates, lam, rea_aoi_opt_p(rates, lam))
               for lam in scenario.lambda_s)
    return best / total


@dataclass(frozen=True)
class P4Solution:
    """Per-item update probabilities plus solver diagnostics."""

    p: tuple[float, ...]
    update_ratio: float
    clamped: frozenset[int]
    iterations: int

    def __post_init__(self):
        if any(not (0.0 < x <= 1.0) for x in self.p):
            raise InvalidParameterError("solved p values must lie in (0, 1]")


def p4_solve(rates: ChannelRates, scenario: Scenario, aoi_cap: float) -> P4Solution:
    """Minimize the update ratio subject to a mean-AoI cap.

    Stationarity makes p_s * sqrt(lambda_s) constant across items not
    clamped at 1; the constant follows from holding the cap at equality.
    Items whose unclamped probability reaches 1 are fixed there, their
    AoI contribution is removed from the budget, and the reduced problem
    is re-solved; at most one clamping pass per item.
    """
    lam = np.asarray(scenario.lambda_s, dtype=float)
    if np.any(lam <= 0):
        raise InvalidParameterError("p4_solve requires every lambda_s > 0")
    cap = float(aoi_cap)
    if not math.isfinite(cap) or cap <= 0:
        raise InvalidParameterError(f"aoi_cap must be > 0, got {aoi_cap!r}")
    r_ul, r_dl = rates.r_ul, rates.r_dl
    if cap <= 1.0 / r_ul + 1.0 / r_dl:
        raise InfeasibleAoIError(
            f"aoi_cap = {cap:g} s does not exceed the always-update floor "
            f"{1.0 / r_ul + 1.0 / r_dl:g} s")
    floor = rea_min_aoi(rates, scenario)
    if cap < floor * (1.0 - 1e-12):
        raise InfeasibleAoIError(
            f"aoi_cap = {cap:g} s is below the achievable minimum {floor:g} s")

    n = len(lam)
    total = float(lam.sum())
    sqrt_lam = np.sqrt(lam)
    # Cap at equality: sum over items of lambda_s p_s / r_ul + 1 / p_s.
    budget = n + total * (cap - 1.0 / r_dl)

    p = np.ones(n)
    clamped = np.zeros(n, dtype=bool)
    iterations = 0
    while not clamped.all():
        iterations += 1
        active = ~clamped
        rhs = budget - float(lam[clamped].sum()) / r_ul - int(clamped.sum())
        y = rhs / float(sqrt_lam[active].sum())
        if y <= 0.0:
            raise InfeasibleAoIError(
                f"aoi_cap = {cap:g} s cannot be met once {int(clamped.sum())} "
                "items are pinned at p = 1")
        disc = y * y - 4.0 / r_ul
        if disc < 0.0:
            if disc > -4.0e-9 / r_ul:
                disc = 0.0
            else:
                raise InfeasibleAoIError(
                    f"aoi_cap = {cap:g} s cannot be met at equality with "
                    "interior update probabilities")
        # Smaller root: a larger p would raise both the ratio and the AoI.
        scale = 2.0 / (y + math.sqrt(disc))
        p[active] = scale / sqrt_lam[active]
        newly = active & (p >= 1.0)
        if not newly.any():
            break
        p[newly] = 1.0
        clamped |= newly
        if iterations > n:
            raise RuntimeError("p4_solve clamping failed to terminate")

    ratio = float(np.dot(p, lam) / total)
    return P4Solution(p=tuple(float(x) for x in p), update_ratio=ratio,
                      clamped=frozenset(np.flatnonzero(clamped).tolist()),
                      iterations=iterations)
