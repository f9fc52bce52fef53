"""Both simulation engines: streams, configs, determinism, diagnostics.

The array engine and the event-loop engine consume identical pre-drawn
randomness, so their outputs are compared for exact equality, not just
statistical agreement.
"""

import io
import math

import numpy as np
import pytest

from edgefresh.desim import (
    DEFAULT_SEED,
    DeliveryLog,
    ExpStream,
    SimConfig,
    assign_item,
    assign_items,
    ci_halfwidth,
    draw_exponential,
    measure_bounds,
    purpose_rng,
    run_replication,
    simulate,
)
from edgefresh.desim.engine import (
    ARRIVAL_STREAM,
    DOWNLINK_STREAM,
    UPLINK_STREAM,
)
from edgefresh.errors import (
    InvalidParameterError,
    OverloadError,
    SimulationDiverged,
)
from edgefresh.model import (
    Conventional,
    Popularity,
    Rea,
    Rsuc,
    Scenario,
)


class _FixedUniform:
    """Stand-in generator returning one constant uniform value."""

    def __init__(self, value):
        self.value = value

    def random(self, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)


# --- randomness plumbing -----------------------------------------------------

def test_purpose_rng_reproducible_and_independent():
    a = purpose_rng(7, 0, UPLINK_STREAM).random(8)
    b = purpose_rng(7, 0, UPLINK_STREAM).random(8)
    c = purpose_rng(7, 0, DOWNLINK_STREAM).random(8)
    d = purpose_rng(7, 1, UPLINK_STREAM).random(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_draw_exponential_quantiles():
    # zero quantile maps to zero wait
    assert draw_exponential(_FixedUniform(0.0), 2.0) == 0.0
    # the 1 - 1/e quantile of a mean-2 exponential is exactly 2
    assert draw_exponential(_FixedUniform(1.0 - 1.0 / math.e), 2.0) == pytest.approx(
        2.0, rel=1e-12)


def test_draw_exponential_sample_mean():
    rng = purpose_rng(DEFAULT_SEED, 0, UPLINK_STREAM)
    draws = draw_exponential(rng, 3.0, size=1_000_000)
    assert draws.mean() == pytest.approx(3.0, rel=0.005)
    assert draws.min() >= 0.0


def test_draw_exponential_rejects_bad_mean():
    rng = purpose_rng(0, 0, 1)
    for bad in (0.0, -1.0, math.nan):
        with pytest.raises(InvalidParameterError):
            draw_exponential(rng, bad)


def test_assign_item_degenerate():
    rng = purpose_rng(1, 0, 2)
    assert all(assign_item(rng, [1.0]) == 0 for _ in range(50))


def test_assign_items_frequencies_uniform():
    rng = purpose_rng(2, 0, 2)
    draws = assign_items(rng, [0.5, 0.5], 1_000_000)
    freq = np.bincount(draws, minlength=2) / 1e6
    assert freq == pytest.approx([0.5, 0.5], rel=0.005)


def test_assign_items_frequencies_zipf():
    from edgefresh.model import popularity_weights
    weights = popularity_weights(Popularity.zipf(0.56), 10)
    rng = purpose_rng(3, 0, 2)
    draws = assign_items(rng, weights, 1_000_000)
    freq = np.bincount(draws, minlength=10) / 1e6
    np.testing.assert_allclose(freq, weights, rtol=0.01)


def test_assign_items_validation():
    rng = purpose_rng(0, 0, 2)
    with pytest.raises(InvalidParameterError):
        assign_items(rng, [], 10)
    with pytest.raises(InvalidParameterError):
        assign_items(rng, [0.7, -0.2], 10)
    with pytest.raises(InvalidParameterError):
        assign_items(rng, [0.5, 0.4], 10)


def test_exp_stream_chunked_equals_sequential():
    a = ExpStream(purpose_rng(5, 0, 5), 0.01)
    b = ExpStream(purpose_rng(5, 0, 5), 0.01)
    chunk = a.take(10)
    singles = np.array([b.next() for _ in range(10)])
    np.testing.assert_array_equal(chunk, singles)


def test_exp_stream_constant_and_empty():
    s = ExpStream(purpose_rng(5, 0, 5), 0.25, constant=True)
    assert np.array_equal(s.take(3), [0.25, 0.25, 0.25])
    assert len(s.take(0)) == 0
    infinite = ExpStream(purpose_rng(5, 0, 5), math.inf)
    assert np.all(np.isinf(infinite.take(4)))


# --- SimConfig validation ----------------------------------------------------

def _scenario(rates):
    return Scenario.single(rates, 200.0)


def test_sim_config_defaults(rates):
    cfg = SimConfig(_scenario(rates), Conventional(0.5))
    assert cfg.stop_requests == 1_000_000
    assert cfg.warmup_fraction == 0.1
    assert cfg.seed == DEFAULT_SEED


def test_sim_config_rejections(rates):
    sc = _scenario(rates)
    scheme = Conventional(0.5)
    with pytest.raises(InvalidParameterError):
        SimConfig(sc, scheme, stop_requests=1000, stop_duration=10.0)
    with pytest.raises(InvalidParameterError):
        SimConfig(sc, scheme, warmup_fraction=0.1, warmup_duration=1.0,
                  stop_duration=10.0)
    with pytest.raises(InvalidParameterError):
        SimConfig(sc, scheme, warmup_duration=1.0)  # needs a duration stop
    with pytest.raises(InvalidParameterError):
        SimConfig(sc, scheme, warmup_duration=10.0, stop_duration=10.0)
    with pytest.raises(InvalidParameterError):
        SimConfig(sc, scheme, warmup_fraction=1.0)
    with pytest.raises(InvalidParameterError):
        SimConfig(sc, scheme, replications=0)
    with pytest.raises(InvalidParameterError):
        SimConfig(sc, scheme, engine="gpu")
    with pytest.raises(InvalidParameterError):
        SimConfig(sc, scheme, divergence_bound=0)
    with pytest.raises(InvalidParameterError):
        SimConfig(sc, Rea((0.5, 0.5)))  # p-vector longer than the item list


def test_measure_bounds_modes(rates):
    sc = _scenario(rates)
    count_cfg = SimConfig(sc, Conventional(0.5), stop_requests=100)
    assert measure_bounds(count_cfg, 112, np.empty(112)) == (12, 112)
    frac_cfg = SimConfig(sc, Conventional(0.5), stop_duration=10.0)
    arrivals = np.linspace(0.1, 10.0, 100)
    lo, hi = measure_bounds(frac_cfg, 100, arrivals)
    assert (lo, hi) == (10, 100)  # ceil(0.1 * 100)
    time_cfg = SimConfig(sc, Conventional(0.5), stop_duration=10.0,
                         warmup_duration=5.0)
    lo, hi = measure_bounds(time_cfg, 100, arrivals)
    assert arrivals[lo] > 5.0 and arrivals[lo - 1] <= 5.0 and hi == 100


def test_ci_halfwidth():
    assert ci_halfwidth([1.0]) == 0.0
    # matches the classic t-table value for n=10 at 95%
    values = np.arange(10, dtype=float)
    expected = 2.2621571627 * values.std(ddof=1) / math.sqrt(10)
    assert ci_halfwidth(values) == pytest.approx(expected, rel=1e-9)


# --- engine equivalence and determinism --------------------------------------

SCHEMES = [
    Conventional(0.5),
    Rsuc(0.3),
    Rea((1.0, 0.4, 0.7)),
]


@pytest.mark.parametrize("scheme", SCHEMES, ids=lambda s: s.kind)
def test_engines_walk_identical_paths(rates, scheme):
    items = 3 if isinstance(scheme, Rea) else 1
    scenario = Scenario.from_popularity(rates, items, 200.0, Popularity.zipf(0.56))
    arrivals = np.cumsum(
        draw_exponential(purpose_rng(11, 0, ARRIVAL_STREAM), 1 / 200.0, 4000))
    a = run_replication(scenario, scheme, arrivals, seed=11, replication=0,
                        engine="vectorized")
    b = run_replication(scenario, scheme, arrivals, seed=11, replication=0,
                        engine="events")
    assert not a.diverged and not b.diverged
    np.testing.assert_array_equal(a.log.item, b.log.item)
    for name in ("arrival_time", "delivery_start", "delivery_complete",
                 "content_generation_time"):
        np.testing.assert_allclose(getattr(a.log, name), getattr(b.log, name),
                                   rtol=0, atol=1e-9)


def test_engines_agree_on_divergence(rates):
    # both engines must stop at the same backlog threshold
    scenario = Scenario.single(rates, 600.0)
    arrivals = np.cumsum(
        draw_exponential(purpose_rng(13, 0, ARRIVAL_STREAM), 1 / 600.0, 50_000))
    outs = [run_replication(scenario, Conventional(0.5), arrivals, seed=13,
                            replication=0, engine=eng, divergence_bound=500)
            for eng in ("vectorized", "events")]
    assert all(o.diverged for o in outs)
    assert outs[0].diverged_queue == outs[1].diverged_queue == "uplink"
    assert outs[0].n_completed == outs[1].n_completed
    n = outs[0].n_completed
    a, b = outs[0].log[:n], outs[1].log[:n]
    np.testing.assert_array_equal(a.item, b.item)
    np.testing.assert_allclose(a.delivery_complete, b.delivery_complete,
                               rtol=0, atol=1e-9)


def test_simulate_deterministic(rates):
    cfg = SimConfig(_scenario(rates), Rsuc(0.3), replications=3,
                    stop_requests=5000, seed=7)
    first = simulate(cfg, collect_records=True)
    second = simulate(cfg, collect_records=True)
    assert first.perf == second.perf
    buf_a, buf_b = io.StringIO(), io.StringIO()
    first.records.write_csv(buf_a)
    second.records.write_csv(buf_b)
    assert buf_a.getvalue() == buf_b.getvalue()
    header = buf_a.getvalue().splitlines()[0]
    assert header == ("item,arrival_time,delivery_start,delivery_complete,"
                      "content_generation_time,latency,aoi")


def test_different_seeds_differ(rates):
    base = dict(replications=2, stop_requests=4000)
    a = simulate(SimConfig(_scenario(rates), Conventional(0.5), seed=1, **base))
    b = simulate(SimConfig(_scenario(rates), Conventional(0.5), seed=2, **base))
    assert a.perf.mean_latency != b.perf.mean_latency


# --- record-level invariants -------------------------------------------------

@pytest.mark.parametrize("scheme", SCHEMES, ids=lambda s: s.kind)
def test_record_ordering_and_bounds(rates, scheme):
    items = 3 if isinstance(scheme, Rea) else 1
    scenario = Scenario.from_popularity(rates, items, 200.0, Popularity.uniform())
    cfg = SimConfig(scenario, scheme, replications=2, stop_requests=5000)
    result = simulate(cfg, collect_records=True)
    log = result.records
    assert len(log) == result.perf.n_delivered == 10_000
    assert np.all(log.arrival_time <= log.delivery_start + 1e-12)
    assert np.all(log.delivery_start <= log.delivery_complete)
    assert np.all(log.content_generation_time <= log.delivery_complete)
    assert np.all(log.latency >= 0)
    assert np.all(log.aoi >= 0)
    # served strictly first-come-first-served
    n = len(log) // 2  # per-replication blocks are separately ordered
    assert np.all(np.diff(log.delivery_complete[:n]) >= 0)
    # content cannot be older than the start of its own delivery window
    assert np.all(log.aoi >= log.delivery_complete - log.delivery_start - 1e-12)


def test_delivery_log_slicing(rates):
    cfg = SimConfig(_scenario(rates), Conventional(0.5), replications=1,
                    stop_requests=100)
    log = simulate(cfg, collect_records=True).records
    rec = log[5]
    assert rec.latency == pytest.approx(log.latency[5])
    assert rec.aoi == pytest.approx(log.aoi[5])
    assert len(log[10:20]) == 10
    assert len(DeliveryLog.concat([log[:5], log[5:]])) == len(log)
    assert len(DeliveryLog.empty()) == 0


# --- closed-form agreement at moderate scale ---------------------------------

def test_conv_sim_close_to_closed_form(rates):
    from edgefresh import analytic
    cfg = SimConfig(_scenario(rates), Conventional(0.5), replications=3,
                    stop_requests=50_000)
    perf = simulate(cfg).perf
    assert perf.mean_latency == pytest.approx(
        analytic.conv_latency(rates, 200.0, 0.5), rel=0.04)
    assert perf.mean_aoi == pytest.approx(
        analytic.conv_aoi_at_beta(rates, 200.0, 0.5), rel=0.04)


def test_rsuc_sim_close_to_closed_form(rates):
    from edgefresh import analytic
    cfg = SimConfig(_scenario(rates), Rsuc(0.5), replications=3,
                    stop_requests=50_000)
    perf = simulate(cfg).perf
    assert perf.mean_latency == pytest.approx(
        analytic.rsuc_latency(rates, 200.0, 0.5), rel=0.04)
    assert perf.mean_aoi == pytest.approx(
        analytic.rsuc_aoi(rates, 1, 0.5), rel=0.04)


def test_rea_sim_close_to_closed_form(rates):
    from edgefresh import analytic
    scenario = Scenario.single(rates, 200.0)
    cfg = SimConfig(scenario, Rea((0.5,)), replications=3, stop_requests=50_000)
    perf = simulate(cfg).perf
    assert perf.mean_latency == pytest.approx(
        analytic.rea_latency(rates, 200.0, 0.5), rel=0.04)
    assert perf.mean_aoi == pytest.approx(
        analytic.rea_aoi_item(rates, 200.0, 0.5), rel=0.06)


def test_constant_service_tandem(rates):
    # deterministic service with light load: every sojourn is exactly the
    # two transmission times once queueing vanishes
    scenario = Scenario.single(rates, 5.0)
    cfg = SimConfig(scenario, Conventional(0.5), replications=1,
                    stop_requests=2000, constant_service=True)
    perf = simulate(cfg).perf
    assert perf.mean_latency == pytest.approx(4.0e-3, rel=0.01)


# --- duration-based protocol -------------------------------------------------

def test_duration_stop_and_warmup(rates):
    scenario = Scenario.single(rates, 200.0)
    cfg = SimConfig(scenario, Conventional(0.5), replications=2,
                    stop_duration=30.0, warmup_duration=5.0)
    result = simulate(cfg, collect_records=True)
    arr = result.records.arrival_time
    assert arr.min() > 5.0
    assert arr.max() <= 30.0
    # roughly lambda * (30 - 5) arrivals per replication
    assert result.perf.n_delivered == pytest.approx(2 * 200 * 25, rel=0.1)


def test_empty_measurement_window_rejected(rates):
    scenario = Scenario.single(rates, 0.5)
    cfg = SimConfig(scenario, Conventional(0.5), replications=1,
                    stop_duration=1.0, warmup_duration=0.99)
    with pytest.raises((InvalidParameterError, Exception)):
        simulate(cfg)


# --- degenerate schemes and divergence ---------------------------------------

def test_conv_degenerate_beta_rejected(rates):
    scenario = _scenario(rates)
    for beta in (0.0, 1.0):
        cfg = SimConfig(scenario, Conventional(beta), replications=1,
                        stop_requests=100)
        with pytest.raises(OverloadError):
            simulate(cfg)


def test_rsuc_full_uplink_rejected(rates):
    cfg = SimConfig(_scenario(rates), Rsuc(1.0), replications=1, stop_requests=100)
    with pytest.raises(OverloadError):
        simulate(cfg)


def test_rsuc_zero_uplink_never_refreshes(rates):
    # the updater starves, so deliveries keep serving the epoch-0 version
    cfg = SimConfig(_scenario(rates), Rsuc(0.0), replications=1,
                    stop_requests=2000)
    result = simulate(cfg, collect_records=True)
    assert np.all(result.records.content_generation_time == 0.0)


def test_divergence_detection(rates):
    scenario = Scenario.single(rates, 600.0)  # above the split capacity
    cfg = SimConfig(scenario, Conventional(0.5), replications=2,
                    stop_requests=100_000, divergence_bound=2000)
    with pytest.raises(SimulationDiverged) as exc_info:
        simulate(cfg)
    exc = exc_info.value
    assert exc.queue == "uplink"
    assert exc.sim_time > 0
    assert exc.partial is not None and exc.partial.n_delivered > 0


def test_stable_run_does_not_diverge(rates):
    scenario = Scenario.single(rates, 450.0)  # 0.9 of the split capacity
    cfg = SimConfig(scenario, Conventional(0.5), replications=1,
                    stop_requests=50_000, divergence_bound=10_000)
    perf = simulate(cfg).perf
    assert perf.n_delivered == 50_000


# --- diagnostics -------------------------------------------------------------

def test_little_law_per_queue(rates):
    from edgefresh import analytic
    cfg = SimConfig(_scenario(rates), Conventional(0.5), replications=2,
                    stop_requests=100_000)
    result = simulate(cfg, collect_diagnostics=True)
    for diag in result.diagnostics:
        for name in ("system", "uplink", "downlink"):
            assert diag.little[name].ratio == pytest.approx(1.0, abs=0.03)
        # product-form: each stage behaves like its own M/M/1
        assert diag.little["uplink"].mean_sojourn == pytest.approx(
            1.0 / (500.0 - 200.0), rel=0.05)
        assert diag.little["downlink"].mean_sojourn == pytest.approx(
            1.0 / (500.0 - 200.0), rel=0.05)
    assert analytic.conv_latency(rates, 200.0, 0.5) == pytest.approx(
        result.perf.mean_latency, rel=0.05)


def test_rsuc_refresh_cycle_stats(rates):
    cfg = SimConfig(Scenario.from_popularity(rates, 2, 200.0, Popularity.uniform()),
                    Rsuc(0.5), replications=2, stop_requests=50_000)
    result = simulate(cfg, collect_diagnostics=True)
    mean_expect = 2 / (0.5 * rates.r_ul)  # S refresh durations per cycle
    var_expect = 2 / (0.5 * rates.r_ul) ** 2
    for diag in result.diagnostics:
        assert diag.update_interval_count > 10_000
        assert diag.update_interval_mean == pytest.approx(mean_expect, rel=0.05)
        assert diag.update_interval_var == pytest.approx(var_expect, rel=0.1)


def test_rea_inter_update_geometric(rates):
    scenario = Scenario.from_popularity(rates, 2, 200.0, Popularity.uniform())
    cfg = SimConfig(scenario, Rea((0.5, 0.25)), replications=2,
                    stop_requests=50_000)
    result = simulate(cfg, collect_diagnostics=True)
    for diag in result.diagnostics:
        means = diag.inter_update_mean
        assert means[0] == pytest.approx(2.0, rel=0.05)
        assert means[1] == pytest.approx(4.0, rel=0.05)
