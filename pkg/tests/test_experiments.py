"""Experiment families, trace handling, and table serialization.

Hand checks frozen below: with a 0.0025 s mean-AoI cap on a symmetric
1000/1000 channel and one item, the utilization and freshness constraints
bind together at lambda = 600 with p = 2/3 (both sides of the capacity
bisection evaluate to 0.0025 exactly), and a single item at lambda = 200
under a 0.004 s cap solves p^2 - 8p + 5 = 0, smaller root 4 - sqrt(11).
"""

import json
import math

import numpy as np
import pytest

from edgefresh.desim import purpose_rng
from edgefresh.errors import InfeasibleAoIError, InvalidParameterError
from edgefresh.experiments import (
    ArrivalTrace,
    SweepSpec,
    analytic_point,
    default_cap_grid,
    json_safe,
    rea_capacity_at_aoi,
    rows_to_csv,
    run_aoi_latency_tradeoff,
    run_capacity_aoi,
    run_scheme_compare,
    run_sweep,
    run_trace,
    run_validation,
    write_table,
)
from edgefresh.model import Conventional, Popularity, Rea, Rsuc, Scenario

RSUC_FLOOR = 0.0058284271247461905  # S = 1, symmetric 1000/1000


# --- sweep spec and shared helpers -------------------------------------------

def test_sweep_spec_rejections(rates):
    with pytest.raises(InvalidParameterError, match="family"):
        SweepSpec(family="bogus", rates=rates)
    with pytest.raises(InvalidParameterError, match="strictly increasing"):
        SweepSpec(family="capacity_aoi", rates=rates, grid=(0.02, 0.01))
    with pytest.raises(InvalidParameterError, match="finite"):
        SweepSpec(family="capacity_aoi", rates=rates, grid=(0.0, 0.01))
    with pytest.raises(InvalidParameterError, match="scheme"):
        SweepSpec(family="validation", rates=rates, grid=(100.0,))
    with pytest.raises(InvalidParameterError, match="grid"):
        SweepSpec(family="validation", rates=rates, schemes=(Conventional(0.5),))
    with pytest.raises(InvalidParameterError, match="ArrivalTrace"):
        SweepSpec(family="trace", rates=rates)
    with pytest.raises(InvalidParameterError, match="workers"):
        SweepSpec(family="capacity_aoi", rates=rates, grid=(0.01,), workers=0)
    with pytest.raises(InvalidParameterError, match="items"):
        SweepSpec(family="capacity_aoi", rates=rates, grid=(0.01,), items=0)


def test_default_cap_grid():
    grid = default_cap_grid(0.004)
    assert len(grid) == 30
    assert grid[0] == pytest.approx(1.05 * 0.004, rel=1e-12)
    assert grid[-1] == pytest.approx(100.0 * 0.004, rel=1e-12)
    ratios = np.diff(np.log(grid))
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-9)
    with pytest.raises(InvalidParameterError):
        default_cap_grid(0.0)


def test_analytic_point_dispatch(rates):
    from edgefresh import analytic
    single = Scenario.single(rates, 200.0)
    assert analytic_point(single, Conventional(0.5)) == {
        "latency": analytic.conv_latency(rates, 200.0, 0.5),
        "aoi": analytic.conv_aoi_at_beta(rates, 200.0, 0.5)}
    assert analytic_point(single, Rsuc(0.5)) == {
        "latency": analytic.rsuc_latency(rates, 200.0, 0.5),
        "aoi": analytic.rsuc_aoi(rates, 1, 0.5)}
    multi = Scenario.from_popularity(rates, 2, 200.0, Popularity.zipf(0.56))
    point = analytic_point(multi, Rea((0.5, 1.0)))
    ratio = analytic.rea_update_ratio(multi, (0.5, 1.0))
    assert point["latency"] == analytic.rea_latency(rates, 200.0, ratio)
    assert point["aoi"] == analytic.rea_aoi_avg(rates, multi, (0.5, 1.0))


# --- validation family -------------------------------------------------------

@pytest.fixture(scope="module")
def validation_rows():
    from edgefresh.model import ChannelRates
    spec = SweepSpec(family="validation", rates=ChannelRates(1000.0, 1000.0),
                     grid=(100.0, 200.0),
                     schemes=(Conventional(0.5), Rsuc(0.8), Rea((1.0,))),
                     replications=3, stop_requests=20_000)
    return run_validation(spec)


def test_validation_row_shape(validation_rows):
    assert len(validation_rows) == 6  # 2 rates x 3 schemes
    row = validation_rows[0]
    for key in ("family", "scheme", "params", "lambda_total", "analytic_latency",
                "sim_latency", "latency_ci95", "latency_rel_err", "latency_ok",
                "aoi_ok", "n_delivered", "status"):
        assert key in row
    assert row["family"] == "validation"


def test_validation_stable_points_agree(validation_rows):
    ok_rows = [r for r in validation_rows if r["status"] == "ok"]
    assert len(ok_rows) == 5  # all but rsuc beta=0.8 at lambda=200
    for row in ok_rows:
        assert row["latency_ok"] and row["aoi_ok"], row
        assert row["latency_rel_err"] < 0.05
        assert row["n_delivered"] == 60_000


def test_validation_flags_overload(validation_rows):
    # beta = 0.8 leaves 200/s of delivery bandwidth, saturated at lambda = 200
    bad = [r for r in validation_rows
           if r["scheme"] == "rsuc" and r["lambda_total"] == 200.0]
    assert len(bad) == 1 and bad[0]["status"] == "overloaded"
    assert math.isnan(bad[0]["analytic_latency"])


def test_validation_deterministic(validation_rows):
    from edgefresh.model import ChannelRates
    spec = SweepSpec(family="validation", rates=ChannelRates(1000.0, 1000.0),
                     grid=(100.0, 200.0),
                     schemes=(Conventional(0.5), Rsuc(0.8), Rea((1.0,))),
                     replications=3, stop_requests=20_000)
    assert run_validation(spec) == validation_rows


def test_validation_workers_match_serial(rates):
    kwargs = dict(family="validation", rates=rates, grid=(150.0,),
                  schemes=(Conventional(0.5), Rea((1.0,))),
                  replications=2, stop_requests=5000)
    serial = run_validation(SweepSpec(**kwargs))
    fanned = run_validation(SweepSpec(workers=2, **kwargs))
    assert serial == fanned


# --- trade-off family --------------------------------------------------------

def test_tradeoff_explicit_grid(rates):
    spec = SweepSpec(family="aoi_latency_tradeoff", rates=rates, items=1,
                     lambda_total=200.0, grid=(0.004, 0.006, 0.02))
    rows = run_aoi_latency_tradeoff(spec)
    assert len(rows) == 6
    rsuc = [r for r in rows if r["scheme"] == "rsuc"]
    rea = [r for r in rows if r["scheme"] == "rea"]
    # 0.004 sits below the refresh-cycle floor, the other caps above it
    assert [r["status"] for r in rsuc] == ["infeasible", "ok", "ok"]
    assert [r["status"] for r in rea] == ["ok", "ok", "ok"]
    ok_rsuc = [r for r in rsuc if r["status"] == "ok"]
    assert ok_rsuc[0]["latency"] >= ok_rsuc[1]["latency"]
    assert ok_rsuc[0]["knob"] >= ok_rsuc[1]["knob"]
    # single item, lambda 200, cap 0.004: p^2 - 8p + 5 = 0, smaller root
    assert rea[0]["p_items"] == [pytest.approx(4.0 - math.sqrt(11.0), rel=1e-9)]
    assert rea[0]["aoi_items"][0] == pytest.approx(0.004, rel=1e-9)
    assert rea[0]["aoi"] == pytest.approx(0.004, rel=1e-9)
    lat = [r["latency"] for r in rea]
    assert lat[0] >= lat[1] >= lat[2]
    assert rea[0]["knob"] >= rea[1]["knob"] >= rea[2]["knob"]
    for row in rea:
        assert row["reserved"] == pytest.approx(1.0 - row["knob"])


def test_tradeoff_default_grid(rates):
    spec = SweepSpec(family="aoi_latency_tradeoff", rates=rates, items=1,
                     lambda_total=200.0)
    rows = run_aoi_latency_tradeoff(spec)
    rsuc = [r for r in rows if r["scheme"] == "rsuc"]
    rea = [r for r in rows if r["scheme"] == "rea"]
    assert len(rsuc) == len(rea) == 30
    assert rsuc[0]["aoi_cap"] == pytest.approx(1.05 * RSUC_FLOOR, rel=1e-9)
    assert all(r["status"] == "ok" for r in rsuc + rea)
    for rows_one_scheme in (rsuc, rea):
        lat = [r["latency"] for r in rows_one_scheme]
        assert all(a >= b - 1e-15 for a, b in zip(lat, lat[1:]))


def test_tradeoff_needs_load(rates):
    with pytest.raises(InvalidParameterError, match="lambda_total"):
        run_aoi_latency_tradeoff(SweepSpec(family="aoi_latency_tradeoff",
                                           rates=rates, grid=(0.01,)))


# --- capacity family ---------------------------------------------------------

def test_rea_capacity_binding_point(rates):
    # both constraints tight at lambda = 600, p = 2/3
    cap = rea_capacity_at_aoi(rates, 1, Popularity.uniform(), 0.0025)
    assert cap == pytest.approx(600.0, abs=2e-3)


def test_rea_capacity_rejects_corner(rates):
    for bad in (0.002, 0.0015):
        with pytest.raises(InfeasibleAoIError):
            rea_capacity_at_aoi(rates, 1, Popularity.uniform(), bad)


def test_rea_capacity_monotone(rates):
    caps = [0.0025, 0.004, 0.01, 0.1]
    values = [rea_capacity_at_aoi(rates, 1, Popularity.uniform(), c) for c in caps]
    assert all(a <= b for a, b in zip(values, values[1:]))
    # a loose cap leaves only the utilization constraint: half the rate
    assert values[-1] <= rates.r_dl


def test_capacity_family_rows(rates):
    spec = SweepSpec(family="capacity_aoi", rates=rates, items=1,
                     grid=(0.0025, 0.004, 0.01))
    rows = run_capacity_aoi(spec)
    rsuc = [r for r in rows if r["scheme"] == "rsuc"]
    rea = [r for r in rows if r["scheme"] == "rea"]
    assert [r["status"] for r in rsuc] == ["infeasible", "infeasible", "ok"]
    assert [r["status"] for r in rea] == ["ok", "ok", "ok"]
    assert rea[0]["capacity"] == pytest.approx(600.0, abs=2e-3)
    caps = [r["capacity"] for r in rea]
    assert caps[0] <= caps[1] <= caps[2]


def test_capacity_family_floor_value(rates):
    spec = SweepSpec(family="capacity_aoi", rates=rates, items=1,
                     grid=(RSUC_FLOOR,))
    rows = run_capacity_aoi(spec)
    rsuc = [r for r in rows if r["scheme"] == "rsuc"][0]
    assert rsuc["capacity"] == pytest.approx(1000.0 / (1.0 + math.sqrt(2.0)),
                                             rel=1e-6)


# --- scheme comparison family ------------------------------------------------

def test_scheme_compare_rows(rates):
    spec = SweepSpec(family="scheme_compare", rates=rates, lambda_total=200.0,
                     items_grid=(2,),
                     popularities=(Popularity.uniform(), Popularity.zipf(0.56)),
                     grid=(0.01, 0.02))
    rows = run_scheme_compare(spec)
    assert len(rows) == 8  # 2 pops x 2 schemes x 2 caps
    assert all(r["family"] == "scheme_compare" and r["items"] == 2 for r in rows)
    by_pop = {}
    for row in rows:
        by_pop.setdefault((row["scheme"], row["popularity"]), []).append(row)
    # refresh cycles ignore request popularity entirely
    uni = by_pop[("rsuc", "uniform")]
    zipf = by_pop[("rsuc", "zipf:0.56")]
    for a, b in zip(uni, zipf):
        assert (a["latency"], a["aoi"], a["knob"]) == (b["latency"], b["aoi"], b["knob"])
    for row in by_pop[("rea", "zipf:0.56")]:
        p = row["p_items"]
        assert len(p) == 2
        # the popular item refreshes on a smaller fraction of its requests
        assert p[0] <= p[1] + 1e-12
    for row in by_pop[("rea", "uniform")]:
        assert row["p_items"][0] == pytest.approx(row["p_items"][1], abs=1e-12)


# --- arrival traces ----------------------------------------------------------

def test_trace_validation():
    with pytest.raises(InvalidParameterError):
        ArrivalTrace(times=(), rates=(), horizon=1.0)
    with pytest.raises(InvalidParameterError):
        ArrivalTrace(times=(0.0, 1.0), rates=(10.0,), horizon=2.0)
    with pytest.raises(InvalidParameterError):
        ArrivalTrace(times=(1.0,), rates=(10.0,), horizon=2.0)
    with pytest.raises(InvalidParameterError):
        ArrivalTrace(times=(0.0, 1.0, 1.0), rates=(1.0, 2.0, 3.0), horizon=2.0)
    with pytest.raises(InvalidParameterError):
        ArrivalTrace(times=(0.0,), rates=(-1.0,), horizon=2.0)
    with pytest.raises(InvalidParameterError):
        ArrivalTrace(times=(0.0, 5.0), rates=(1.0, 2.0), horizon=5.0)


def test_trace_segments_and_mean():
    trace = ArrivalTrace(times=(0.0, 10.0), rates=(100.0, 300.0), horizon=20.0)
    assert trace.segments() == [(0.0, 10.0, 100.0), (10.0, 20.0, 300.0)]
    assert trace.mean_rate() == pytest.approx(200.0)
    assert ArrivalTrace.constant(50.0, 4.0).mean_rate() == 50.0


def test_trace_from_csv(tmp_path):
    path = tmp_path / "trace.csv"
    path.write_text("time,lambda\n0,100\n10,300\n20,0\n")
    trace = ArrivalTrace.from_csv(path)
    assert trace.times == (0.0, 10.0) and trace.rates == (100.0, 300.0)
    assert trace.horizon == 20.0
    explicit = ArrivalTrace.from_csv(path, horizon=25.0)
    # an explicit horizon keeps the zero-rate row as a real silent segment
    assert explicit.rates == (100.0, 300.0, 0.0) and explicit.horizon == 25.0


def test_trace_from_csv_rejections(tmp_path):
    bad_header = tmp_path / "a.csv"
    bad_header.write_text("t,rate\n0,100\n")
    with pytest.raises(InvalidParameterError, match="header"):
        ArrivalTrace.from_csv(bad_header)
    bad_fields = tmp_path / "b.csv"
    bad_fields.write_text("time,lambda\n0,100,7\n")
    with pytest.raises(InvalidParameterError, match="2 fields"):
        ArrivalTrace.from_csv(bad_fields)
    bad_value = tmp_path / "c.csv"
    bad_value.write_text("time,lambda\n0,fast\n")
    with pytest.raises(InvalidParameterError):
        ArrivalTrace.from_csv(bad_value)
    empty = tmp_path / "d.csv"
    empty.write_text("time,lambda\n")
    with pytest.raises(InvalidParameterError, match="no segments"):
        ArrivalTrace.from_csv(empty)
    open_ended = tmp_path / "e.csv"
    open_ended.write_text("time,lambda\n0,100\n")
    with pytest.raises(InvalidParameterError, match="horizon"):
        ArrivalTrace.from_csv(open_ended)


def test_trace_sampling():
    trace = ArrivalTrace(times=(0.0, 10.0), rates=(200.0, 50.0), horizon=20.0)
    first = trace.sample_arrivals(purpose_rng(9, 0, 1))
    again = trace.sample_arrivals(purpose_rng(9, 0, 1))
    np.testing.assert_array_equal(first, again)
    assert np.all(np.diff(first) >= 0)
    assert first.min() >= 0.0 and first.max() < 20.0
    n_early = int((first < 10.0).sum())
    assert n_early == pytest.approx(2000, rel=0.1)
    assert len(first) - n_early == pytest.approx(500, rel=0.2)


def test_run_trace_buckets(rates):
    trace = ArrivalTrace(times=(0.0, 5.0, 10.0), rates=(100.0, 300.0, 150.0),
                         horizon=15.0)
    rows = run_trace(trace, [Conventional(0.5), Rea((1.0,))], rates,
                     replications=3)
    assert len(rows) == 8  # (3 buckets + overall) x 2 schemes
    conv = [r for r in rows if r["scheme"] == "conventional"]
    assert [r["bucket"] for r in conv] == [0, 1, 2, "overall"]
    from edgefresh import analytic
    for row, rate in zip(conv, (100.0, 300.0, 150.0)):
        assert row["lambda_total"] == rate
        assert row["analytic_latency"] == pytest.approx(
            analytic.conv_latency(rates, rate, 0.5))
        assert row["status"] == "ok"
        assert row["n_delivered"] > 0
        # loose per-bucket agreement; buckets are short
        assert row["sim_latency"] == pytest.approx(row["analytic_latency"], rel=0.35)
    overall = conv[-1]
    assert overall["lambda_total"] == pytest.approx(trace.mean_rate())
    assert overall["n_delivered"] == sum(r["n_delivered"] for r in conv[:3])


def test_run_trace_scheme_ranking(rates):
    # stationary trace at 200/s: cache-ahead and fetch-on-demand both beat
    # the split-channel baseline by a wide margin
    trace = ArrivalTrace.constant(200.0, 40.0)
    rows = run_trace(trace, [Conventional(0.5), Rsuc(0.2), Rea((1.0,))], rates,
                     replications=3, warmup_duration=5.0)
    overall = {r["scheme"]: r for r in rows if r["bucket"] == "overall"}
    conv = overall["conventional"]["sim_latency"]
    assert conv == pytest.approx(1.0 / 150.0, rel=0.1)
    assert overall["rsuc"]["sim_latency"] <= 0.30 * conv
    assert overall["rea"]["sim_latency"] <= 0.50 * conv


def test_run_trace_unstable_bucket(rates):
    trace = ArrivalTrace(times=(0.0, 2.0, 4.0), rates=(100.0, 600.0, 100.0),
                         horizon=6.0)
    rows = run_trace(trace, [Conventional(0.5)], rates, replications=2)
    assert rows[1]["status"] == "unstable"
    assert math.isinf(rows[1]["analytic_latency"])
    assert rows[0]["status"] == "ok" and rows[2]["status"] == "ok"
    assert rows[3]["status"] == "ok"  # backlog stays under the default bound


def test_run_trace_overload_marks_tail(rates):
    trace = ArrivalTrace(times=(0.0, 2.0), rates=(100.0, 1200.0), horizon=12.0)
    rows = run_trace(trace, [Conventional(0.5)], rates, replications=2,
                     divergence_bound=200)
    assert rows[0]["status"] == "ok"
    assert rows[1]["status"] == "overloaded"
    assert rows[-1]["status"] == "overloaded"


def test_run_trace_warmup_validation(rates):
    trace = ArrivalTrace.constant(100.0, 10.0)
    with pytest.raises(InvalidParameterError, match="warmup"):
        run_trace(trace, [Conventional(0.5)], rates, warmup_duration=10.0)


def test_run_sweep_dispatch(rates):
    rows = run_sweep(SweepSpec(family="capacity_aoi", rates=rates,
                               grid=(0.01,)))
    assert {r["family"] for r in rows} == {"capacity_aoi"}
    trace_rows = run_sweep(SweepSpec(
        family="trace", rates=rates, trace=ArrivalTrace.constant(100.0, 5.0),
        replications=2))
    # default scheme set: one baseline and the two caching policies
    assert {r["scheme"] for r in trace_rows} == {"conventional", "rsuc", "rea"}


# --- serialization -----------------------------------------------------------

def test_rows_to_csv_formats_cells():
    rows = [
        {"a": 1.0 / 3.0, "b": None, "c": True, "d": [1.5, 2.0]},
        {"a": 2.0, "c": False, "e": "x"},
    ]
    text = rows_to_csv(rows)
    lines = text.splitlines()
    assert lines[0] == "a,b,c,d,e"
    assert lines[1] == "0.333333333333,,true,1.5;2,"
    assert lines[2] == "2,,false,,x"
    assert text.endswith("\n")
    with pytest.raises(InvalidParameterError):
        rows_to_csv([])


def test_json_safe():
    assert json_safe(math.inf) is None
    assert json_safe(math.nan) is None
    assert json_safe([1.0, math.inf, "x"]) == [1.0, None, "x"]
    assert json_safe(3.5) == 3.5


def test_write_table(tmp_path):
    rows = [{"x": 1.0, "y": math.inf}, {"x": 2.0, "y": 0.5}]
    csv_path = tmp_path / "out.csv"
    write_table(rows, csv_path)
    assert csv_path.read_text().splitlines()[0] == "x,y"
    json_path = tmp_path / "out.json"
    write_table(rows, json_path)
    loaded = json.loads(json_path.read_text())
    assert loaded[0]["y"] is None and loaded[1]["y"] == 0.5
    with pytest.raises(InvalidParameterError):
        write_table(rows, tmp_path / "out.parquet")
    with pytest.raises(InvalidParameterError):
        write_table([], csv_path)
