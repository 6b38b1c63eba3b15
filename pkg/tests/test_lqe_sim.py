import math
import random

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from oracles import fluid_drop_rate, loguniform_mixture_mean_numeric
from pktaccel.lqe_sim import (SERVICE_COUNTS, SERVICE_EDGES, SERVICE_TOTAL, Case, HeapEvents, Model, MrpqEvents,
                              SimParams, arrival_times, better_model, decide_model, sample_service_times,
                              service_time_from_table2, simulate, solarflare_params, service_mean,
                              service_probabilities)


def P(**kw):
    base = dict(lambda_avg=50.0, lambda_max=1000.0, mu_dt=80.0, mu_lqe=100.0, s_lsr=1)
    base.update(kw)
    return SimParams(**base)


# -- decision procedure ---------------------------------------------------

def test_decide_case4_hand_example():
    c = decide_model(P())
    assert c.choice is Model.DT and c.case_id is Case.CASE_4


def test_decide_boundary_is_case2():
    # s_lsr / lambda_max == 1 / mu_lqe exactly
    c = decide_model(P(s_lsr=10, lambda_max=1000.0, mu_lqe=100.0))
    assert c.choice is Model.LQE and c.case_id is Case.CASE_2


def test_decide_case3():
    c = decide_model(P(lambda_avg=150.0, mu_lqe=100.0))
    assert (c.choice, c.case_id) == (Model.LQE, Case.CASE_3)


def test_decide_reference_nic():
    p = solarflare_params()
    assert p.s_lsr / p.lambda_max == pytest.approx(0.109, abs=0.001)
    assert 1 / p.mu_lqe < 0.1
    c = decide_model(p)
    assert (c.choice, c.case_id) == (Model.LQE, Case.CASE_2)


@pytest.mark.parametrize("bad", [dict(mu_dt=100.0, mu_lqe=100.0), dict(mu_dt=0.0), dict(s_lsr=0),
                                 dict(lambda_avg=2000.0), dict(lambda_avg=-1.0), dict(burst_on_s=0.0),
                                 dict(service="weibull"), dict(usq_capacity=0), dict(s_lsr=1.5)])
def test_invalid_params(bad):
    with pytest.raises(ValueError):
        decide_model(P(**bad))


@given(st.floats(1, 1e6), st.floats(1, 1e6), st.floats(1.01, 10), st.floats(1, 1e5), st.integers(1, 10**6))
def test_choice_and_case_consistent(lam, lam_max_extra, ratio, mu_dt, s):
    p = P(lambda_avg=lam, lambda_max=lam + lam_max_extra, mu_dt=mu_dt, mu_lqe=mu_dt * ratio, s_lsr=s)
    c = decide_model(p)
    assert (c.case_id in (Case.CASE_2, Case.CASE_3)) == (c.choice is Model.LQE)
    assert (c.case_id is Case.CASE_4) == (c.choice is Model.DT)


# -- arrivals ---------------------------------------------------------------

def test_arrival_profile_mean():
    p = P(burst_on_s=1.0, burst_off_s=9.0, lambda_avg=150.0, lambda_max=1000.0, duration_s=100.0)
    lam_off, eff = p.arrival_profile()
    assert lam_off == pytest.approx((150 * 10 - 1000) / 9)
    assert eff == pytest.approx(150.0)
    n = sum(1 for _ in arrival_times(p))
    assert n == pytest.approx(15000, rel=0.01)


def test_arrival_profile_clamps():
    p = P(burst_on_s=5.0, burst_off_s=5.0, lambda_avg=100.0, lambda_max=1000.0)
    lam_off, eff = p.arrival_profile()
    assert lam_off == 0.0 and eff == pytest.approx(500.0)
    assert simulate(p, "LQE").lambda_avg_effective == pytest.approx(500.0)


@given(st.floats(10, 5000), st.floats(0.01, 2), st.floats(0, 2))
@settings(max_examples=40, deadline=None)
def test_arrivals_never_closer_than_peak_spacing(lam_max, on, off):
    p = P(lambda_avg=lam_max / 3, lambda_max=lam_max, burst_on_s=on, burst_off_s=off, duration_s=3.0)
    ts = list(arrival_times(p))
    assert ts == sorted(ts)
    gaps = np.diff(ts)
    if len(gaps):
        assert gaps.min() >= 1 / lam_max - 1e-9


# -- simulator -------------------------------------------------------------

def test_zero_arrivals():
    r = simulate(P(lambda_avg=0.0), "LQE")
    assert (r.arrived, r.processed, r.dropped_lsr, r.dropped_usq, r.in_flight) == (0, 0, 0, 0, 0)
    assert simulate(P(lambda_avg=0.0), "DT").arrived == 0


def test_case3_rates_match_fluid_model():
    p = P(lambda_avg=1500.0, lambda_max=1500.0, mu_dt=800.0, mu_lqe=1000.0, s_lsr=1, duration_s=100.0)
    lq = simulate(p, Model.LQE)
    dt = simulate(p, Model.DT)
    assert lq.drop_rate_pps == pytest.approx(fluid_drop_rate(1500, 1000), rel=0.05)
    assert dt.drop_rate_pps == pytest.approx(fluid_drop_rate(1500, 800), rel=0.05)


def test_case2_no_drops_in_either_model():
    p = P(lambda_avg=60.0, lambda_max=1000.0, mu_dt=80.0, mu_lqe=100.0, s_lsr=10,
          burst_on_s=0.2, burst_off_s=1.8, duration_s=20.0)
    assert decide_model(p).case_id is Case.CASE_2
    for m in Model:
        r = simulate(p, m)
        assert r.dropped_lsr == 0 and r.dropped_usq == 0


def test_case4_lqe_drops_dt_does_not():
    p = P(lambda_avg=50.0, lambda_max=1000.0, mu_dt=80.0, mu_lqe=100.0, s_lsr=2,
          burst_on_s=0.5, burst_off_s=9.5, duration_s=20.0)
    assert simulate(p, "LQE").dropped_lsr > 0
    assert simulate(p, "DT").dropped_lsr == 0


def test_bounded_usq_drops():
    p = P(lambda_avg=1500.0, lambda_max=1500.0, mu_dt=800.0, mu_lqe=1000.0, s_lsr=1, usq_capacity=10,
          duration_s=5.0)
    r = simulate(p, "DT")
    assert r.dropped_usq > 0 and r.max_usq_depth <= 10


def test_event_lists_agree():
    p = P(lambda_avg=300.0, lambda_max=900.0, mu_dt=250.0, mu_lqe=400.0, s_lsr=3, burst_on_s=0.3,
          burst_off_s=0.7, duration_s=10.0, service="table2", seed=4)
    for m in Model:
        assert simulate(p, m, "mrpq") == simulate(p, m, "heap")


def test_deterministic_given_seed():
    p = P(service="table2", seed=11, duration_s=5.0)
    assert simulate(p, "LQE").to_json() == simulate(p, "LQE").to_json()


def test_event_list_far_future_overflow():
    ev = MrpqEvents()
    ev.push(5.0, 0)
    ev.push(0.5, 1)
    ev.push(0.5, 0)
    ev.push(3000.0, 1)
    out = [ev.pop() for _ in range(4)]
    assert out == [(0.5, 0), (0.5, 1), (5.0, 0), (3000.0, 1)]
    assert ev.pop() is None


@given(st.lists(st.tuples(st.floats(0, 10), st.integers(0, 1)), max_size=50))
def test_event_lists_pop_in_same_order(evs):
    a, b = MrpqEvents(), HeapEvents()
    # events are only pushed at or after the last popped time
    evs = sorted(evs)
    for t, k in evs:
        a.push(t, k)
        b.push(t, k)
    assert [a.pop() for _ in evs] == [b.pop() for _ in evs]


sim_params = st.builds(
    lambda lam_frac, lam_max, mu_dt, ratio, s, on, off, cap, model: (
        SimParams(lambda_avg=lam_max * lam_frac, lambda_max=lam_max, mu_dt=mu_dt, mu_lqe=mu_dt * ratio, s_lsr=s,
                  usq_capacity=cap, burst_on_s=on, burst_off_s=off, duration_s=2.0), model),
    st.floats(0.05, 1.0), st.floats(10, 2000), st.floats(10, 1500), st.floats(1.05, 3), st.integers(1, 40),
    st.floats(0.05, 1), st.floats(0, 1), st.one_of(st.none(), st.integers(1, 50)), st.sampled_from(list(Model)))


@settings(max_examples=60, deadline=None)
@given(sim_params)
def test_conservation(pm):
    p, m = pm
    r = simulate(p, m)
    assert r.arrived == r.processed + r.dropped_lsr + r.dropped_usq + r.in_flight


@settings(max_examples=40, deadline=None)
@given(sim_params, st.integers(1, 20))
def test_larger_ring_never_drops_more(pm, extra):
    p, m = pm
    bigger = SimParams(**{**p.__dict__, "s_lsr": p.s_lsr + extra})
    assert simulate(bigger, m).dropped_lsr <= simulate(p, m).dropped_lsr


@settings(max_examples=60, deadline=None)
@given(st.floats(10, 3000), st.floats(5, 500), st.floats(1.05, 4), st.floats(0.05, 0.99), st.floats(0.05, 1),
       st.floats(0, 2))
def test_lqe_lossless_when_ring_covers_one_service(lam_max, mu_dt, ratio, frac, on, off):
    mu_lqe = mu_dt * ratio
    lam = min(lam_max * frac, mu_lqe * 0.99)
    s = math.ceil(lam_max / mu_lqe)
    p = SimParams(lambda_avg=lam, lambda_max=lam_max, mu_dt=mu_dt, mu_lqe=mu_lqe, s_lsr=s, burst_on_s=on,
                  burst_off_s=off, duration_s=3.0)
    assume(p.arrival_profile()[1] < mu_lqe)
    r = simulate(p, Model.LQE)
    assert r.dropped_lsr == 0 and r.dropped_usq == 0


@settings(max_examples=30, deadline=None)
@given(st.floats(200, 3000), st.floats(20, 100), st.floats(1.05, 2), st.integers(1, 3))
def test_short_ring_bursts_hurt_lqe_only(lam_max, mu_dt, ratio, s):
    mu_lqe = mu_dt * ratio
    assume(s < lam_max / mu_lqe - 1)
    p = SimParams(lambda_avg=mu_dt * 0.5, lambda_max=lam_max, mu_dt=mu_dt, mu_lqe=mu_lqe, s_lsr=s,
                  burst_on_s=0.5, burst_off_s=20.0, duration_s=20.5)
    assume(p.arrival_profile()[0] > 0 or True)
    assert simulate(p, Model.LQE).dropped_lsr > 0
    assert simulate(p, Model.DT).dropped_lsr == 0


def test_better_model_tie_goes_to_lqe():
    p = P(lambda_avg=10.0, lambda_max=20.0, s_lsr=100, duration_s=2.0)
    winner, dt, lq = better_model(p)
    assert dt.unserved == lq.unserved == 0
    assert winner is Model.LQE


def test_report_json_fields():
    import json
    d = json.loads(simulate(P(duration_s=1.0), "DT").to_json())
    for f in ("arrived", "processed", "dropped_lsr", "dropped_usq", "drop_rate_pps", "max_usq_depth",
              "max_lsr_depth"):
        assert f in d


def test_from_dict():
    p = SimParams.from_dict(dict(lambda_avg=1, lambda_max=2, mu_dt=1, mu_lqe=2, s_lsr=1, usq_capacity="unbounded"))
    assert p.usq_capacity is None
    with pytest.raises(ValueError):
        SimParams.from_dict(dict(lambda_avg=1))
    with pytest.raises(ValueError):
        SimParams.from_dict(dict(lambda_avg=1, lambda_max=2, mu_dt=1, mu_lqe=2, s_lsr=1, bogus=3))


# -- service time histogram -----------------------------------------------

def test_service_probabilities():
    probs = service_probabilities()
    assert sum(probs) == pytest.approx(1.0)
    assert sum(SERVICE_COUNTS) == SERVICE_TOTAL
    assert probs == tuple(c / 3_793_778 for c in SERVICE_COUNTS)


def test_service_hist_single_band():
    rng = random.Random(1)
    for _ in range(1000):
        x = service_time_from_table2(rng, edges=(1e-3, 1e-2), counts=(5,))
        assert 1e-3 <= x < 1e-2


def test_service_hist_samples_in_range():
    rng = random.Random(2)
    xs = [service_time_from_table2(rng) for _ in range(10_000)]
    assert min(xs) >= 1e-6 and max(xs) < 0.1


def test_service_mean_matches_numeric_integration():
    assert service_mean() == pytest.approx(loguniform_mixture_mean_numeric(SERVICE_EDGES, SERVICE_COUNTS), rel=1e-6)


def test_service_hist_empirical_mean():
    xs = sample_service_times(np.random.default_rng(0), 1_000_000)
    assert xs.mean() == pytest.approx(service_mean(), rel=0.05)
