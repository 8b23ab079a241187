from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import SingleBucketOracle, TokenBucketOracle
from p4te.meters import MeterConfigError, SrTcmMeter, TrTcmMeter, link_meter
from p4te.packet import Color


def random_trace(seed, n, mean_gap_ns, max_cost=3):
    rng = np.random.default_rng(seed)
    gaps = rng.exponential(mean_gap_ns, n).astype(np.int64)
    # some simultaneous arrivals
    gaps[rng.random(n) < 0.1] = 0
    return np.cumsum(gaps).tolist(), rng.integers(1, max_cost + 1, n).tolist()


@pytest.mark.parametrize("seed", range(5))
def test_trtcm_matches_oracle_on_random_trace(seed):
    cir, pir, cbs, pbs = Fraction(900), Fraction(1000), Fraction(50), Fraction(50)
    times, costs = random_trace(seed, 10_000, 1_000_000)
    m, o = TrTcmMeter(cir, pir, cbs, pbs), TokenBucketOracle(cir, pir, cbs, pbs)
    got = [int(m.mark(t, c)) for t, c in zip(times, costs)]
    want = [o.mark(t, c) for t, c in zip(times, costs)]
    assert got == want
    # the trace should exercise all three colors
    assert set(want) == {0, 1, 2}


@pytest.mark.parametrize("seed", range(5))
def test_srtcm_matches_oracle_on_random_trace(seed):
    rate, burst = Fraction(288, 7), Fraction(16)
    times, costs = random_trace(100 + seed, 10_000, 20_000_000, max_cost=16)
    m, o = SrTcmMeter(rate, burst), SingleBucketOracle(rate, burst)
    got = [int(m.mark(t, c)) for t, c in zip(times, costs)]
    want = [o.mark(t, c) for t, c in zip(times, costs)]
    assert got == want
    assert set(want) == {0, 1}


@settings(max_examples=60, deadline=None)
@given(
    cir=st.integers(1, 5000), extra=st.integers(0, 5000), cbs=st.integers(1, 100), pbs=st.integers(1, 100),
    gaps=st.lists(st.integers(0, 50_000_000), min_size=1, max_size=200),
)
def test_trtcm_oracle_property(cir, extra, cbs, pbs, gaps):
    m, o = TrTcmMeter(cir, cir + extra, cbs, pbs), TokenBucketOracle(cir, cir + extra, cbs, pbs)
    t = 0
    for g in gaps:
        t += g
        assert int(m.mark(t, 1)) == o.mark(t, 1)
        assert 0 <= m.committed_tokens <= cbs and 0 <= m.peak_tokens <= pbs


def test_first_packet_is_green():
    assert TrTcmMeter(1, 2, 1, 1).mark(0) is Color.GREEN
    assert SrTcmMeter(1, 1).mark(0) is Color.GREEN


def test_sustained_rate_between_rates_turns_yellow():
    # CIR=75%, PIR=95% of 1000 pps with 5% bursts, arrivals at 85%
    m = link_meter(1000, Fraction(3, 4), Fraction(19, 20))
    gap = round(1e9 / 850)
    colors = [m.mark(i * gap) for i in range(5000)]
    assert colors[0] is Color.GREEN
    assert Color.YELLOW in colors
    assert Color.RED not in colors


def test_long_run_color_fractions():
    # r <= CIR: all GREEN after warmup
    m = TrTcmMeter(100, 200, 5, 5)
    colors = [m.mark(i * 12_500_000) for i in range(10_000)]  # 80 pps
    assert all(c is Color.GREEN for c in colors[100:])
    # r > PIR: RED fraction converges to (r - PIR) / r
    m = TrTcmMeter(100, 200, 5, 5)
    r = 300
    colors = [m.mark(round(i * 1e9 / r)) for i in range(10_000)]
    red = sum(c is Color.RED for c in colors) / len(colors)
    assert red == pytest.approx((r - 200) / r, rel=0.05)


def test_configuration_is_immutable():
    m = TrTcmMeter(1, 2, 1, 1)
    with pytest.raises(MeterConfigError):
        m.cir = 5
    s = SrTcmMeter(1, 1)
    with pytest.raises(MeterConfigError):
        s.rate = 2


@pytest.mark.parametrize("args", [(0, 1, 1, 1), (2, 1, 1, 1), (1, 2, 0, 1)])
def test_bad_configuration_rejected(args):
    with pytest.raises(ValueError):
        TrTcmMeter(*args)


def test_time_must_not_go_backwards():
    m = TrTcmMeter(1, 2, 1, 1, now=10)
    with pytest.raises(ValueError):
        m.mark(5)


def test_link_meter_burst_is_five_percent_of_a_second():
    m = link_meter(320, Fraction(9, 10), 1)
    assert m.cbs == m.pbs == 16
    assert m.cir == 288 and m.pir == 320
