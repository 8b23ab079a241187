import pytest

from p4te.engine import EventLoop, SchedulingError, millis, seconds


def test_equal_times_dispatch_in_schedule_order():
    loop = EventLoop()
    out = []
    for tag in "abc":
        loop.schedule(100, out.append, tag)
    loop.call_at(50, out.append, "first")
    loop.run_until(1000)
    assert out == ["first", "a", "b", "c"]
    assert loop.now == 100


def test_run_until_is_inclusive_and_leaves_later_events():
    loop = EventLoop()
    out = []
    loop.call_at(10, out.append, 1)
    loop.call_at(20, out.append, 2)
    s = loop.run_until(10)
    assert out == [1] and s.pending == 1
    loop.run_until(20)
    assert out == [1, 2]


def test_past_scheduling_rejected():
    loop = EventLoop()
    loop.call_at(10, lambda: None)
    loop.run_until(10)
    with pytest.raises(SchedulingError):
        loop.schedule(5, lambda: None)
    with pytest.raises(SchedulingError):
        loop.call_at(9, lambda: None)


def test_cancel_and_halt():
    loop = EventLoop()
    out = []
    h = loop.schedule(5, out.append, "x")
    h.cancel()
    assert h.cancelled
    loop.call_at(6, lambda: setattr(loop, "halted", True))
    loop.call_at(7, out.append, "late")
    loop.run_until(100)
    assert out == []
    assert loop.pending() == 1


def test_stop_predicate():
    loop = EventLoop()
    out = []
    for t in range(10):
        loop.call_at(t, out.append, t)
    loop.run_until(100, stop=lambda: len(out) == 3)
    assert out == [0, 1, 2]


def test_events_scheduled_by_handlers_run():
    loop = EventLoop()
    out = []

    def chain(n):
        out.append((loop.now, n))
        if n:
            loop.call_at(loop.now + 3, chain, n - 1)

    loop.call_at(0, chain, 3)
    loop.run_until(100)
    assert out == [(0, 3), (3, 2), (6, 1), (9, 0)]


def test_time_helpers():
    assert seconds(1.5) == 1_500_000_000
    assert millis(40) == 40_000_000
