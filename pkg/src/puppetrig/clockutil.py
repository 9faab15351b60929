"""Monotonic clocks: real for live operation, virtual for deterministic runs."""

import time

NS = 1_000_000_000


class RealClock:
    """Monotonic nanoseconds since construction."""

    virtual = False

    def __init__(self):
        self._epoch = time.monotonic_ns()

    def now(self):
        return time.monotonic_ns() - self._epoch

    def sleep_until(self, stamp):
        remaining = (stamp - self.now()) / NS
        if remaining > 0:
            time.sleep(remaining)


class VirtualClock:
    """Tick-driven clock advanced explicitly by the scheduler."""

    virtual = True

    def __init__(self, start=0):
        self._now = start

    def now(self):
        return self._now

    def advance_to(self, stamp):
        if stamp < self._now:
            raise ValueError("virtual clock cannot run backwards")
        self._now = stamp

    def sleep_until(self, stamp):
        self.advance_to(max(stamp, self._now))
