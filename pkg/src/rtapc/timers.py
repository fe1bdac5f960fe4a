"""Drift-free interval timers with concurrent callbacks and jitter logging.

Tick k of a started timer is scheduled at the absolute instant
``start + start_delay + k*interval`` (k = 1, 2, ...).  Deadlines are computed
by multiplication, never by accumulation, so a late callback does not push
later deadlines and timers with commensurate intervals stay exactly aligned.
If a callback is still running when its next deadline arrives, that tick is
skipped and logged rather than queued or run re-entrantly.

Two clocks drive timers: the wall clock (monotonic OS time, one timing thread
per timer, callbacks dispatched to fresh threads) and a virtual clock whose
time advances only when the test harness says so, firing due callbacks
synchronously with zero jitter.
"""

from __future__ import annotations

import heapq
import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

NSEC_PER_SEC = 1_000_000_000


class TimerError(Exception):
    """Invalid timer configuration or use."""


class TimerStateError(TimerError):
    """An operation was applied in a state that does not allow it."""


def split_interval(interval: float) -> tuple[int, int]:
    """Decompose an interval into whole seconds and nanoseconds.

    Mirrors the itimerspec convention: 2.5 s -> (2, 500_000_000).
    """
    if not math.isfinite(interval) or interval <= 0:
        raise TimerError(f"interval must be a positive finite number, got {interval!r}")
    whole = int(interval)
    nsec = round((interval - whole) * NSEC_PER_SEC)
    if nsec >= NSEC_PER_SEC:
        whole += 1
        nsec = 0
    if whole == 0 and nsec == 0:
        raise TimerError(f"interval {interval!r} is below clock resolution (1 ns)")
    return whole, nsec


class WallClock:
    """Monotonic OS clock; waits can be interrupted for prompt stops."""

    def now(self) -> float:
        return time.monotonic()

    def wait_until(self, deadline: float, interrupt: threading.Event) -> bool:
        """Sleep until ``deadline``; True if interrupted first."""
        while True:
            remaining = deadline - self.now()
            if remaining <= 0:
                return False
            if interrupt.wait(remaining):
                return True


class _VirtualEvent:
    __slots__ = ("deadline", "order", "timer", "cancelled")

    def __init__(self, deadline: float, order: int, timer: "Timer"):
        self.deadline = deadline
        self.order = order
        self.timer = timer
        self.cancelled = False

    def __lt__(self, other: "_VirtualEvent") -> bool:
        return (self.deadline, self.order) < (other.deadline, other.order)


class VirtualClock:
    """Simulated time advanced explicitly; due callbacks run synchronously.

    Timers fire at exactly ``start_delay + k*interval`` on this clock.  When
    several timers are due at the same instant they fire in the order they
    were started, which makes multi-timer runs fully deterministic.
    """

    def __init__(self, start: float = 0.0):
        self._now = float(start)
        self._heap: list[_VirtualEvent] = []
        self._order = 0
        self._lock = threading.RLock()

    def now(self) -> float:
        with self._lock:
            return self._now

    def _attach(self, timer: "Timer", epoch: float) -> None:
        with self._lock:
            order = self._order
            self._order += 1
            timer._virtual_order = order
            timer._virtual_k = 1
            timer._virtual_epoch = epoch
            self._push_next(timer)

    def _push_next(self, timer: "Timer") -> None:
        deadline = timer._virtual_epoch + timer.start_delay + timer._virtual_k * timer.interval
        event = _VirtualEvent(deadline, timer._virtual_order, timer)
        timer._virtual_event = event
        heapq.heappush(self._heap, event)

    def _detach(self, timer: "Timer") -> None:
        with self._lock:
            if timer._virtual_event is not None:
                timer._virtual_event.cancelled = True
                timer._virtual_event = None

    def advance_to(self, target: float) -> None:
        """Run every due callback in time order, then set now to ``target``."""
        if target < self.now():
            raise TimerError(f"cannot advance backwards to {target} (now {self.now()})")
        while True:
            with self._lock:
                while self._heap and self._heap[0].cancelled:
                    heapq.heappop(self._heap)
                if not self._heap or self._heap[0].deadline > target:
                    self._now = target
                    return
                event = heapq.heappop(self._heap)
                self._now = event.deadline
                timer = event.timer
                timer._virtual_event = None
            timer._fire_virtual(event.deadline)

    def advance(self, dt: float) -> None:
        if dt < 0:
            raise TimerError(f"cannot advance by a negative amount ({dt})")
        self.advance_to(self.now() + dt)


Clock = WallClock | VirtualClock

CREATED = "created"
RUNNING = "running"
STOPPED = "stopped"
DELETED = "deleted"


@dataclass
class TickLog:
    """Actual invocation instants of one timer, plus any skipped deadlines."""

    instants: list[float] = field(default_factory=list)
    skipped: list[float] = field(default_factory=list)

    def intervals(self) -> list[float]:
        return [b - a for a, b in zip(self.instants, self.instants[1:])]

    def write_csv(self, fh) -> None:
        """Rows ``k,t_k,dt_k`` (dt blank on the first row)."""
        fh.write("k,t_k,dt_k\n")
        prev = None
        for k, t in enumerate(self.instants, start=1):
            dt = "" if prev is None else repr(t - prev)
            fh.write(f"{k},{t!r},{dt}\n")
            prev = t


@dataclass(frozen=True)
class JitterStats:
    """Summary of the interval sequence of one tick log."""

    count: int
    mean: float
    minimum: float
    maximum: float
    std: float
    bin_width: float
    bin_edges: list[float]
    bin_counts: list[int]

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean,
            "min": self.minimum,
            "max": self.maximum,
            "std": self.std,
            "bin_width": self.bin_width,
            "bin_edges": self.bin_edges,
            "bin_counts": self.bin_counts,
        }


def jitter_stats(log: TickLog | list[float], bin_width: float = 0.001) -> JitterStats:
    """Interval statistics and histogram for a tick log.

    The mean is ``(t_N - t_1) / (N - 1)``; the histogram bins have the given
    width and cover ``[min, max]`` of the observed intervals.
    """
    instants = log.instants if isinstance(log, TickLog) else list(log)
    if len(instants) < 2:
        raise TimerError(f"need at least 2 tick instants for jitter stats, got {len(instants)}")
    if bin_width <= 0:
        raise TimerError(f"bin width must be positive, got {bin_width}")
    dts = np.diff(np.asarray(instants, dtype=float))
    mean = (instants[-1] - instants[0]) / (len(instants) - 1)
    lo, hi = float(dts.min()), float(dts.max())
    nbins = max(1, math.ceil((hi - lo) / bin_width - 1e-12))
    edges = lo + np.arange(nbins + 1) * bin_width
    counts, _ = np.histogram(dts, bins=edges)
    return JitterStats(
        count=len(dts),
        mean=float(mean),
        minimum=lo,
        maximum=hi,
        std=float(dts.std()),
        bin_width=bin_width,
        bin_edges=[float(e) for e in edges],
        bin_counts=[int(c) for c in counts],
    )


class Timer:
    """A periodic task bound to a clock.

    State machine: created -> running <-> stopped, any -> deleted.  Restarting
    a stopped timer begins a fresh absolute grid at the restart instant.  The
    callback takes no arguments; bind context with a closure or functools.partial.
    """

    def __init__(
        self,
        interval: float,
        callback,
        clock: Clock | None = None,
        start_delay: float = 0.0,
        name: str = "timer",
        log_ticks: bool = False,
    ):
        split_interval(interval)  # validates
        if not math.isfinite(start_delay) or start_delay < 0:
            raise TimerError(f"start delay must be >= 0, got {start_delay!r}")
        if not callable(callback):
            raise TimerError("callback must be callable")
        self.interval = float(interval)
        self.start_delay = float(start_delay)
        self.callback = callback
        self.clock = clock if clock is not None else WallClock()
        self.name = name
        self.log = TickLog() if log_ticks else None
        self.state = CREATED
        self._state_lock = threading.Lock()
        # wall-clock machinery
        self._stop_event: threading.Event | None = None
        self._thread: threading.Thread | None = None
        self._busy = threading.Event()
        # virtual-clock machinery
        self._virtual_event: _VirtualEvent | None = None
        self._virtual_order = 0
        self._virtual_k = 0
        self._virtual_epoch = 0.0

    @property
    def busy(self) -> bool:
        """True while a wall-clock callback is still executing."""
        return self._busy.is_set()

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        with self._state_lock:
            if self.state not in (CREATED, STOPPED):
                raise TimerStateError(f"cannot start timer in state {self.state!r}")
            self.state = RUNNING
            epoch = self.clock.now()
            if isinstance(self.clock, VirtualClock):
                self.clock._attach(self, epoch)
            else:
                self._stop_event = threading.Event()
                self._thread = threading.Thread(
                    target=self._run_wall, args=(epoch, self._stop_event),
                    name=f"{self.name}-timer", daemon=True,
                )
                self._thread.start()

    def stop(self) -> None:
        with self._state_lock:
            if self.state != RUNNING:
                raise TimerStateError(f"cannot stop timer in state {self.state!r}")
            self.state = STOPPED
            self._halt()

    def delete(self) -> None:
        with self._state_lock:
            if self.state == DELETED:
                raise TimerStateError("timer already deleted")
            if self.state == RUNNING:
                self._halt()
            self.state = DELETED

    def _halt(self) -> None:
        if isinstance(self.clock, VirtualClock):
            self.clock._detach(self)
        elif self._stop_event is not None:
            self._stop_event.set()
            thread, self._thread = self._thread, None
            if thread is not None and thread is not threading.current_thread():
                thread.join()

    # -- wall-clock loop -----------------------------------------------------

    def _run_wall(self, epoch: float, stop_event: threading.Event) -> None:
        k = 1
        while not stop_event.is_set():
            deadline = epoch + self.start_delay + k * self.interval
            if self.clock.wait_until(deadline, stop_event):
                return
            self._dispatch(deadline)
            k += 1

    def _dispatch(self, deadline: float) -> None:
        if self._busy.is_set():
            if self.log is not None:
                self.log.skipped.append(deadline)
            return
        self._busy.set()
        if self.log is not None:
            self.log.instants.append(self.clock.now())
        worker = threading.Thread(target=self._invoke, name=f"{self.name}-tick", daemon=True)
        worker.start()

    def _invoke(self) -> None:
        try:
            self.callback()
        finally:
            self._busy.clear()

    # -- virtual-clock firing --------------------------------------------------

    def _fire_virtual(self, deadline: float) -> None:
        if self.state != RUNNING:
            return
        if self.log is not None:
            self.log.instants.append(deadline)
        try:
            self.callback()
        finally:
            with self._state_lock:
                if self.state == RUNNING:
                    assert isinstance(self.clock, VirtualClock)
                    with self.clock._lock:
                        self._virtual_k += 1
                        self.clock._push_next(self)
