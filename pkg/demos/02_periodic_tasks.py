"""Periodic tasks on absolute deadline grids, with jitter measurement.

Timers fire callbacks at epoch + k*interval, so one late tick does not
shift the grid.  A tick that arrives while the previous callback still
runs is skipped, never queued.  The same Timer runs unchanged against a
virtual clock for deterministic replays.
"""

import time

from rtapc.timers import Timer, VirtualClock, WallClock, jitter_stats

############################################################
# Wall clock: real time, measured

clock = WallClock()
timer = Timer(0.05, lambda: None, clock, name="demo", log_ticks=True)
timer.start()
time.sleep(2.0)
timer.stop()

stats = jitter_stats(timer.log)
print(f"{stats.count} intervals over 2 s at 50 ms nominal")
print(f"  mean {stats.mean * 1e3:.3f} ms   min {stats.minimum * 1e3:.3f} ms   "
      f"max {stats.maximum * 1e3:.3f} ms   std {stats.std * 1e6:.1f} us")
print(f"  skipped ticks: {len(timer.log.skipped)}")

# A callback that overruns its period: the missed deadlines are recorded
# and the grid stays anchored, so the long-run rate is still correct.
slow = Timer(0.05, lambda: time.sleep(0.12), clock, name="slow", log_ticks=True)
slow.start()
time.sleep(1.0)
slow.stop()
print(f"overrunning task: {len(slow.log.instants)} fired, "
      f"{len(slow.log.skipped)} skipped (period 50 ms, body 120 ms)")

############################################################
# Virtual clock: same timers, simulated time, exact deadlines

vclock = VirtualClock()
ticks: list[float] = []
vtimer = Timer(0.5, lambda: ticks.append(vclock.now()), vclock, name="virtual", log_ticks=True)
vtimer.start()
vclock.advance_to(3.0)  # fires every due deadline in order, instantly
vtimer.stop()

print(f"virtual ticks: {ticks}")
vstats = jitter_stats(vtimer.log)
print(f"virtual jitter: min {vstats.minimum} s, max {vstats.maximum} s (no scheduling noise)")
