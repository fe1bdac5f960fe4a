"""Closed-loop experiment orchestration.

One call wires the full loop: a plant server integrating a first-order model,
a client bridge exchanging actuator and sensor records over TCP, a PI control
task, and a setpoint schedule, each driven by its own periodic timer.  The
timers share one clock, so the same orchestration runs in real time (wall
clock) or deterministically in simulated time (virtual clock).

Artifacts written per run: ``timeseries.csv`` (one row per control tick),
``jitter_<timer>.csv`` for the simulator (p), control (c), and client (cl)
timers, and ``summary.json`` with per-timer mean intervals and the final
tracking error of every setpoint segment.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .bridge import Bridge, BridgeConfig
from .control import ControlTask, PIController
from .gateway import MonitorGateway
from .plant_server import DEFAULT_HOST, DEFAULT_PORT, PlantServer
from .records import STATUS_OK, now_utc
from .simulation import PlantState, SimConfig, Simulator, first_order
from .store import DataStore
from .timers import TickLog, Timer, TimerStateError, VirtualClock, WallClock, jitter_stats

log = logging.getLogger(__name__)


class ExperimentError(Exception):
    """Invalid configuration or a fatal startup failure (message names the module)."""


def _positive(name: str, value: float) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
        raise ExperimentError(f"{name} must be a positive number, got {value!r}")
    if not math.isfinite(value):
        raise ExperimentError(f"{name} must be finite, got {value!r}")
    return float(value)


@dataclass
class PlantConfig:
    """First-order plant and its simulator timer: dx/dt = (K*u - x)/tau."""

    K: float = 10.0
    tau: float = 10.0
    ts_p: float = 0.2
    n_substeps: int = 10
    x0: float = 0.0

    def __post_init__(self) -> None:
        _positive("plant.tau", self.tau)
        _positive("plant.ts_p", self.ts_p)
        if not isinstance(self.n_substeps, int) or self.n_substeps < 1:
            raise ExperimentError(f"plant.n_substeps must be an integer >= 1, got {self.n_substeps!r}")
        if not math.isfinite(self.x0):
            raise ExperimentError(f"plant.x0 must be finite, got {self.x0!r}")


@dataclass
class ControllerConfig:
    kp: float = 0.2
    tau_i: float = 10.0
    u_bar: float = 0.0
    ts_c: float = 2.0
    i_bar: float = 0.0

    def __post_init__(self) -> None:
        _positive("controller.tau_i", self.tau_i)
        _positive("controller.ts_c", self.ts_c)


@dataclass
class LinkConfig:
    """Client-bridge exchange interval."""

    ts_cl: float = 0.5

    def __post_init__(self) -> None:
        _positive("bridge.ts_cl", self.ts_cl)


@dataclass
class SetpointConfig:
    """Stepwise setpoint schedule: values applied every ts_z seconds, last held."""

    ts_z: float = 150.0
    values: list[float] = field(default_factory=lambda: [2.0, 4.0, 3.0])

    def __post_init__(self) -> None:
        _positive("setpoint.ts_z", self.ts_z)
        if not self.values:
            raise ExperimentError("setpoint.values must not be empty")
        for v in self.values:
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ExperimentError(f"setpoint value must be a finite number, got {v!r}")
        self.values = [float(v) for v in self.values]


@dataclass
class ExperimentConfig:
    plant: PlantConfig = field(default_factory=PlantConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    bridge: LinkConfig = field(default_factory=LinkConfig)
    setpoint: SetpointConfig = field(default_factory=SetpointConfig)
    duration: float = 450.0
    clock: str = "wall"
    opmode: int = 1
    host: str = DEFAULT_HOST
    port: int = DEFAULT_PORT

    def __post_init__(self) -> None:
        _positive("duration", self.duration)
        if self.clock not in ("wall", "virtual"):
            raise ExperimentError(f"clock must be 'wall' or 'virtual', got {self.clock!r}")
        if self.opmode not in (0, 1):
            raise ExperimentError(f"opmode must be 0 or 1, got {self.opmode!r}")
        if self.duration < self.setpoint.ts_z:
            log.warning(
                "duration %.3g s is shorter than one setpoint interval (%.3g s)",
                self.duration, self.setpoint.ts_z,
            )
        if self.bridge.ts_cl >= self.controller.ts_c:
            # the loop still runs, but each control move would act on a stale
            # measurement; flag it rather than refuse
            log.warning(
                "bridge interval %.3g s is not shorter than the control interval %.3g s; "
                "control moves may act on stale measurements",
                self.bridge.ts_cl, self.controller.ts_c,
            )

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        sections = {"plant": PlantConfig, "controller": ControllerConfig,
                    "bridge": LinkConfig, "setpoint": SetpointConfig}
        scalars = {"duration", "clock", "opmode", "host", "port"}
        kwargs: dict = {}
        for key, value in raw.items():
            if key in sections:
                if not isinstance(value, dict):
                    raise ExperimentError(f"config section {key!r} must be an object")
                section_cls = sections[key]
                names = {f.name for f in dataclasses.fields(section_cls)}
                unknown = set(value) - names
                if unknown:
                    raise ExperimentError(f"unknown keys in config section {key!r}: {sorted(unknown)}")
                try:
                    kwargs[key] = section_cls(**value)
                except TypeError as exc:
                    raise ExperimentError(f"bad config section {key!r}: {exc}") from exc
            elif key in scalars:
                kwargs[key] = value
            else:
                raise ExperimentError(f"unknown config key {key!r}")
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path: str | os.PathLike) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ExperimentError(f"config file {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ExperimentError(f"config file {path} must hold a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class SetpointTask:
    """Steps through the schedule one value per tick; holds the last value."""

    def __init__(self, store: DataStore, values: list[float], index: int = 1):
        if not values:
            raise ExperimentError("setpoint schedule must not be empty")
        self.store = store
        self.values = [float(v) for v in values]
        self.index = index
        self._cursor = 0

    def tick(self) -> float:
        value = self.values[min(self._cursor, len(self.values) - 1)]
        self._cursor += 1
        self.store.insert_float("setpoint", self.index, now_utc(), STATUS_OK, value)
        return value


@dataclass
class ExperimentResult:
    rows: list[tuple[float, list[float], list[float], list[float]]]  # t, z_bar, y, u
    tick_logs: dict[str, TickLog]
    summary: dict
    store: DataStore
    out_dir: str | None = None


def _columns(prefix: str, n: int) -> list[str]:
    return [prefix] if n == 1 else [f"{prefix}_{i}" for i in range(1, n + 1)]


def write_timeseries_csv(fh, rows, n_setp: int, n_meas: int, n_manip: int) -> None:
    header = ["t"] + _columns("z_bar", n_setp) + _columns("y", n_meas) + _columns("u", n_manip)
    fh.write(",".join(header) + "\n")
    for t, z_bar, y, u in rows:
        cells = [repr(t)] + [repr(v) for v in (*z_bar, *y, *u)]
        fh.write(",".join(cells) + "\n")


def segment_summary(rows, plant_gain: float) -> list[dict]:
    """Final tracking and input error of each run of constant setpoint.

    Segments are runs of consecutive rows with equal channel-1 setpoint; the
    reported errors are taken at the last row of each run, i.e. just before
    the next setpoint step (or at the end of the experiment).
    """
    segments: list[dict] = []
    current: tuple[float, list[float], list[float], list[float]] | None = None
    t_start = None
    for row in rows:
        if current is None or row[1][0] != current[1][0]:
            if current is not None:
                segments.append(_segment_entry(current, t_start, plant_gain))
            t_start = row[0]
        current = row
    if current is not None:
        segments.append(_segment_entry(current, t_start, plant_gain))
    return segments


def _segment_entry(last_row, t_start, plant_gain: float) -> dict:
    t, z_bar, y, u = last_row
    z = z_bar[0]
    return {
        "z_bar": z,
        "t_start": t_start,
        "t_end": t,
        "y_end": y[0],
        "u_end": u[0],
        "tracking_error": abs(y[0] - z),
        "input_error": abs(u[0] - z / plant_gain) if plant_gain != 0 else None,
    }


def _timer_summary(logs: dict[str, TickLog]) -> dict:
    out = {}
    for name, tick_log in logs.items():
        entry: dict = {"ticks": len(tick_log.instants), "skipped": len(tick_log.skipped)}
        if len(tick_log.instants) >= 2:
            stats = jitter_stats(tick_log)
            entry["mean_dt"] = stats.mean
            entry["min_dt"] = stats.minimum
            entry["max_dt"] = stats.maximum
            entry["std_dt"] = stats.std
        out[name] = entry
    return out


def _stop_quietly(timer: Timer | None) -> None:
    if timer is None:
        return
    try:
        timer.stop()
    except TimerStateError:
        pass


def _drain(timers: list[Timer | None], timeout: float = 2.0) -> None:
    """Wait for in-flight wall-clock callbacks so connections close idle."""
    deadline = time.monotonic() + timeout
    for timer in timers:
        while timer is not None and timer.busy and time.monotonic() < deadline:
            time.sleep(0.005)


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: str | os.PathLike | None = None,
    external_plant: bool = False,
    gateway_port: int | None = None,
) -> ExperimentResult:
    """Run the full closed loop for ``cfg.duration`` seconds and collect artifacts.

    With ``external_plant=True`` no local plant server or simulator is started;
    the bridge connects to an already-running server at ``cfg.host:cfg.port``.
    With ``gateway_port`` set, a monitor gateway serves the live store for the
    duration of the run.
    """
    clock = VirtualClock() if cfg.clock == "virtual" else WallClock()
    store = DataStore()
    model = first_order(cfg.plant.K, cfg.plant.tau)
    n_meas, n_manip = model.dims.n_outputs, model.dims.n_inputs
    n_setp = n_meas

    server: PlantServer | None = None
    sim: Simulator | None = None
    bridge: Bridge | None = None
    gateway: MonitorGateway | None = None
    timers: list[Timer | None] = []
    try:
        if not external_plant:
            state = PlantState(model.dims, x0=np.full(model.dims.n_states, cfg.plant.x0))
            try:
                server = PlantServer(state, cfg.host, cfg.port).start()
            except OSError as exc:
                raise ExperimentError(
                    f"plant-server: cannot listen on {cfg.host}:{cfg.port}: {exc}"
                ) from exc
            sim = Simulator(state, model, SimConfig(cfg.plant.ts_p, cfg.plant.n_substeps))
        port = server.port if server is not None else cfg.port

        bridge = Bridge(store, BridgeConfig(cfg.host, port, interval=cfg.bridge.ts_cl), clock=clock)
        try:
            bridge.connect()
        except (ConnectionError, OSError) as exc:
            raise ExperimentError(f"client-bridge: cannot reach plant at {cfg.host}:{port}: {exc}") from exc

        law = PIController(
            cfg.controller.kp, cfg.controller.tau_i, cfg.controller.u_bar,
            cfg.controller.ts_c, cfg.controller.i_bar, n_channels=n_manip,
        )
        rows: list[tuple[float, list[float], list[float], list[float]]] = []
        t_origin = 0.0  # reassigned just before the timers start

        def record_row(y: list[float], z_bar: list[float], u: list[float]) -> None:
            rows.append((clock.now() - t_origin, list(z_bar), list(y), list(u)))

        control = ControlTask(store, law, on_tick=record_row)
        setpoint_task = SetpointTask(store, cfg.setpoint.values)

        # Seed the tables every periodic task reads, so no first tick skips:
        # loop dimensions, operation mode, live tuning, held actuator values,
        # and the first scheduled setpoint.
        ts0 = now_utc()
        store.insert_int("dim", 1, ts0, STATUS_OK, n_meas)
        store.insert_int("dim", 2, ts0, STATUS_OK, n_setp)
        store.insert_int("dim", 3, ts0, STATUS_OK, n_manip)
        store.insert_int("opmode", 1, ts0, STATUS_OK, cfg.opmode)
        store.insert_float("tuning_kp", 1, ts0, STATUS_OK, cfg.controller.kp)
        store.insert_float("tuning_taui", 1, ts0, STATUS_OK, cfg.controller.tau_i)
        store.insert_float("tuning_ubar", 1, ts0, STATUS_OK, cfg.controller.u_bar)
        for i in range(1, n_manip + 1):
            store.insert_float("actuator", i, ts0, STATUS_OK, cfg.controller.u_bar)
        for i in range(2, n_setp + 1):
            store.insert_float("setpoint", i, ts0, STATUS_OK, cfg.setpoint.values[0])
        setpoint_task.tick()

        zbar_timer = Timer(cfg.setpoint.ts_z, setpoint_task.tick, clock, name="zbar", log_ticks=True)
        p_timer = None
        if sim is not None:
            p_timer = Timer(cfg.plant.ts_p, sim.tick, clock, name="p", log_ticks=True)
        cl_timer = Timer(cfg.bridge.ts_cl, bridge.tick, clock, name="cl", log_ticks=True)
        c_timer = Timer(cfg.controller.ts_c, control.tick, clock, name="c", log_ticks=True)
        timers = [zbar_timer, p_timer, cl_timer, c_timer]

        if gateway_port is not None:
            jitter_sources = {
                name: t.log for name, t in zip(("zbar", "p", "cl", "c"), timers) if t is not None
            }
            gateway = MonitorGateway(store, host=cfg.host, port=gateway_port,
                                     jitter_sources=jitter_sources)
            try:
                gateway.start()
            except OSError as exc:
                gateway = None
                raise ExperimentError(f"monitor-gateway: cannot listen on port {gateway_port}: {exc}") from exc

        # Coincident deadlines fire in start order: setpoint step first, then
        # plant, then the bridge exchange, then the control move.
        t_origin = clock.now()
        for timer in timers:
            if timer is not None:
                timer.start()
        start_window = clock.now() - t_origin

        if isinstance(clock, VirtualClock):
            clock.advance_to(t_origin + cfg.duration)
        else:
            threading.Event().wait(cfg.duration)
    finally:
        for timer in timers:
            _stop_quietly(timer)
        _drain(timers)
        if bridge is not None:
            bridge.disconnect()
        if server is not None:
            server.stop()
        if gateway is not None:
            gateway.stop()

    tick_logs = {
        name: t.log
        for name, t in zip(("zbar", "p", "cl", "c"), timers)
        if t is not None and t.log is not None
    }
    summary = {
        "clock": cfg.clock,
        "duration": cfg.duration,
        "server_port": port,
        "start_window_seconds": start_window,
        "rows": len(rows),
        "timers": _timer_summary(tick_logs),
        "segments": segment_summary(rows, cfg.plant.K),
        "config": cfg.to_dict(),
    }
    result = ExperimentResult(rows=rows, tick_logs=tick_logs, summary=summary, store=store)
    if out_dir is not None:
        result.out_dir = write_artifacts(result, out_dir, t_origin, n_setp, n_meas, n_manip)
    return result


def write_artifacts(
    result: ExperimentResult,
    out_dir: str | os.PathLike,
    t_origin: float,
    n_setp: int,
    n_meas: int,
    n_manip: int,
) -> str:
    out = os.fspath(out_dir)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "timeseries.csv"), "w", encoding="utf-8") as fh:
        write_timeseries_csv(fh, result.rows, n_setp, n_meas, n_manip)
    for name in ("p", "c", "cl"):
        tick_log = result.tick_logs.get(name)
        if tick_log is None:
            continue
        shifted = TickLog(
            instants=[t - t_origin for t in tick_log.instants],
            skipped=[t - t_origin for t in tick_log.skipped],
        )
        with open(os.path.join(out, f"jitter_{name}.csv"), "w", encoding="utf-8") as fh:
            shifted.write_csv(fh)
    with open(os.path.join(out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(result.summary, fh, indent=2)
        fh.write("\n")
    return out
