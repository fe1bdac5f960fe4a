"""Periodic control task and the shipped discrete PI law.

The control tick is gated by the operation mode stored in shared data:
mode 0 (manual) leaves the actuator tables and the controller state untouched;
mode 1 (automatic) reads measurements and setpoints, writes manipulated
variables, and only then updates the controller state.  The two-phase contract
matters: the actuator record written at tick k is computed from the integrator
state I_k, never I_{k+1}.

PI recursion per channel::

    e_k     = z_bar_k - y_k
    P_k     = Kp * e_k
    u_k     = u_bar + P_k + I_k
    I_{k+1} = I_k + (Kp * Ts_c / tau_i) * e_k,   I_0 = I_bar
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Protocol, Sequence

from .records import STATUS_OK, now_utc
from .store import DataStore, NoDataError

log = logging.getLogger(__name__)

MANUAL = 0
AUTOMATIC = 1

TUNING_KP_TABLE = "tuning_kp"
TUNING_TAUI_TABLE = "tuning_taui"
TUNING_UBAR_TABLE = "tuning_ubar"


@dataclass(frozen=True)
class PIState:
    """Gains, operating point, and integrator state of one PI channel."""

    kp: float
    tau_i: float
    u_bar: float
    ts_c: float
    i: float = 0.0
    i_bar: float = 0.0

    def __post_init__(self) -> None:
        if not self.tau_i > 0:
            raise ValueError(f"integral time constant must be positive, got {self.tau_i}")
        if not self.ts_c > 0:
            raise ValueError(f"controller interval must be positive, got {self.ts_c}")
        if not math.isfinite(self.i):
            raise ValueError(f"integrator state must be finite, got {self.i}")

    def reset(self) -> "PIState":
        return replace(self, i=self.i_bar)


def _check_finite(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def pi_output(y: float, z_bar: float, s: PIState) -> float:
    """Control move u = u_bar + P + I.  Pure; never touches the integrator."""
    _check_finite("measurement", y)
    _check_finite("setpoint", z_bar)
    e = z_bar - y
    p = s.kp * e
    return s.u_bar + p + s.i

def pi_update(y: float, z_bar: float, s: PIState) -> PIState:
    """Integrator step I' = I + (Kp*Ts_c/tau_i) * e; all other fields unchanged."""
    _check_finite("measurement", y)
    _check_finite("setpoint", z_bar)
    e = z_bar - y
    return replace(s, i=s.i + (s.kp * s.ts_c / s.tau_i) * e)


class ControlLaw(Protocol):
    """Two-phase control law: compute outputs, then (separately) update state."""

    def output(self, y: Sequence[float], z_bar: Sequence[float]) -> list[float]: ...

    def update(self, u: Sequence[float], y: Sequence[float], z_bar: Sequence[float]) -> None: ...


class PIController:
    """Element-wise PI over n parallel channels (n_meas = n_setp = n_manip)."""

    def __init__(
        self,
        kp: float,
        tau_i: float,
        u_bar: float,
        ts_c: float,
        i_bar: float = 0.0,
        n_channels: int = 1,
    ):
        if n_channels < 1:
            raise ValueError(f"need at least one channel, got {n_channels}")
        self.states = [
            PIState(kp=kp, tau_i=tau_i, u_bar=u_bar, ts_c=ts_c, i=i_bar, i_bar=i_bar)
            for _ in range(n_channels)
        ]

    def _check_dims(self, y: Sequence[float], z_bar: Sequence[float]) -> None:
        n = len(self.states)
        if len(y) != n or len(z_bar) != n:
            raise ValueError(
                f"PI law has {n} channels but got {len(y)} measurements "
                f"and {len(z_bar)} setpoints"
            )

    def output(self, y: Sequence[float], z_bar: Sequence[float]) -> list[float]:
        self._check_dims(y, z_bar)
        return [pi_output(yi, zi, s) for yi, zi, s in zip(y, z_bar, self.states)]

    def update(self, u: Sequence[float], y: Sequence[float], z_bar: Sequence[float]) -> None:
        self._check_dims(y, z_bar)
        self.states = [pi_update(yi, zi, s) for yi, zi, s in zip(y, z_bar, self.states)]

    def set_tuning(self, kp: float, tau_i: float, u_bar: float) -> None:
        """Live retune; integrator state is preserved."""
        self.states = [replace(s, kp=kp, tau_i=tau_i, u_bar=u_bar) for s in self.states]

    def reset(self) -> None:
        self.states = [s.reset() for s in self.states]


class ControlTask:
    """Scheduler-driven control tick over shared data with a pluggable law."""

    def __init__(
        self,
        store: DataStore,
        law: ControlLaw,
        opmode_table: str = "opmode",
        dim_table: str = "dim",
        on_tick: Callable[[list[float], list[float], list[float]], None] | None = None,
    ):
        self.store = store
        self.law = law
        self.opmode_table = opmode_table
        self.dim_table = dim_table
        self.on_tick = on_tick

    def _refresh_tuning(self) -> None:
        if not hasattr(self.law, "set_tuning"):
            return
        store = self.store
        try:
            kp = store.read_recent_float(TUNING_KP_TABLE, 1).value
            tau_i = store.read_recent_float(TUNING_TAUI_TABLE, 1).value
            u_bar = store.read_recent_float(TUNING_UBAR_TABLE, 1).value
        except NoDataError:
            return  # no live tuning published; keep current gains
        self.law.set_tuning(kp, tau_i, u_bar)

    def tick(self) -> str:
        """One gated control pass; returns "manual", "applied", or "skipped"."""
        store = self.store
        try:
            opmode = store.read_recent_int(self.opmode_table, 1)
        except NoDataError as exc:
            log.warning("control tick skipped: %s", exc)
            return "skipped"
        if opmode == MANUAL:
            return "manual"
        try:
            dims = store.read_dimensions(self.dim_table)
            self._refresh_tuning()
            y = [r.value for r in store.read_recent_multi_float("sensor", dims.n_meas)]
            z_bar = [r.value for r in store.read_recent_multi_float("setpoint", dims.n_setp)]
        except NoDataError as exc:
            log.warning("control tick skipped: %s", exc)
            return "skipped"
        u = self.law.output(y, z_bar)
        if len(u) != dims.n_manip:
            raise ValueError(f"law produced {len(u)} outputs, expected {dims.n_manip}")
        ts = now_utc()
        for i, ui in enumerate(u, start=1):
            store.insert_float("actuator", i, ts, STATUS_OK, ui)
        self.law.update(u, y, z_bar)
        if self.on_tick is not None:
            self.on_tick(y, z_bar, u)
        return "applied"
