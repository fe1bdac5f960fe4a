"""Real-time plant proxy: a fixed-step ODE model stepped once per timer tick.

The plant lives in a :class:`PlantState` shared (under one mutex) with the
TCP server: the server writes manipulated variables into it at request
boundaries and copies measurements out of it, while the simulator task
advances the state.  Inputs are held constant across each integration
interval (zero-order hold), so the trajectory is a pure function of the
initial state and the input sequence.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .records import STATUS_ERROR, STATUS_OK


class IntegrationError(Exception):
    """The solution became non-finite; ``substep`` names the failing step."""

    def __init__(self, substep: int):
        super().__init__(f"state became non-finite at integrator substep {substep}")
        self.substep = substep


class PlantDims(NamedTuple):
    n_states: int
    n_outputs: int
    n_inputs: int


@dataclass(frozen=True)
class OdeModel:
    """Plant dynamics ``dx/dt = f(t, x, params, u)`` and output map ``y = g(x, params, u)``."""

    f: Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    params: np.ndarray
    dims: PlantDims


def first_order(K: float = 10.0, tau: float = 10.0) -> OdeModel:
    """Linear first-order plant ``dx/dt = (K*u - x)/tau`` with ``y = x``."""
    if tau <= 0:
        raise ValueError(f"time constant must be positive, got {tau}")
    params = np.array([K, tau], dtype=float)

    def f(t, x, p, u):
        return (p[0] * u - x) / p[1]

    def g(x, p, u):
        return x.copy()

    return OdeModel(f=f, g=g, params=params, dims=PlantDims(1, 1, 1))


MODEL_FACTORIES: dict[str, Callable[..., OdeModel]] = {
    "first-order": first_order,
}


def integrate(
    model: OdeModel,
    t0: float,
    tN: float,
    n_steps: int,
    x0: np.ndarray,
    u: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Classical fixed-step 4th-order Runge-Kutta over ``[t0, tN]``.

    Returns ``(T, X)`` with ``T`` the N+1 grid instants (endpoints exact) and
    ``X[k]`` the state at ``T[k]``; ``u`` is held constant throughout.
    """
    if not tN > t0:
        raise ValueError(f"need tN > t0, got [{t0}, {tN}]")
    if n_steps < 1:
        raise ValueError(f"need at least one step, got {n_steps}")
    x0 = np.asarray(x0, dtype=float)
    if not np.isfinite(x0).all():
        raise ValueError("initial state must be finite")
    u = np.asarray(u, dtype=float)
    h = (tN - t0) / n_steps
    T = np.linspace(t0, tN, n_steps + 1)
    X = np.empty((n_steps + 1, x0.size), dtype=float)
    X[0] = x0
    p = model.params
    for j in range(n_steps):
        t, x = T[j], X[j]
        k1 = model.f(t, x, p, u)
        k2 = model.f(t + h / 2.0, x + (h / 2.0) * k1, p, u)
        k3 = model.f(t + h / 2.0, x + (h / 2.0) * k2, p, u)
        k4 = model.f(t + h, x + h * k3, p, u)
        X[j + 1] = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(X[j + 1]).all():
            raise IntegrationError(j + 1)
    return T, X


class PlantState:
    """Mutable plant state shared between the simulator task and the TCP server.

    Every read or write of ``x``, ``u``, ``y``, or ``status`` goes through
    ``lock``.  The server stamps measurements inside the critical section, so a
    reply frame is always a consistent snapshot of one simulator step.
    """

    def __init__(self, dims: PlantDims, x0: np.ndarray | None = None):
        self.dims = dims
        self.lock = threading.Lock()
        self.x = np.zeros(dims.n_states) if x0 is None else np.asarray(x0, dtype=float).copy()
        if self.x.shape != (dims.n_states,):
            raise ValueError(f"x0 must have shape ({dims.n_states},), got {self.x.shape}")
        if not np.isfinite(self.x).all():
            raise ValueError("x0 must be finite")
        self.u = np.zeros(dims.n_inputs)
        self.y = np.zeros(dims.n_outputs)
        self.status = STATUS_OK

    def write_inputs(self, values: list[float]) -> None:
        """Server side: hold new manipulated variables (zero-order hold)."""
        if len(values) != self.dims.n_inputs:
            raise ValueError(f"expected {self.dims.n_inputs} inputs, got {len(values)}")
        with self.lock:
            self.u[:] = values

    def snapshot_outputs(self) -> tuple[list[float], str]:
        """Server side: consistent copy of measurements plus the plant status."""
        with self.lock:
            return [float(v) for v in self.y], self.status


@dataclass
class SimConfig:
    """One simulator tick integrates over ``[0, ts_p]`` in ``n_substeps`` RK4 steps."""

    ts_p: float = 0.2
    n_substeps: int = 10

    def __post_init__(self) -> None:
        if self.ts_p <= 0:
            raise ValueError(f"simulator interval must be positive, got {self.ts_p}")
        if self.n_substeps < 1:
            raise ValueError(f"need at least one substep, got {self.n_substeps}")


@dataclass
class TrajectoryPoint:
    t: float
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray


class Simulator:
    """Periodic task advancing a shared plant state by one interval per tick."""

    def __init__(
        self,
        state: PlantState,
        model: OdeModel,
        cfg: SimConfig | None = None,
        record: bool = False,
    ):
        if state.dims != model.dims:
            raise ValueError(f"state dims {state.dims} do not match model dims {model.dims}")
        self.state = state
        self.model = model
        self.cfg = cfg if cfg is not None else SimConfig()
        self.ticks = 0
        self.history: list[TrajectoryPoint] | None = [] if record else None
        with state.lock:
            state.y[:] = model.g(state.x, model.params, state.u)

    def tick(self) -> None:
        """Integrate over one interval with the held input, then update x and y."""
        state = self.state
        with state.lock:
            u = state.u.copy()
            x = state.x.copy()
        try:
            _, X = integrate(self.model, 0.0, self.cfg.ts_p, self.cfg.n_substeps, x, u)
        except IntegrationError:
            # state frozen; subsequent server replies carry an error status
            with state.lock:
                state.status = STATUS_ERROR
            raise
        x_new = X[-1]
        y_new = self.model.g(x_new, self.model.params, u)
        with state.lock:
            state.x[:] = x_new
            state.y[:] = y_new
            state.status = STATUS_OK
        self.ticks += 1
        if self.history is not None:
            self.history.append(
                TrajectoryPoint(self.ticks * self.cfg.ts_p, x_new.copy(), u, y_new.copy())
            )

    def write_trajectory_csv(self, fh) -> None:
        """Dump the recorded trajectory as ``t,x...,u...,y...`` rows."""
        if self.history is None:
            raise ValueError("simulator was not created with record=True")

        def names(prefix: str, n: int) -> list[str]:
            return [prefix] if n == 1 else [f"{prefix}{i + 1}" for i in range(n)]

        d = self.model.dims
        header = ["t"] + names("x", d.n_states) + names("u", d.n_inputs) + names("y", d.n_outputs)
        fh.write(",".join(header) + "\n")
        for p in self.history:
            row = [repr(p.t)] + [repr(float(v)) for v in (*p.x, *p.u, *p.y)]
            fh.write(",".join(row) + "\n")
