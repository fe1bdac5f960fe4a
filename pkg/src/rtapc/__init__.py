"""Soft real-time networked process control.

Building blocks: time-stamped shared data tables, drift-free interval timers,
a newline-delimited record protocol over TCP, a real-time ODE plant simulator,
a discrete PI control task, an HTTP monitor gateway, and an orchestrator that
wires them into the standard closed-loop experiment.
"""

from .bridge import Bridge, BridgeConfig
from .control import ControlTask, PIController, PIState, pi_output, pi_update
from .experiment import (
    ControllerConfig,
    ExperimentConfig,
    ExperimentError,
    ExperimentResult,
    LinkConfig,
    PlantConfig,
    SetpointConfig,
    SetpointTask,
    run_experiment,
)
from .gateway import MonitorGateway
from .plant_server import PlantServer
from .protocol import Disconnected, FrameParseError, FrameStream, ProtocolError, pack_multi, unpack_multi
from .records import (
    Record,
    RecordError,
    format_record,
    format_timestamp,
    now_utc,
    parse_record,
    parse_timestamp,
)
from .simulation import (
    IntegrationError,
    OdeModel,
    PlantState,
    SimConfig,
    Simulator,
    first_order,
    integrate,
)
from .store import DataStore, DimensionSpec, NoDataError, StoreError, Subscription, TableKey
from .timers import (
    JitterStats,
    TickLog,
    Timer,
    TimerError,
    TimerStateError,
    VirtualClock,
    WallClock,
    jitter_stats,
    split_interval,
)

__version__ = "0.1.0"

__all__ = [
    "Bridge",
    "BridgeConfig",
    "ControlTask",
    "ControllerConfig",
    "DataStore",
    "DimensionSpec",
    "Disconnected",
    "ExperimentConfig",
    "ExperimentError",
    "ExperimentResult",
    "FrameParseError",
    "FrameStream",
    "IntegrationError",
    "JitterStats",
    "LinkConfig",
    "MonitorGateway",
    "NoDataError",
    "OdeModel",
    "PIController",
    "PIState",
    "PlantConfig",
    "PlantServer",
    "PlantState",
    "ProtocolError",
    "Record",
    "RecordError",
    "SetpointConfig",
    "SetpointTask",
    "SimConfig",
    "Simulator",
    "StoreError",
    "Subscription",
    "TableKey",
    "TickLog",
    "Timer",
    "TimerError",
    "TimerStateError",
    "VirtualClock",
    "WallClock",
    "first_order",
    "format_record",
    "format_timestamp",
    "integrate",
    "jitter_stats",
    "now_utc",
    "pack_multi",
    "parse_record",
    "parse_timestamp",
    "pi_output",
    "pi_update",
    "run_experiment",
    "split_interval",
    "unpack_multi",
]
