"""Command-line entry points: run a closed-loop experiment, serve a plant, or
expose a recorded store through the monitor gateway.

``rtapc run`` drives the whole loop in one process and writes timeseries and
jitter artifacts.  ``rtapc serve-plant`` runs only the plant side (TCP server
plus simulator timer) so a ``run --server-host`` on another host or process can
close the loop over the network.  ``rtapc gateway`` serves a journal directory
recorded by an earlier run.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import threading

import numpy as np

from .experiment import ExperimentConfig, ExperimentError, run_experiment
from .gateway import DEFAULT_PORT as GATEWAY_PORT
from .gateway import MonitorGateway
from .plant_server import DEFAULT_HOST, DEFAULT_PORT, PlantServer
from .simulation import MODEL_FACTORIES, PlantState, SimConfig, Simulator
from .store import DataStore
from .timers import Timer

log = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rtapc",
        description="Soft real-time networked process control experiments.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the closed-loop experiment")
    run.add_argument("--config", help="JSON config file; defaults are the built-in experiment")
    run.add_argument("--duration", type=float, help="run length in seconds")
    run.add_argument("--clock", choices=["wall", "virtual"], help="clock driving all timers")
    run.add_argument("--out", help="directory for timeseries.csv, jitter_*.csv, summary.json")
    run.add_argument("--server-host", help="connect to an already-running plant server at this host")
    run.add_argument("--server-port", type=int, help="plant server TCP port")
    run.add_argument("--interval", type=float, help="bridge exchange interval in seconds")
    run.add_argument("--gateway-port", type=int, help="also serve the monitor gateway on this port")

    plant = sub.add_parser("serve-plant", help="run only the plant server and simulator")
    plant.add_argument("--host", default=DEFAULT_HOST)
    plant.add_argument("--port", type=int, default=DEFAULT_PORT)
    plant.add_argument("--model", default="first-order", choices=sorted(MODEL_FACTORIES))
    plant.add_argument("--K", type=float, default=10.0, help="plant gain")
    plant.add_argument("--tau", type=float, default=10.0, help="plant time constant in seconds")
    plant.add_argument("--ts-p", type=float, default=0.2, help="simulator interval in seconds")
    plant.add_argument("--substeps", type=int, default=10, help="integrator substeps per interval")
    plant.add_argument("--x0", type=float, default=0.0, help="initial state (all components)")
    plant.add_argument("--duration", type=float, help="serve for this many seconds, then exit")

    gw = sub.add_parser("gateway", help="serve a recorded journal directory over HTTP")
    gw.add_argument("--port", type=int, default=GATEWAY_PORT)
    gw.add_argument("--host", default="127.0.0.1")
    gw.add_argument("--journal-dir", help="store journal directory to replay and serve")
    gw.add_argument("--duration", type=float, help="serve for this many seconds, then exit")

    return parser


def _wait(duration: float | None) -> None:
    try:
        if duration is None:
            threading.Event().wait()
        else:
            threading.Event().wait(duration)
    except KeyboardInterrupt:
        log.info("interrupted, shutting down")


def _cmd_run(args: argparse.Namespace) -> int:
    if args.config is not None:
        cfg = ExperimentConfig.from_json_file(args.config)
    else:
        cfg = ExperimentConfig()
    if args.duration is not None:
        cfg.duration = args.duration
    if args.clock is not None:
        cfg.clock = args.clock
    external = args.server_host is not None
    if args.server_host is not None:
        cfg.host = args.server_host
    if args.server_port is not None:
        cfg.port = args.server_port
    if args.interval is not None:
        cfg.bridge.ts_cl = args.interval
    # re-run validation on overridden values
    cfg = ExperimentConfig.from_dict(cfg.to_dict())

    result = run_experiment(
        cfg, out_dir=args.out, external_plant=external, gateway_port=args.gateway_port
    )
    for name, entry in result.summary["timers"].items():
        mean = entry.get("mean_dt")
        mean_text = "n/a" if mean is None else f"{mean:.6f} s"
        print(f"timer {name}: {entry['ticks']} ticks, {entry['skipped']} skipped, mean dt {mean_text}")
    for seg in result.summary["segments"]:
        print(
            f"segment z_bar={seg['z_bar']:g}: t=[{seg['t_start']:g}, {seg['t_end']:g}] "
            f"y_end={seg['y_end']:.6f} u_end={seg['u_end']:.6f} "
            f"tracking_error={seg['tracking_error']:.3e}"
        )
    if result.out_dir is not None:
        print(f"artifacts written to {result.out_dir}")
    return 0


def _cmd_serve_plant(args: argparse.Namespace) -> int:
    model = MODEL_FACTORIES[args.model](args.K, args.tau)
    state = PlantState(model.dims, x0=np.full(model.dims.n_states, args.x0))
    server = PlantServer(state, args.host, args.port).start()
    sim = Simulator(state, model, SimConfig(args.ts_p, args.substeps))
    timer = Timer(args.ts_p, sim.tick, name="p")
    timer.start()
    print(f"plant server on {server.host}:{server.port} "
          f"(model {args.model}, K={args.K:g}, tau={args.tau:g}, ts_p={args.ts_p:g})")
    sys.stdout.flush()
    _wait(args.duration)
    timer.stop()
    server.stop()
    return 0


def _cmd_gateway(args: argparse.Namespace) -> int:
    store = DataStore(journal_dir=args.journal_dir)
    gateway = MonitorGateway(store, host=args.host, port=args.port)
    gateway.start()
    n_series = len(store.keys())
    print(f"gateway on {gateway.host}:{gateway.port} serving {n_series} series")
    sys.stdout.flush()
    _wait(args.duration)
    gateway.stop()
    store.close()
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "serve-plant":
            return _cmd_serve_plant(args)
        if args.command == "gateway":
            return _cmd_gateway(args)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: bad JSON: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
