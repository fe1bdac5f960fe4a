"""Watching and steering a live run over HTTP.

The monitor gateway serves the shared tables while the loop runs:
GET endpoints for recent records and timer jitter, POST endpoints for
operator commands (setpoint, operation mode, tuning), and a server-sent
event stream for live updates.  Any HTTP client works; this demo uses
urllib from the standard library.
"""

import json
import socket
import threading
import time
import urllib.request

from rtapc.experiment import ExperimentConfig, SetpointConfig, run_experiment


def get(path: str):
    with urllib.request.urlopen(f"http://127.0.0.1:{GW_PORT}{path}", timeout=2.0) as resp:
        return json.load(resp)


def post(path: str, payload: dict):
    req = urllib.request.Request(
        f"http://127.0.0.1:{GW_PORT}{path}",
        data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(req, timeout=2.0) as resp:
        return json.load(resp)


with socket.socket() as s:  # pick a free port for the gateway
    s.bind(("127.0.0.1", 0))
    GW_PORT = s.getsockname()[1]

cfg = ExperimentConfig(
    clock="wall",
    duration=10.0,
    setpoint=SetpointConfig(ts_z=4.0, values=[2.0, 4.0, 3.0]),
    port=0,
)
run = threading.Thread(target=run_experiment, kwargs={"cfg": cfg, "gateway_port": GW_PORT})
run.start()

# Wait for the loop to produce its first sensor reading.
deadline = time.monotonic() + 5.0
while time.monotonic() < deadline:
    try:
        get("/api/tables/sensor/1?limit=1")
        break
    except OSError:
        time.sleep(0.1)

print(f"gateway up on port {GW_PORT}")
t0 = time.monotonic()
for _ in range(3):
    y = get("/api/tables/sensor/1?limit=1")["records"][0]["value"]
    z = get("/api/tables/setpoint/1?limit=1")["records"][0]["value"]
    print(f"  t+{time.monotonic() - t0:.1f}s  setpoint={z}  sensor={y:.4f}")
    time.sleep(1.0)

# Operator command: retarget the loop mid-run.  The ack echoes the durable record.
ack = post("/api/setpoint", {"index": 1, "value": 5.0})
print(f"setpoint command acked: {ack}")

# Live stream: server-sent events, filtered to the sensor series.
req = urllib.request.Request(f"http://127.0.0.1:{GW_PORT}/api/stream?tables=sensor:1")
with urllib.request.urlopen(req, timeout=5.0) as resp:
    seen = 0
    while seen < 3:
        line = resp.readline().decode("utf-8").strip()
        if line.startswith("data: "):
            event = json.loads(line[len("data: "):])
            print(f"  stream event: {event}")
            seen += 1

print(f"timer health: control loop mean period "
      f"{get('/api/jitter/c')['mean']:.4f} s (nominal {cfg.controller.ts_c})")

run.join()
print("run finished")
