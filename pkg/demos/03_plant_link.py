"""Networked plant link: TCP server in front of the plant, client bridge in the loop.

One exchange per bridge tick: the request carries the held actuator
values, the reply carries the sensor readings.  Payloads are readable
text frames, one line per exchange.
"""

import math

from rtapc.bridge import Bridge, BridgeConfig
from rtapc.plant_server import PlantServer
from rtapc.protocol import pack_multi
from rtapc.records import Record, now_utc
from rtapc.simulation import PlantState, SimConfig, Simulator, first_order
from rtapc.store import DataStore

# What actually travels on the socket:
frame = pack_multi([Record(now_utc(), "ok", 0.5), Record(now_utc(), "ok", -1.25)])
print(f"wire frame: {frame!r}")

############################################################
# Plant side: first-order lag dx/dt = (K*u - x)/tau behind a TCP server

model = first_order(K=10.0, tau=10.0)
state = PlantState(model.dims)
server = PlantServer(state, port=0).start()  # port=0: pick a free one
sim = Simulator(state, model, SimConfig(ts_p=0.2, n_substeps=10))
print(f"plant server listening on 127.0.0.1:{server.port}")

############################################################
# Control side: a store seeded with loop dimensions and a held move

store = DataStore()
ts0 = now_utc()
for idx in (1, 2, 3):
    store.insert_int("dim", idx, ts0, "ok", 1)
store.insert_float("actuator", 1, ts0, "ok", 1.0)  # unit step input

bridge = Bridge(store, BridgeConfig(port=server.port))
bridge.connect()

# Each tick: deliver the actuator table to the plant, read the sensors back.
bridge.tick()
print(f"exchange 1: sensor reads {store.read_recent_float('sensor', 1).value} "
      "(the step has not acted yet)")

for _ in range(10):  # 10 plant steps of 0.2 s = 2 s of plant time
    sim.tick()

bridge.tick()
y = store.read_recent_float("sensor", 1).value
expected = 10.0 * (1.0 - math.exp(-2.0 / 10.0))
print(f"exchange 2: sensor reads {y:.6f} after 2 s (analytic {expected:.6f})")

bridge.disconnect()
server.stop()
