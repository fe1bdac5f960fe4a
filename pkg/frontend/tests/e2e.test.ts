/**
 * End-to-end against the real control loop: spawn the python stack (plant,
 * bridge, controller, gateway), then watch and steer it through the same
 * data layer the dashboard uses.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtemp, rm, writeFile } from "node:fs/promises";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { GatewayClient } from "../src/client.js";
import { LiveFeed } from "../src/feed.js";
import { delay, waitFor } from "./stub_gateway.js";

const SENSOR = { table: "sensor", index: 1 };
const SETPOINT = { table: "setpoint", index: 1 };
const ACTUATOR = { table: "actuator", index: 1 };

const freePort = (): Promise<number> =>
  new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const port = (srv.address() as import("node:net").AddressInfo).port;
      srv.close(() => resolve(port));
    });
    srv.on("error", reject);
  });

let child: ChildProcess | null = null;
let childExit: Promise<void> | null = null;
let stderrText = "";
let workDir = "";
let base = "";
let feed: LiveFeed | null = null;
let client: GatewayClient | null = null;

beforeAll(async () => {
  const gwPort = await freePort();
  base = `http://127.0.0.1:${gwPort}`;
  workDir = await mkdtemp(join(tmpdir(), "operator-ui-e2e-"));

  // a fast loop so mode changes show up within a couple of seconds
  const config = {
    duration: 90.0,
    clock: "wall",
    port: 0,
    plant: { ts_p: 0.1 },
    controller: { ts_c: 0.5 },
    bridge: { ts_cl: 0.25 },
    setpoint: { ts_z: 1000.0, values: [2.0] }, // scheduler stays quiet; we steer by hand
  };
  const cfgPath = join(workDir, "loop.json");
  await writeFile(cfgPath, JSON.stringify(config));

  const srcDir = fileURLToPath(new URL("../../src", import.meta.url));
  child = spawn(
    "python3",
    ["-m", "rtapc.cli", "run", "--config", cfgPath, "--gateway-port", String(gwPort)],
    { env: { ...process.env, PYTHONPATH: srcDir }, stdio: ["ignore", "ignore", "pipe"] },
  );
  child.stderr?.on("data", (chunk) => {
    stderrText += String(chunk);
  });
  childExit = new Promise((resolve) => child?.on("exit", () => resolve()));

  // ready once the loop has produced a sensor record the gateway can serve
  const deadline = Date.now() + 20_000;
  for (;;) {
    if (Date.now() > deadline) {
      throw new Error(`control loop never came up\n${stderrText}`);
    }
    try {
      const resp = await fetch(`${base}/api/tables/sensor/1?limit=1`);
      if (resp.ok) {
        const payload = await resp.json();
        if (payload.records.length > 0) break;
      }
    } catch {
      // gateway not listening yet
    }
    await delay(100);
  }

  client = new GatewayClient(base);
  feed = new LiveFeed(base, [SENSOR, SETPOINT, ACTUATOR], {
    capacity: 8192,
    backfillLimit: 500,
    retryMs: 200,
  });
  feed.start();
  await waitFor(() => feed!.status === "live" && feed!.buffer(SENSOR).size > 0, 10_000);
});

afterAll(async () => {
  await feed?.stop();
  child?.kill("SIGTERM");
  await childExit;
  await rm(workDir, { recursive: true, force: true });
});

describe("operator ui against the live loop", () => {
  it("shows a submitted setpoint in the overlay within one second", async () => {
    const ack = await client!.setSetpoint(1, 5.0);
    expect(ack.value).toBe(5.0);
    const t0 = performance.now();
    await waitFor(() => feed!.buffer(SETPOINT).last()?.value === 5.0, 1_000, 5);
    const elapsed = performance.now() - t0;
    expect(elapsed).toBeLessThanOrEqual(1_000);
  });

  it("freezes the actuator trace in manual mode and resumes in automatic", async () => {
    // the loop has been in automatic; the controller writes a move every 0.5 s
    await waitFor(() => feed!.buffer(ACTUATOR).size >= 2, 5_000);

    await client!.setOpmode(0);
    await delay(700); // let any in-flight control tick land

    const frozenCount = feed!.buffer(ACTUATOR).size;
    const frozenValue = feed!.buffer(ACTUATOR).last()?.value;
    const sensorCount = feed!.buffer(SENSOR).size;

    await delay(2_500); // five control periods of silence expected
    expect(feed!.buffer(ACTUATOR).size).toBe(frozenCount); // trace flatlines
    expect(feed!.buffer(ACTUATOR).last()?.value).toBe(frozenValue);
    expect(feed!.buffer(SENSOR).size).toBeGreaterThan(sensorCount); // loop still alive

    await client!.setOpmode(1);
    await waitFor(() => feed!.buffer(ACTUATOR).size > frozenCount, 5_000);
  });
});
