import { afterEach, describe, expect, it } from "vitest";

import { CommandRejected, GatewayClient } from "../src/client.js";
import { StubGateway, rec } from "./stub_gateway.js";

let stub: StubGateway | null = null;

afterEach(async () => {
  await stub?.close();
  stub = null;
});

describe("client-side validation (mirrors the gateway rules)", () => {
  it("blocks bad input before any request is sent", async () => {
    stub = await StubGateway.start();
    const client = new GatewayClient(stub.base);

    await expect(client.setOpmode(2)).rejects.toThrow(CommandRejected);
    await expect(client.setOpmode(2)).rejects.toThrow("0 (manual) or 1 (automatic)");
    await expect(client.setTuning(0.2, -1, 0)).rejects.toThrow("tau_i must be positive");
    await expect(client.setTuning(0.2, 0, 0)).rejects.toThrow(CommandRejected);
    await expect(client.setTuning(NaN, 10, 0)).rejects.toThrow("finite");
    await expect(client.setSetpoint(1, Infinity)).rejects.toThrow("finite");
    await expect(client.setSetpoint(0, 2)).rejects.toThrow("index");
    await expect(client.setSetpoint(1.5, 2)).rejects.toThrow("index");

    expect(stub.requests).toHaveLength(0);
  });
});

describe("commands", () => {
  it("returns the gateway ack verbatim", async () => {
    stub = await StubGateway.start();
    const client = new GatewayClient(stub.base);
    const ack = await client.setSetpoint(1, 4.0);
    expect(ack.ok).toBe(true);
    expect(ack.value).toBe(4.0);
    expect(typeof ack.ts).toBe("string");
    expect(stub.requests).toEqual([
      { method: "POST", path: "/api/setpoint", body: { index: 1, value: 4.0 } },
    ]);
  });

  it("posts opmode and tuning to their own endpoints", async () => {
    stub = await StubGateway.start();
    const client = new GatewayClient(stub.base);
    await client.setOpmode(0);
    await client.setTuning(0.5, 8.0, 0.1);
    expect(stub.requests.map((r) => r.path)).toEqual(["/api/opmode", "/api/tuning"]);
    expect(stub.requests[1].body).toEqual({ kp: 0.5, tau_i: 8.0, u_bar: 0.1 });
  });

  it("surfaces a server-side rejection with the gateway's reason", async () => {
    stub = await StubGateway.start({
      command: () => ({ status: 400, payload: { ok: false, error: "setpoint index must be an integer >= 1, got 7.5" } }),
    });
    const client = new GatewayClient(stub.base);
    await expect(client.setSetpoint(1, 2.0)).rejects.toThrow(CommandRejected);
    stub.requests.length = 0;
    await expect(client.setSetpoint(1, 2.0)).rejects.toThrow("integer >= 1");
    expect(stub.requests).toHaveLength(1); // the request went out; the gateway said no
  });
});

describe("queries", () => {
  it("returns history records newest first, honoring limit", async () => {
    stub = await StubGateway.start({
      history: () => [rec(3, 30), rec(2, 20), rec(1, 10)],
    });
    const client = new GatewayClient(stub.base);
    const records = await client.queryHistory("sensor", 1, 2);
    expect(records.map((r) => r.value)).toEqual([30, 20]);
  });

  it("raises the gateway error for an unknown series", async () => {
    stub = await StubGateway.start({ history: () => undefined });
    const client = new GatewayClient(stub.base);
    await expect(client.queryHistory("sensor", 9)).rejects.toThrow("no series sensor[9]");
  });
});

describe("stream url", () => {
  it("encodes the subscribed series", () => {
    const client = new GatewayClient("http://127.0.0.1:43080");
    expect(client.streamUrl([{ table: "sensor", index: 1 }, { table: "setpoint", index: 1 }])).toBe(
      "http://127.0.0.1:43080/api/stream?tables=sensor%3A1%2Csetpoint%3A1",
    );
    expect(client.streamUrl()).toBe("http://127.0.0.1:43080/api/stream");
  });
});
