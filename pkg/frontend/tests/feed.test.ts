import { afterEach, describe, expect, it } from "vitest";

import { LiveFeed } from "../src/feed.js";
import type { FeedStatus, WireRecord } from "../src/types.js";
import { StubGateway, delay, rec, waitFor } from "./stub_gateway.js";

const SENSOR = { table: "sensor", index: 1 };
const SETPOINT = { table: "setpoint", index: 1 };

let stub: StubGateway | null = null;
let feed: LiveFeed | null = null;

afterEach(async () => {
  await feed?.stop();
  await stub?.close();
  feed = null;
  stub = null;
});

const record = (r: WireRecord, key = SENSOR) => ({ type: "record", ...key, ...r });

describe("LiveFeed", () => {
  it("routes streamed records to the right buffers in order", async () => {
    stub = await StubGateway.start({
      helloHeartbeat: 5,
      onStream: (conn) => {
        conn.write(record(rec(1, 1.5)));
        conn.write(record(rec(2, 2.5)));
        conn.write(record(rec(3, 42.0), SETPOINT));
      },
    });
    feed = new LiveFeed(stub.base, [SENSOR, SETPOINT], { retryMs: 50 });
    feed.start();
    await waitFor(() => feed!.buffer(SENSOR).size === 2 && feed!.buffer(SETPOINT).size === 1);
    expect(feed.status).toBe("live");
    expect(feed.buffer(SENSOR).points().map((p) => p.value)).toEqual([1.5, 2.5]);
    expect(feed.buffer(SETPOINT).last()?.value).toBe(42.0);
  });

  it("keeps streamed values bit-for-text (no rounding in the model)", async () => {
    const exact = 0.30000000000000004; // would vanish under display rounding
    stub = await StubGateway.start({
      helloHeartbeat: 5,
      onStream: (conn) => conn.write(record(rec(1, exact))),
    });
    feed = new LiveFeed(stub.base, [SENSOR], { retryMs: 50 });
    feed.start();
    await waitFor(() => feed!.buffer(SENSOR).size === 1);
    expect(feed.buffer(SENSOR).last()?.value).toBe(exact);
  });

  it("backfills history ahead of live records even when the query is slow", async () => {
    stub = await StubGateway.start({
      helloHeartbeat: 5,
      history: async (table) => {
        await delay(40); // live record arrives while this is in flight
        return table === "sensor" ? [rec(3, 3), rec(2, 2), rec(1, 1)] : undefined;
      },
      onStream: (conn) => conn.write(record(rec(4, 4))),
    });
    feed = new LiveFeed(stub.base, [SENSOR], { retryMs: 50 });
    feed.start();
    await waitFor(() => feed!.buffer(SENSOR).size === 4);
    expect(feed.buffer(SENSOR).points().map((p) => p.value)).toEqual([1, 2, 3, 4]);
    expect(feed.buffer(SENSOR).segments()).toHaveLength(1);
  });

  it("reconnects after a drop and bridges the missed window seamlessly", async () => {
    let phase = 1;
    stub = await StubGateway.start({
      helloHeartbeat: 5,
      history: () => (phase === 1 ? [rec(1, 1)] : [rec(3, 3), rec(2, 2), rec(1, 1)]),
      onStream: (conn) => {
        if (phase === 1) {
          conn.write(record(rec(1, 1)));
          setTimeout(() => {
            phase = 2; // records 2 and 3 land while we are away
            conn.end();
          }, 30);
        } else {
          conn.write(record(rec(4, 4)));
        }
      },
    });
    const statuses: FeedStatus[] = [];
    feed = new LiveFeed(stub.base, [SENSOR], { retryMs: 30 });
    feed.onStatus = (s) => statuses.push(s);
    feed.start();
    await waitFor(() => feed!.buffer(SENSOR).size === 4);
    expect(feed.buffer(SENSOR).points().map((p) => p.value)).toEqual([1, 2, 3, 4]);
    expect(feed.buffer(SENSOR).segments()).toHaveLength(1); // continuity, no fake break
    expect(statuses).toEqual(["live", "reconnecting", "live"]);
  });

  it("admits a gap when the outage outlives the backfill window", async () => {
    let phase = 1;
    stub = await StubGateway.start({
      helloHeartbeat: 5,
      history: () => (phase === 1 ? undefined : [rec(9, 9), rec(8, 8)]),
      onStream: (conn) => {
        if (phase === 1) {
          conn.write(record(rec(1, 1)));
          setTimeout(() => {
            phase = 2;
            conn.end();
          }, 30);
        } else {
          conn.write(record(rec(10, 10)));
        }
      },
    });
    feed = new LiveFeed(stub.base, [SENSOR], { retryMs: 30, backfillLimit: 2 });
    feed.start();
    await waitFor(() => feed!.buffer(SENSOR).size === 4);
    const segs = feed.buffer(SENSOR).segments();
    expect(segs).toHaveLength(2);
    expect(segs[0].map((p) => p.value)).toEqual([1]);
    expect(segs[1].map((p) => p.value)).toEqual([8, 9, 10]);
  });

  it("turns a stream gap event into a visible break", async () => {
    stub = await StubGateway.start({
      helloHeartbeat: 5,
      onStream: (conn) => {
        conn.write(record(rec(1, 1)));
        conn.write(record(rec(2, 2)));
        conn.write({ type: "gap", dropped: 5 });
        conn.write(record(rec(3, 3)));
      },
    });
    feed = new LiveFeed(stub.base, [SENSOR], { retryMs: 50 });
    feed.start();
    await waitFor(() => feed!.buffer(SENSOR).size === 3);
    const segs = feed.buffer(SENSOR).segments();
    expect(segs).toHaveLength(2);
    expect(segs[1].map((p) => p.value)).toEqual([3]);
  });

  it("drops a connection whose heartbeats stop", async () => {
    stub = await StubGateway.start({ helloHeartbeat: 0.03 }); // then silence
    const statuses: FeedStatus[] = [];
    feed = new LiveFeed(stub.base, [SENSOR], { retryMs: 30, heartbeatGraceMs: 60 });
    feed.onStatus = (s) => statuses.push(s);
    feed.start();
    await waitFor(() => stub!.streams.length >= 2); // watchdog fired, reconnected
    expect(statuses).toContain("reconnecting");
    await waitFor(() => feed!.status === "live");
  });

  it("refuses unknown keys and empty subscriptions", async () => {
    stub = await StubGateway.start({ helloHeartbeat: 5 });
    feed = new LiveFeed(stub.base, [SENSOR]);
    expect(() => feed!.buffer({ table: "nope", index: 3 })).toThrow("not subscribed");
    expect(() => new LiveFeed(stub!.base, [])).toThrow("at least one series");
  });
});
