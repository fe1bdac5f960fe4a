import { describe, expect, it } from "vitest";

import { TraceBuffer } from "../src/ring.js";
import type { Point } from "../src/types.js";

// timestamps in the gateway's fixed-width format so string order == time order
const at = (seconds: number, value: number, status = "ok"): Point => {
  const whole = Math.floor(seconds);
  const micros = Math.round((seconds - whole) * 1e6);
  const ts = `2024-05-01 12:00:${String(whole).padStart(2, "0")}.${String(micros).padStart(6, "0")}`;
  return { ts, t: seconds * 1000, value, status };
};

describe("TraceBuffer", () => {
  it("keeps points in arrival order inside one segment", () => {
    const buf = new TraceBuffer(10);
    for (const p of [at(1, 1), at(2, 2), at(3, 3)]) expect(buf.push(p)).toBe(true);
    expect(buf.segments()).toHaveLength(1);
    expect(buf.points().map((p) => p.value)).toEqual([1, 2, 3]);
    expect(buf.last()?.value).toBe(3);
  });

  it("drops a point older than the newest held one", () => {
    const buf = new TraceBuffer(10);
    buf.push(at(5, 50));
    expect(buf.push(at(4, 40))).toBe(false);
    expect(buf.size).toBe(1);
  });

  it("drops the identical record arriving twice (backfill seam)", () => {
    const buf = new TraceBuffer(10);
    expect(buf.push(at(5, 50))).toBe(true);
    expect(buf.push(at(5, 50))).toBe(false);
    expect(buf.size).toBe(1);
  });

  it("keeps a same-timestamp record with a different value", () => {
    const buf = new TraceBuffer(10);
    buf.push(at(5, 50));
    expect(buf.push(at(5, 51))).toBe(true);
    expect(buf.size).toBe(2);
  });

  it("splits the trace at a gap, never joining across it", () => {
    const buf = new TraceBuffer(10);
    buf.push(at(1, 1));
    buf.push(at(2, 2));
    buf.markGap();
    buf.push(at(9, 9));
    const segs = buf.segments();
    expect(segs).toHaveLength(2);
    expect(segs[0].map((p) => p.value)).toEqual([1, 2]);
    expect(segs[1].map((p) => p.value)).toEqual([9]);
  });

  it("coalesces repeated gap marks before the next point", () => {
    const buf = new TraceBuffer(10);
    buf.push(at(1, 1));
    buf.markGap();
    buf.markGap();
    buf.push(at(2, 2));
    expect(buf.segments()).toHaveLength(2);
  });

  it("ignores a gap mark on an empty buffer", () => {
    const buf = new TraceBuffer(10);
    buf.markGap();
    buf.push(at(1, 1));
    expect(buf.segments()).toHaveLength(1);
  });

  it("evicts oldest points first once capacity is reached", () => {
    const buf = new TraceBuffer(3);
    for (let k = 1; k <= 5; k++) buf.push(at(k, k));
    expect(buf.size).toBe(3);
    expect(buf.points().map((p) => p.value)).toEqual([3, 4, 5]);
  });

  it("drops an emptied oldest segment together with its gap boundary", () => {
    const buf = new TraceBuffer(2);
    buf.push(at(1, 1));
    buf.markGap();
    buf.push(at(2, 2));
    buf.push(at(3, 3)); // evicts the lone point before the gap
    expect(buf.segments()).toHaveLength(1);
    expect(buf.points().map((p) => p.value)).toEqual([2, 3]);
  });

  it("rejects a nonsense capacity", () => {
    expect(() => new TraceBuffer(0)).toThrow(RangeError);
    expect(() => new TraceBuffer(2.5)).toThrow(RangeError);
  });

  it("clear resets points, segments and pending gap", () => {
    const buf = new TraceBuffer(5);
    buf.push(at(1, 1));
    buf.markGap();
    buf.clear();
    expect(buf.size).toBe(0);
    buf.push(at(2, 2));
    expect(buf.segments()).toHaveLength(1);
  });
});
