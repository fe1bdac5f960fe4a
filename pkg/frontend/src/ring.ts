import type { Point } from "./types.js";

/**
 * Fixed-capacity trace buffer for one series.
 *
 * Points stay in timestamp order (the gateway streams each series in
 * insertion order; anything older than the newest held point is a backfill
 * seam duplicate and is dropped).  A gap splits the trace into segments so
 * the chart draws a visible break instead of interpolating across it.
 */
export class TraceBuffer {
  private segs: Point[][] = [];
  private count = 0;
  private gapPending = false;

  constructor(readonly capacity: number) {
    if (!Number.isInteger(capacity) || capacity < 1) {
      throw new RangeError(`capacity must be a positive integer, got ${capacity}`);
    }
  }

  get size(): number {
    return this.count;
  }

  last(): Point | undefined {
    const seg = this.segs[this.segs.length - 1];
    return seg && seg[seg.length - 1];
  }

  /** Append one point; returns false for an out-of-order or duplicate point. */
  push(point: Point): boolean {
    const prev = this.last();
    if (prev) {
      // fixed-width timestamps sort lexically, so string compare is enough
      if (point.ts < prev.ts) return false;
      if (point.ts === prev.ts && point.value === prev.value && point.status === prev.status) {
        return false; // same record arriving twice across a backfill seam
      }
    }
    if (this.gapPending || this.segs.length === 0) {
      this.segs.push([]);
      this.gapPending = false;
    }
    this.segs[this.segs.length - 1].push(point);
    this.count += 1;
    this.evict();
    return true;
  }

  /** The next pushed point starts a new segment (a visible break). */
  markGap(): void {
    if (this.count > 0) this.gapPending = true;
  }

  /** Contiguous runs, oldest first; the chart draws one line per segment. */
  segments(): readonly (readonly Point[])[] {
    return this.segs;
  }

  points(): Point[] {
    return this.segs.flat();
  }

  clear(): void {
    this.segs = [];
    this.count = 0;
    this.gapPending = false;
  }

  private evict(): void {
    while (this.count > this.capacity) {
      const head = this.segs[0];
      head.shift();
      this.count -= 1;
      if (head.length === 0) this.segs.shift();
    }
  }
}
