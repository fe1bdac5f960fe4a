import { GatewayClient } from "./client.js";
import { TraceBuffer } from "./ring.js";
import { readEventStream } from "./sse.js";
import { keyId, toPoint } from "./types.js";
import type { FeedStatus, StreamEvent, TableKey, WireRecord } from "./types.js";

export interface FeedOptions {
  /** points kept per series */
  capacity?: number;
  /** history rows fetched per series on every (re)connect */
  backfillLimit?: number;
  /** first reconnect delay; doubles up to maxRetryMs */
  retryMs?: number;
  maxRetryMs?: number;
  /** slack added to the gateway's advertised heartbeat before giving up */
  heartbeatGraceMs?: number;
}

const delay = (ms: number) => new Promise<void>((res) => setTimeout(res, ms));

type QueuedEvent =
  | { kind: "record"; key: TableKey; rec: WireRecord }
  | { kind: "gap" };

/**
 * One streaming connection feeding per-series trace buffers.
 *
 * Every (re)connect starts with a history backfill through the query
 * endpoint, with live records queued meanwhile, so a trace stays continuous
 * across a gateway restart.  If the outage outlived the backfill window the
 * buffer gets a gap marker instead of a made-up line.  Missed heartbeats
 * drop the connection; reconnects back off exponentially.
 */
export class LiveFeed {
  readonly client: GatewayClient;
  private readonly bufs = new Map<string, TraceBuffer>();
  private readonly backfillLimit: number;
  private readonly retryMs: number;
  private readonly maxRetryMs: number;
  private readonly heartbeatGraceMs: number;

  private _status: FeedStatus = "connecting";
  private stopFlag = false;
  private abortCtl: AbortController | null = null;
  private watchdog: ReturnType<typeof setTimeout> | null = null;
  private heartbeatMs: number | null = null;
  private backfilling = false;
  private pendingLive: QueuedEvent[] = [];
  private loop: Promise<void> | null = null;

  onStatus?: (status: FeedStatus, detail: string) => void;
  onChange?: () => void;

  constructor(baseUrl: string, readonly keys: TableKey[], opts: FeedOptions = {}) {
    if (keys.length === 0) throw new RangeError("subscribe to at least one series");
    this.client = new GatewayClient(baseUrl);
    const capacity = opts.capacity ?? 2000;
    this.backfillLimit = opts.backfillLimit ?? 200;
    this.retryMs = opts.retryMs ?? 500;
    this.maxRetryMs = opts.maxRetryMs ?? 5000;
    this.heartbeatGraceMs = opts.heartbeatGraceMs ?? 2000;
    for (const key of keys) this.bufs.set(keyId(key), new TraceBuffer(capacity));
  }

  get status(): FeedStatus {
    return this._status;
  }

  buffer(key: TableKey): TraceBuffer {
    const buf = this.bufs.get(keyId(key));
    if (!buf) throw new Error(`not subscribed: ${keyId(key)}`);
    return buf;
  }

  start(): void {
    if (this.loop) return;
    this.stopFlag = false;
    this.loop = this.run();
  }

  async stop(): Promise<void> {
    this.stopFlag = true;
    this.clearWatchdog();
    this.abortCtl?.abort();
    this.setStatus("stopped", "stopped");
    await this.loop?.catch(() => undefined);
    this.loop = null;
  }

  private async run(): Promise<void> {
    let retry = this.retryMs;
    while (!this.stopFlag) {
      this.abortCtl = new AbortController();
      try {
        await readEventStream(
          this.client.streamUrl(this.keys),
          (data) => {
            retry = this.retryMs; // traffic proves the link is healthy again
            this.handleEvent(JSON.parse(data) as StreamEvent);
          },
          this.abortCtl.signal,
        );
        if (!this.stopFlag) this.setStatus("reconnecting", "stream closed by gateway");
      } catch (err) {
        if (!this.stopFlag) {
          this.setStatus("reconnecting", `stream dropped: ${(err as Error).message}`);
        }
      }
      this.clearWatchdog();
      this.backfilling = false;
      this.pendingLive = [];
      if (this.stopFlag) break;
      await delay(retry);
      retry = Math.min(retry * 2, this.maxRetryMs);
    }
  }

  private handleEvent(event: StreamEvent): void {
    this.armWatchdog();
    switch (event.type) {
      case "hello":
        this.heartbeatMs = event.heartbeat * 1000 + this.heartbeatGraceMs;
        this.armWatchdog();
        this.setStatus("live", "stream connected");
        void this.backfill();
        break;
      case "heartbeat":
        break;
      case "gap":
        // the gateway dropped records for this subscription; show a break
        if (this.backfilling) {
          this.pendingLive.push({ kind: "gap" });
        } else {
          this.markGapEverywhere();
          this.onChange?.();
        }
        break;
      case "record": {
        const key = { table: event.table, index: event.index };
        if (!this.bufs.has(keyId(key))) break;
        if (this.backfilling) {
          this.pendingLive.push({ kind: "record", key, rec: event });
        } else if (this.buffer(key).push(toPoint(event))) {
          this.onChange?.();
        }
        break;
      }
    }
  }

  /** Fill what the stream missed; live records queue until this finishes. */
  private async backfill(): Promise<void> {
    this.backfilling = true;
    this.pendingLive = [];
    try {
      for (const key of this.keys) {
        let recs: WireRecord[];
        try {
          recs = await this.client.queryHistory(key.table, key.index, this.backfillLimit);
        } catch {
          continue; // series not written yet
        }
        const ascending = recs.slice().reverse();
        const buf = this.buffer(key);
        const held = buf.last();
        const missed = held ? ascending.filter((r) => r.ts > held.ts) : ascending;
        if (held && missed.length === ascending.length && ascending.length >= this.backfillLimit) {
          // the whole window is newer than anything held: the outage may have
          // outlived the backfill, so admit the hole rather than imply continuity
          buf.markGap();
        }
        for (const rec of missed) buf.push(toPoint(rec));
      }
    } finally {
      const queued = this.pendingLive;
      this.pendingLive = [];
      this.backfilling = false;
      // replay what streamed meanwhile; seam duplicates fall out on the
      // buffer's timestamp-order guard
      for (const entry of queued) {
        if (entry.kind === "gap") this.markGapEverywhere();
        else this.buffer(entry.key).push(toPoint(entry.rec));
      }
      this.onChange?.();
    }
  }

  private markGapEverywhere(): void {
    for (const buf of this.bufs.values()) buf.markGap();
  }

  private setStatus(status: FeedStatus, detail: string): void {
    if (status === this._status) return;
    this._status = status;
    this.onStatus?.(status, detail);
  }

  private armWatchdog(): void {
    if (this.heartbeatMs === null) return;
    this.clearWatchdog();
    this.watchdog = setTimeout(() => {
      if (!this.stopFlag) this.abortCtl?.abort(); // run() takes it from here
    }, this.heartbeatMs);
  }

  private clearWatchdog(): void {
    if (this.watchdog !== null) {
      clearTimeout(this.watchdog);
      this.watchdog = null;
    }
  }
}
