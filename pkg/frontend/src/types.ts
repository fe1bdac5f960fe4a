/** Wire shapes of the monitor gateway, mirrored field for field. */

export interface TableKey {
  table: string;
  index: number;
}

export const keyId = (key: TableKey): string => `${key.table}:${key.index}`;

/** One stored record as the gateway serializes it. */
export interface WireRecord {
  ts: string;
  status: string;
  value: number;
}

export interface TableQueryPayload {
  table: string;
  index: number;
  records: WireRecord[]; // newest first
}

export type StreamEvent =
  | { type: "hello"; heartbeat: number }
  | { type: "heartbeat"; ts: string }
  | { type: "gap"; dropped: number }
  | ({ type: "record"; table: string; index: number } & WireRecord);

export interface SetpointAck {
  ok: true;
  table: "setpoint";
  index: number;
  value: number;
  ts: string;
}

export interface OpmodeAck {
  ok: true;
  table: "opmode";
  value: number;
  ts: string;
}

export interface TuningAck {
  ok: true;
  kp: number;
  tau_i: number;
  u_bar: number;
  ts: string;
}

export interface JitterPayload {
  timer: string;
  count: number;
  mean: number;
  min: number;
  max: number;
  std: number;
  bin_width: number;
  bin_edges: number[];
  bin_counts: number[];
}

export const MANUAL = 0;
export const AUTOMATIC = 1;

export type FeedStatus = "connecting" | "live" | "reconnecting" | "stopped";

/**
 * One chart point.  The model keeps the streamed value and timestamp text
 * untouched; any rounding happens at display time only.
 */
export interface Point {
  ts: string;
  t: number; // epoch milliseconds derived from ts, for the x axis
  value: number;
  status: string;
}

/** "YYYY-MM-DD HH:MM:SS.ffffff" (UTC) -> epoch milliseconds, sub-ms kept. */
export function tsToMillis(ts: string): number {
  const dot = ts.indexOf(".");
  const base = dot < 0 ? ts : ts.slice(0, dot);
  const frac = dot < 0 ? "" : ts.slice(dot + 1);
  const ms = Date.parse(base.replace(" ", "T") + "Z");
  return ms + (frac ? Number(`0.${frac}`) * 1000 : 0);
}

export function toPoint(rec: WireRecord): Point {
  return { ts: rec.ts, t: tsToMillis(rec.ts), value: rec.value, status: rec.status };
}
