import type {
  JitterPayload,
  OpmodeAck,
  SetpointAck,
  TableKey,
  TableQueryPayload,
  TuningAck,
  WireRecord,
} from "./types.js";

/** A command the gateway (or our own pre-check) refused; nothing was stored. */
export class CommandRejected extends Error {}

/**
 * HTTP client for the monitor gateway.  This is the single mutation path of
 * the dashboard: every change flows through a gateway command, never into
 * local state directly.  Validation here mirrors the gateway's own rules so
 * obviously bad input is refused before it leaves the browser.
 */
export class GatewayClient {
  constructor(readonly baseUrl: string) {}

  async queryHistory(table: string, index: number, limit = 100): Promise<WireRecord[]> {
    const payload = await this.get<TableQueryPayload>(
      `/api/tables/${encodeURIComponent(table)}/${index}?limit=${limit}`,
    );
    return payload.records;
  }

  async jitter(timer: string): Promise<JitterPayload> {
    return this.get<JitterPayload>(`/api/jitter/${encodeURIComponent(timer)}`);
  }

  streamUrl(keys?: TableKey[]): string {
    if (!keys || keys.length === 0) return `${this.baseUrl}/api/stream`;
    const tables = keys.map((k) => `${k.table}:${k.index}`).join(",");
    return `${this.baseUrl}/api/stream?tables=${encodeURIComponent(tables)}`;
  }

  async setSetpoint(index: number, value: number): Promise<SetpointAck> {
    if (!Number.isInteger(index) || index < 1) {
      throw new CommandRejected(`setpoint index must be an integer >= 1, got ${index}`);
    }
    if (!Number.isFinite(value)) {
      throw new CommandRejected(`setpoint value must be a finite number, got ${value}`);
    }
    return this.post<SetpointAck>("/api/setpoint", { index, value });
  }

  async setOpmode(value: number): Promise<OpmodeAck> {
    if (value !== 0 && value !== 1) {
      throw new CommandRejected(`operation mode must be 0 (manual) or 1 (automatic), got ${value}`);
    }
    return this.post<OpmodeAck>("/api/opmode", { value });
  }

  async setTuning(kp: number, tau_i: number, u_bar: number): Promise<TuningAck> {
    for (const [name, v] of [["kp", kp], ["tau_i", tau_i], ["u_bar", u_bar]] as const) {
      if (!Number.isFinite(v)) throw new CommandRejected(`${name} must be a finite number, got ${v}`);
    }
    if (!(tau_i > 0)) throw new CommandRejected(`tau_i must be positive, got ${tau_i}`);
    return this.post<TuningAck>("/api/tuning", { kp, tau_i, u_bar });
  }

  private async get<T>(path: string): Promise<T> {
    const resp = await fetch(this.baseUrl + path);
    const payload = await resp.json();
    if (!resp.ok) {
      throw new Error(payload?.error ?? `HTTP ${resp.status}`);
    }
    return payload as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = await resp.json();
    if (!resp.ok || payload?.ok !== true) {
      throw new CommandRejected(payload?.error ?? `HTTP ${resp.status}`);
    }
    return payload as T;
  }
}
