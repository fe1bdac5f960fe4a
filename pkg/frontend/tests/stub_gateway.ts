/** In-process gateway stand-in for exercising the client and feed offline. */

import { createServer, type Server } from "node:http";
import type { AddressInfo } from "node:net";

import type { WireRecord } from "../src/types.js";

export interface SeenRequest {
  method: string;
  path: string;
  body: unknown;
}

export interface SseConnection {
  write(event: object): void;
  end(): void;
}

export interface StubOptions {
  /** records for a series, newest first; undefined -> 404 like the gateway */
  history?: (table: string, index: number) => WireRecord[] | undefined | Promise<WireRecord[] | undefined>;
  command?: (path: string, body: unknown) => { status: number; payload: object };
  onStream?: (conn: SseConnection) => void;
  /** when set, every stream connection gets a hello event immediately */
  helloHeartbeat?: number;
}

export class StubGateway {
  readonly requests: SeenRequest[] = [];
  readonly streams: SseConnection[] = [];
  private server!: Server;
  port!: number;

  private constructor(private readonly opts: StubOptions) {}

  static async start(opts: StubOptions = {}): Promise<StubGateway> {
    const stub = new StubGateway(opts);
    stub.server = createServer((req, res) => {
      const chunks: Buffer[] = [];
      req.on("data", (c) => chunks.push(c));
      req.on("end", () => {
        const text = Buffer.concat(chunks).toString("utf-8");
        const body = text ? JSON.parse(text) : undefined;
        stub.requests.push({ method: req.method ?? "", path: req.url ?? "", body });
        void stub.route(req.method ?? "", req.url ?? "", body, res);
      });
    });
    await new Promise<void>((resolve) => stub.server.listen(0, "127.0.0.1", resolve));
    stub.port = (stub.server.address() as AddressInfo).port;
    return stub;
  }

  get base(): string {
    return `http://127.0.0.1:${this.port}`;
  }

  async close(): Promise<void> {
    for (const conn of this.streams) conn.end();
    this.server.closeAllConnections();
    await new Promise<void>((resolve) => this.server.close(() => resolve()));
  }

  private async route(
    method: string,
    url: string,
    body: unknown,
    res: import("node:http").ServerResponse,
  ): Promise<void> {
    const json = (status: number, payload: object) => {
      const data = JSON.stringify(payload);
      res.writeHead(status, { "Content-Type": "application/json" });
      res.end(data);
    };

    const path = url.split("?")[0];
    if (method === "GET" && path.startsWith("/api/tables/")) {
      const [table, indexText] = path.slice("/api/tables/".length).split("/");
      const index = Number(indexText);
      const records = await this.opts.history?.(table, index);
      if (!records) {
        json(404, { ok: false, error: `no series ${table}[${index}]` });
        return;
      }
      const limit = Number(new URL(url, this.base).searchParams.get("limit") ?? 100);
      json(200, { table, index, records: records.slice(0, limit) });
      return;
    }

    if (method === "GET" && path === "/api/stream") {
      res.writeHead(200, { "Content-Type": "text/event-stream" });
      const conn: SseConnection = {
        write: (event) => res.write(`data: ${JSON.stringify(event)}\n\n`),
        end: () => res.end(),
      };
      this.streams.push(conn);
      if (this.opts.helloHeartbeat !== undefined) {
        conn.write({ type: "hello", heartbeat: this.opts.helloHeartbeat });
      }
      this.opts.onStream?.(conn);
      return;
    }

    if (method === "POST") {
      const reply = this.opts.command?.(path, body) ?? {
        status: 200,
        payload: { ok: true, ...(body as object), ts: "2024-05-01 12:00:00.000000" },
      };
      json(reply.status, reply.payload);
      return;
    }

    json(404, { ok: false, error: `unknown path ${path}` });
  }
}

export const delay = (ms: number) => new Promise<void>((res) => setTimeout(res, ms));

export async function waitFor(cond: () => boolean, ms = 4000, step = 10): Promise<void> {
  const deadline = Date.now() + ms;
  while (Date.now() < deadline) {
    if (cond()) return;
    await delay(step);
  }
  throw new Error("condition not met in time");
}

/** A wire record `seconds` into a fixed reference minute. */
export function rec(seconds: number, value: number, status = "ok"): WireRecord {
  const whole = Math.floor(seconds);
  const micros = Math.round((seconds - whole) * 1e6);
  return {
    ts: `2024-05-01 12:00:${String(whole).padStart(2, "0")}.${String(micros).padStart(6, "0")}`,
    status,
    value,
  };
}
