/**
 * Operator dashboard: live charts for two sensors (with setpoint overlays)
 * and two actuators, plus a sidebar that issues gateway commands.  All data
 * arrives through the monitor gateway; the only mutation path is a command.
 */

import { CommandRejected } from "./client.js";
import { LiveFeed } from "./feed.js";
import { drawPanel } from "./render.js";
import { AUTOMATIC, MANUAL } from "./types.js";
import type { TableKey } from "./types.js";

const params = new URLSearchParams(location.search);
const gatewayBase =
  params.get("gateway") ?? `http://${location.hostname || "127.0.0.1"}:43080`;

const SENSOR_KEYS: TableKey[] = [1, 2].map((index) => ({ table: "sensor", index }));
const SETPOINT_KEYS: TableKey[] = [1, 2].map((index) => ({ table: "setpoint", index }));
const ACTUATOR_KEYS: TableKey[] = [1, 2].map((index) => ({ table: "actuator", index }));
const OPMODE_KEY: TableKey = { table: "opmode", index: 1 };

const feed = new LiveFeed(
  gatewayBase,
  [...SENSOR_KEYS, ...SETPOINT_KEYS, ...ACTUATOR_KEYS, OPMODE_KEY],
  { capacity: 3000, backfillLimit: 500 },
);
const client = feed.client;

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
};

const banner = el<HTMLDivElement>("status-banner");
feed.onStatus = (status, detail) => {
  banner.textContent = `${status} — ${detail}`;
  banner.dataset.status = status;
  console.log(`feed: ${status} (${detail})`);
};

// --- chart panels -----------------------------------------------------------

let drawQueued = false;
function scheduleDraw(): void {
  if (drawQueued) return;
  drawQueued = true;
  requestAnimationFrame(() => {
    drawQueued = false;
    drawAll();
  });
}
feed.onChange = scheduleDraw;

function drawAll(): void {
  for (const i of [0, 1]) {
    drawPanel(el<HTMLCanvasElement>(`sensor-${i + 1}`), `sensor ${i + 1}`, [
      { segments: feed.buffer(SENSOR_KEYS[i]).segments(), style: { color: "#4cc2ff" } },
      {
        segments: feed.buffer(SETPOINT_KEYS[i]).segments(),
        style: { color: "#ffb454", dashed: true },
      },
    ]);
    drawPanel(el<HTMLCanvasElement>(`actuator-${i + 1}`), `actuator ${i + 1}`, [
      { segments: feed.buffer(ACTUATOR_KEYS[i]).segments(), style: { color: "#9fe65c" } },
    ]);
  }
  const mode = feed.buffer(OPMODE_KEY).last();
  if (mode) {
    const label = mode.value === MANUAL ? "manual" : "automatic";
    el("mode-label").textContent = label;
    el("mode-label").dataset.mode = label;
  }
}

// --- command sidebar --------------------------------------------------------

function reportResult(id: string, promise: Promise<{ ts: string }>): void {
  const line = el(id);
  line.textContent = "sending…";
  line.dataset.state = "pending";
  promise
    .then((ack) => {
      line.textContent = `ok @ ${ack.ts}`;
      line.dataset.state = "ok";
    })
    .catch((err) => {
      // rejected commands change nothing; the traces only move on stream echo
      line.textContent = err instanceof CommandRejected ? err.message : String(err);
      line.dataset.state = "error";
    });
}

const numberInput = (id: string): number => Number(el<HTMLInputElement>(id).value);

el("setpoint-form").addEventListener("submit", (ev) => {
  ev.preventDefault();
  reportResult(
    "setpoint-result",
    client.setSetpoint(numberInput("setpoint-index"), numberInput("setpoint-value")),
  );
});

el("btn-manual").addEventListener("click", () => {
  reportResult("opmode-result", client.setOpmode(MANUAL));
});
el("btn-automatic").addEventListener("click", () => {
  reportResult("opmode-result", client.setOpmode(AUTOMATIC));
});

el("tuning-form").addEventListener("submit", (ev) => {
  ev.preventDefault();
  reportResult(
    "tuning-result",
    client.setTuning(numberInput("tuning-kp"), numberInput("tuning-taui"), numberInput("tuning-ubar")),
  );
});

// --- timer health readout ---------------------------------------------------

async function pollJitter(): Promise<void> {
  try {
    const stats = await client.jitter("c");
    el("jitter-label").textContent =
      `control period ${stats.mean.toFixed(4)} s over ${stats.count} intervals`;
  } catch {
    el("jitter-label").textContent = "control period —";
  }
}

console.log(`operator ui connecting to ${gatewayBase}`);
feed.start();
drawAll();
void pollJitter();
setInterval(pollJitter, 5000);
