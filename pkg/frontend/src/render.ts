import type { Point } from "./types.js";

/** Axis window for one panel, padded so traces do not hug the border. */
export interface Extent {
  tMin: number;
  tMax: number;
  vMin: number;
  vMax: number;
}

export function computeExtent(
  series: (readonly (readonly Point[])[])[],
  padFrac = 0.08,
): Extent | null {
  let tMin = Infinity;
  let tMax = -Infinity;
  let vMin = Infinity;
  let vMax = -Infinity;
  let any = false;
  for (const segments of series) {
    for (const segment of segments) {
      for (const p of segment) {
        any = true;
        if (p.t < tMin) tMin = p.t;
        if (p.t > tMax) tMax = p.t;
        if (p.value < vMin) vMin = p.value;
        if (p.value > vMax) vMax = p.value;
      }
    }
  }
  if (!any) return null;
  if (tMin === tMax) {
    tMin -= 500; // single instant: give it a one-second window
    tMax += 500;
  }
  let pad = (vMax - vMin) * padFrac;
  if (pad === 0) pad = Math.max(Math.abs(vMax) * 0.1, 1); // flat trace still gets air
  return { tMin, tMax, vMin: vMin - pad, vMax: vMax + pad };
}

export const toX = (t: number, e: Extent, width: number): number =>
  ((t - e.tMin) / (e.tMax - e.tMin)) * width;

export const toY = (v: number, e: Extent, height: number): number =>
  height - ((v - e.vMin) / (e.vMax - e.vMin)) * height;

/** Display-side rounding only; the data model keeps full precision. */
export function formatValue(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e6 || a < 1e-4) return v.toExponential(3);
  return String(Number(v.toPrecision(6)));
}

export interface TraceStyle {
  color: string;
  width?: number;
  dashed?: boolean;
}

export interface PanelSeries {
  segments: readonly (readonly Point[])[];
  style: TraceStyle;
}

/** Redraw one chart panel: one polyline per segment, a dot for singletons. */
export function drawPanel(canvas: HTMLCanvasElement, title: string, series: PanelSeries[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#11161d";
  ctx.fillRect(0, 0, w, h);

  const extent = computeExtent(series.map((s) => s.segments));
  ctx.font = "12px system-ui, sans-serif";
  if (!extent) {
    ctx.fillStyle = "#5c6773";
    ctx.fillText(`${title} — no data yet`, 10, 18);
    return;
  }

  ctx.strokeStyle = "#252d38";
  ctx.fillStyle = "#5c6773";
  ctx.lineWidth = 1;
  for (let i = 1; i <= 3; i++) {
    const y = (h * i) / 4;
    ctx.beginPath();
    ctx.moveTo(0, y);
    ctx.lineTo(w, y);
    ctx.stroke();
    const v = extent.vMax - ((extent.vMax - extent.vMin) * i) / 4;
    ctx.fillText(formatValue(v), 4, y - 3);
  }

  for (const { segments, style } of series) {
    ctx.strokeStyle = style.color;
    ctx.fillStyle = style.color;
    ctx.lineWidth = style.width ?? 1.6;
    ctx.setLineDash(style.dashed ? [6, 4] : []);
    for (const segment of segments) {
      if (segment.length === 0) continue;
      if (segment.length === 1) {
        const p = segment[0];
        ctx.fillRect(toX(p.t, extent, w) - 1.5, toY(p.value, extent, h) - 1.5, 3, 3);
        continue;
      }
      ctx.beginPath();
      segment.forEach((p, i) => {
        const x = toX(p.t, extent, w);
        const y = toY(p.value, extent, h);
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.stroke();
    }
  }
  ctx.setLineDash([]);

  ctx.fillStyle = "#c7d0da";
  ctx.fillText(title, 10, 18);
  const main = series[0]?.segments.flat() ?? [];
  const lastPoint = main[main.length - 1];
  if (lastPoint) {
    const text = formatValue(lastPoint.value);
    ctx.fillText(text, w - ctx.measureText(text).width - 10, 18);
  }
}
