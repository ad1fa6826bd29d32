// Minimal canvas chart for the per-iteration estimated-acuity curve.

import { EstimatePoint } from "./api.js";

export interface ChartGeometry {
  xOf: (iter: number) => number;
  yOf: (va: number) => number;
  vaMin: number;
  vaMax: number;
}

export function chartGeometry(
  points: EstimatePoint[],
  width: number,
  height: number,
  pad = 28,
): ChartGeometry {
  const iters = points.map((p) => p.iter);
  const vas = points.map((p) => p.va);
  const iterMax = Math.max(1, ...iters);
  let vaMin = Math.min(0, ...vas);
  let vaMax = Math.max(0.1, ...vas);
  if (vaMax - vaMin < 1e-9) vaMax = vaMin + 1;
  return {
    xOf: (iter) => pad + (iter / iterMax) * (width - 2 * pad),
    yOf: (va) => height - pad - ((va - vaMin) / (vaMax - vaMin)) * (height - 2 * pad),
    vaMin,
    vaMax,
  };
}

export function drawVaCurve(canvas: HTMLCanvasElement, points: EstimatePoint[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  if (points.length === 0) return;

  const geom = chartGeometry(points, width, height);
  ctx.strokeStyle = "#888";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(geom.xOf(0), geom.yOf(geom.vaMin));
  ctx.lineTo(geom.xOf(0), geom.yOf(geom.vaMax));
  ctx.moveTo(geom.xOf(0), geom.yOf(0));
  ctx.lineTo(width - 4, geom.yOf(0));
  ctx.stroke();

  ctx.strokeStyle = "#0b6e99";
  ctx.lineWidth = 2;
  ctx.beginPath();
  points.forEach((p, i) => {
    const x = geom.xOf(p.iter);
    const y = geom.yOf(p.va);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();

  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.fillText("estimated VA (logMAR)", 6, 12);
}
