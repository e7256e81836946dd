/** Top-down x-y trajectory overlay with legend and optional caption. */

import { SvgBuilder } from "./svg.js";
import { TrajectoryPoint } from "./trajectory.js";

export interface LabeledTrajectory {
  label: string;
  points: TrajectoryPoint[];
}

// Convention: estimates blue/orange, refined green, ground truth black.
const PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#000000", "#9467bd", "#8c564b"];

function colorFor(label: string, index: number): string {
  const lower = label.toLowerCase();
  if (lower.includes("gt") || lower.includes("truth")) return "#000000";
  if (lower.includes("refin") || lower.includes("ours")) return "#2ca02c";
  return PALETTE[index % PALETTE.length];
}

export function renderTrajectoryOverlay(
  trajectories: LabeledTrajectory[],
  caption?: string
): string {
  const width = 640;
  const height = 560;
  const margin = { left: 56, right: 16, top: 16, bottom: caption ? 64 : 44 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;

  let xMin = Infinity;
  let xMax = -Infinity;
  let yMin = Infinity;
  let yMax = -Infinity;
  for (const { points } of trajectories) {
    for (const p of points) {
      xMin = Math.min(xMin, p.x);
      xMax = Math.max(xMax, p.x);
      yMin = Math.min(yMin, p.y);
      yMax = Math.max(yMax, p.y);
    }
  }
  if (!(xMax > xMin)) {
    xMin -= 0.5;
    xMax += 0.5;
  }
  if (!(yMax > yMin)) {
    yMin -= 0.5;
    yMax += 0.5;
  }
  // Equal aspect: meters map to the same pixel scale on both axes.
  const scale = 0.92 * Math.min(plotW / (xMax - xMin), plotH / (yMax - yMin));
  const cx = (xMin + xMax) / 2;
  const cy = (yMin + yMax) / 2;
  const toPx = (p: TrajectoryPoint): [number, number] => [
    margin.left + plotW / 2 + (p.x - cx) * scale,
    margin.top + plotH / 2 - (p.y - cy) * scale,
  ];

  const svg = new SvgBuilder(width, height);
  svg.rect(0, 0, width, height, "#ffffff");
  svg.rect(margin.left, margin.top, plotW, plotH, "#fafafa", "#cccccc");
  for (let i = 0; i < trajectories.length; i++) {
    svg.polyline(trajectories[i].points.map(toPx), colorFor(trajectories[i].label, i));
  }
  let lx = margin.left + 8;
  const ly = margin.top + 16;
  for (let i = 0; i < trajectories.length; i++) {
    const color = colorFor(trajectories[i].label, i);
    svg.line(lx, ly - 4, lx + 18, ly - 4, color, 2.5);
    svg.text(lx + 24, ly, trajectories[i].label);
    lx += 34 + 7 * trajectories[i].label.length;
  }
  svg.text(margin.left + plotW / 2, height - (caption ? 40 : 16), "x [m]", 11, "middle");
  svg.text(16, margin.top + plotH / 2, "y [m]", 11, "middle");
  if (caption) {
    svg.text(margin.left + plotW / 2, height - 16, caption, 12, "middle");
  }
  return svg.render();
}
