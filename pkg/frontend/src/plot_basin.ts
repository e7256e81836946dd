/** Convergence-basin heatmaps: one panel per mode, shared color scale. */

import { BasinGrid } from "./basin.js";
import { SvgBuilder, colormap, fmt } from "./svg.js";

const CELL = 44;
const PANEL_GAP = 26;
const MARGIN = { left: 64, top: 36, bottom: 56, right: 86 };

export function renderBasinHeatmap(grid: BasinGrid): string {
  const rows = grid.rotations.length;
  const cols = grid.translations.length;
  const panelW = cols * CELL;
  const panelH = rows * CELL;
  const width = MARGIN.left + grid.modes.length * (panelW + PANEL_GAP) - PANEL_GAP + MARGIN.right;
  const height = MARGIN.top + panelH + MARGIN.bottom;

  let lo = Infinity;
  let hi = -Infinity;
  for (const mode of grid.modes) {
    for (const row of mode.values) {
      for (const v of row) {
        lo = Math.min(lo, v);
        hi = Math.max(hi, v);
      }
    }
  }
  if (!(hi > lo)) {
    hi = lo + 1;
  }
  // Low error = dark; the scale is shared so panels are comparable.
  const norm = (v: number) => (v - lo) / (hi - lo);

  const svg = new SvgBuilder(width, height);
  svg.rect(0, 0, width, height, "#ffffff");
  for (let m = 0; m < grid.modes.length; m++) {
    const x0 = MARGIN.left + m * (panelW + PANEL_GAP);
    const mode = grid.modes[m];
    svg.text(x0 + panelW / 2, MARGIN.top - 10, mode.name, 12, "middle");
    for (let r = 0; r < rows; r++) {
      for (let c = 0; c < cols; c++) {
        svg.rect(
          x0 + c * CELL,
          MARGIN.top + (rows - 1 - r) * CELL,
          CELL,
          CELL,
          colormap(norm(mode.values[r][c])),
          "#ffffff"
        );
      }
    }
    for (let c = 0; c < cols; c++) {
      svg.text(
        x0 + (c + 0.5) * CELL,
        MARGIN.top + panelH + 14,
        fmt(grid.translations[c]),
        9,
        "middle"
      );
    }
    svg.text(x0 + panelW / 2, MARGIN.top + panelH + 34, "translation [m]", 10, "middle");
  }
  for (let r = 0; r < rows; r++) {
    svg.text(
      MARGIN.left - 8,
      MARGIN.top + (rows - 1 - r + 0.62) * CELL,
      fmt(grid.rotations[r]),
      9,
      "end"
    );
  }
  svg.text(14, MARGIN.top + panelH / 2, "rot [rad]", 10, "middle");

  // Color bar with the shared scale.
  const barX = width - MARGIN.right + 24;
  const steps = 24;
  for (let k = 0; k < steps; k++) {
    svg.rect(
      barX,
      MARGIN.top + panelH - ((k + 1) * panelH) / steps,
      14,
      panelH / steps + 0.5,
      colormap(k / (steps - 1))
    );
  }
  svg.text(barX + 18, MARGIN.top + 10, fmt(hi), 9);
  svg.text(barX + 18, MARGIN.top + panelH, fmt(lo), 9);
  svg.text(barX + 7, MARGIN.top - 10, "log err", 9, "middle");
  return svg.render();
}
