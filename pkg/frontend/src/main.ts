/** CLI: render trajectory overlays and basin heatmaps as SVG files. */

import { readFileSync, writeFileSync } from "node:fs";
import { basename } from "node:path";
import { pathToFileURL } from "node:url";
import { parseBasinGrid } from "./basin.js";
import { renderBasinHeatmap } from "./plot_basin.js";
import { renderTrajectoryOverlay, LabeledTrajectory } from "./plot_trajectories.js";
import { ParseError, parseTrajectory } from "./trajectory.js";

const USAGE = `usage:
  plot-eval trajectories <out.svg> <label=path | path>... [--caption text]
  plot-eval basin <grid.txt> <out.svg>`;

function fail(message: string, code: number): never {
  process.stderr.write(message + "\n");
  process.exit(code);
}

function readOrFail(path: string): string {
  try {
    return readFileSync(path, "utf-8");
  } catch (err) {
    fail(`cannot read ${path}: ${(err as Error).message}`, 2);
  }
}

function cmdTrajectories(args: string[]): void {
  const captionIdx = args.indexOf("--caption");
  let caption: string | undefined;
  if (captionIdx >= 0) {
    caption = args[captionIdx + 1];
    if (caption === undefined) {
      fail(USAGE, 1);
    }
    args = args.slice(0, captionIdx).concat(args.slice(captionIdx + 2));
  }
  const [out, ...inputs] = args;
  if (!out || inputs.length === 0) {
    fail(USAGE, 1);
  }
  const trajectories: LabeledTrajectory[] = inputs.map((spec) => {
    const eq = spec.indexOf("=");
    const label = eq > 0 ? spec.slice(0, eq) : basename(spec).replace(/\.[^.]*$/, "");
    const path = eq > 0 ? spec.slice(eq + 1) : spec;
    return { label, points: parseTrajectory(readOrFail(path), path) };
  });
  writeFileSync(out, renderTrajectoryOverlay(trajectories, caption));
  process.stdout.write(`wrote ${out}\n`);
}

function cmdBasin(args: string[]): void {
  const [gridPath, out] = args;
  if (!gridPath || !out) {
    fail(USAGE, 1);
  }
  const grid = parseBasinGrid(readOrFail(gridPath), gridPath);
  writeFileSync(out, renderBasinHeatmap(grid));
  process.stdout.write(`wrote ${out}\n`);
}

export function main(argv: string[]): void {
  const [command, ...rest] = argv;
  try {
    if (command === "trajectories") {
      cmdTrajectories(rest);
    } else if (command === "basin") {
      cmdBasin(rest);
    } else {
      fail(USAGE, 1);
    }
  } catch (err) {
    if (err instanceof ParseError) {
      fail(`parse error: ${err.message}`, 2);
    }
    throw err;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  main(process.argv.slice(2));
}
