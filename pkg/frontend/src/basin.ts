/** Parsing for selfalign basin-grid files (see docs/formats.md). */

import { ParseError } from "./trajectory.js";

export interface BasinGrid {
  translations: number[];
  rotations: number[];
  /** mode name -> values[rotationIndex][translationIndex], log10-mean errors */
  modes: Array<{ name: string; values: number[][] }>;
}

function parseAxis(line: string | undefined, keyword: string, name: string): number[] {
  if (line === undefined || !line.startsWith(keyword + " ")) {
    throw new ParseError(`${name}: expected a "${keyword}" line`);
  }
  const values = line.slice(keyword.length).trim().split(/\s+/).map(Number);
  if (values.length === 0 || values.some((v) => !Number.isFinite(v))) {
    throw new ParseError(`${name}: bad ${keyword} axis`);
  }
  return values;
}

export function parseBasinGrid(text: string, name = "basin"): BasinGrid {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0 && !l.startsWith("#"));
  const translations = parseAxis(lines.shift(), "translations", name);
  const rotations = parseAxis(lines.shift(), "rotations", name);
  const modes: BasinGrid["modes"] = [];
  while (lines.length > 0) {
    const header = lines.shift()!;
    const match = header.match(/^mode\s+(\S+)$/);
    if (!match) {
      throw new ParseError(`${name}: expected "mode <name>", got "${header}"`);
    }
    const values: number[][] = [];
    for (let r = 0; r < rotations.length; r++) {
      const row = lines.shift();
      if (row === undefined) {
        throw new ParseError(`${name}: mode ${match[1]}: missing row ${r + 1}`);
      }
      const cells = row.split(/\s+/).map(Number);
      if (cells.length !== translations.length || cells.some((v) => !Number.isFinite(v))) {
        throw new ParseError(
          `${name}: mode ${match[1]}: row ${r + 1} has ${cells.length} cells, ` +
            `expected ${translations.length}`
        );
      }
      values.push(cells);
    }
    modes.push({ name: match[1], values });
  }
  if (modes.length === 0) {
    throw new ParseError(`${name}: no mode blocks found`);
  }
  return { translations, rotations, modes };
}
