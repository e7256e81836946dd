/** Parsing for trajectory files: `timestamp tx ty tz qx qy qz qw` lines. */

export interface TrajectoryPoint {
  t: number;
  x: number;
  y: number;
  z: number;
}

export class ParseError extends Error {}

export function parseTrajectory(text: string, name = "trajectory"): TrajectoryPoint[] {
  const points: TrajectoryPoint[] = [];
  const lines = text.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line.length === 0 || line.startsWith("#")) {
      continue;
    }
    const fields = line.split(/\s+/).map(Number);
    if (fields.length !== 8 || fields.some((v) => !Number.isFinite(v))) {
      throw new ParseError(`${name}:${i + 1}: expected 8 numeric fields, got "${line}"`);
    }
    points.push({ t: fields[0], x: fields[1], y: fields[2], z: fields[3] });
  }
  if (points.length === 0) {
    throw new ParseError(`${name}: no poses found`);
  }
  return points;
}
