import assert from "node:assert/strict";
import { test } from "node:test";
import { parseTrajectory, ParseError } from "../src/trajectory.js";

test("parses plain pose lines", () => {
  const points = parseTrajectory("0.0 1 2 3 0 0 0 1\n0.5 4 5 6 0 0 0 1\n");
  assert.equal(points.length, 2);
  assert.deepEqual(points[0], { t: 0, x: 1, y: 2, z: 3 });
});

test("skips comments and blank lines", () => {
  const points = parseTrajectory("# header\n\n0.0 1 2 3 0 0 0 1\n");
  assert.equal(points.length, 1);
});

test("rejects malformed lines with location", () => {
  assert.throws(
    () => parseTrajectory("0.0 1 2 3 0 0 0 1\n0.5 x 2 3 0 0 0 1\n", "file"),
    (err: Error) => err instanceof ParseError && err.message.includes("file:2")
  );
});

test("rejects empty input", () => {
  assert.throws(() => parseTrajectory("# only comments\n"), ParseError);
});
