import assert from "node:assert/strict";
import { execFileSync, spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, statSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { test } from "node:test";
import { fileURLToPath } from "node:url";

const here = dirname(fileURLToPath(import.meta.url));
const bin = join(here, "..", "src", "main.js");
const samples = join(here, "..", "..", "samples");

test("trajectories subcommand writes a stable non-empty SVG", () => {
  const dir = mkdtempSync(join(tmpdir(), "plot-eval-"));
  const out = join(dir, "overlay.svg");
  const args = [
    bin,
    "trajectories",
    out,
    `guess=${join(samples, "trajectory_guess.txt")}`,
    `refined=${join(samples, "trajectory_refined.txt")}`,
    `gt=${join(samples, "trajectory_gt.txt")}`,
    "--caption",
    "ATE 0.052 m -> 0.0002 m",
  ];
  execFileSync("node", args);
  const first = readFileSync(out, "utf-8");
  assert.ok(statSync(out).size > 0);
  execFileSync("node", args);
  assert.equal(readFileSync(out, "utf-8"), first);
});

test("basin subcommand writes a stable non-empty SVG", () => {
  const dir = mkdtempSync(join(tmpdir(), "plot-eval-"));
  const out = join(dir, "basin.svg");
  const args = [bin, "basin", join(samples, "basin.txt"), out];
  execFileSync("node", args);
  const first = readFileSync(out, "utf-8");
  assert.ok(statSync(out).size > 0);
  execFileSync("node", args);
  assert.equal(readFileSync(out, "utf-8"), first);
});

test("unreadable input exits nonzero", () => {
  const dir = mkdtempSync(join(tmpdir(), "plot-eval-"));
  const result = spawnSync("node", [bin, "basin", join(dir, "absent.txt"), join(dir, "o.svg")]);
  assert.equal(result.status, 2);
});

test("usage errors exit nonzero", () => {
  const result = spawnSync("node", [bin, "nonsense"]);
  assert.equal(result.status, 1);
});
