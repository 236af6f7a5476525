import assert from "node:assert/strict";
import { execFileSync } from "node:child_process";
import * as path from "node:path";
import { test } from "node:test";
import { fileURLToPath } from "node:url";

const HERE = path.dirname(fileURLToPath(import.meta.url));

// Full-size benchmark (1 GB, 25 patterns, >= 5x the reference extractor).
// Opt in with FASTMINER_BENCH=1; the size can be overridden through
// FASTMINER_BENCH_MB for smaller machines.
test("benchmark meets the 5x speedup bar",
     { skip: process.env.FASTMINER_BENCH !== "1" }, () => {
    const sizeMb = process.env.FASTMINER_BENCH_MB ?? "1024";
    const bench = path.resolve(HERE, "../bench/bench.js");
    const out = execFileSync(process.execPath, [
        bench, "--size-mb", sizeMb, "--assert-speedup", "5",
    ], { encoding: "utf-8", stdio: ["ignore", "pipe", "inherit"] });
    assert.match(out, /outputs byte-identical: yes/);
    assert.match(out, /speedup: /);
});
