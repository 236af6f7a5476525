import assert from "node:assert/strict";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { test } from "node:test";
import { fileURLToPath } from "node:url";

import { mine, normalizeJob, planShards } from "../src/mine.js";
import { generateCorpus, STANDARD_IDIOMS } from "./util.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const PRIMARY_FIXTURES = path.resolve(HERE, "../../../tests/fixtures");

function tmpdir(): string {
    return fs.mkdtempSync(path.join(os.tmpdir(), "fastminer-"));
}

const FIXTURE_PATTERNS = [
    { token_name: "idiom_swan_song", surface: "swan song", variants: [] },
    { token_name: "idiom_fish_story", surface: "fish story", variants: [] },
    { token_name: "idiom_panda_car", surface: "panda car", variants: [] },
];

test("fixture corpus output is byte-identical to the committed goldens",
     async () => {
    const out = tmpdir();
    await mine({
        corpus_path: path.join(PRIMARY_FIXTURES, "corpus_main.txt"),
        patterns: FIXTURE_PATTERNS,
        max_matches: 250,
        output_dir: out,
        workers: 1,
    });
    for (const pattern of FIXTURE_PATTERNS) {
        const produced = fs.readFileSync(
            path.join(out, `${pattern.token_name}.jsonl`));
        const golden = fs.readFileSync(
            path.join(PRIMARY_FIXTURES, "golden", `${pattern.token_name}.jsonl`));
        assert.ok(produced.equals(golden), pattern.token_name);
    }
});

test("250-cap corpus matches its golden byte for byte", async () => {
    const out = tmpdir();
    await mine({
        corpus_path: path.join(PRIMARY_FIXTURES, "corpus_cap.txt"),
        patterns: [FIXTURE_PATTERNS[2]],
        max_matches: 250,
        output_dir: out,
        shard_size: 512,  // force many shards straddling lines
        workers: 4,
    });
    const produced = fs.readFileSync(path.join(out, "idiom_panda_car.jsonl"));
    const golden = fs.readFileSync(
        path.join(PRIMARY_FIXTURES, "golden", "cap_idiom_panda_car.jsonl"));
    assert.ok(produced.equals(golden));
});

test("output is invariant to worker count and shard size", async () => {
    const corpus = path.join(tmpdir(), "corpus.txt");
    generateCorpus(corpus, { lines: 4000, seed: 99, idioms: STANDARD_IDIOMS });
    const runs: Record<string, Buffer[]> = {};
    for (const [workers, shardSize] of [[1, 1 << 20], [4, 4096], [8, 977]] as const) {
        const out = tmpdir();
        await mine({
            corpus_path: corpus,
            patterns: FIXTURE_PATTERNS,
            max_matches: 100,
            output_dir: out,
            shard_size: shardSize,
            workers,
        });
        runs[`${workers}/${shardSize}`] = FIXTURE_PATTERNS.map((p) =>
            fs.readFileSync(path.join(out, `${p.token_name}.jsonl`)));
    }
    const keys = Object.keys(runs);
    for (let i = 1; i < keys.length; i++) {
        runs[keys[0]].forEach((buf, j) => {
            assert.ok(buf.equals(runs[keys[i]][j]),
                      `${keys[i]} differs on ${FIXTURE_PATTERNS[j].token_name}`);
        });
    }
});

test("zero matches produce an empty file and a logged warning", async () => {
    const out = tmpdir();
    const summary = await mine({
        corpus_path: path.join(PRIMARY_FIXTURES, "corpus_main.txt"),
        patterns: [{ token_name: "idiom_purple_cow", surface: "purple cow",
                     variants: [] }],
        max_matches: 250,
        output_dir: out,
        workers: 1,
    });
    assert.equal(summary.counts.idiom_purple_cow, 0);
    assert.equal(fs.readFileSync(path.join(out, "idiom_purple_cow.jsonl"),
                                 "utf-8"), "");
    assert.equal(summary.warnings.length, 1);
    const log = JSON.parse(fs.readFileSync(path.join(out, "mine_log.json"),
                                           "utf-8"));
    assert.equal(log.warnings.length, 1);
});

test("empty corpus yields empty outputs", async () => {
    const dir = tmpdir();
    const corpus = path.join(dir, "empty.txt");
    fs.writeFileSync(corpus, "");
    const summary = await mine({
        corpus_path: corpus,
        patterns: FIXTURE_PATTERNS,
        output_dir: path.join(dir, "out"),
        workers: 4,
    });
    assert.equal(summary.lines, 0);
    assert.deepEqual(Object.values(summary.counts), [0, 0, 0]);
});

test("file without trailing newline keeps its final line", async () => {
    const dir = tmpdir();
    const corpus = path.join(dir, "no-newline.txt");
    fs.writeFileSync(corpus, "first swan song line\nlast swan song");
    const out = path.join(dir, "out");
    await mine({
        corpus_path: corpus,
        patterns: [FIXTURE_PATTERNS[0]],
        output_dir: out,
        shard_size: 8,
        workers: 1,
    });
    const rows = fs.readFileSync(path.join(out, "idiom_swan_song.jsonl"),
                                 "utf-8").trim().split("\n").map(
        (line) => JSON.parse(line));
    assert.equal(rows.length, 2);
    assert.deepEqual(rows.map((r) => r.line_number), [1, 2]);
    assert.equal(rows[1].text, "last swan song");
});

test("variants match and the earliest occurrence wins", async () => {
    const dir = tmpdir();
    const corpus = path.join(dir, "variants.txt");
    fs.writeFileSync(corpus,
        "their swan songs echoed\n" +
        "plain swan song here\n" +
        "swan songs then swan song\n");
    const out = path.join(dir, "out");
    await mine({
        corpus_path: corpus,
        patterns: [{ token_name: "idiom_swan_song", surface: "swan song",
                     variants: ["swan songs"] }],
        output_dir: out,
        workers: 1,
    });
    const rows = fs.readFileSync(path.join(out, "idiom_swan_song.jsonl"),
                                 "utf-8").trim().split("\n").map(
        (line) => JSON.parse(line));
    assert.equal(rows.length, 3);
    assert.deepEqual(rows.map((r) => r.match_offset), [6, 6, 0]);
});

test("job validation rejects bad inputs", () => {
    assert.throws(() => normalizeJob({ output_dir: "x", patterns: [] }));
    assert.throws(() => normalizeJob({
        corpus_path: "c", output_dir: "x",
        patterns: [{ token_name: "a", surface: "s t", variants: [] },
                   { token_name: "a", surface: "u v", variants: [] }],
    }), /duplicate/);
    assert.throws(() => normalizeJob({
        corpus_path: "c", output_dir: "x", max_matches: 0,
        patterns: [{ token_name: "a", surface: "s t", variants: [] }],
    }), /max_matches/);
});

test("shard planning covers the file exactly", () => {
    assert.deepEqual(planShards(0, 10), []);
    const shards = planShards(25, 10);
    assert.deepEqual(shards, [
        { start: 0, end: 10 }, { start: 10, end: 20 }, { start: 20, end: 25 },
    ]);
});
