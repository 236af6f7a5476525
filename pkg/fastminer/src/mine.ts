import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { Worker } from "node:worker_threads";

import { recordLine } from "./jsonLine.js";
import { LineMatcher, scanShard } from "./scanner.js";
import { CANDIDATE_STRIDE, MinerJob, PatternSpec, ShardResult } from "./types.js";

export const DEFAULT_SHARD_SIZE = 8 * 1024 * 1024;

export interface MineSummary {
    counts: Record<string, number>;
    warnings: string[];
    shards: number;
    lines: number;
    outputFiles: Record<string, string>;
}

export function normalizeJob(raw: Partial<MinerJob>): MinerJob {
    if (!raw.corpus_path) throw new Error("corpus_path is required");
    if (!raw.output_dir) throw new Error("output_dir is required");
    if (!raw.patterns || raw.patterns.length === 0) {
        throw new Error("patterns must be non-empty");
    }
    const maxMatches = raw.max_matches ?? 250;
    if (maxMatches < 1) throw new Error("max_matches must be >= 1");
    const job: MinerJob = {
        corpus_path: raw.corpus_path,
        patterns: raw.patterns.map((p) => ({
            token_name: p.token_name,
            surface: p.surface,
            variants: p.variants ?? [],
        })),
        max_matches: maxMatches,
        output_dir: raw.output_dir,
        shard_size: raw.shard_size ?? DEFAULT_SHARD_SIZE,
        workers: raw.workers ?? Math.max(1, Math.min(8, os.cpus().length)),
    };
    if (job.shard_size < 1) throw new Error("shard_size must be >= 1");
    if (job.workers < 1) throw new Error("workers must be >= 1");
    const names = new Set(job.patterns.map((p) => p.token_name));
    if (names.size !== job.patterns.length) {
        throw new Error("duplicate token_name in patterns");
    }
    return job;
}

export function planShards(fileSize: number, shardSize: number):
        Array<{ start: number; end: number }> {
    if (fileSize === 0) return [];
    const shards = [];
    for (let start = 0; start < fileSize; start += shardSize) {
        shards.push({ start, end: Math.min(start + shardSize, fileSize) });
    }
    return shards;
}

async function runWorkers(job: MinerJob, fileSize: number,
                          shards: Array<{ start: number; end: number }>):
        Promise<ShardResult[]> {
    const workerCount = Math.min(job.workers, shards.length);
    if (workerCount <= 1) {
        const matcher = new LineMatcher(job.patterns);
        return shards.map((shard, index) => scanShard(
            job.corpus_path, index, shard.start, shard.end, fileSize,
            matcher, job.max_matches));
    }
    const assignments: number[][] = Array.from({ length: workerCount }, () => []);
    shards.forEach((_, index) => {
        assignments[index % workerCount].push(index);
    });
    const workerUrl = new URL("./worker.js", import.meta.url);
    const tasks = assignments.map((shardIndexes) =>
        new Promise<ShardResult[]>((resolve, reject) => {
            const worker = new Worker(workerUrl, {
                workerData: {
                    corpusPath: job.corpus_path,
                    patterns: job.patterns,
                    maxMatches: job.max_matches,
                    fileSize,
                    shards: shardIndexes.map((i) => ({
                        index: i, start: shards[i].start, end: shards[i].end,
                    })),
                },
            });
            worker.once("message", (results: ShardResult[]) => resolve(results));
            worker.once("error", reject);
            worker.once("exit", (code) => {
                if (code !== 0) reject(new Error(`worker exited with ${code}`));
            });
        }));
    const nested = await Promise.all(tasks);
    return nested.flat().sort((a, b) => a.shard - b.shard);
}

function writeAtomic(target: string, data: string): void {
    const tmp = `${target}.tmp-${process.pid}-${Math.floor(Math.random() * 1e9)}`;
    fs.writeFileSync(tmp, data, { encoding: "utf-8" });
    fs.renameSync(tmp, target);
}

/**
 * Mine every pattern in one streaming pass and write per-pattern
 * context-set files that are byte-identical to the reference extractor.
 *
 * Shards are scanned independently (optionally on worker threads) with
 * shard-local line numbers; the merge step restores global file order
 * via prefix sums before the match cap is applied, so output never
 * depends on shard size or worker count.
 */
export async function mine(rawJob: Partial<MinerJob>): Promise<MineSummary> {
    const job = normalizeJob(rawJob);
    const fileSize = fs.statSync(job.corpus_path).size;
    fs.mkdirSync(job.output_dir, { recursive: true });
    const shards = planShards(fileSize, job.shard_size);
    const results = await runWorkers(job, fileSize, shards);

    const lineOffsets: number[] = [0];
    for (const result of results) {
        lineOffsets.push(lineOffsets[lineOffsets.length - 1] + result.lineCount);
    }
    const sourceFile = path.basename(job.corpus_path);
    const decoder = new TextDecoder("utf-8", { fatal: false });
    const perEntry: string[][] = job.patterns.map(() => []);
    const corpusFd = fs.openSync(job.corpus_path, "r");
    try {
        for (const result of results) {
            const base = lineOffsets[result.shard];
            const packed = result.packed;
            for (let at = 0; at < packed.length; at += CANDIDATE_STRIDE) {
                const entry = packed[at];
                const rows = perEntry[entry];
                if (rows.length >= job.max_matches) continue;
                // Only globally surviving candidates pay for line I/O.
                const byteLength = packed[at + 4];
                const text = Buffer.allocUnsafe(byteLength);
                fs.readSync(corpusFd, text, 0, byteLength, packed[at + 3]);
                rows.push(recordLine({
                    mwe_token_name: job.patterns[entry].token_name,
                    text: decoder.decode(text),
                    source_file: sourceFile,
                    line_number: base + packed[at + 1],
                    match_offset: packed[at + 2],
                    label: "unreviewed",
                }));
            }
        }
    } finally {
        fs.closeSync(corpusFd);
    }

    const summary: MineSummary = {
        counts: {},
        warnings: [],
        shards: shards.length,
        lines: lineOffsets[lineOffsets.length - 1],
        outputFiles: {},
    };
    job.patterns.forEach((pattern, entry) => {
        const rows = perEntry[entry];
        const target = path.join(job.output_dir, `${pattern.token_name}.jsonl`);
        writeAtomic(target, rows.length ? rows.join("\n") + "\n" : "");
        summary.counts[pattern.token_name] = rows.length;
        summary.outputFiles[pattern.token_name] = target;
        if (rows.length === 0) {
            summary.warnings.push(
                `${pattern.token_name}: zero matches in ${sourceFile}`);
        }
    });
    const logPath = path.join(job.output_dir, "mine_log.json");
    writeAtomic(logPath, JSON.stringify({
        corpus: sourceFile,
        max_matches: job.max_matches,
        shard_size: job.shard_size,
        workers: job.workers,
        shards: summary.shards,
        lines: summary.lines,
        counts: summary.counts,
        warnings: summary.warnings,
    }, null, 2) + "\n");
    return summary;
}

export function patternsFromRegistry(registryJson: string): PatternSpec[] {
    const rows = JSON.parse(registryJson) as Array<Record<string, unknown>>;
    return rows.map((row) => ({
        token_name: String(row.token_name),
        surface: String(row.surface),
        variants: (row.variants as string[] | undefined) ?? [],
    }));
}
