import { parentPort, workerData } from "node:worker_threads";

import { LineMatcher, scanShard } from "./scanner.js";
import { PatternSpec, ShardResult } from "./types.js";

interface WorkerInput {
    corpusPath: string;
    patterns: PatternSpec[];
    maxMatches: number;
    fileSize: number;
    shards: Array<{ index: number; start: number; end: number }>;
}

const input = workerData as WorkerInput;
const matcher = new LineMatcher(input.patterns);
const results: ShardResult[] = input.shards.map((shard) => scanShard(
    input.corpusPath, shard.index, shard.start, shard.end, input.fileSize,
    matcher, input.maxMatches));
// Candidate tuples transfer as raw buffers, no structured-clone copies.
parentPort!.postMessage(
    results, results.map((r) => r.packed.buffer as ArrayBuffer));
