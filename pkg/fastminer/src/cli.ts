#!/usr/bin/env node
import * as fs from "node:fs";

import { mine, patternsFromRegistry } from "./mine.js";
import { MinerJob } from "./types.js";

const USAGE = `fastminer - streaming multi-pattern context miner

Usage:
  fastminer --job job.json [overrides]
  fastminer --corpus-path corpus.txt --patterns registry.json \\
            --output-dir out/ [--max-matches 250] [--shard-size BYTES] \\
            [--workers N]

Flags mirror the job file fields. --patterns accepts either a registry
file ([{surface, language, variants, token_name}, ...]) or a plain
pattern list ([{token_name, surface, variants}, ...]).`;

function parseArgs(argv: string[]): Partial<MinerJob> {
    const job: Partial<MinerJob> = {};
    let i = 0;
    const next = (flag: string): string => {
        i += 1;
        if (i >= argv.length) throw new Error(`missing value for ${flag}`);
        return argv[i];
    };
    for (; i < argv.length; i++) {
        const flag = argv[i];
        switch (flag) {
            case "--job": {
                const parsed = JSON.parse(fs.readFileSync(next(flag), "utf-8"));
                Object.assign(job, parsed);
                break;
            }
            case "--corpus-path":
                job.corpus_path = next(flag);
                break;
            case "--patterns":
                job.patterns = patternsFromRegistry(
                    fs.readFileSync(next(flag), "utf-8"));
                break;
            case "--output-dir":
                job.output_dir = next(flag);
                break;
            case "--max-matches":
                job.max_matches = parseInt(next(flag), 10);
                break;
            case "--shard-size":
                job.shard_size = parseInt(next(flag), 10);
                break;
            case "--workers":
                job.workers = parseInt(next(flag), 10);
                break;
            case "--help":
            case "-h":
                console.log(USAGE);
                process.exit(0);
                break;
            default:
                throw new Error(`unknown flag: ${flag}`);
        }
    }
    return job;
}

async function main(): Promise<void> {
    let job: Partial<MinerJob>;
    try {
        job = parseArgs(process.argv.slice(2));
    } catch (error) {
        console.error(`error: ${(error as Error).message}`);
        console.error(USAGE);
        process.exit(2);
        return;
    }
    try {
        const summary = await mine(job);
        for (const [name, count] of Object.entries(summary.counts)) {
            console.log(`${name}: ${count} contexts -> ${summary.outputFiles[name]}`);
        }
        for (const warning of summary.warnings) {
            console.error(`warning: ${warning}`);
        }
    } catch (error) {
        console.error(`error: ${(error as Error).message}`);
        process.exit(1);
    }
}

main();
