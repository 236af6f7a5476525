/**
 * Wall-clock benchmark: single-pass multi-pattern mining versus the
 * reference extractor's one-pass-per-pattern procedure, on a generated
 * corpus. Outputs must be byte-identical or the run fails.
 *
 *   node dist/bench/bench.js [--size-mb 1024] [--patterns 25]
 *                            [--workers N] [--assert-speedup 5]
 *                            [--corpus /tmp/bench.txt]
 */

import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { mine } from "../src/mine.js";
import { benchmarkPatterns, generateCorpus, STANDARD_IDIOMS } from "../test/util.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));

function shimPath(): string {
    const candidates = [
        path.resolve(HERE, "../../test/reference_extract.py"),
        path.resolve(HERE, "../test/reference_extract.py"),
    ];
    for (const candidate of candidates) {
        if (fs.existsSync(candidate)) return candidate;
    }
    throw new Error("reference shim not found");
}

interface Options {
    sizeMb: number;
    patternCount: number;
    workers: number;
    assertSpeedup: number | null;
    corpus: string | null;
}

function parse(argv: string[]): Options {
    const options: Options = {
        sizeMb: 1024, patternCount: 25,
        workers: Math.max(1, Math.min(8, os.cpus().length)),
        assertSpeedup: null, corpus: null,
    };
    for (let i = 0; i < argv.length; i++) {
        const value = () => argv[++i];
        switch (argv[i]) {
            case "--size-mb": options.sizeMb = parseInt(value(), 10); break;
            case "--patterns": options.patternCount = parseInt(value(), 10); break;
            case "--workers": options.workers = parseInt(value(), 10); break;
            case "--assert-speedup":
                options.assertSpeedup = parseFloat(value()); break;
            case "--corpus": options.corpus = value(); break;
            default: throw new Error(`unknown flag ${argv[i]}`);
        }
    }
    return options;
}

function ensureCorpus(options: Options): string {
    const target = options.corpus ??
        path.join(os.tmpdir(), `fastminer-bench-${options.sizeMb}mb.txt`);
    const wantBytes = options.sizeMb * 1024 * 1024;
    if (fs.existsSync(target) && Math.abs(fs.statSync(target).size - wantBytes)
            < wantBytes * 0.02) {
        console.log(`corpus cached: ${target}`);
        return target;
    }
    // ~70 bytes per generated line on average.
    const lines = Math.round(wantBytes / 70);
    console.log(`generating ${options.sizeMb} MB corpus (${lines} lines)...`);
    const started = Date.now();
    generateCorpus(target, {
        lines,
        seed: 20240601,
        idioms: STANDARD_IDIOMS,
        unicodeRate: 0.01,
        invalidUtf8Rate: 0.001,
        longLineRate: 0.0005,
        emptyLineRate: 0.01,
    });
    const size = fs.statSync(target).size;
    console.log(`generated ${(size / 1e6).toFixed(0)} MB in ` +
                `${((Date.now() - started) / 1000).toFixed(1)}s`);
    return target;
}

async function main(): Promise<void> {
    const options = parse(process.argv.slice(2));
    const corpus = ensureCorpus(options);
    const patterns = benchmarkPatterns().slice(0, options.patternCount);
    const scratch = fs.mkdtempSync(path.join(os.tmpdir(), "fastminer-bench-run-"));
    const patternsPath = path.join(scratch, "patterns.json");
    fs.writeFileSync(patternsPath, JSON.stringify(patterns));

    const referenceDir = path.join(scratch, "reference");
    console.log(`reference extractor: ${patterns.length} patterns, one pass each`);
    const refStart = Date.now();
    execFileSync("python3", [shimPath(), corpus, patternsPath, referenceDir,
                             "250"], { stdio: "inherit" });
    const refSeconds = (Date.now() - refStart) / 1000;
    console.log(`reference: ${refSeconds.toFixed(1)}s`);

    const minedDir = path.join(scratch, "mined");
    console.log(`fastminer: single pass, ${options.workers} workers`);
    const mineStart = Date.now();
    await mine({
        corpus_path: corpus,
        patterns,
        max_matches: 250,
        output_dir: minedDir,
        workers: options.workers,
    });
    const mineSeconds = (Date.now() - mineStart) / 1000;
    console.log(`fastminer: ${mineSeconds.toFixed(1)}s`);

    for (const pattern of patterns) {
        const produced = fs.readFileSync(
            path.join(minedDir, `${pattern.token_name}.jsonl`));
        const expected = fs.readFileSync(
            path.join(referenceDir, `${pattern.token_name}.jsonl`));
        if (!produced.equals(expected)) {
            throw new Error(`output mismatch for ${pattern.token_name}`);
        }
    }
    console.log("outputs byte-identical: yes");
    const speedup = refSeconds / mineSeconds;
    console.log(`speedup: ${speedup.toFixed(1)}x`);
    if (options.assertSpeedup !== null && speedup < options.assertSpeedup) {
        console.error(`FAIL: speedup ${speedup.toFixed(1)}x < ` +
                      `${options.assertSpeedup}x`);
        process.exit(1);
    }
}

main().catch((error) => {
    console.error(error);
    process.exit(1);
});
