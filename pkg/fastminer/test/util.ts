import * as fs from "node:fs";

/** Deterministic 32-bit PRNG so corpora are reproducible across runs. */
export function mulberry32(seed: number): () => number {
    let state = seed >>> 0;
    return () => {
        state = (state + 0x6d2b79f5) >>> 0;
        let t = state;
        t = Math.imul(t ^ (t >>> 15), t | 1);
        t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
        return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    };
}

const WORDS = ("the quick brown fox jumps over lazy dog river stone cloud " +
    "mountain valley ember harbor signal copper lantern meadow drift kindle " +
    "crystal velvet thunder whisper cobble saddle timber falcon").split(" ");

const UNICODE_WORDS = ["naïve", "Ñandú", "ÉCOLE", "über", "ΑΣΠΙΔΑ", "σοφία",
    "Москва", "İstanbul", "straße", "中文词", "🎈party", "café"];

export interface CorpusSpec {
    lines: number;
    seed: number;
    idioms: Array<{ surface: string; rate: number }>;
    unicodeRate?: number;
    invalidUtf8Rate?: number;
    longLineRate?: number;
    emptyLineRate?: number;
}

/** Build a mixed-content corpus exercising every matcher code path.
 * Writes in batches so multi-gigabyte corpora never sit in memory. */
export function generateCorpus(path: string, spec: CorpusSpec): void {
    const rng = mulberry32(spec.seed);
    const pick = (arr: string[]) => arr[Math.floor(rng() * arr.length)];
    const fd = fs.openSync(path, "w");
    let chunks: Buffer[] = [];
    let pending = 0;
    const flush = () => {
        if (chunks.length) {
            fs.writeSync(fd, Buffer.concat(chunks));
            chunks = [];
            pending = 0;
        }
    };
    for (let i = 0; i < spec.lines; i++) {
        if (rng() < (spec.emptyLineRate ?? 0.01)) {
            chunks.push(Buffer.from("\n"));
            pending += 1;
            continue;
        }
        const wordCount = rng() < (spec.longLineRate ?? 0.002)
            ? 2000 + Math.floor(rng() * 1000)
            : 4 + Math.floor(rng() * 10);
        const words: string[] = [];
        for (let w = 0; w < wordCount; w++) {
            if (rng() < (spec.unicodeRate ?? 0.02)) {
                words.push(pick(UNICODE_WORDS));
            } else {
                let word = pick(WORDS);
                if (rng() < 0.08) word = word.toUpperCase();
                else if (rng() < 0.08) {
                    word = word[0].toUpperCase() + word.slice(1);
                }
                words.push(word);
            }
        }
        for (const idiom of spec.idioms) {
            if (rng() < idiom.rate) {
                const pos = Math.floor(rng() * (words.length + 1));
                let surface = idiom.surface;
                if (rng() < 0.3) surface = surface.toUpperCase();
                words.splice(pos, 0, surface);
            }
        }
        let line = words.join(" ");
        if (rng() < 0.01) line += "\r";
        if (rng() < 0.01) line = line.replace(" ", "\t");
        let buf = Buffer.from(line + "\n", "utf-8");
        if (rng() < (spec.invalidUtf8Rate ?? 0.005)) {
            const junkPool = [[0xff], [0xfe, 0xff], [0xf0, 0x9f], [0xc3],
                              [0xed, 0xa0, 0x80], [0xc0, 0xaf]];
            const junk = Buffer.from(junkPool[Math.floor(rng() * junkPool.length)]);
            buf = Buffer.concat([junk, buf]);
        }
        chunks.push(buf);
        pending += buf.length;
        if (pending >= (1 << 22)) flush();
    }
    flush();
    fs.closeSync(fd);
}

export const STANDARD_IDIOMS = [
    { surface: "swan song", rate: 0.02 },
    { surface: "fish story", rate: 0.015 },
    { surface: "panda car", rate: 0.01 },
    { surface: "big fish", rate: 0.01 },
    { surface: "big fish story", rate: 0.005 },
    { surface: "eager beaver", rate: 0.008 },
    { surface: "chain reaction", rate: 0.008 },
    { surface: "banana republic", rate: 0.006 },
    { surface: "cold turkey", rate: 0.006 },
    { surface: "red herring", rate: 0.006 },
    { surface: "naïve ΑΣΠΙΔΑ move", rate: 0.004 },
    { surface: "über café", rate: 0.004 },
];

/** 25 patterns: the inserted idioms, word bigrams that occur naturally,
 * overlapping prefixes and a few guaranteed misses. */
export function benchmarkPatterns(): Array<{ token_name: string; surface: string;
                                             variants: string[] }> {
    const surfaces = [
        ...STANDARD_IDIOMS.map((i) => i.surface),
        "quick brown", "lazy dog", "river stone", "copper lantern",
        "thunder whisper", "brown fox", "fox jumps", "quick brown fox",
        "absent phrase one", "absent phrase two", "missing idiom",
        "velvet thunder", "signal copper",
    ];
    return surfaces.slice(0, 25).map((surface) => ({
        token_name: "idiom_" + surface.toLowerCase().replace(/[^a-z0-9]+/gu, "_"),
        surface,
        variants: surface === "swan song" ? ["swan songs"] : [],
    }));
}
