import * as fs from "node:fs";

import { AhoCorasick } from "./ahoCorasick.js";
import { codePointIndex, foldCase } from "./fold.js";
import { PatternSpec, ShardResult } from "./types.js";

const NEWLINE = 0x0a;
const SPACE = 0x20;
const ASCII_SHIFT = 7;
const CHUNK = 1 << 20;
const OVERRUN_CHUNK = 1 << 16;

const decoder = new TextDecoder("utf-8", { fatal: false });

interface RegionOutcome {
    /** Buffer offset up to which lines were fully processed. */
    consumed: number;
    /** Complete lines processed. */
    lines: number;
    /** True when the next line would start at or past the shard end. */
    stopped: boolean;
}

/** Per-matching-line sink; hits are read off the matcher's scratch. */
type EmitLine = (lineStart: number, lineEnd: number, lineIndex: number,
                 ascii: boolean, decoded: string | null) => void;

/**
 * Multi-pattern matcher reproducing the reference extractor's line
 * semantics: a line matches an entry at the first occurrence of any of
 * its folded patterns sitting at the line start or right after a space;
 * ties at one offset prefer the longest pattern, then the earliest-
 * listed one.
 *
 * The hot path is a single fused loop over raw bytes: newlines drive the
 * line bookkeeping, A-Z fold inline, and the automaton's flat goto table
 * does one lookup per byte. Lines containing non-ASCII bytes are
 * rescanned through decode + length-preserving fold; if any pattern is
 * non-ASCII every line takes that path. No allocations happen for lines
 * without matches.
 */
export class LineMatcher {
    /** Automaton over the ASCII-only patterns, driven directly by bytes.
     * Non-ASCII patterns can never match a pure-ASCII line, so the byte
     * path loses nothing by skipping them. */
    private byteAutomaton = new AhoCorasick();
    /** Automaton over every pattern, for lines that need decoding. */
    private fullAutomaton = new AhoCorasick();
    private metaEntry: Int32Array;
    private metaLength: Int32Array;
    readonly entryCount: number;

    /** Entries hit on the current line (valid during an emit callback). */
    hitEntries: number[] = [];
    private bestPattern: Int32Array;
    private bestStart: Int32Array;

    constructor(patterns: PatternSpec[]) {
        this.entryCount = patterns.length;
        const entryOf: number[] = [];
        const lengthOf: number[] = [];
        patterns.forEach((spec, entry) => {
            for (const raw of [spec.surface, ...spec.variants]) {
                const pattern = foldCase(raw);
                if (pattern.length === 0) continue;
                const patternId = entryOf.length;
                entryOf.push(entry);
                lengthOf.push(pattern.length);
                this.fullAutomaton.add(pattern, patternId);
                let ascii = true;
                for (let i = 0; i < pattern.length; i++) {
                    if (pattern.charCodeAt(i) >= 128) { ascii = false; break; }
                }
                if (ascii) this.byteAutomaton.add(pattern, patternId);
            }
        });
        this.metaEntry = Int32Array.from(entryOf);
        this.metaLength = Int32Array.from(lengthOf);
        this.byteAutomaton.build();
        this.fullAutomaton.build();
        this.bestPattern = new Int32Array(this.entryCount).fill(-1);
        this.bestStart = new Int32Array(this.entryCount);
    }

    bestStartOf(entry: number): number {
        return this.bestStart[entry];
    }

    private consider(patternId: number, relStart: number,
                     counts: Int32Array, maxMatches: number): void {
        const entry = this.metaEntry[patternId];
        if (counts[entry] >= maxMatches) return;
        const currentPattern = this.bestPattern[entry];
        if (currentPattern < 0) {
            this.bestPattern[entry] = patternId;
            this.bestStart[entry] = relStart;
            this.hitEntries.push(entry);
            return;
        }
        const currentStart = this.bestStart[entry];
        if (relStart > currentStart) return;
        if (relStart === currentStart) {
            const length = this.metaLength[patternId];
            const currentLength = this.metaLength[currentPattern];
            if (length < currentLength) return;
            if (length === currentLength && patternId >= currentPattern) return;
        }
        this.bestPattern[entry] = patternId;
        this.bestStart[entry] = relStart;
    }

    private resetHits(): void {
        for (const entry of this.hitEntries) this.bestPattern[entry] = -1;
        this.hitEntries.length = 0;
    }

    /** Decode + fold + scan one line; fills the hit scratch. */
    private scanStringLine(bytes: Uint8Array, lineStart: number,
                           lineEnd: number, counts: Int32Array,
                           maxMatches: number): string {
        const decoded = decoder.decode(bytes.subarray(lineStart, lineEnd));
        const folded = foldCase(decoded);
        this.fullAutomaton.scanString(folded, (m) => {
            if (m.start === 0 ||
                    (m.start > 0 && folded.charCodeAt(m.start - 1) === SPACE)) {
                this.consider(m.patternId, m.start, counts, maxMatches);
            }
        });
        return decoded;
    }

    /**
     * Process every complete line of buffer[start, regionEnd). When
     * `final` is set the trailing bytes form the file's last line. Stops
     * early once the next line would start at or past shardEnd (file
     * offsets: bufferFileOffset + buffer index).
     */
    scanRegion(bytes: Uint8Array, start: number, regionEnd: number,
               bufferFileOffset: number, shardEnd: number, final: boolean,
               counts: Int32Array, maxMatches: number,
               emit: EmitLine): RegionOutcome {
        const automaton = this.byteAutomaton;
        const packed = automaton.packed;
        const outputs = automaton.outputs;
        const patternLengths = automaton.patternLengths;
        let node = 0;  // premultiplied node id
        let lineStart = start;
        let lines = 0;
        let i = start;
        while (i < regionEnd) {
            const byte = bytes[i];
            if (byte === NEWLINE) {
                if (this.hitEntries.length) {
                    emit(lineStart, i, lines, true, null);
                    this.resetHits();
                }
                lines += 1;
                node = 0;
                lineStart = i + 1;
                if (bufferFileOffset + lineStart >= shardEnd) {
                    return { consumed: lineStart, lines, stopped: true };
                }
                i += 1;
                continue;
            }
            if (byte >= 0x80) {
                // Non-ASCII line: restart it on the decode + fold path.
                this.resetHits();
                let lineEnd = bytes.indexOf(NEWLINE, i);
                if (lineEnd < 0 || lineEnd >= regionEnd) {
                    if (!final) {
                        // Caller guaranteed complete lines unless final.
                        return { consumed: lineStart, lines, stopped: false };
                    }
                    lineEnd = regionEnd;
                }
                const decoded = this.scanStringLine(bytes, lineStart, lineEnd,
                                                    counts, maxMatches);
                if (this.hitEntries.length) {
                    emit(lineStart, lineEnd, lines, false, decoded);
                    this.resetHits();
                }
                lines += 1;
                node = 0;
                lineStart = lineEnd + 1;
                if (lineEnd === regionEnd) {
                    return { consumed: regionEnd, lines, stopped: false };
                }
                if (bufferFileOffset + lineStart >= shardEnd) {
                    return { consumed: lineStart, lines, stopped: true };
                }
                i = lineStart;
                continue;
            }
            let unit = byte;
            if (unit >= 65 && unit <= 90) unit += 32;
            node = packed[node + unit];
            if (node < 0) {
                node = -node;
                const out = outputs[node >> ASCII_SHIFT]!;
                for (let k = 0; k < out.length; k++) {
                    const patternId = out[k];
                    const abs = i - patternLengths[patternId] + 1;
                    if (abs === lineStart ||
                            (abs > lineStart && bytes[abs - 1] === SPACE)) {
                        this.consider(patternId, abs - lineStart, counts,
                                      maxMatches);
                    }
                }
            }
            i += 1;
        }
        if (final && lineStart < regionEnd) {
            // Last line of the file, no trailing newline; already scanned.
            if (this.hitEntries.length) {
                emit(lineStart, regionEnd, lines, true, null);
                this.resetHits();
            }
            lines += 1;
            return { consumed: regionEnd, lines, stopped: false };
        }
        this.resetHits();
        return { consumed: lineStart, lines, stopped: false };
    }
}

/**
 * Scan the shard of `path` whose lines start inside [shardStart,
 * shardEnd). Reads past shardEnd only to finish the final owned line.
 * Line numbers are shard-local; the merge step restores global order.
 */
export function scanShard(path: string, shardIndex: number, shardStart: number,
                          shardEnd: number, fileSize: number,
                          matcher: LineMatcher, maxMatches: number): ShardResult {
    const fd = fs.openSync(path, "r");
    try {
        return scanShardFd(fd, shardIndex, shardStart, shardEnd, fileSize,
                           matcher, maxMatches);
    } finally {
        fs.closeSync(fd);
    }
}

function scanShardFd(fd: number, shardIndex: number, shardStart: number,
                     shardEnd: number, fileSize: number, matcher: LineMatcher,
                     maxMatches: number): ShardResult {
    const tuples: number[] = [];
    const perEntry = new Int32Array(matcher.entryCount);
    let lineCount = 0;

    // Start one byte early: a newline exactly at shardStart-1 means the
    // line beginning at shardStart belongs to this shard.
    let readPos = shardStart === 0 ? 0 : shardStart - 1;
    let buffer: Buffer = Buffer.alloc(0);
    let bufferFileOffset = readPos;
    let cursor = 0;
    let eof = readPos >= fileSize;

    const fill = (): boolean => {
        if (eof) return false;
        // Past the shard boundary, read small steps: only the final owned
        // line needs finishing, not the next shard's chunk.
        const step = readPos >= shardEnd ? OVERRUN_CHUNK : CHUNK;
        const want = Math.min(step, fileSize - readPos);
        if (want <= 0) { eof = true; return false; }
        const fresh = Buffer.allocUnsafe(want);
        const got = fs.readSync(fd, fresh, 0, want, readPos);
        if (got <= 0) { eof = true; return false; }
        readPos += got;
        if (cursor > 0) {
            buffer = buffer.subarray(cursor);
            bufferFileOffset += cursor;
            cursor = 0;
        }
        buffer = buffer.length === 0 ? fresh.subarray(0, got)
            : Buffer.concat([buffer, fresh.subarray(0, got)]);
        if (readPos >= fileSize) eof = true;
        return true;
    };

    if (shardStart > 0) {
        let found: number;
        for (;;) {
            found = buffer.indexOf(NEWLINE, cursor);
            if (found >= 0) break;
            if (!fill()) {
                return { shard: shardIndex, lineCount: 0,
                         packed: new Float64Array(0) };
            }
        }
        cursor = found + 1;
    }

    for (;;) {
        const lineStartInFile = bufferFileOffset + cursor;
        if (lineStartInFile >= shardEnd || lineStartInFile >= fileSize) break;
        // Ensure the buffer holds at least one complete line (or EOF).
        let lastNewline = buffer.lastIndexOf(NEWLINE);
        while (lastNewline < cursor && !eof) {
            fill();
            lastNewline = buffer.lastIndexOf(NEWLINE);
        }
        const final = lastNewline < cursor;
        const regionEnd = final ? buffer.length : lastNewline + 1;
        if (regionEnd <= cursor) break;
        const base = lineCount;
        const outcome = matcher.scanRegion(
            buffer, cursor, regionEnd, bufferFileOffset, shardEnd, final,
            perEntry, maxMatches,
            (lineStart, lineEnd, lineIndex, ascii, decoded) => {
                for (const entry of matcher.hitEntries) {
                    perEntry[entry] += 1;
                    const unitStart = matcher.bestStartOf(entry);
                    const offset = ascii ? unitStart : codePointIndex(
                        decoded ?? decoder.decode(
                            buffer.subarray(lineStart, lineEnd)), unitStart);
                    tuples.push(entry, base + lineIndex + 1, offset,
                                bufferFileOffset + lineStart,
                                lineEnd - lineStart);
                }
            });
        lineCount += outcome.lines;
        cursor = outcome.consumed;
        if (outcome.stopped || final) break;
    }
    return { shard: shardIndex, lineCount, packed: Float64Array.from(tuples) };
}
