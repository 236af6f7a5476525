import assert from "node:assert/strict";
import { test } from "node:test";

import { AhoCorasick, Match } from "../src/ahoCorasick.js";
import { mulberry32 } from "./util.js";

function naiveMatches(text: string, patterns: string[]): Match[] {
    const out: Match[] = [];
    patterns.forEach((pattern, patternId) => {
        let from = 0;
        for (;;) {
            const at = text.indexOf(pattern, from);
            if (at < 0) break;
            out.push({ patternId, start: at, length: pattern.length });
            from = at + 1;
        }
    });
    return out.sort((a, b) => a.start - b.start || a.patternId - b.patternId);
}

function collect(automaton: AhoCorasick, text: string): Match[] {
    const out: Match[] = [];
    automaton.scanString(text, (m) => { out.push({ ...m }); return true; });
    return out.sort((a, b) => a.start - b.start || a.patternId - b.patternId);
}

test("finds overlapping and nested patterns", () => {
    const patterns = ["he", "she", "his", "hers", "s"];
    const automaton = new AhoCorasick();
    patterns.forEach((p, i) => automaton.add(p, i));
    automaton.build();
    assert.deepEqual(collect(automaton, "ushers"),
                     naiveMatches("ushers", patterns));
});

test("random strings match a naive scanner", () => {
    const rng = mulberry32(7);
    const alphabet = "abc ";
    const patterns = ["ab", "abc", "ca b", "b", "c a", "aa"];
    const automaton = new AhoCorasick();
    patterns.forEach((p, i) => automaton.add(p, i));
    automaton.build();
    for (let trial = 0; trial < 200; trial++) {
        let text = "";
        const n = 1 + Math.floor(rng() * 40);
        for (let i = 0; i < n; i++) {
            text += alphabet[Math.floor(rng() * alphabet.length)];
        }
        assert.deepEqual(collect(automaton, text), naiveMatches(text, patterns),
                         JSON.stringify(text));
    }
});

test("non-ascii patterns take the sparse transition path", () => {
    const patterns = ["αβ", "βγδ", "αβγδ"];
    const automaton = new AhoCorasick();
    patterns.forEach((p, i) => automaton.add(p, i));
    automaton.build();
    assert.deepEqual(collect(automaton, "ξαβγδω"),
                     naiveMatches("ξαβγδω", patterns));
});

test("ascii byte scan agrees with string scan and folds inline", () => {
    const patterns = ["swan song", "song"];
    const automaton = new AhoCorasick();
    patterns.forEach((p, i) => automaton.add(p, i));
    automaton.build();
    const line = "His SWAN Song rings";
    const bytes = Buffer.from(line, "utf-8");
    const fromBytes: Match[] = [];
    automaton.scanAsciiBytes(bytes, 0, bytes.length, (m) => {
        fromBytes.push({ ...m });
        return true;
    });
    const fromString = collect(automaton, line.toLowerCase());
    assert.deepEqual(
        fromBytes.sort((a, b) => a.start - b.start || a.patternId - b.patternId),
        fromString);
});
