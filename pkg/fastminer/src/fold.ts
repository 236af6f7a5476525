/**
 * Case folding with the exact semantics of the reference extractor:
 * full lowercase when it preserves the code-point length (the common
 * case, including context rules like final sigma), otherwise a
 * per-code-point fold that skips length-changing mappings so match
 * offsets stay valid.
 */

function codePointLength(text: string): number {
    let n = 0;
    for (let i = 0; i < text.length; i++) {
        const code = text.charCodeAt(i);
        if (code >= 0xd800 && code <= 0xdbff && i + 1 < text.length) {
            const next = text.charCodeAt(i + 1);
            if (next >= 0xdc00 && next <= 0xdfff) i++;
        }
        n++;
    }
    return n;
}

export function foldCase(text: string): string {
    const folded = text.toLowerCase();
    if (folded.length === text.length) {
        // Equal UTF-16 lengths imply equal code-point lengths here: case
        // mappings never move characters between planes.
        return folded;
    }
    if (codePointLength(folded) === codePointLength(text)) {
        return folded;
    }
    let out = "";
    for (const ch of text) {
        const low = ch.toLowerCase();
        out += codePointLength(low) === 1 ? low : ch;
    }
    return out;
}

/** Code-point index of a UTF-16 unit offset within `text`. */
export function codePointIndex(text: string, unitOffset: number): number {
    let points = 0;
    for (let i = 0; i < unitOffset; i++) {
        const code = text.charCodeAt(i);
        if (code >= 0xd800 && code <= 0xdbff && i + 1 < unitOffset) {
            const next = text.charCodeAt(i + 1);
            if (next >= 0xdc00 && next <= 0xdfff) i++;
        }
        points++;
    }
    return points;
}
