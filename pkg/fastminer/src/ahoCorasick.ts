/**
 * Aho-Corasick automaton over UTF-16 code units of case-folded text.
 *
 * Transitions for code units below 128 live in one flat Int32Array
 * (node * 128 + unit), the hot path for ASCII corpora; other units fall
 * back to per-node Maps. Failure links are resolved into goto links at
 * build time so scans never walk failure chains.
 */

const ASCII = 128;

export interface Match {
    patternId: number;
    /** UTF-16 unit offset of the match start. */
    start: number;
    /** Pattern length in UTF-16 units. */
    length: number;
}

export class AhoCorasick {
    /** Flat goto table, node * 128 + unit. Public for fused scan loops. */
    dense = new Int32Array(ASCII).fill(-1);
    /** Pattern ids terminating at each node; null for pass-through nodes. */
    outputs: (number[] | null)[] = [null];
    /**
     * Scan-time goto table with premultiplied node ids: the value at
     * (node + unit) is nextNode * 128, negated when nextNode emits a
     * pattern. One load plus a sign test per byte, no second lookup.
     */
    packed = new Int32Array(0);
    patternLengths: number[] = [];
    private nodeCount = 1;
    private sparse: (Map<number, number> | null)[] = [null];
    private fail: number[] = [0];
    private built = false;

    private addNode(): number {
        const node = this.nodeCount++;
        if (node * ASCII >= this.dense.length) {
            const grown = new Int32Array(this.dense.length * 2);
            grown.set(this.dense);
            grown.fill(-1, this.dense.length);
            this.dense = grown;
        } else {
            this.dense.fill(-1, node * ASCII, (node + 1) * ASCII);
        }
        this.sparse.push(null);
        this.fail.push(0);
        this.outputs.push(null);
        return node;
    }

    add(pattern: string, patternId: number): void {
        if (this.built) throw new Error("automaton already built");
        if (pattern.length === 0) throw new Error("empty pattern");
        let node = 0;
        for (let i = 0; i < pattern.length; i++) {
            const unit = pattern.charCodeAt(i);
            let next = this.step(node, unit);
            if (next < 0) {
                next = this.addNode();
                this.link(node, unit, next);
            }
            node = next;
        }
        (this.outputs[node] ??= []).push(patternId);
        this.patternLengths[patternId] = pattern.length;
    }

    private step(node: number, unit: number): number {
        if (unit < ASCII) return this.dense[node * ASCII + unit];
        const map = this.sparse[node];
        if (!map) return -1;
        const next = map.get(unit);
        return next === undefined ? -1 : next;
    }

    private link(node: number, unit: number, target: number): void {
        if (unit < ASCII) {
            this.dense[node * ASCII + unit] = target;
            return;
        }
        (this.sparse[node] ??= new Map()).set(unit, target);
    }

    build(): void {
        if (this.built) return;
        const queue: number[] = [];
        for (let unit = 0; unit < ASCII; unit++) {
            const next = this.dense[unit];
            if (next >= 0) {
                this.fail[next] = 0;
                queue.push(next);
            } else {
                this.dense[unit] = 0;
            }
        }
        if (this.sparse[0]) {
            for (const next of this.sparse[0]!.values()) {
                this.fail[next] = 0;
                queue.push(next);
            }
        }
        let head = 0;
        while (head < queue.length) {
            const node = queue[head++];
            const failNode = this.fail[node];
            const inherited = this.outputs[failNode];
            if (inherited) {
                (this.outputs[node] ??= []).push(...inherited);
            }
            for (let unit = 0; unit < ASCII; unit++) {
                const next = this.dense[node * ASCII + unit];
                if (next >= 0) {
                    this.fail[next] = this.dense[failNode * ASCII + unit];
                    queue.push(next);
                } else {
                    this.dense[node * ASCII + unit] =
                        this.dense[failNode * ASCII + unit];
                }
            }
            const map = this.sparse[node];
            if (map) {
                for (const [unit, next] of map) {
                    this.fail[next] = this.resolved(failNode, unit);
                    queue.push(next);
                }
            }
        }
        this.packed = new Int32Array(this.nodeCount * ASCII);
        for (let node = 0; node < this.nodeCount; node++) {
            for (let unit = 0; unit < ASCII; unit++) {
                const target = this.dense[node * ASCII + unit];
                const emitting = this.outputs[target] !== null;
                this.packed[node * ASCII + unit] =
                    emitting ? -(target * ASCII) : target * ASCII;
            }
        }
        this.built = true;
    }

    /** Goto-resolved transition for non-ASCII units (post-build). */
    resolved(node: number, unit: number): number {
        let current = node;
        for (;;) {
            const map = this.sparse[current];
            const next = map ? map.get(unit) : undefined;
            if (next !== undefined) return next;
            if (current === 0) return 0;
            current = this.fail[current];
        }
    }

    /** Scan a folded string, invoking onMatch for every pattern hit. */
    scanString(text: string, onMatch: (m: Match) => void): void {
        const packed = this.packed;
        const outputs = this.outputs;
        let node = 0;  // premultiplied node id
        for (let i = 0; i < text.length; i++) {
            const unit = text.charCodeAt(i);
            if (unit < ASCII) {
                node = packed[node + unit];
                if (node >= 0) continue;
                node = -node;
            } else {
                const nodeId = this.resolved(node >> 7, unit);
                node = nodeId * ASCII;
                if (outputs[nodeId] === null) continue;
            }
            const out = outputs[node >> 7]!;
            for (let k = 0; k < out.length; k++) {
                const patternId = out[k];
                const length = this.patternLengths[patternId];
                onMatch({ patternId, start: i - length + 1, length });
            }
        }
    }

    /**
     * Scan raw line bytes with inline A-Z folding. Returns false without
     * reporting anything further if a non-ASCII byte is hit; the caller
     * then rescans the line on the string path. Offsets are line-relative
     * byte offsets (equal to code points for ASCII).
     */
    scanAsciiBytes(bytes: Uint8Array, start: number, end: number,
                   onMatch: (m: Match) => void): boolean {
        const packed = this.packed;
        const outputs = this.outputs;
        let node = 0;  // premultiplied node id
        for (let i = start; i < end; i++) {
            let unit = bytes[i];
            if (unit >= 0x80) return false;
            if (unit >= 65 && unit <= 90) unit += 32;
            node = packed[node + unit];
            if (node >= 0) continue;
            node = -node;
            const out = outputs[node >> 7]!;
            for (let k = 0; k < out.length; k++) {
                const patternId = out[k];
                const length = this.patternLengths[patternId];
                onMatch({ patternId, start: i - start - length + 1, length });
            }
        }
        return true;
    }
}
