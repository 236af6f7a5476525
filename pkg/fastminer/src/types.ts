export interface PatternSpec {
    /** Canonical token name; also the output file stem. */
    token_name: string;
    surface: string;
    variants: string[];
}

export interface MinerJob {
    corpus_path: string;
    patterns: PatternSpec[];
    max_matches: number;
    output_dir: string;
    /** Shard size in bytes; memory stays proportional to this, not the corpus. */
    shard_size: number;
    workers: number;
}

/**
 * Candidate matches are packed as flat float64 tuples so worker results
 * transfer without structured-clone overhead:
 *   [entry, shardLocalLine, matchOffset, lineByteStart, lineByteLength]
 * Line text is re-read from the corpus only for the candidates that
 * survive the global cap.
 */
export const CANDIDATE_STRIDE = 5;

export interface ShardResult {
    shard: number;
    lineCount: number;
    packed: Float64Array;
}

export interface ContextRecordRow {
    mwe_token_name: string;
    text: string;
    source_file: string;
    line_number: number;
    match_offset: number;
    label: string;
}
