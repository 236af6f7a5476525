import { ContextRecordRow } from "./types.js";

/**
 * One line-delimited JSON record, byte-compatible with the reference
 * extractor: fixed key order, compact separators, raw non-ASCII.
 */
export function recordLine(row: ContextRecordRow): string {
    return JSON.stringify({
        mwe_token_name: row.mwe_token_name,
        text: row.text,
        source_file: row.source_file,
        line_number: row.line_number,
        match_offset: row.match_offset,
        label: row.label,
    });
}
