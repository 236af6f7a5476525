"""Reference context mining and the manual-curation workflow.

`extract_contexts` reproduces the semantics of the grep retrieval the
embeddings are built from: case-insensitive, a space (or line start)
before the expression, whole lines, first `max_matches` lines in file
order. The line-delimited JSON written here is the exchange format that
any drop-in miner must reproduce byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field, replace

from .errors import (
    AnnotationParseError,
    CorpusIoError,
    DanglingAnnotation,
    InvalidArgument,
    NotCurated,
)
from .registry import MweEntry
from .textmatch import fold_case, grep_match_offset, iter_corpus_lines, source_name

LABELS = ("unreviewed", "ok", "proper_noun", "misuse")
REJECTED_LABELS = ("proper_noun", "misuse")

# Field order is the wire contract; do not reorder.
_RECORD_FIELDS = ("mwe_token_name", "text", "source_file", "line_number",
                  "match_offset", "label")


@dataclass
class ContextRecord:
    mwe_token_name: str
    text: str
    source_file: str
    line_number: int
    match_offset: int
    label: str = "unreviewed"

    def to_json_line(self) -> str:
        row = {name: getattr(self, name) for name in _RECORD_FIELDS}
        return json.dumps(row, ensure_ascii=False, separators=(",", ":"))


@dataclass
class ContextSet:
    mwe_token_name: str
    records: list[ContextRecord] = field(default_factory=list)
    corpus_id: str = ""
    extraction_config_hash: str = ""
    warned_empty: bool = False

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def save(self, path: str) -> None:
        try:
            with open(path, "w", encoding="utf-8") as handle:
                for record in self.records:
                    handle.write(record.to_json_line())
                    handle.write("\n")
        except OSError as exc:
            raise CorpusIoError(f"cannot write context set {path!r}: {exc}") from exc

    @classmethod
    def load(cls, path: str, mwe_token_name: str | None = None) -> "ContextSet":
        records = []
        try:
            with open(path, encoding="utf-8") as handle:
                for line in handle:
                    line = line.rstrip("\n")
                    if not line:
                        continue
                    row = json.loads(line)
                    records.append(ContextRecord(**{k: row[k] for k in _RECORD_FIELDS}))
        except OSError as exc:
            raise CorpusIoError(f"cannot read context set {path!r}: {exc}") from exc
        name = mwe_token_name or (records[0].mwe_token_name if records else "")
        return cls(mwe_token_name=name, records=records)


def _config_hash(patterns: list[str], max_matches: int, dedup_exact: bool) -> str:
    payload = json.dumps({"patterns": patterns, "max_matches": max_matches,
                          "dedup_exact": dedup_exact}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def extract_contexts(corpus: str, entry: MweEntry, max_matches: int = 250,
                     dedup_exact: bool = False) -> ContextSet:
    """Mine up to `max_matches` full lines containing the MWE, file order.

    One record per matching line even when the line contains several
    occurrences; `match_offset` points at the first occurrence of the
    surface or a variant. Duplicate lines are kept unless `dedup_exact`.
    """
    if max_matches < 1:
        raise InvalidArgument("max_matches must be >= 1")
    patterns = entry.patterns()
    source = source_name(corpus)
    records: list[ContextRecord] = []
    seen: set[str] = set()
    for line_number, text in iter_corpus_lines(corpus):
        if len(records) >= max_matches:
            break
        offset = grep_match_offset(text, patterns)
        if offset is None:
            continue
        if dedup_exact:
            if text in seen:
                continue
            seen.add(text)
        records.append(ContextRecord(
            mwe_token_name=entry.token_name,
            text=text,
            source_file=source,
            line_number=line_number,
            match_offset=offset,
        ))
    return ContextSet(
        mwe_token_name=entry.token_name,
        records=records,
        corpus_id=source,
        extraction_config_hash=_config_hash(patterns, max_matches, dedup_exact),
        warned_empty=not records,
    )


def sample_contexts(context_set: ContextSet, k: int, seed: int) -> ContextSet:
    """Seeded uniform subset of size k, original order preserved."""
    if k < 1:
        raise InvalidArgument("k must be >= 1")
    records = context_set.records
    if k >= len(records):
        return context_set
    rng = random.Random(seed)
    keep = sorted(rng.sample(range(len(records)), k))
    return replace(context_set,
                   records=[records[i] for i in keep],
                   warned_empty=False)


def emit_annotation_template(context_set: ContextSet, out: str) -> None:
    """Write one editable JSON object per record for manual labeling."""
    try:
        with open(out, "w", encoding="utf-8") as handle:
            for record in context_set.records:
                row = {"mwe": record.mwe_token_name,
                       "source_file": record.source_file,
                       "line_number": record.line_number,
                       "text": record.text,
                       "label": "unreviewed"}
                handle.write(json.dumps(row, ensure_ascii=False, separators=(",", ":")))
                handle.write("\n")
    except OSError as exc:
        raise CorpusIoError(f"cannot write template {out!r}: {exc}") from exc


def apply_curation(context_set: ContextSet, annotations: str) -> ContextSet:
    """Drop records labeled proper_noun or misuse, relabel the rest.

    Every annotation row must reference a record in the set; records
    without a row keep their current label.
    """
    by_key = {(r.source_file, r.line_number): r for r in context_set.records}
    labels: dict[tuple[str, int], str] = {}
    try:
        with open(annotations, encoding="utf-8") as handle:
            rows = enumerate(handle, start=1)
            for line_no, line in rows:
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise AnnotationParseError(line_no, str(exc)) from exc
                for key in ("mwe", "source_file", "line_number", "label"):
                    if key not in row:
                        raise AnnotationParseError(line_no, f"missing field {key!r}")
                if row["label"] not in LABELS:
                    raise AnnotationParseError(line_no, f"unknown label {row['label']!r}")
                key = (row["source_file"], row["line_number"])
                if row["mwe"] != context_set.mwe_token_name or key not in by_key:
                    raise DanglingAnnotation(
                        f"line {line_no}: no record {row['mwe']}@{key}")
                labels[key] = row["label"]
    except OSError as exc:
        raise CorpusIoError(f"cannot read annotations {annotations!r}: {exc}") from exc
    survivors = []
    for record in context_set.records:
        label = labels.get((record.source_file, record.line_number), record.label)
        if label in REJECTED_LABELS:
            continue
        survivors.append(replace(record, label=label))
    return replace(context_set, records=survivors, warned_empty=not survivors)


def gold_sample(context_set: ContextSet, n: int = 10, seed: int = 0) -> ContextSet:
    """Seeded sample of curated records (the gold-context selection step)."""
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    bad = [r for r in context_set.records if r.label in REJECTED_LABELS]
    if bad:
        raise NotCurated(f"{len(bad)} records still carry rejected labels")
    return sample_contexts(context_set, n, seed)


def context_set_path(output_dir: str, token_name: str) -> str:
    return f"{output_dir}/{token_name}.jsonl"
