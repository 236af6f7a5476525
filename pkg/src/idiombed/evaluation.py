"""Spearman-rank evaluation, per-idiom breakdowns and rarity statistics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DivisionContext,
    LengthMismatch,
    MissingGrouping,
    UndefinedCorrelation,
)
from .registry import MweEntry
from .textmatch import count_word_bounded, fold_case, iter_corpus_lines


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; ties receive the mean of their rank positions."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=np.float64)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation of average-fractional ranks.

    Raises LengthMismatch for unequal lists and UndefinedCorrelation when
    either list is constant (silent NaN would poison aggregate reports).
    """
    if len(xs) != len(ys):
        raise LengthMismatch(f"{len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise UndefinedCorrelation("need at least two observations")
    rx = average_ranks(xs)
    ry = average_ranks(ys)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = float(np.sqrt((dx * dx).sum() * (dy * dy).sum()))
    if denom == 0.0:
        raise UndefinedCorrelation("constant list has no rank ordering")
    return float((dx * dy).sum() / denom)


@dataclass
class EvalReport:
    language: str = "all"
    sr_all: float = 0.0
    sr_idiom: float | None = None
    sr_sts: float | None = None
    per_idiom: dict[str, tuple[int, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out: dict = {"language": self.language, "sr_all": self.sr_all}
        if self.sr_idiom is not None:
            out["sr_idiom"] = self.sr_idiom
        if self.sr_sts is not None:
            out["sr_sts"] = self.sr_sts
        out["per_idiom"] = {
            name: {"n": n, "sr": sr}
            for name, (n, sr) in sorted(self.per_idiom.items())
        }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    @classmethod
    def from_dict(cls, payload: Mapping) -> "EvalReport":
        per_idiom = {
            name: (row["n"], row["sr"])
            for name, row in payload.get("per_idiom", {}).items()
        }
        return cls(language=payload.get("language", "all"),
                   sr_all=payload["sr_all"],
                   sr_idiom=payload.get("sr_idiom"),
                   sr_sts=payload.get("sr_sts"),
                   per_idiom=per_idiom)

    def to_table(self) -> str:
        def fmt(value):
            return "-" if value is None else f"{value:.4f}"

        header = f"{'Language':<10} {'SR ALL':>8} {'SR Idiom':>9} {'SR STS':>8}"
        row = (f"{self.language:<10} {fmt(self.sr_all):>8} "
               f"{fmt(self.sr_idiom):>9} {fmt(self.sr_sts):>8}")
        return header + "\n" + row


def evaluate(predictions: Sequence[float], pairs: Sequence) -> EvalReport:
    """Spearman over all pairs plus the idiom and general subsets.

    Subset coefficients are absent when the subset is empty (the report
    renders them as "-", matching how a language without general STS data
    is displayed).
    """
    if len(predictions) != len(pairs):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(pairs)} pairs")
    golds = [p.gold_score for p in pairs]
    languages = {p.language for p in pairs}
    report = EvalReport(language=languages.pop() if len(languages) == 1 else "all",
                        sr_all=spearman(predictions, golds))
    for subset, attr in (("idiom", "sr_idiom"), ("general", "sr_sts")):
        idx = [i for i, p in enumerate(pairs) if p.subset == subset]
        if idx:
            setattr(report, attr,
                    spearman([predictions[i] for i in idx], [golds[i] for i in idx]))
    return report


def per_idiom_analysis(predictions: Sequence[float], pairs: Sequence,
                       idiom_of: Mapping[int, str],
                       min_occurrences: int = 5) -> dict[str, tuple[int, float]]:
    """Per-idiom Spearman over the idiom subset.

    Groups with fewer than `min_occurrences` pairs are dropped (correlation
    is not meaningful at that sample size), as are groups whose correlation
    is undefined because one side is constant.
    """
    groups: dict[str, list[int]] = {}
    for i, pair in enumerate(pairs):
        if pair.subset != "idiom":
            continue
        name = idiom_of.get(i)
        if name is None:
            raise MissingGrouping(f"pair index {i} has no idiom assigned")
        groups.setdefault(name, []).append(i)
    out: dict[str, tuple[int, float]] = {}
    for name, idx in groups.items():
        if len(idx) < min_occurrences:
            continue
        try:
            sr = spearman([predictions[i] for i in idx],
                          [pairs[i].gold_score for i in idx])
        except UndefinedCorrelation:
            continue
        out[name] = (len(idx), sr)
    return out


def rarity_stats(corpus: str, entry: MweEntry) -> float:
    """Idiom occurrences divided by the mean occurrences of its words.

    Counts case-insensitive word-bounded matches over the whole corpus;
    returns 0.0 when the idiom never occurs and raises DivisionContext
    when a constituent word itself never occurs.
    """
    idiom_patterns = entry.patterns()
    words = [fold_case(w) for w in entry.surface.split()]
    idiom_count = 0
    word_counts = {w: 0 for w in set(words)}
    for _, line in iter_corpus_lines(corpus):
        folded = fold_case(line)
        for pattern in idiom_patterns:
            idiom_count += count_word_bounded(folded, pattern)
        for word in word_counts:
            word_counts[word] += count_word_bounded(folded, word)
    if idiom_count == 0:
        return 0.0
    missing = sorted(w for w, c in word_counts.items() if c == 0)
    if missing:
        raise DivisionContext(missing)
    mean_count = sum(word_counts[w] for w in words) / len(words)
    return idiom_count / mean_count
