import json
import math
import random

import numpy as np
import pytest

from idiombed import EvalReport, MweRegistry, StsPair, evaluate, per_idiom_analysis, rarity_stats, spearman
from idiombed.errors import (
    DivisionContext,
    LengthMismatch,
    MissingGrouping,
    UndefinedCorrelation,
)


def rank_with_ties(values):
    """Brute-force oracle: sort, then walk tie blocks averaging positions."""
    n = len(values)
    pairs = sorted((values[i], i) for i in range(n))
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and pairs[j + 1][0] == pairs[i][0]:
            j += 1
        mean_rank = (i + 1 + j + 1) / 2.0
        for k in range(i, j + 1):
            ranks[pairs[k][1]] = mean_rank
        i = j + 1
    return ranks


def pearson_loop(a, b):
    n = len(a)
    ma = sum(a) / n
    mb = sum(b) / n
    num = sum((a[i] - ma) * (b[i] - mb) for i in range(n))
    da = sum((x - ma) ** 2 for x in a)
    db = sum((x - mb) ** 2 for x in b)
    return num / math.sqrt(da * db)


def spearman_oracle(xs, ys):
    return pearson_loop(rank_with_ties(xs), rank_with_ties(ys))


class TestSpearman:
    def test_identical_lists_exactly_one(self):
        assert spearman([3.0, 1.0, 2.0, 5.0], [3.0, 1.0, 2.0, 5.0]) == 1.0

    def test_reversed_lists_exactly_minus_one(self):
        xs = [1.0, 2.0, 3.0, 4.0]
        assert spearman(xs, list(reversed(xs))) == -1.0

    def test_matches_oracle_with_ties(self):
        xs = [1.0, 2.0, 2.0, 3.0, 1.0]
        ys = [0.5, 0.5, 1.5, 2.0, 0.1]
        assert spearman(xs, ys) == pytest.approx(spearman_oracle(xs, ys), abs=1e-12)

    def test_random_lists_match_oracle(self):
        rng = random.Random(1234)
        for trial in range(500):
            n = rng.randint(2, 20)
            xs = [rng.choice([rng.random(), rng.randint(0, 4)]) for _ in range(n)]
            ys = [rng.choice([rng.random(), rng.randint(0, 4)]) for _ in range(n)]
            if len(set(xs)) < 2 or len(set(ys)) < 2:
                continue
            assert spearman(xs, ys) == pytest.approx(
                spearman_oracle(xs, ys), abs=1e-12), f"trial {trial}"

    def test_symmetry(self):
        rng = random.Random(7)
        for _ in range(50):
            xs = [rng.random() for _ in range(10)]
            ys = [rng.random() for _ in range(10)]
            assert spearman(xs, ys) == spearman(ys, xs)

    def test_invariant_under_monotone_transform(self):
        rng = random.Random(99)
        for _ in range(50):
            xs = [rng.uniform(-5, 5) for _ in range(12)]
            ys = [rng.uniform(-5, 5) for _ in range(12)]
            base = spearman(xs, ys)
            warped = [math.exp(0.3 * x) + 7 for x in xs]
            assert spearman(warped, ys) == pytest.approx(base, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            spearman([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_constant_list_rejected(self):
        with pytest.raises(UndefinedCorrelation):
            spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def _pairs(scores_subsets):
    return [
        StsPair(f"sentence a{i}", f"sentence b{i}", gold, "en", subset)
        for i, (gold, subset) in enumerate(scores_subsets)
    ]


class TestEvaluate:
    def test_all_general_means_no_idiom_field(self):
        pairs = _pairs([(0.1, "general"), (0.5, "general"), (0.9, "general")])
        report = evaluate([0.2, 0.4, 0.8], pairs)
        assert report.sr_idiom is None
        assert report.sr_sts == report.sr_all == 1.0

    def test_subset_split_matches_direct_spearman(self):
        pairs = _pairs([(0.1, "general"), (0.9, "general"), (0.3, "idiom"),
                        (0.2, "general"), (0.7, "idiom"), (0.5, "idiom")])
        preds = [0.15, 0.8, 0.35, 0.4, 0.6, 0.5]
        report = evaluate(preds, pairs)
        assert report.sr_all == pytest.approx(
            spearman_oracle(preds, [p.gold_score for p in pairs]), abs=1e-12)
        assert report.sr_idiom == pytest.approx(
            spearman_oracle([0.35, 0.6, 0.5], [0.3, 0.7, 0.5]), abs=1e-12)
        assert report.sr_sts == pytest.approx(
            spearman_oracle([0.15, 0.8, 0.4], [0.1, 0.9, 0.2]), abs=1e-12)

    def test_sr_all_is_not_a_subset_average(self):
        pairs = _pairs([(0.9, "general"), (0.1, "general"), (0.8, "idiom"),
                        (0.2, "idiom"), (0.6, "idiom"), (0.4, "general")])
        preds = [0.7, 0.2, 0.65, 0.1, 0.5, 0.3]
        report = evaluate(preds, pairs)
        direct = spearman_oracle(preds, [p.gold_score for p in pairs])
        assert report.sr_all == pytest.approx(direct, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            evaluate([0.5], _pairs([(0.1, "general"), (0.2, "general")]))

    def test_json_round_trip_and_key_order(self):
        pairs = _pairs([(0.1, "general"), (0.5, "idiom"), (0.9, "general"),
                        (0.2, "idiom"), (0.8, "idiom")])
        report = evaluate([0.1, 0.4, 0.9, 0.3, 0.7], pairs)
        payload = json.loads(report.to_json())
        assert list(payload)[:2] == ["language", "sr_all"]
        again = EvalReport.from_dict(payload)
        assert again == report

    def test_table_shows_dash_for_missing_subset(self):
        pairs = _pairs([(0.1, "idiom"), (0.5, "idiom"), (0.9, "idiom")])
        report = evaluate([0.2, 0.4, 0.8], pairs)
        assert report.sr_sts is None
        assert "-" in report.to_table()


class TestPerIdiomAnalysis:
    def _setup(self):
        pairs = []
        idiom_of = {}
        golds = [0.1, 0.3, 0.5, 0.7, 0.9, 0.2]
        for i, g in enumerate(golds):
            pairs.append(StsPair("a", "b", g, "en", "idiom"))
            idiom_of[i] = "idiom_alpha_beta"
        for j in range(4):
            pairs.append(StsPair("a", "b", 0.1 * (j + 1), "en", "idiom"))
            idiom_of[len(pairs) - 1] = "idiom_gamma_delta"
        return pairs, idiom_of, golds

    def test_small_groups_dropped(self):
        pairs, idiom_of, golds = self._setup()
        preds = [g + 0.01 for g in golds] + [0.4, 0.3, 0.2, 0.1]
        result = per_idiom_analysis(preds, pairs, idiom_of, min_occurrences=5)
        assert "idiom_gamma_delta" not in result
        assert result["idiom_alpha_beta"] == (6, pytest.approx(1.0))

    def test_threshold_is_inclusive(self):
        pairs, idiom_of, golds = self._setup()
        preds = list(golds) + [0.1, 0.2, 0.3, 0.4]
        result = per_idiom_analysis(preds, pairs, idiom_of, min_occurrences=4)
        assert result["idiom_gamma_delta"] == (4, pytest.approx(1.0))

    def test_missing_grouping(self):
        pairs = [StsPair("a", "b", 0.5, "en", "idiom")]
        with pytest.raises(MissingGrouping):
            per_idiom_analysis([0.5], pairs, {}, min_occurrences=1)

    def test_never_emits_groups_below_threshold(self):
        rng = random.Random(5)
        pairs = []
        idiom_of = {}
        for i in range(60):
            pairs.append(StsPair("a", "b", rng.random(), "en", "idiom"))
            idiom_of[i] = f"idiom_w{rng.randint(0, 11)}_x"
        preds = [rng.random() for _ in range(60)]
        result = per_idiom_analysis(preds, pairs, idiom_of, min_occurrences=5)
        assert all(n >= 5 for n, _ in result.values())


class TestRarityStats:
    def _write(self, tmp_path, lines):
        path = tmp_path / "corpus.txt"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return str(path)

    def _entry(self, surface="swan song"):
        return MweRegistry("en").register(surface, "en", [])

    def test_hand_counted_fixture(self, tmp_path):
        # idiom 2, "swan" 10, "song" 30 -> 2 / 20 = 0.1
        lines = []
        lines.append("swan song opens here")          # swan 1, song 1, idiom 1
        lines.append("the swan song returns")         # swan 2, song 2, idiom 2
        lines.extend(["a swan floats"] * 8)           # swan 10
        lines.extend(["a song plays"] * 28)           # song 30
        path = self._write(tmp_path, lines)
        assert rarity_stats(path, self._entry()) == pytest.approx(0.1)

    def test_idiom_every_time_words_appear(self, tmp_path):
        path = self._write(tmp_path, ["swan song here", "a swan song there"])
        assert rarity_stats(path, self._entry()) == pytest.approx(1.0)

    def test_absent_idiom_is_zero(self, tmp_path):
        path = self._write(tmp_path, ["no relevant phrase at all"])
        assert rarity_stats(path, self._entry()) == 0.0

    def test_zero_count_constituent_raises(self, tmp_path):
        # "swan song" bounded occurrences exist via variant only.
        entry = MweRegistry("en").register("swan melody", "en", [])
        path = self._write(tmp_path, ["the swan melody plays", "swan melody x"])
        # "swan" and "melody" both occur; force a zero by an unseen word.
        entry2 = MweRegistry("en").register("swan zzzq", "en", ["swan melody"])
        with pytest.raises(DivisionContext) as info:
            rarity_stats(path, entry2)
        assert "zzzq" in str(info.value)

    def test_counts_are_word_bounded(self, tmp_path):
        # "swansong" and "songs" must not count.
        lines = ["swan song fine", "swansong not counted", "many songs not counted",
                 "swan alone", "song alone"]
        path = self._write(tmp_path, lines)
        # idiom 1; swan 2; song 2 -> 1/2
        assert rarity_stats(path, self._entry()) == pytest.approx(0.5)
