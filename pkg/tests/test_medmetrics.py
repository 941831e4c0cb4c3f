import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lab_fixture import (
    EXPECTED_COUNTS,
    EXPECTED_PAIRS,
    EXPECTED_UNMATCHED_GOLD,
    EXPECTED_UNMATCHED_PRED,
    GOLD,
    PRED,
    expected_prf,
)
from medevalkit.errors import ValidationError
from medevalkit.medmetrics import (
    ConfusionCounts,
    MatchPhase,
    accuracy_from_counts,
    f1_from_counts,
    iou,
    macro,
    match_lab_entries,
    mean_iou,
    normalize_name,
    rouge_l,
    score_extraction,
    tally,
    temporal_macro_accuracy,
    tokenized_f1,
    values_equal,
)
from medevalkit.promptforge import BBox, LabTestEntry, ParseMiss, TemporalClass


# millesimal coordinates keep widths representable after translation
GRID_HALF = st.integers(0, 500).map(lambda k: k / 1000)


def boxes(draw_unit=st.floats(0, 1)):
    return st.tuples(draw_unit, draw_unit, draw_unit, draw_unit).map(
        lambda t: BBox(min(t[0], t[2]), min(t[1], t[3]), max(t[0], t[2]), max(t[1], t[3])))


class TestIoU:
    def test_identical(self):
        b = BBox(0.1, 0.2, 0.5, 0.9)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 0.2, 0.2), BBox(0.5, 0.5, 1, 1)) == 0.0

    def test_half(self):
        assert iou(BBox(0, 0, 1, 1), BBox(0, 0, 1, 0.5)) == 0.5

    def test_degenerate(self):
        assert iou(BBox(0.3, 0.3, 0.3, 0.3), BBox(0.3, 0.3, 0.3, 0.3)) == 0.0

    @settings(max_examples=300, deadline=None)
    @given(boxes(), boxes())
    def test_symmetric_bounded(self, a, b):
        v = iou(a, b)
        assert v == iou(b, a) and 0.0 <= v <= 1.0

    @settings(max_examples=200, deadline=None)
    @given(boxes(GRID_HALF), boxes(GRID_HALF), GRID_HALF, GRID_HALF)
    def test_translation_invariant(self, a, b, dy, dx):
        shift = lambda k: BBox(k.y0 + dy, k.x0 + dx, k.y1 + dy, k.x1 + dx)
        assert math.isclose(iou(shift(a), shift(b)), iou(a, b), abs_tol=1e-9)

    def test_area_weighted_raster_oracle(self):
        # exact per-pixel coverage on a 1000x1000 grid, continuous coordinates
        rng = np.random.default_rng(3)
        edges = np.arange(1001) / 1000

        def cover(lo, hi):
            return np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo), 0, None)

        for _ in range(50):
            y = np.sort(rng.random((2, 2)), axis=1)
            x = np.sort(rng.random((2, 2)), axis=1)
            a, b = BBox(y[0, 0], x[0, 0], y[0, 1], x[0, 1]), BBox(y[1, 0], x[1, 0], y[1, 1], x[1, 1])
            ca = np.outer(cover(a.y0, a.y1), cover(a.x0, a.x1))
            cb = np.outer(cover(b.y0, b.y1), cover(b.x0, b.x1))
            cab = np.outer(cover(max(a.y0, b.y0), min(a.y1, b.y1)), cover(max(a.x0, b.x0), min(a.x1, b.x1)))
            union = ca.sum() + cb.sum() - cab.sum()
            assert iou(a, b) == pytest.approx(cab.sum() / union, abs=1e-9)


class TestMeanIoU:
    def test_perfect(self):
        g = [BBox(0, 0, 0.5, 0.5, "heart"), BBox(0.2, 0.2, 0.9, 0.9, "lung")]
        assert mean_iou([(b, b) for b in g]) == 1.0

    def test_miss_counts_zero(self):
        g = BBox(0, 0, 0.5, 0.5, "heart")
        assert mean_iou([(g, g), (ParseMiss("x"), g)]) == 0.5
        assert mean_iou([(g, g), (None, g)]) == 0.5
        assert mean_iou([(g, g), ([], g)]) == 0.5

    def test_best_label(self):
        g = BBox(0, 0, 0.5, 0.5, "left lung")
        preds = [BBox(0.5, 0.5, 1, 1, "heart"), g, BBox(0, 0, 0.25, 0.5, "left lung")]
        assert mean_iou([(preds, g)]) == 1.0

    def test_tie_keeps_first(self):
        g = BBox(0, 0, 0.5, 0.5, "heart")
        preds = [BBox(0, 0, 0.5, 0.25, "aorta"), BBox(0, 0, 0.5, 0.5, "spine")]
        assert mean_iou([(preds, g)]) == 0.5

    def test_empty(self):
        with pytest.raises(ValidationError):
            mean_iou([])


class TestCounts:
    def test_examples(self):
        assert f1_from_counts(ConfusionCounts(tp=2, fp=1, fn=1)) == pytest.approx(2 / 3)
        assert f1_from_counts(ConfusionCounts(tp=3, tn=4)) == 1.0
        assert accuracy_from_counts(ConfusionCounts(tp=3, tn=4)) == 1.0
        assert f1_from_counts(ConfusionCounts()) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            ConfusionCounts(tp=-1)

    def test_tally(self):
        c = tally([(True, True), (True, False), (False, True), (False, False)])
        assert c == ConfusionCounts(1, 1, 1, 1)

    def test_tally_miss_is_wrong(self):
        c = tally([(True, ParseMiss()), (False, None)])
        assert c == ConfusionCounts(tp=0, fp=1, fn=1, tn=0)
        assert accuracy_from_counts(c) == 0.0

    def test_macro(self):
        assert macro([1.0, 0.0]) == 0.5
        assert macro([0.3]) == 0.3
        with pytest.raises(ValidationError):
            macro([])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=20), st.randoms())
    def test_macro_permutation(self, values, rnd):
        shuffled = list(values)
        rnd.shuffle(shuffled)
        assert macro(shuffled) == pytest.approx(macro(values))

    @given(st.floats(0, 1), st.integers(1, 30))
    def test_macro_constant(self, v, n):
        assert macro([v] * n) == pytest.approx(v)


class TestText:
    def test_tokenized_f1(self):
        assert tokenized_f1("Left lung.", "left lung") == 1.0
        assert tokenized_f1("heart", "lung") == 0.0
        assert tokenized_f1("lung", "left lung") == pytest.approx(2 / 3)
        assert tokenized_f1("", "") == 1.0
        assert tokenized_f1("", "x") == 0.0

    def test_rouge_examples(self):
        assert rouge_l("the cat sat", "the cat sat") == 1.0
        assert rouge_l("a b", "c d") == 0.0
        assert rouge_l("the cat sat", "the cat") == pytest.approx(0.8)
        assert rouge_l("", "") == 1.0
        assert rouge_l("x", "") == 0.0

    words = st.lists(st.sampled_from(["a", "b", "c", "d", "the"]), max_size=10).map(" ".join)

    @settings(max_examples=300, deadline=None)
    @given(words, words)
    def test_bounds_and_identity(self, a, b):
        for fn in (rouge_l, tokenized_f1):
            v = fn(a, b)
            assert 0.0 <= v <= 1.0
        assert (rouge_l(a, b) == 1.0) == (a.split() == b.split())
        assert (tokenized_f1(a, b) == 1.0) == (sorted(a.split()) == sorted(b.split()))

    @settings(max_examples=300, deadline=None)
    @given(words, words)
    def test_rouge_matches_dp(self, a, b):
        ta, tb = a.split(), b.split()
        table = [[0] * (len(tb) + 1) for _ in range(len(ta) + 1)]
        for i, j in itertools.product(range(len(ta)), range(len(tb))):
            table[i + 1][j + 1] = table[i][j] + 1 if ta[i] == tb[j] else max(table[i][j + 1], table[i + 1][j])
        lcs = table[-1][-1]
        if not ta or not tb:
            expected = float(ta == tb)
        else:
            expected = 0.0 if lcs == 0 else 2 * lcs / (len(ta) + len(tb))
        assert rouge_l(a, b) == pytest.approx(expected)


class TestTemporal:
    def test_all_correct(self):
        recs = [("edema", c, c) for c in TemporalClass]
        assert temporal_macro_accuracy(recs) == 1.0

    def test_absent_class_skipped(self):
        recs = [("edema", TemporalClass.IMPROVED, TemporalClass.IMPROVED),
                ("edema", TemporalClass.STABLE, TemporalClass.WORSENED)]
        assert temporal_macro_accuracy(recs) == 0.5

    def test_miss_is_wrong(self):
        assert temporal_macro_accuracy([("x", TemporalClass.STABLE, ParseMiss())]) == 0.0

    def test_mean_over_pathologies(self):
        recs = [("a", TemporalClass.STABLE, TemporalClass.STABLE),
                ("b", TemporalClass.STABLE, TemporalClass.IMPROVED),
                ("b", TemporalClass.STABLE, TemporalClass.STABLE)]
        assert temporal_macro_accuracy(recs) == pytest.approx((1.0 + 0.5) / 2)


class TestMatcher:
    def test_normalize_name(self):
        assert normalize_name("  Hemoglobin   (Hb). ") == "hemoglobin"
        assert normalize_name("WBC  Count") == "wbc count"

    def test_values_equal(self):
        assert values_equal("5.0", "5.00")
        assert values_equal(" G/dL", "g/dl")
        assert not values_equal("5.0", "5.1")
        assert not values_equal("5", "")

    def test_spec_examples(self):
        m = match_lab_entries([LabTestEntry("Hemoglobin (Hb)", "13")], [LabTestEntry("Hemoglobin", "14")])
        assert m.pairs == ((0, 0, MatchPhase.EXACT_NAME),)
        m = match_lab_entries([LabTestEntry("WBC Count")], [LabTestEntry("Platelet Count")])
        assert m.pairs == () and m.unmatched_pred == (0,) and m.unmatched_gold == (0,)

    def test_fixture_matching(self):
        m = match_lab_entries(PRED, GOLD)
        assert set(m.pairs) == EXPECTED_PAIRS
        assert m.unmatched_pred == EXPECTED_UNMATCHED_PRED
        assert m.unmatched_gold == EXPECTED_UNMATCHED_GOLD

    def test_fixture_scores(self):
        score = score_extraction(match_lab_entries(PRED, GOLD), PRED, GOLD)
        for key in EXPECTED_COUNTS:
            got = score.overall if key == "overall" else score.per_field[key]
            p, r, f = expected_prf(key)
            assert (got.precision, got.recall, got.f1) == pytest.approx((float(p), float(r), float(f)))

    def test_perfect(self):
        m = match_lab_entries(GOLD, GOLD)
        assert all(phase is MatchPhase.EXACT_NAME_RESULT for _, _, phase in m.pairs)
        score = score_extraction(m, GOLD, GOLD)
        assert score.overall.f1 == 1.0
        assert all(v.precision == v.recall == v.f1 == 1.0 for v in score.per_field.values())

    def test_spurious_entry(self):
        gold = [LabTestEntry("Sodium", "140")]
        pred = gold + [LabTestEntry("Chloride", "100")]
        s = score_extraction(match_lab_entries(pred, gold), pred, gold)
        assert (s.overall.precision, s.overall.recall) == (0.5, 1.0)

    def test_jaccard_threshold_configurable(self):
        pred, gold = [LabTestEntry("WBC Count")], [LabTestEntry("Platelet Count")]
        assert len(match_lab_entries(pred, gold, jaccard_threshold=0.3).pairs) == 1

    names = st.sampled_from(["Sodium", "sodium.", "Na (Sodium)", "WBC Count", "Count WBC", "Platelet Count",
                             "Glucose", "Glucose Serum", "Hb"])
    entries = st.lists(st.builds(LabTestEntry, names, st.sampled_from(["", "1", "1.0", "2"])), max_size=7)

    @settings(max_examples=300, deadline=None)
    @given(entries, entries)
    def test_partition_and_fixpoint(self, pred, gold):
        m = match_lab_entries(pred, gold)
        pi = [p for p, _, _ in m.pairs]
        gi = [g for _, g, _ in m.pairs]
        assert sorted(pi + list(m.unmatched_pred)) == list(range(len(pred)))
        assert sorted(gi + list(m.unmatched_gold)) == list(range(len(gold)))
        assert match_lab_entries(pred, gold) == m
        sub_p = sorted(pi)
        sub_g = sorted(gi)
        again = match_lab_entries([pred[i] for i in sub_p], [gold[i] for i in sub_g])
        remapped = {(sub_p[p], sub_g[g], ph) for p, g, ph in again.pairs}
        assert remapped == set(m.pairs)
        s = score_extraction(m, pred, gold)
        for v in [s.overall, *s.per_field.values()]:
            assert 0 <= v.precision <= 1 and 0 <= v.recall <= 1 and 0 <= v.f1 <= 1
