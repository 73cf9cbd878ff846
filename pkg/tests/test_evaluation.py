"""ROC construction, AUC, EER, and both evaluation protocols vs brute force."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdgan.data import GroundTruth
from crowdgan.errors import InputError
from crowdgan.evaluation import (
    OVERLAP_THRESHOLD,
    SENTINEL_THRESHOLD,
    RocCurve,
    RocPoint,
    auc,
    default_thresholds,
    eer,
    frame_level_eval,
    make_report,
    pixel_level_eval,
)


def curve_from(points):
    return RocCurve(tuple(RocPoint(*p) for p in points))


def rank_statistic(scores, labels):
    """P(random abnormal outscores random normal), ties counted half."""
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def score_maps(scores):
    return [np.full((1, 1), s) for s in scores]


class TestRocCurve:
    def test_threshold_order_enforced(self):
        with pytest.raises(InputError):
            curve_from([(0.5, 0.0, 0.0), (0.5, 1.0, 1.0)])
        with pytest.raises(InputError):
            curve_from([(0.2, 0.0, 0.0), (0.5, 1.0, 1.0)])

    def test_rates_must_be_rates(self):
        with pytest.raises(InputError):
            curve_from([(0.5, 1.5, 0.0)])

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            RocCurve(())


class TestDefaultThresholds:
    def test_strictly_decreasing_with_sentinel(self):
        maps = score_maps([0.3, 0.9, 0.3])
        thetas = default_thresholds(maps)
        assert thetas[0] == SENTINEL_THRESHOLD
        assert all(a > b for a, b in zip(thetas, thetas[1:]))
        assert 0.0 in thetas and 1.0 in thetas
        assert 0.3 in thetas and 0.9 in thetas


class TestFrameLevel:
    def test_zero_threshold_predicts_everything(self):
        maps = score_maps([0.1, 0.9, 0.4, 0.6])
        labels = [False, True, False, True]
        curve = frame_level_eval(maps, labels)
        assert curve.points[-1].threshold == 0.0
        assert curve.points[-1].tpr == 1.0
        assert curve.points[-1].fpr == 1.0

    def test_sentinel_predicts_nothing(self):
        maps = score_maps([0.1, 0.9])
        curve = frame_level_eval(maps, [False, True])
        assert curve.points[0].threshold == SENTINEL_THRESHOLD
        assert curve.points[0].tpr == 0.0
        assert curve.points[0].fpr == 0.0

    def test_matches_brute_force_on_random_instances(self, rng):
        for _ in range(20):
            n = 20
            scores = np.round(rng.uniform(0, 1, n), 2)  # induce ties
            labels = rng.uniform(size=n) < 0.5
            if labels.all() or not labels.any():
                labels[0] = not labels[0]
            curve = frame_level_eval(score_maps(scores), list(labels))
            n_pos = int(labels.sum())
            n_neg = int((~labels).sum())
            for point in curve.points:
                tp = sum(
                    1 for s, l in zip(scores, labels) if l and s >= point.threshold
                )
                fp = sum(
                    1 for s, l in zip(scores, labels) if not l and s >= point.threshold
                )
                assert point.tpr == tp / n_pos
                assert point.fpr == fp / n_neg

    def test_length_mismatch_rejected(self):
        with pytest.raises(InputError):
            frame_level_eval(score_maps([0.5]), [True, False])

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            frame_level_eval([], [])

    def test_rates_monotone_along_curve(self, rng):
        scores = rng.uniform(0, 1, 30)
        labels = rng.uniform(size=30) < 0.4
        labels[0], labels[1] = True, False
        curve = frame_level_eval(score_maps(scores), list(labels))
        for a, b in zip(curve.points, curve.points[1:]):
            assert b.tpr >= a.tpr
            assert b.fpr >= a.fpr


def brute_force_pixel_protocol(maps, gts, theta):
    """Direct restatement of the 40% localization rule."""
    tp = fp = n_pos = n_neg = 0
    for values, gt in zip(maps, gts):
        predicted = values >= theta
        if gt.frame_label:
            n_pos += 1
            covered = np.logical_and(predicted, gt.pixel_mask).sum()
            if covered / gt.pixel_mask.sum() >= OVERLAP_THRESHOLD:
                tp += 1
            elif predicted.any():
                fp += 1
        else:
            n_neg += 1
            if predicted.any():
                fp += 1
    return tp / max(n_pos, 1), min(fp / max(n_neg, 1), 1.0)


def random_pixel_instance(rng, frames=10, res=12):
    maps, gts = [], []
    for _ in range(frames):
        values = rng.uniform(0, 1, (res, res))
        abnormal = rng.uniform() < 0.5
        if abnormal:
            mask = np.zeros((res, res), dtype=bool)
            r, c = rng.integers(0, res - 4, 2)
            mask[r : r + 4, c : c + 4] = True
            gts.append(GroundTruth(frame_label=True, pixel_mask=mask))
        else:
            gts.append(
                GroundTruth(frame_label=False, pixel_mask=np.zeros((res, res), bool))
            )
        maps.append(values)
    if not any(g.frame_label for g in gts):
        gts[0] = GroundTruth(
            frame_label=True,
            pixel_mask=np.pad(np.ones((4, 4), bool), ((0, res - 4), (0, res - 4))),
        )
    return maps, gts


class TestPixelLevel:
    def test_exact_region_is_true_positive(self):
        values = np.zeros((8, 8))
        mask = np.zeros((8, 8), dtype=bool)
        mask[2:5, 2:5] = True
        values[mask] = 0.8
        gt = GroundTruth(frame_label=True, pixel_mask=mask)
        curve = pixel_level_eval([values], [gt], thresholds=[0.9, 0.8, 0.5, 0.1])
        tprs = {p.threshold: p.tpr for p in curve.points}
        assert tprs[0.9] == 0.0
        assert tprs[0.8] == 1.0
        assert tprs[0.5] == 1.0
        assert tprs[0.1] == 1.0

    def test_disjoint_region_is_false_positive(self):
        values = np.zeros((8, 8))
        values[0:2, 0:2] = 0.9
        mask = np.zeros((8, 8), dtype=bool)
        mask[5:8, 5:8] = True
        gt = GroundTruth(frame_label=True, pixel_mask=mask)
        curve = pixel_level_eval([values], [gt], thresholds=[0.5])
        assert curve.points[0].tpr == 0.0
        assert curve.points[0].fpr == 1.0  # capped: no normal frames present

    def test_matches_brute_force_on_random_instances(self, rng):
        for _ in range(20):
            maps, gts = random_pixel_instance(rng)
            curve = pixel_level_eval(maps, gts)
            for point in curve.points:
                tpr, fpr = brute_force_pixel_protocol(maps, gts, point.threshold)
                assert point.tpr == pytest.approx(tpr, abs=1e-12)
                assert point.fpr == pytest.approx(fpr, abs=1e-12)

    def test_fpr_capped_at_one(self):
        # two abnormal frames failing overlap plus one predicting normal frame
        values = np.zeros((6, 6))
        values[0, 0] = 0.9
        mask = np.zeros((6, 6), dtype=bool)
        mask[4:6, 4:6] = True
        gts = [
            GroundTruth(frame_label=True, pixel_mask=mask),
            GroundTruth(frame_label=True, pixel_mask=mask),
            GroundTruth(frame_label=False, pixel_mask=np.zeros((6, 6), bool)),
        ]
        curve = pixel_level_eval([values, values, values], gts, thresholds=[0.5])
        assert curve.points[0].fpr == 1.0

    def test_missing_mask_rejected(self):
        values = np.zeros((4, 4))
        with pytest.raises(InputError):
            pixel_level_eval([values], [GroundTruth(frame_label=True)])

    def test_mask_shape_mismatch_rejected(self):
        values = np.zeros((4, 4))
        mask = np.ones((5, 5), dtype=bool)
        with pytest.raises(InputError):
            pixel_level_eval([values], [GroundTruth(frame_label=True, pixel_mask=mask)])


class TestAuc:
    def test_perfect_separation(self):
        scores = [0.1, 0.2, 0.8, 0.9]
        labels = [False, False, True, True]
        assert auc(frame_level_eval(score_maps(scores), labels)) == pytest.approx(1.0)

    def test_inverted_labels_give_zero(self):
        scores = [0.1, 0.2, 0.8, 0.9]
        labels = [True, True, False, False]
        assert auc(frame_level_eval(score_maps(scores), labels)) == pytest.approx(0.0)

    def test_matches_rank_statistic_on_100_samples(self, rng):
        scores = np.round(rng.uniform(0, 1, 100), 2)
        labels = rng.uniform(size=100) < 0.5
        labels[0], labels[1] = True, False
        got = auc(frame_level_eval(score_maps(scores), list(labels)))
        expected = rank_statistic(scores, labels)
        assert got == pytest.approx(expected, abs=1e-6)

    def test_needs_two_points(self):
        with pytest.raises(InputError):
            auc(curve_from([(0.5, 0.5, 0.5)]))

    @settings(max_examples=25, deadline=None)
    @given(
        st.lists(st.floats(min_value=0, max_value=1), min_size=4, max_size=40),
        st.randoms(use_true_random=False),
    )
    def test_rank_statistic_property(self, scores, rand):
        labels = [rand.random() < 0.5 for _ in scores]
        if all(labels) or not any(labels):
            labels[0] = not labels[0]
        scores = [round(s, 3) for s in scores]
        got = auc(frame_level_eval(score_maps(scores), labels))
        assert got == pytest.approx(rank_statistic(scores, labels), abs=1e-6)


class TestEer:
    def test_perfect_separation_is_zero(self):
        scores = [0.1, 0.2, 0.8, 0.9]
        labels = [False, False, True, True]
        assert eer(frame_level_eval(score_maps(scores), labels)) == pytest.approx(0.0)

    def test_random_scores_near_half(self):
        rng = np.random.default_rng(0)
        scores = rng.uniform(0, 1, 10000)
        labels = [i % 2 == 0 for i in range(10000)]
        value = eer(frame_level_eval(score_maps(scores), labels))
        assert abs(value - 0.5) < 0.05

    def test_hand_built_crossing(self):
        curve = curve_from(
            [
                (0.9, 0.2, 0.05),
                (0.7, 0.5, 0.1),
                (0.5, 0.8, 0.3),
                (0.3, 1.0, 0.6),
            ]
        )
        # crossing lies between the 2nd and 3rd points:
        # s = (1 - 0.5 - 0.1) / ((0.3-0.1) + (0.8-0.5)) = 0.8
        # eer = 0.1 + 0.8 * 0.2 = 0.26
        assert eer(curve) == pytest.approx(0.26, abs=1e-12)

    def test_exact_point_on_diagonal(self):
        curve = curve_from([(0.9, 0.0, 0.0), (0.5, 0.7, 0.3), (0.1, 1.0, 1.0)])
        assert eer(curve) == pytest.approx(0.3)

    def test_needs_two_points(self):
        with pytest.raises(InputError):
            eer(curve_from([(0.5, 0.5, 0.5)]))


class TestReport:
    def test_report_contents(self):
        scores = [0.1, 0.9, 0.3, 0.7]
        labels = [False, True, False, True]
        curve = frame_level_eval(score_maps(scores), labels)
        report = make_report(curve)
        assert report["auc"] == auc(curve)
        assert report["eer"] == eer(curve)
        assert len(report["roc"]) == len(curve.points)
        assert set(report["roc"][0]) == {"threshold", "tpr", "fpr"}
