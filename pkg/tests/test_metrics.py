"""Frame accuracy, per-phase precision/recall/Jaccard, relaxed boundaries."""

from __future__ import annotations

import numpy as np
import pytest

from surgphase.errors import ShapeError
from surgphase.metrics import (
    phase_level_metrics,
    relax_predictions,
    relaxed_boundary_eval,
    video_accuracy,
)
from surgphase.transition import PhaseTrack


def _ints(values) -> np.ndarray:
    return np.asarray(values, dtype=np.int64)


class TestAccuracy:
    def test_three_of_four(self) -> None:
        assert video_accuracy(_ints([1, 1, 2, 2]), _ints([1, 2, 2, 2])) == 75.0

    def test_perfect_and_disjoint(self) -> None:
        assert video_accuracy(_ints([0, 1, 0]), _ints([0, 1, 0])) == 100.0
        assert video_accuracy(_ints([0, 0, 0]), _ints([1, 1, 1])) == 0.0

    def test_accepts_phase_tracks(self) -> None:
        track = PhaseTrack(labels=_ints([0, 1, 1]))
        assert video_accuracy(track, track) == 100.0

    def test_shape_errors(self) -> None:
        with pytest.raises(ShapeError, match="length"):
            video_accuracy(_ints([0, 1]), _ints([0, 1, 2]))
        with pytest.raises(ShapeError):
            video_accuracy(np.array([0.5, 1.0]), _ints([0, 1]))
        with pytest.raises(ShapeError):
            video_accuracy(_ints([]), _ints([]))


class TestPhaseLevel:
    def test_two_phase_hand_case(self) -> None:
        report = phase_level_metrics(_ints([0, 0, 1]), _ints([0, 1, 1]), num_phases=2)
        by_phase = {s.phase: s for s in report.per_phase}
        assert by_phase[0].precision_pct == 50.0
        assert by_phase[0].recall_pct == 100.0
        assert by_phase[0].jaccard_pct == 50.0
        assert by_phase[1].precision_pct == 100.0
        assert by_phase[1].recall_pct == 50.0
        assert by_phase[1].jaccard_pct == 50.0
        assert report.mean_precision_pct == 75.0
        assert report.mean_recall_pct == 75.0
        assert report.mean_jaccard_pct == 50.0
        np.testing.assert_allclose(report.accuracy_pct, 200.0 / 3.0, atol=1e-12)

    def test_disjoint_labelings_score_zero(self) -> None:
        report = phase_level_metrics(_ints([0, 0, 0]), _ints([1, 1, 1]), num_phases=2)
        assert report.accuracy_pct == 0.0
        for score in report.per_phase:
            assert score.precision_pct == 0.0
            assert score.recall_pct == 0.0
            assert score.jaccard_pct == 0.0

    def test_one_sided_phase_scores_zero_but_counts(self) -> None:
        # Phase 2 appears only in the predictions: it scores zero rather
        # than being skipped.  Phases 1 and 3 appear nowhere and are skipped.
        report = phase_level_metrics(_ints([0, 0, 2]), _ints([0, 0, 0]), num_phases=4)
        assert [s.phase for s in report.per_phase] == [0, 2]
        by_phase = {s.phase: s for s in report.per_phase}
        assert by_phase[2].precision_pct == 0.0
        assert by_phase[2].recall_pct == 0.0
        assert by_phase[2].jaccard_pct == 0.0
        assert by_phase[0].precision_pct == 100.0
        np.testing.assert_allclose(by_phase[0].recall_pct, 200.0 / 3.0, atol=1e-12)

    def test_relabeling_permutes_scores(self) -> None:
        gen = np.random.default_rng(0)
        for _ in range(25):
            n = int(gen.integers(1, 60))
            pred = gen.integers(0, 5, size=n)
            truth = gen.integers(0, 5, size=n)
            perm = gen.permutation(5)
            base = phase_level_metrics(pred, truth, num_phases=5)
            moved = phase_level_metrics(perm[pred], perm[truth], num_phases=5)
            assert moved.accuracy_pct == base.accuracy_pct
            want = sorted((s.precision_pct, s.recall_pct, s.jaccard_pct) for s in base.per_phase)
            got = sorted((s.precision_pct, s.recall_pct, s.jaccard_pct) for s in moved.per_phase)
            assert got == want
            np.testing.assert_allclose(moved.mean_jaccard_pct, base.mean_jaccard_pct, atol=1e-12)

    def test_jaccard_never_exceeds_precision_or_recall(self) -> None:
        gen = np.random.default_rng(1)
        for _ in range(300):
            n = int(gen.integers(1, 50))
            phases = int(gen.integers(1, 7))
            report = phase_level_metrics(
                gen.integers(0, phases, size=n),
                gen.integers(0, phases, size=n),
                num_phases=phases,
            )
            for s in report.per_phase:
                assert s.jaccard_pct <= s.precision_pct + 1e-12
                assert s.jaccard_pct <= s.recall_pct + 1e-12
                for value in (s.precision_pct, s.recall_pct, s.jaccard_pct):
                    assert 0.0 <= value <= 100.0
            assert 0.0 <= report.accuracy_pct <= 100.0

    def test_label_universe_enforced(self) -> None:
        with pytest.raises(ShapeError, match="phase count"):
            phase_level_metrics(_ints([0, 3]), _ints([0, 1]), num_phases=3)
        with pytest.raises(ShapeError):
            phase_level_metrics(_ints([0]), _ints([0]), num_phases=0)


class TestRelaxedBoundary:
    def test_clean_predictions_unchanged(self) -> None:
        truth = _ints([0] * 15 + [1] * 15)
        assert np.array_equal(relax_predictions(truth, truth), truth)
        strict = phase_level_metrics(truth, truth, num_phases=2)
        relaxed = relaxed_boundary_eval(truth, truth, num_phases=2)
        assert relaxed.accuracy_pct == strict.accuracy_pct == 100.0
        assert relaxed.relaxed and not strict.relaxed

    def test_lagging_transition_is_forgiven(self) -> None:
        truth = _ints([0] * 20 + [1] * 20)
        pred = _ints([0] * 23 + [1] * 17)  # switches 3 frames late
        assert video_accuracy(pred, truth) < 100.0
        report = relaxed_boundary_eval(pred, truth, num_phases=2)
        assert report.accuracy_pct == 100.0
        assert report.mean_jaccard_pct == 100.0

    def test_forgiveness_band_edges(self) -> None:
        # Boundary at frame 20 with a 10-frame window: frames 10..29 are
        # in the band, frames 9 and 30 are not.
        truth = _ints([0] * 20 + [1] * 40)
        for frame, fixed in ((10, True), (9, False), (29, True), (30, False)):
            pred = truth.copy()
            pred[frame] = 1 - pred[frame]  # wrong, but matches the other side
            relaxed = relax_predictions(pred, truth)
            assert (relaxed[frame] == truth[frame]) == fixed

    def test_unrelated_phase_is_not_forgiven(self) -> None:
        truth = _ints([0] * 20 + [1] * 20)
        pred = truth.copy()
        pred[20] = 2  # inside the band but matches neither side
        relaxed = relax_predictions(pred, truth)
        assert relaxed[20] == 2
        strict = phase_level_metrics(pred, truth, num_phases=3)
        loose = relaxed_boundary_eval(pred, truth, num_phases=3)
        assert loose.accuracy_pct == strict.accuracy_pct

    def test_errors_far_from_boundaries_stay(self) -> None:
        truth = _ints([0] * 40 + [1] * 40)
        pred = truth.copy()
        pred[10:13] = 1  # 15+ frames from the boundary at 40
        strict = phase_level_metrics(pred, truth, num_phases=2)
        loose = relaxed_boundary_eval(pred, truth, num_phases=2)
        assert loose.accuracy_pct == strict.accuracy_pct
        assert loose.per_phase == strict.per_phase

    def test_relaxing_never_hurts(self) -> None:
        gen = np.random.default_rng(2)
        for _ in range(100):
            n = int(gen.integers(2, 80))
            phases = int(gen.integers(2, 5))
            truth = gen.integers(0, phases, size=n)
            pred = gen.integers(0, phases, size=n)
            strict = phase_level_metrics(pred, truth, num_phases=phases)
            loose = relaxed_boundary_eval(pred, truth, num_phases=phases)
            assert loose.accuracy_pct >= strict.accuracy_pct
            assert loose.mean_jaccard_pct >= strict.mean_jaccard_pct - 1e-9

    def test_inputs_are_not_mutated(self) -> None:
        truth = _ints([0] * 20 + [1] * 20)
        pred = _ints([0] * 23 + [1] * 17)
        pred_copy = pred.copy()
        relax_predictions(pred, truth)
        assert np.array_equal(pred, pred_copy)

    def test_constant_truth_is_a_no_op(self) -> None:
        truth = _ints([3] * 30)
        pred = _ints([3] * 10 + [1] * 5 + [3] * 15)
        assert np.array_equal(relax_predictions(pred, truth), pred)

    def test_bad_window_rejected(self) -> None:
        truth = _ints([0, 1])
        with pytest.raises(ShapeError):
            relax_predictions(truth, truth, fps=0.0)
        with pytest.raises(ShapeError):
            relax_predictions(truth, truth, window_s=-1.0)
