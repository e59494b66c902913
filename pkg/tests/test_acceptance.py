"""Acceptance gate: ten go/no-go criteria, one test (and one line) each.

Every test checks a single release criterion at its stated tolerance and
wall-clock budget.  Each failure is a real defect or a real performance
regression — nothing here is a smoke test.
"""

from __future__ import annotations

import contextlib
import math
import time

import numpy as np
import pytest

from surgphase import bench
from surgphase.cli import main
from surgphase.config import ModelConfig, SparseConfig, config_to_text
from surgphase.io_formats import read_labels, read_predictions
from surgphase.metrics import phase_level_metrics, relaxed_boundary_eval, video_accuracy
from surgphase.model import replay_outputs
from surgphase.seqtypes import FeatureSequence
from surgphase.streaming import checkpoint, init_stream, push_frame, restore
from surgphase.transition import (
    PhaseTrack,
    SamplerConfig,
    build_transition_map,
    clip_indices,
    joint_loss,
)
from surgphase.verify import (
    check_dense_vs_naive,
    check_sparse_degenerate,
    check_sparse_rank,
    format_reports,
)
from surgphase.weights import synth_weights


@contextlib.contextmanager
def _budget(seconds: float):
    started = time.perf_counter()
    yield
    elapsed = time.perf_counter() - started
    assert elapsed < seconds, f"exceeded the {seconds:.0f}s budget: {elapsed:.1f}s"


def _assert_all_pass(reports, tolerance: float) -> None:
    failed = [r for r in reports if not r.passed]
    assert not failed, format_reports(failed)
    assert all(r.tolerance <= tolerance for r in reports)


def test_criterion_01_dense_attention_matches_brute_force() -> None:
    """100 random cases (L <= 64, width <= 32), dense vs two-loop naive @ 1e-9."""
    with _budget(10.0):
        reports = check_dense_vs_naive(cases=100)
        assert len(reports) == 100
        _assert_all_pass(reports, 1e-9)


def test_criterion_02_sparse_degenerate_and_exact_ranking() -> None:
    """100 full-budget sparse-vs-dense cases @ 1e-9 plus 100 exact rankings."""
    with _budget(30.0):
        degenerate = check_sparse_degenerate(cases=100)
        ranking = check_sparse_rank(cases=100)
        assert len(degenerate) == 100 and len(ranking) == 100
        _assert_all_pass(degenerate, 1e-9)
        _assert_all_pass(ranking, 1e-9)


def test_criterion_03_complexity_slopes() -> None:
    """Log-log cost slope: dense >= 1.8, sampled-sparse <= 1.45, L up to 8192."""
    with _budget(600.0):
        lengths = bench.default_lengths()
        assert lengths[0] == 512 and lengths[-1] == 8192
        dense = bench.run_bench("dense", lengths, repeats=5)
        sparse = bench.run_bench("sparse", lengths, repeats=5)
        assert dense.slope >= 1.8, f"dense slope {dense.slope:.3f}"
        assert sparse.slope <= 1.45, f"sparse slope {sparse.slope:.3f}"


def test_criterion_04_transition_heatmap_closed_forms() -> None:
    """Boundary bump: exact 1 at b, exp(-1/2) at b+12, exact 0 at b-10."""
    with _budget(1.0):
        labels = np.zeros(80, dtype=np.int64)
        labels[30:] = 1
        heat = build_transition_map(PhaseTrack(labels)).values
        assert heat[30] == 1.0
        assert abs(heat[42] - math.exp(-0.5)) <= 1e-9
        assert heat[20] == 0.0
        constant = build_transition_map(PhaseTrack(np.full(60, 3))).values
        assert (constant == 0.0).all()


def test_criterion_05_joint_loss_hand_values() -> None:
    """Uniform logits + half-offset heat = 1/2 + ln 2; confident fit ~ 0."""
    with _budget(1.0):
        track = PhaseTrack(np.array([0, 1, 1, 0]))
        target = build_transition_map(track)
        loss = joint_loss(np.zeros((4, 2)), target.values - 0.5, track, target)
        assert abs(loss - (0.5 + math.log(2.0))) <= 1e-9

        confident = np.full((4, 2), -50.0)
        confident[np.arange(4), track.labels] = 50.0
        assert joint_loss(confident, target.values.copy(), track, target) < 1e-6


def test_criterion_06_clip_schedule_closed_form() -> None:
    """Frame 100 in a phase since 10, 30 per clip: stride 3, span 13..100."""
    with _budget(1.0):
        got = clip_indices(100, 10, SamplerConfig(alpha=30))
        assert got.shape == (30,)
        assert got[0] == 13 and got[-1] == 100
        assert (np.diff(got) == 3).all()


def test_criterion_07_streaming_equals_batch_with_checkpointing(mid_cfg, mid_store) -> None:
    """20 x 300-frame streams: live == replay bit-for-bit, resume mid-stream."""
    with _budget(300.0):
        frames = 300
        for seed in range(20):
            rows = np.random.default_rng(seed).normal(size=(frames, mid_cfg.feature_dim))
            state = init_stream(mid_store, mid_cfg, seed)
            live = []
            restored = None
            for i, row in enumerate(rows):
                live.append(push_frame(state, row))
                if i + 1 == 150:
                    restored = restore(checkpoint(state))
            assert restored is not None and restored.frame_count == 150
            resumed = [push_frame(restored, row) for row in rows[150:]]

            prefix = FeatureSequence(role="e", start_frame=1, data=rows)
            offline = replay_outputs(prefix, mid_store, mid_cfg, seed)
            assert all(a.bit_equal(b) for a, b in zip(live, offline))
            assert all(a.bit_equal(b) for a, b in zip(resumed, live[150:]))
            assert all(a.bit_equal(b) for a, b in zip(restored.outputs, live))

        # Full-size spot check: the default configuration on a short clip.
        big = ModelConfig()
        big_store = synth_weights(big, 1)
        rows = np.random.default_rng(404).normal(size=(8, big.feature_dim))
        state = init_stream(big_store, big, 11)
        live = [push_frame(state, row) for row in rows]
        offline = replay_outputs(
            FeatureSequence(role="e", start_frame=1, data=rows), big_store, big, 11
        )
        assert all(a.bit_equal(b) for a, b in zip(live, offline))


def test_criterion_08_more_frames_never_revise_old_outputs(toy_cfg, toy_store) -> None:
    """Pushing 50 extra frames leaves the first 80 outputs bitwise unchanged."""
    with _budget(60.0):
        gen = np.random.default_rng(7)
        first = gen.normal(size=(80, toy_cfg.feature_dim))
        extra = gen.normal(size=(50, toy_cfg.feature_dim))

        state = init_stream(toy_store, toy_cfg, 2)
        for row in first:
            push_frame(state, row)
        frozen = [
            (o.frame, o.logits.tobytes(), o.heat, o.predicted_phase) for o in state.outputs
        ]
        for row in extra:
            push_frame(state, row)
        later = [
            (o.frame, o.logits.tobytes(), o.heat, o.predicted_phase)
            for o in state.outputs[:80]
        ]
        assert later == frozen
        assert state.frame_count == 130


def test_criterion_09_metrics_hand_cases_and_jaccard_bound() -> None:
    """Exact hand-scored cases; Jaccard <= min(precision, recall) on 1000 pairs."""
    with _budget(30.0):
        assert video_accuracy(
            np.array([1, 1, 2, 2]), np.array([1, 2, 2, 2])
        ) == 75.0
        report = phase_level_metrics(np.array([0, 0, 1]), np.array([0, 1, 1]), 2)
        by_phase = {s.phase: s for s in report.per_phase}
        assert (by_phase[0].precision_pct, by_phase[0].recall_pct) == (50.0, 100.0)
        assert (by_phase[1].precision_pct, by_phase[1].recall_pct) == (100.0, 50.0)
        assert by_phase[0].jaccard_pct == by_phase[1].jaccard_pct == 50.0

        truth = np.array([0] * 20 + [1] * 20)
        lagging = np.array([0] * 23 + [1] * 17)  # wrong for 3 frames after the switch
        assert video_accuracy(lagging, truth) < 100.0
        assert relaxed_boundary_eval(lagging, truth, 2).accuracy_pct == 100.0
        far = np.concatenate([np.array([0] * 40 + [1] * 40)])
        far_pred = far.copy()
        far_pred[10] = 1  # 30 frames from the only transition
        assert (
            relaxed_boundary_eval(far_pred, far, 2).accuracy_pct
            == video_accuracy(far_pred, far)
        )

        gen = np.random.default_rng(3)
        for _ in range(1000):
            n = int(gen.integers(1, 200))
            phases = int(gen.integers(1, 8))
            result = phase_level_metrics(
                gen.integers(0, phases, size=n),
                gen.integers(0, phases, size=n),
                num_phases=phases,
            )
            for score in result.per_phase:
                assert score.jaccard_pct <= min(score.precision_pct, score.recall_pct) + 1e-12


def test_criterion_10_end_to_end_corpus_beats_chance(tmp_path, capsys) -> None:
    """7-phase CLI corpus: fitted head beats 1/7 chance on every video."""
    with _budget(120.0):
        cfg = ModelConfig(
            num_phases=7,
            feature_dim=32,
            dim_short=16,
            dim_long=8,
            dim_global=4,
            window_short=16,
            window_long=48,
            num_heads=4,
            ff_multiplier=2.0,
            sparse=SparseConfig(seed=0),
        )
        cfg_path = tmp_path / "model.config.txt"
        cfg_path.write_text(config_to_text(cfg))
        corpus = tmp_path / "corpus"
        assert main([
            "gen", "--out-dir", str(corpus), "--seed", "42", "--videos", "4",
            "--frames", "150", "--separation", "6.0", "--noise", "0.8",
            "--config", str(cfg_path), "--fit-head",
        ]) == 0

        for index in range(4):
            pred = tmp_path / f"pred{index}.csv"
            assert main([
                "infer",
                "--features", str(corpus / f"video{index:02d}.features.bin"),
                "--weights", str(corpus / "model.weights.bin"),
                "--config", str(cfg_path), "--seed", "42", "--out", str(pred),
            ]) == 0
            capsys.readouterr()
            assert main([
                "eval", "--pred", str(pred),
                "--gt", str(corpus / f"video{index:02d}.labels.csv"),
                "--phases", "7",
            ]) == 0
            text = capsys.readouterr().out
            accuracy = float(
                next(l for l in text.splitlines() if l.startswith("accuracy_pct="))
                .split("=")[1]
            )
            assert accuracy > 100.0 / 7.0, f"video {index}: {accuracy:.2f}%"

            # Cross-check the CLI report against the library on raw files.
            _, phases, _, _ = read_predictions(pred)
            truth = read_labels(corpus / f"video{index:02d}.labels.csv")
            assert abs(video_accuracy(phases, truth) - accuracy) < 5e-5
