"""Command-line interface.

Subcommands:

* ``gen``     — synthesize a corpus (features, labels, weights, config)
* ``infer``   — stream a feature file through the stack, write per-frame CSV
* ``eval``    — score predictions against ground-truth labels
* ``heatmap`` — write the transition-proximity target for a label file
* ``bench``   — time dense vs sparse attention and fit complexity slopes
* ``verify``  — run the brute-force verification suites
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .config import ModelConfig, config_from_text, config_to_text
from .errors import EngineError
from .io_formats import (
    read_features,
    read_labels,
    read_predictions,
    read_weights,
    write_features,
    write_labels,
    write_predictions,
    write_weights,
)
from .metrics import phase_level_metrics, relaxed_boundary_eval
from .streaming import init_stream, push_frame
from .synth import fit_logit_head, synth_video
from .transition import PhaseTrack, build_transition_map
from .verify import format_reports, run_all
from .weights import synth_weights


def _load_config(path: str | None) -> ModelConfig:
    if path is None:
        return ModelConfig()
    return config_from_text(Path(path).read_text())


def _cmd_gen(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    store = synth_weights(cfg, seed=args.seed)
    videos = []
    for index in range(args.videos):
        features, labels = synth_video(
            args.seed + 1000 * (index + 1), args.frames, cfg,
            profile=args.profile, separation=args.separation, noise=args.noise,
            direction_seed=args.seed,
        )
        videos.append((features, labels))

    if args.fit_head:
        features, labels = videos[0]
        store = fit_logit_head(store, cfg, features, labels, seed_root=args.seed)

    for index, (features, labels) in enumerate(videos):
        write_features(out_dir / f"video{index:02d}.features.bin", features)
        write_labels(out_dir / f"video{index:02d}.labels.csv", labels)
    write_weights(out_dir / "model.weights.bin", store)
    (out_dir / "model.config.txt").write_text(config_to_text(cfg))
    print(f"wrote {args.videos} video(s) of {args.frames} frames to {out_dir}")
    return 0


def _cmd_infer(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    features = read_features(args.features)
    store = read_weights(args.weights)
    stream = init_stream(store, cfg, seed_root=args.seed)
    for row in features:
        push_frame(stream, row)
    write_predictions(args.out, stream.outputs)
    print(f"wrote {len(stream.outputs)} prediction rows to {args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    _, phases, _, _ = read_predictions(args.pred)
    truth = read_labels(args.gt)
    num_phases = args.phases
    if num_phases is None:
        num_phases = int(max(phases.max(), truth.max())) + 1
    if args.relaxed:
        report = relaxed_boundary_eval(
            phases, truth, num_phases, fps=args.fps, window_s=args.window_s
        )
    else:
        report = phase_level_metrics(phases, truth, num_phases)
    print(f"relaxed={'yes' if report.relaxed else 'no'}")
    print(f"accuracy_pct={report.accuracy_pct:.4f}")
    print(f"mean_precision_pct={report.mean_precision_pct:.4f}")
    print(f"mean_recall_pct={report.mean_recall_pct:.4f}")
    print(f"mean_jaccard_pct={report.mean_jaccard_pct:.4f}")
    for score in report.per_phase:
        print(
            f"phase{score.phase}_precision_pct={score.precision_pct:.4f} "
            f"phase{score.phase}_recall_pct={score.recall_pct:.4f} "
            f"phase{score.phase}_jaccard_pct={score.jaccard_pct:.4f}"
        )
    return 0


def _cmd_heatmap(args: argparse.Namespace) -> int:
    labels = read_labels(args.labels)
    heat = build_transition_map(
        PhaseTrack(labels), sigma_left=args.sigma_l, sigma_right=args.sigma_r
    )
    with open(args.out, "w", newline="") as handle:
        handle.write("frame,heat\n")
        for i, value in enumerate(heat.values, start=1):
            handle.write(f"{i},{value:.9f}\n")
    print(f"wrote {len(heat.values)} heat rows to {args.out}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    lengths = (
        [int(piece) for piece in args.lengths.split(",")]
        if args.lengths
        else bench_mod.default_lengths()
    )
    result = bench_mod.run_bench(
        args.mode, lengths, repeats=args.repeats, dim=args.dim,
        heads=args.heads, seed=args.seed,
    )
    print(bench_mod.format_result(result))
    if args.out:
        with open(args.out, "w", newline="") as handle:
            handle.write("length,median_seconds\n")
            for point in result.points:
                handle.write(f"{point.length},{point.median_seconds:.9f}\n")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    reports = run_all(quick=args.quick)
    print(format_reports(reports))
    failed = sum(1 for report in reports if not report.passed)
    if failed:
        print(f"{failed} case(s) FAILED")
        return 1
    print(f"all {len(reports)} cases passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surgphase",
        description="Long-video temporal attention engine for online phase recognition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="synthesize a corpus")
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--videos", type=int, default=1)
    gen.add_argument("--frames", type=int, default=300)
    gen.add_argument("--profile", choices=("linear", "recurring"), default="linear")
    gen.add_argument("--separation", type=float, default=4.0)
    gen.add_argument("--noise", type=float, default=1.0)
    gen.add_argument("--config", default=None, help="config text file (defaults to full size)")
    gen.add_argument("--fit-head", action="store_true", help="fit the phase head on video 0")
    gen.set_defaults(func=_cmd_gen)

    infer = sub.add_parser("infer", help="stream features through the stack")
    infer.add_argument("--features", required=True)
    infer.add_argument("--weights", required=True)
    infer.add_argument("--out", required=True)
    infer.add_argument("--config", default=None)
    infer.add_argument("--seed", type=int, default=0)
    infer.set_defaults(func=_cmd_infer)

    ev = sub.add_parser("eval", help="score predictions against labels")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--relaxed", action="store_true")
    ev.add_argument("--phases", type=int, default=None)
    ev.add_argument("--fps", type=float, default=1.0)
    ev.add_argument("--window-s", type=float, default=10.0)
    ev.set_defaults(func=_cmd_eval)

    heat = sub.add_parser("heatmap", help="transition-proximity target for labels")
    heat.add_argument("--labels", required=True)
    heat.add_argument("--out", required=True)
    heat.add_argument("--sigma-l", type=float, default=3.0)
    heat.add_argument("--sigma-r", type=float, default=12.0)
    heat.set_defaults(func=_cmd_heatmap)

    bench = sub.add_parser("bench", help="time attention paths, fit slopes")
    bench.add_argument("--mode", choices=bench_mod.MODES, required=True)
    bench.add_argument("--lengths", default=None, help="comma-separated, e.g. 512,1024,2048")
    bench.add_argument("--repeats", type=int, default=5)
    bench.add_argument("--dim", type=int, default=64)
    bench.add_argument("--heads", type=int, default=4)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", default=None, help="optional CSV of timings")
    bench.set_defaults(func=_cmd_bench)

    ver = sub.add_parser("verify", help="run brute-force verification suites")
    ver.add_argument("--quick", action="store_true")
    ver.set_defaults(func=_cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
