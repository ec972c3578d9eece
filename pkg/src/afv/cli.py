"""``afv`` command line.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 degenerate
statistics.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import io as afv_io
from . import pipeline
from .encoding import encode_hsv_video
from .errors import AfvError
from .farneback import estimate_video_flow
from .stimuli import synthesize_dot_video, synthesize_noise_video


def _config(path) -> afv_io.PipelineConfig:
    return afv_io.load_config(path) if path else afv_io.PipelineConfig()


def _emit(kv: dict, text: str, kv_path) -> None:
    sys.stdout.write(text)
    if kv_path:
        afv_io.atomic_write(Path(kv_path), afv_io.format_kv(kv).encode())


def cmd_flow(args):
    cfg = _config(args.params)
    video = afv_io.load_frames(args.inp, cfg.io.frame_pattern)
    flows = estimate_video_flow(video, cfg.flow)
    afv_io.write_flow_dir(args.out, flows)
    print(f"wrote {len(flows)} flow fields to {args.out}")


def cmd_encode(args):
    cfg = _config(args.config)
    norm = cfg.normalization
    if args.scale_report:
        norm = replace(norm, p_train=pipeline.read_scale_report(args.scale_report))
    flows = afv_io.read_flow_dir(args.flows)
    video = encode_hsv_video(flows, norm, gate=cfg.gate if args.gate else None)
    afv_io.save_frames(video, args.out)
    if args.raw:
        afv_io.save_raw_video(video, args.raw)
    print(f"wrote {len(video)} encoded frames to {args.out}")


def cmd_synth(args):
    cfg = _config(args.config)
    flows = afv_io.read_flow_dir(args.flows)
    if args.kind == "dots":
        seed = cfg.dots.seed if args.seed is None else args.seed
        video = synthesize_dot_video(flows, cfg.dots.count, cfg.dots.lifetime, seed, cfg.dots.radius)
    else:
        seed = cfg.noise.seed if args.seed is None else args.seed
        video = synthesize_noise_video(flows, seed, interpolation=cfg.noise.interpolation)
    afv_io.save_frames(video, args.out)
    print(f"wrote {len(video)} {args.kind} frames to {args.out}")


def cmd_scale(args):
    cfg = _config(args.params)
    manifest = afv_io.read_manifest(args.manifest)
    p_train, per_video = pipeline.collect_training_scale(manifest, cfg.flow, cfg.io.frame_pattern)
    kv = pipeline.scale_report(p_train, per_video)
    afv_io.atomic_write(Path(args.out), afv_io.format_kv(kv).encode())
    print(f"p_train = {p_train:.6f} over {kv['frames']} frames of {kv['videos']} videos")


def cmd_run(args):
    cfg = _config(args.config)
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    manifest = afv_io.read_manifest(args.manifest)
    stages = args.stages.split(",")
    run = pipeline.run_pipeline(cfg, manifest, stages, args.out)
    for vid, info in run["videos"].items():
        print(f"{vid} {info['checksum']}")


def cmd_score(args):
    preds = afv_io.read_predictions(args.predictions)
    manifest = afv_io.read_manifest(args.manifest)
    kv, text = pipeline.score_predictions(preds, manifest, args.classes)
    _emit(kv, text, args.kv)


def cmd_stats(args):
    rows = afv_io.read_responses(args.responses)
    pair = tuple(args.pair.split(",")) if args.pair else None
    kv, text = pipeline.analyze_responses(rows, pair)
    _emit(kv, text, args.kv)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="afv", description="Appearance-free video toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("flow", help="estimate flow for a PNG frame directory")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--params", help="config file ([flow] section is used)")
    s.set_defaults(func=cmd_flow)

    s = sub.add_parser("encode", help="render .flo files as an HSV motion video")
    s.add_argument("--flows", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--gate", action="store_true", help="apply the coherence gate")
    s.add_argument("--scale-report", help="output of 'afv scale collect' providing p_train")
    s.add_argument("--config")
    s.add_argument("--raw", help="also write a uint8 BGR .npy video here")
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("synth", help="synthesize an appearance-free stimulus")
    s.add_argument("kind", choices=["dots", "noise"])
    s.add_argument("--flows", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--config")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("scale", help="training-set normalization scale")
    s.add_argument("action", choices=["collect"])
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--params")
    s.set_defaults(func=cmd_scale)

    s = sub.add_parser("run", help="run pipeline stages over a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--stages", default="flow,gate,encode,synth-dots,synth-noise")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("score", help="score classifier predictions")
    s.add_argument("--predictions", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--classes", type=int)
    s.add_argument("--kv", help="write the key-value report here")
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("stats", help="behavioural statistics from a response log")
    s.add_argument("--responses", required=True)
    s.add_argument("--pair", help="two conditions for the paired/Welch tests, comma separated")
    s.add_argument("--kv", help="write the key-value report here")
    s.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except AfvError as exc:
        print(f"afv: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"afv: I/O error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
