"""Batch orchestration: source frames -> flow -> gate / encoding / stimuli
-> metrics, plus the scoring and statistics reports.

Output layout of :func:`run_pipeline` for a video ``<id>``::

    <out>/<id>/flow/flow_000000.flo ...     T-1 Middlebury files
    <out>/<id>/gate/frame_000000.png ...    smoothed masks, 8-bit gray
    <out>/<id>/encoded/frame_000000.png ... HSV motion video (RGB PNG)
    <out>/<id>/dots/frame_000000.png ...    random-dot stimulus, T frames
    <out>/<id>/noise/frame_000000.png ...   dense-noise stimulus, T frames
    <out>/<id>/metrics.txt                  key = value fidelity report
    <out>/run_manifest.json                 config hash, seeds, checksums
"""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as afv_io
from .core import FrameSequence, flow_magnitude, percentile
from .encoding import encode_hsv_video, reference_scales
from .errors import FrameIOError, OrderingError, ValidationError
from .farneback import FlowParams, estimate_flow, estimate_video_flow
from .gate import gate_video
from .metrics import (
    DENSE_NOISE, RANDOM_DOT, accuracy_by_condition, canonical_dataset, confusion_matrix,
    endpoint_error, friedman_test, paired_t_test, rm_anova, top1_accuracy, transfer_score,
    welch_t_test,
)
from .stimuli import simulate_dots, render_dots, synthesize_noise_video

log = logging.getLogger(__name__)

STAGES = ("flow", "gate", "encode", "synth-dots", "synth-noise", "metrics")
# stage -> (artifact directory it needs, stage that produces it)
_NEEDS = {
    "gate": [("flow", "flow")],
    "encode": [("flow", "flow")],
    "synth-dots": [("flow", "flow")],
    "synth-noise": [("flow", "flow")],
    "metrics": [("flow", "flow"), ("noise", "synth-noise")],
}
# pixels ignored at each border when scoring re-estimated flow
METRIC_MARGIN = 8


# -- scale collection -----------------------------------------------------

def frame_p95s(flows) -> list[float]:
    return [percentile(flow_magnitude(f), 0.95) for f in flows]


def collect_training_scale(manifest, params: FlowParams = FlowParams(),
                           pattern: str = afv_io.FRAME_PATTERN):
    """Mean over all training frames of the per-frame 95th-percentile flow
    magnitude.

    Returns ``(p_train, per_video)`` where ``per_video`` maps video id to
    ``(n_frames, mean_p95)``. Unreadable videos are skipped with a warning.
    """
    train = [e for e in manifest if e.split == "train"]
    if not train:
        raise ValidationError("manifest has no training videos")
    values: list[float] = []
    per_video = {}
    for entry in train:
        try:
            video = afv_io.load_frames(entry.source_path, pattern)
            flows = estimate_video_flow(video, params)
        except (FrameIOError, ValidationError) as exc:
            log.warning("skipping %s: %s", entry.video_id, exc)
            continue
        p95 = frame_p95s(flows)
        values.extend(p95)
        per_video[entry.video_id] = (len(p95), float(np.mean(p95)))
    if not values:
        raise FrameIOError("no training video could be read")
    return float(np.mean(values)), per_video


def scale_report(p_train: float, per_video: dict) -> dict:
    kv = {"p_train": p_train, "videos": len(per_video), "frames": sum(n for n, _ in per_video.values())}
    for vid, (n, mean) in per_video.items():
        kv[f"video.{vid}.frames"] = n
        kv[f"video.{vid}.mean_p95"] = mean
    return kv


def read_scale_report(path) -> float:
    try:
        kv = afv_io.parse_kv(Path(path).read_text())
    except OSError as exc:
        raise FrameIOError(f"cannot read scale report {path}: {exc}") from exc
    if "p_train" not in kv:
        raise ValidationError(f"{path}: no p_train entry")
    return float(kv["p_train"])


# -- per-video pipeline ---------------------------------------------------

def config_hash(cfg: afv_io.PipelineConfig) -> str:
    # worker count and paths do not change outputs
    canon = replace(cfg, workers=1, io=afv_io.IOConfig())
    return hashlib.sha256(afv_io.dump_config(canon).encode()).hexdigest()


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def check_stage_order(stages, video_dir: Path) -> None:
    """Raise :class:`OrderingError` if a stage's inputs are neither produced
    in this run nor already on disk."""
    for stage in stages:
        for artifact, producer in _NEEDS.get(stage, []):
            if producer in stages:
                continue
            if not (video_dir / artifact).is_dir() or not any((video_dir / artifact).iterdir()):
                raise OrderingError(
                    f"stage {stage!r} needs {video_dir / artifact} (run stage {producer!r} first)"
                )


def _video_metrics(vdir: Path, flows, cfg: afv_io.PipelineConfig) -> dict:
    noise = afv_io.load_frames(vdir / "noise")
    m = METRIC_MARGIN
    epes, angs = [], []
    for i, f in enumerate(flows):
        est = estimate_flow(noise.frames[i], noise.frames[i + 1], cfg.flow)
        h, w = f.shape[:2]
        mask = np.zeros((h, w))
        mask[m:h - m, m:w - m] = 1.0
        if mask.sum() == 0:
            mask[:] = 1.0
        e, a = endpoint_error(est, f, mask)
        epes.append(e)
        angs.append(a)
    kv = {
        "noise.reestimated_mean_epe": float(np.mean(epes)),
        "noise.reestimated_mean_angular_error": float(np.mean(angs)),
        "noise.frames": len(noise),
        "flow.fields": len(flows),
        "flow.mean_p95": float(np.mean(frame_p95s(flows))),
    }
    if (vdir / "dots").is_dir():
        dots = afv_io.load_frames(vdir / "dots")
        kv["dots.frames"] = len(dots)
        kv["dots.mean_lit_pixels"] = float((dots.frames > 0.5).sum(axis=(1, 2)).mean())
    return kv


def process_video(entry: afv_io.ManifestEntry, cfg: afv_io.PipelineConfig, stages, out_dir) -> dict:
    """Run the requested stages for one video; returns relative-path checksums."""
    vdir = Path(out_dir) / entry.video_id
    check_stage_order(stages, vdir)
    if "flow" in stages:
        video = afv_io.load_frames(entry.source_path, cfg.io.frame_pattern)
        flows = estimate_video_flow(video, cfg.flow)
        afv_io.write_flow_dir(vdir / "flow", flows)
    else:
        flows = afv_io.read_flow_dir(vdir / "flow")

    d_ts = reference_scales(flows, cfg.normalization) if {"gate", "encode"} & set(stages) else None
    masks = None
    if "gate" in stages:
        masks = gate_video(flows, d_ts, cfg.gate)
        afv_io.save_frames(FrameSequence(np.clip(np.stack(masks), 0, 1)), vdir / "gate")
    if "encode" in stages:
        encoded = encode_hsv_video(flows, cfg.normalization, gate=masks)
        afv_io.save_frames(encoded, vdir / "encoded")
    if "synth-dots" in stages:
        pops = simulate_dots(flows, cfg.dots.count, cfg.dots.lifetime, cfg.dots.seed)
        frames = np.stack([render_dots(p, radius=cfg.dots.radius) for p in pops])
        afv_io.save_frames(FrameSequence(frames), vdir / "dots")
    if "synth-noise" in stages:
        afv_io.save_frames(synthesize_noise_video(flows, cfg.noise.seed, interpolation=cfg.noise.interpolation), vdir / "noise")
    if "metrics" in stages:
        afv_io.atomic_write(vdir / "metrics.txt", afv_io.format_kv(_video_metrics(vdir, flows, cfg)).encode())

    sums = {}
    for p in sorted(vdir.rglob("*")):
        if p.is_file() and not p.name.startswith("."):
            sums[p.relative_to(vdir).as_posix()] = _sha256(p)
    return sums


def _run_one(args):
    return process_video(*args)


def run_pipeline(cfg: afv_io.PipelineConfig, manifest, stages, out_dir) -> dict:
    """Run ``stages`` for every manifest video and write ``run_manifest.json``.

    Videos are processed by a pool of ``cfg.workers`` processes; the run
    manifest is independent of the worker count.
    """
    stages = list(stages)
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise ValidationError(f"unknown stages {unknown}; choose from {STAGES}")
    out_dir = Path(out_dir)
    for entry in manifest:
        check_stage_order(stages, out_dir / entry.video_id)
    jobs = [(e, cfg, stages, out_dir) for e in manifest]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    videos = {}
    for entry, sums in zip(manifest, results):
        digest = hashlib.sha256("".join(f"{k}:{v}\n" for k, v in sums.items()).encode()).hexdigest()
        videos[entry.video_id] = {"checksum": digest, "files": sums}
    run = {
        "config_hash": config_hash(cfg),
        "stages": [s for s in STAGES if s in stages],
        "seeds": {"dots": cfg.dots.seed, "noise": cfg.noise.seed},
        "provenance": cfg.provenance,
        "videos": videos,
    }
    afv_io.atomic_write(out_dir / "run_manifest.json", json.dumps(run, indent=2, sort_keys=True).encode())
    return run


# -- reports --------------------------------------------------------------

def score_predictions(predictions, manifest, n_classes: int | None = None):
    """Per-dataset top-1, confusion matrices and Transfer Score.

    Returns ``(kv, text)``.
    """
    by_id = {e.video_id: e for e in manifest}
    if n_classes is None:
        n_classes = 1 + max(e.class_label for e in manifest)
    grouped: dict[str, list] = {}
    for i, rec in enumerate(predictions):
        if rec.video_id not in by_id:
            raise ValidationError(f"prediction {i + 1}: unknown video_id {rec.video_id!r}")
        for lab in (rec.true_label, rec.predicted_label):
            if not 0 <= lab < n_classes:
                raise ValidationError(f"prediction {i + 1}: label {lab} outside [0, {n_classes})")
        if rec.true_label != by_id[rec.video_id].class_label:
            raise ValidationError(
                f"prediction {i + 1}: true_label {rec.true_label} disagrees with manifest "
                f"label {by_id[rec.video_id].class_label} for {rec.video_id!r}"
            )
        grouped.setdefault(rec.dataset, []).append(rec)

    kv: dict = {}
    lines = []
    accs = {}
    for ds in sorted(grouped):
        recs = grouped[ds]
        acc = top1_accuracy(recs)
        accs[ds] = acc
        cm = confusion_matrix(recs, n_classes)
        kv[f"{ds}.n"] = len(recs)
        kv[f"{ds}.top1"] = acc
        kv[f"{ds}.confusion"] = ";".join(",".join(str(c) for c in row) for row in cm)
        lines.append(f"{ds}: top-1 = {acc:.4f} ({len(recs)} videos, chance = {1 / n_classes:.2f})")
        for i, row in enumerate(cm):
            lines.append("    " + " ".join(f"{c:5d}" for c in row) + f"   <- true {i}")
    if DENSE_NOISE in accs and RANDOM_DOT in accs:
        ts = transfer_score(accs[DENSE_NOISE], accs[RANDOM_DOT])
        kv["transfer_score"] = ts
        lines.append(f"Transfer Score = {ts:.4f}")
    return kv, "\n".join(lines) + "\n"


def _default_pair(conditions):
    canon = {}
    for c in conditions:
        try:
            canon[canonical_dataset(c)] = c
        except ValidationError:
            pass
    if DENSE_NOISE in canon and RANDOM_DOT in canon:
        return canon[DENSE_NOISE], canon[RANDOM_DOT]
    if len(conditions) >= 2:
        return conditions[-2], conditions[-1]
    return None


def _fmt_p(p: float) -> str:
    return f"{p:.4f}" if p >= 1e-4 else f"{p:.2e}"


def analyze_responses(rows, pair=None):
    """Accuracy table, repeated-measures ANOVA, Friedman test and, when rows
    carry a ``group`` (block order), per-group paired t and a Welch t on the
    paired differences. Returns ``(kv, text)``.
    """
    rows = list(rows)
    acc = accuracy_by_condition((r.participant, r.condition, r.correct) for r in rows)
    kv: dict = {"participants": len(acc.participants), "conditions": ",".join(acc.conditions)}
    lines = []
    for j, cond in enumerate(acc.conditions):
        kv[f"accuracy.{cond}.mean"] = float(acc.mean[j])
        kv[f"accuracy.{cond}.sd"] = float(acc.sd[j])
        lines.append(f"{cond}: {acc.mean[j]:.4f} ± {acc.sd[j]:.4f}")

    an = rm_anova(acc.matrix)
    kv.update({"anova.F": an.F, "anova.df1": an.df1, "anova.df2": an.df2, "anova.p": an.p,
               "anova.partial_eta_sq": an.partial_eta_sq})
    lines.append(f"repeated-measures ANOVA: F({an.df1},{an.df2}) = {an.F:.2f}, p = {_fmt_p(an.p)}, "
                 f"partial eta^2 = {an.partial_eta_sq:.3f}")
    fr = friedman_test(acc.matrix)
    kv.update({"friedman.chi2": fr.statistic, "friedman.df": fr.df, "friedman.p": fr.p})
    lines.append(f"Friedman: chi2({fr.df}) = {fr.statistic:.2f}, p = {_fmt_p(fr.p)}")

    groups = {}
    for r in rows:
        if r.group is not None:
            groups.setdefault(r.participant, r.group)
    pair = pair or _default_pair(acc.conditions)
    if groups and pair:
        missing = [p for p in acc.participants if p not in groups]
        if missing:
            raise ValidationError(f"group column missing for participants {missing}")
        a, b = (acc.conditions.index(c) for c in pair)
        diffs = {}
        for g in sorted(set(groups.values())):
            idx = [i for i, p in enumerate(acc.participants) if groups[p] == g]
            x, y = acc.matrix[idx, a], acc.matrix[idx, b]
            t = paired_t_test(x, y)
            diffs[g] = x - y
            kv.update({f"paired.{g}.t": t.statistic, f"paired.{g}.df": t.df, f"paired.{g}.p": t.p})
            lines.append(f"group {g}: {pair[0]} {x.mean():.4f} ± {x.std(ddof=1):.4f} vs {pair[1]} "
                         f"{y.mean():.4f} ± {y.std(ddof=1):.4f}, paired t({t.df}) = {t.statistic:.2f}, "
                         f"p = {_fmt_p(t.p)}")
        if len(diffs) == 2:
            g1, g2 = sorted(diffs)
            w = welch_t_test(diffs[g1], diffs[g2])
            kv.update({"welch.t": w.statistic, "welch.df": w.df, "welch.p": w.p})
            lines.append(f"{pair[0]} - {pair[1]} difference, {g1} vs {g2}: Welch t = {w.statistic:.3f}, "
                         f"df = {w.df:.2f}, p = {_fmt_p(w.p)}")
    return kv, "\n".join(lines) + "\n"
