"""Command-line front end: ``preprocess``, ``evaluate``, ``validate`` and
``fit-pca`` subcommands binding manifest -> preprocess -> augment -> tensor
output, plus the scorer.

Exit codes are a stable contract: 0 success, 1 validation or scoring failure,
2 I/O failure. Log verbosity comes from the ``CONVAUG_LOG`` environment
variable (``DEBUG``/``INFO``/``WARNING``/``ERROR``).
"""

from __future__ import annotations

import argparse
import functools
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .augment import AugmentPipeline, apply_pipeline, fit_pca, load_pipeline_config
from .core import write_array_blob
from .imageio import ImageFormatError, read_image
from .manifest import (
    SPLITS,
    TASKS,
    ManifestEntry,
    enumerate_views,
    parse_manifest,
    split_counts,
)
from .metrics import ScoringError, UndefinedMetricError, score_submission
from .preprocess import (
    CropSpec,
    FaceBox,
    PipelineCounters,
    SamplingPolicy,
    concat_views,
    discover_clip,
    face_crop,
    load_face_sidecar,
    sample_frames,
    strip_crop,
)

__all__ = ["main", "build_parser", "JobConfig"]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2

FACE_SIZE = 224

# CLI task names -> canonical manifest task tokens
CLI_TASKS = {"bodily": "bodily", "eye": "eye_contact", "speaker": "next_speaker"}

# per-task (crop, sampling) defaults, overridable via --crop / --sample
_TASK_DEFAULTS = {
    "bodily": (CropSpec(200, 200), SamplingPolicy.uniform_n(64)),
    "eye_contact": (CropSpec(0, 0), SamplingPolicy.last_one()),
    "next_speaker": (CropSpec(0, 0), SamplingPolicy.last_one()),
}


@dataclass(frozen=True)
class JobConfig:
    """Everything one preprocessing run needs; picklable for worker pools."""

    manifest_path: str
    task: str
    split: str
    frames_root: str
    out_root: str
    crop: CropSpec
    policy: SamplingPolicy
    aug_config: Optional[str] = None
    aug_splits: tuple[str, ...] = ("train",)
    seed: Optional[int] = None
    workers: int = 1
    allow_partial: bool = False

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError("worker count must be >= 1")
        if Path(self.out_root).resolve() == Path(self.frames_root).resolve():
            raise ValueError("output root must be distinct from the input frame root")


@dataclass(frozen=True)
class SampleResult:
    sample_id: str
    ok: bool
    message: str = ""
    emitted: int = 0
    black_filled: int = 0
    empty_boxes: int = 0


_PIPELINE_CACHE: dict[tuple[str, Optional[int]], AugmentPipeline] = {}


def _pipeline_for(config: JobConfig) -> Optional[AugmentPipeline]:
    if config.aug_config is None:
        return None
    key = (config.aug_config, config.seed)
    if key not in _PIPELINE_CACHE:
        _PIPELINE_CACHE[key] = load_pipeline_config(config.aug_config, seed_override=config.seed)
    return _PIPELINE_CACHE[key]


def _write_blob(path: Path, arr: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        write_array_blob(arr, fh)


def _emit_bodily(
    config: JobConfig,
    entry: ManifestEntry,
    pipeline: Optional[AugmentPipeline],
    out_dir: Path,
) -> SampleResult:
    views = enumerate_views(entry)
    if len(views) != 1:
        raise ValueError(f"bodily sample needs exactly 1 view, has {len(views)}")
    tag, rel = views[0]
    clip = discover_clip(entry.sample_id, tag, Path(config.frames_root) / rel)
    frames = []
    for idx in sample_frames(clip, config.policy):
        img = strip_crop(read_image(clip.frames[idx]), config.crop)
        if pipeline is not None:
            img = apply_pipeline(img, pipeline, entry.sample_id)
        frames.append(img.data)
    _write_blob(out_dir / f"{entry.sample_id}.ctns", np.stack(frames, axis=0))
    return SampleResult(entry.sample_id, ok=True, emitted=1)


def _emit_eye(
    config: JobConfig,
    entry: ManifestEntry,
    pipeline: Optional[AugmentPipeline],
    out_dir: Path,
) -> SampleResult:
    # Sidecar boxes are in source-image pixels, so no strip crop here; the
    # eye task rejects nonzero margins up front in cmd_preprocess.
    tag, rel = enumerate_views(entry)[0]
    clip_dir = Path(config.frames_root) / rel
    clip = discover_clip(entry.sample_id, tag, clip_dir)
    sidecar = clip_dir / "faces.csv"
    if sidecar.is_file():
        boxes = load_face_sidecar(sidecar)
    else:
        logger.warning("%s: no faces.csv in %s, treating all frames as undetected",
                       entry.sample_id, clip_dir)
        boxes = {}
    counters = PipelineCounters()
    indices = sample_frames(clip, config.policy)
    expanded = len(indices) > 1
    emitted = 0
    for idx in indices:
        img = read_image(clip.frames[idx])
        box = boxes.get(idx) or FaceBox(idx, detected=False)
        face = face_crop(img, box, FACE_SIZE, counters)
        # each expanded frame is an independent sample with its own identity
        blob_id = f"{entry.sample_id}_f{idx:06d}" if expanded else entry.sample_id
        if pipeline is not None:
            face = apply_pipeline(face, pipeline, blob_id)
        _write_blob(out_dir / f"{blob_id}.ctns", face.data)
        emitted += 1
    return SampleResult(
        entry.sample_id,
        ok=True,
        emitted=emitted,
        black_filled=counters.black_filled,
        empty_boxes=counters.empty_boxes,
    )


def _emit_speaker(
    config: JobConfig,
    entry: ManifestEntry,
    pipeline: Optional[AugmentPipeline],
    out_dir: Path,
) -> SampleResult:
    frames = []
    for tag, rel in enumerate_views(entry):
        clip = discover_clip(entry.sample_id, tag, Path(config.frames_root) / rel)
        idx = sample_frames(clip, config.policy)[0]
        img = strip_crop(read_image(clip.frames[idx]), config.crop)
        if pipeline is not None:
            img = apply_pipeline(img, pipeline, entry.sample_id)
        frames.append((tag, img))
    _write_blob(out_dir / f"{entry.sample_id}.ctns", concat_views(frames))
    return SampleResult(entry.sample_id, ok=True, emitted=1)


def _process_entry(config: JobConfig, entry: ManifestEntry) -> SampleResult:
    """Process one manifest entry end to end; never raises, reports instead."""
    out_dir = Path(config.out_root) / entry.task / entry.split
    try:
        pipeline = (
            _pipeline_for(config) if entry.split in config.aug_splits else None
        )
        if entry.task == "bodily":
            return _emit_bodily(config, entry, pipeline, out_dir)
        if entry.task == "eye_contact":
            return _emit_eye(config, entry, pipeline, out_dir)
        return _emit_speaker(config, entry, pipeline, out_dir)
    except (OSError, ImageFormatError, ValueError) as exc:
        return SampleResult(entry.sample_id, ok=False, message=str(exc))


def cmd_preprocess(config: JobConfig) -> int:
    try:
        entries, diagnostics = parse_manifest(config.manifest_path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if diagnostics:
        for d in diagnostics:
            print(str(d), file=sys.stderr)
        return EXIT_INVALID
    if config.aug_config is not None:
        try:
            _pipeline_for(config)  # fail fast on a bad config
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        except (ValueError, yaml.YAMLError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID

    selected = [e for e in entries if e.task == config.task and e.split == config.split]
    worker = functools.partial(_process_entry, config)
    if config.workers == 1 or len(selected) <= 1:
        results = [worker(e) for e in selected]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(worker, selected))

    processed = sum(1 for r in results if r.ok)
    emitted = sum(r.emitted for r in results)
    black_filled = sum(r.black_filled for r in results)
    empty_boxes = sum(r.empty_boxes for r in results)
    skipped = [r for r in results if not r.ok]
    for r in skipped:
        print(f"skip {r.sample_id}: {r.message}", file=sys.stderr)
    print(
        f"processed={processed} emitted={emitted} skipped={len(skipped)} "
        f"black_filled={black_filled} empty_boxes={empty_boxes}"
    )
    if skipped and not config.allow_partial:
        return EXIT_IO
    return EXIT_OK


def cmd_evaluate(
    manifest_path: str, predictions_path: str, task: str, split: str, out: Optional[str]
) -> int:
    try:
        entries, diagnostics = parse_manifest(manifest_path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if diagnostics:
        for d in diagnostics:
            print(str(d), file=sys.stderr)
        return EXIT_INVALID
    selected = [e for e in entries if e.split == split]
    try:
        report = score_submission(selected, predictions_path, task)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ScoringError, UndefinedMetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(report.to_text())
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_validate(manifest_path: str) -> int:
    try:
        entries, diagnostics = parse_manifest(manifest_path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for d in diagnostics:
        print(str(d), file=sys.stderr)
    for task in TASKS:
        counts = split_counts(e for e in entries if e.task == task)
        print(f"{task}: " + " ".join(f"{s}={counts[s]}" for s in SPLITS))
    print(f"{len(diagnostics)} error(s)")
    return EXIT_OK if not diagnostics else EXIT_INVALID


def cmd_fit_pca(frames_root: str, out: str, alpha_std: float) -> int:
    root = Path(frames_root)
    if not root.is_dir():
        print(f"error: not a directory: {root}", file=sys.stderr)
        return EXIT_IO
    paths = sorted(p for p in root.rglob("*") if p.suffix in (".png", ".ppm"))
    if not paths:
        print(f"error: no .png/.ppm images under {root}", file=sys.stderr)
        return EXIT_INVALID
    try:
        spec = fit_pca((read_image(p) for p in paths), alpha_std=alpha_std)
    except (OSError, ImageFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    doc = {
        "kind": "lighting",
        "alpha_std": alpha_std,
        "eigenvalues": [float(v) for v in spec.eigenvalues],
        "eigenvectors": [[float(v) for v in row] for row in spec.eigenvectors],
    }
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)
    print(f"fitted lighting basis over {len(paths)} image(s) -> {out}")
    return EXIT_OK


def _parse_crop(token: str) -> CropSpec:
    parts = token.split(",")
    if len(parts) != 2:
        raise ValueError(f"bad crop {token!r}, expected L,R")
    return CropSpec(int(parts[0]), int(parts[1]))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convaug",
        description="Deterministic preprocessing, augmentation and scoring "
        "for conversation-analysis video tasks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pre = sub.add_parser("preprocess", help="emit per-sample pixel tensors")
    pre.add_argument("--manifest", required=True)
    pre.add_argument("--task", required=True, choices=sorted(CLI_TASKS))
    pre.add_argument("--split", default="train", choices=SPLITS)
    pre.add_argument("--frames-root", required=True)
    pre.add_argument("--out", required=True)
    pre.add_argument("--crop", default=None, metavar="L,R",
                     help="strip-crop margins (default per task)")
    pre.add_argument("--sample", default=None, metavar="POLICY",
                     help="last1 | lastK:k | uniform:n (default per task)")
    pre.add_argument("--aug-config", default=None)
    pre.add_argument("--aug-splits", default="train",
                     help="comma-separated splits that get augmentation")
    pre.add_argument("--seed", type=int, default=None,
                     help="global augmentation seed (overrides the config)")
    pre.add_argument("--workers", type=int, default=1)
    pre.add_argument("--allow-partial", action="store_true")

    ev = sub.add_parser("evaluate", help="score a prediction file")
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--task", required=True, choices=sorted(CLI_TASKS))
    ev.add_argument("--split", default="val", choices=SPLITS)
    ev.add_argument("--predictions", required=True)
    ev.add_argument("--out", default=None, help="also write the report as JSON")

    va = sub.add_parser("validate", help="check a manifest and report split counts")
    va.add_argument("--manifest", required=True)

    fp = sub.add_parser("fit-pca", help="fit a lighting eigenbasis to an image corpus")
    fp.add_argument("--frames-root", required=True)
    fp.add_argument("--out", required=True)
    fp.add_argument("--alpha-std", type=float, default=0.1)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("CONVAUG_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)

    if args.command == "validate":
        return cmd_validate(args.manifest)
    if args.command == "fit-pca":
        return cmd_fit_pca(args.frames_root, args.out, args.alpha_std)
    if args.command == "evaluate":
        return cmd_evaluate(
            args.manifest, args.predictions, CLI_TASKS[args.task], args.split, args.out
        )

    task = CLI_TASKS[args.task]
    default_crop, default_policy = _TASK_DEFAULTS[task]
    try:
        crop = _parse_crop(args.crop) if args.crop is not None else default_crop
        policy = SamplingPolicy.parse(args.sample) if args.sample is not None else default_policy
        if task == "eye_contact" and (crop.left_margin or crop.right_margin):
            raise ValueError(
                "eye task does not support --crop: face boxes are in source pixels"
            )
        if task == "next_speaker" and not (policy.kind == "last_one" or policy.k == 1):
            raise ValueError("next-speaker needs a single-frame policy (last1)")
        config = JobConfig(
            manifest_path=args.manifest,
            task=task,
            split=args.split,
            frames_root=args.frames_root,
            out_root=args.out,
            crop=crop,
            policy=policy,
            aug_config=args.aug_config,
            aug_splits=tuple(s for s in args.aug_splits.split(",") if s),
            seed=args.seed,
            workers=args.workers,
            allow_partial=args.allow_partial,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return cmd_preprocess(config)


if __name__ == "__main__":
    sys.exit(main())
