"""Task metrics: mAP (bodily), accuracy (eye contact), UAR (next speaker),
plus prediction-file ingestion and the scorer.

Average precision is the non-interpolated prefix-precision formula: rank by
score descending (ties broken by ascending original index), then
``AP = (1/P) * sum over positive ranks k of precision@k``. Classes with no
positive ground truth are skipped, never scored as zero; skips are reported.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .manifest import EYE_CLASSES, LabelVector, ManifestEntry, SpeakerBits

__all__ = [
    "ScoredPrediction",
    "ConfusionMatrix",
    "MapResult",
    "UarResult",
    "ScoreReport",
    "ScoringError",
    "UndefinedMetricError",
    "average_precision",
    "mean_average_precision",
    "accuracy",
    "uar",
    "score_submission",
    "load_predictions",
]


class ScoringError(ValueError):
    """Raised when a submission cannot be scored; message itemizes offenders."""


class UndefinedMetricError(ValueError):
    """Raised when a metric is undefined (e.g. AP with zero positives)."""


@dataclass(frozen=True)
class ScoredPrediction:
    """One sample's prediction: a score vector or a single class id."""

    sample_id: str
    scores: tuple[float, ...] = ()
    class_id: Optional[int] = None


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are ground truth, columns are predicted."""

    n_classes: int
    cells: tuple[tuple[int, ...], ...]

    @classmethod
    def from_labels(
        cls, predicted: Sequence[int], truth: Sequence[int], n_classes: int
    ) -> "ConfusionMatrix":
        if len(predicted) != len(truth):
            raise ScoringError(
                f"length mismatch: {len(predicted)} predictions vs {len(truth)} truths"
            )
        cells = np.zeros((n_classes, n_classes), dtype=np.int64)
        for p, t in zip(predicted, truth):
            if not 0 <= t < n_classes or not 0 <= p < n_classes:
                raise ScoringError(f"label out of range [0, {n_classes}): truth={t}, predicted={p}")
            cells[t, p] += 1
        return cls(n_classes, tuple(tuple(int(v) for v in row) for row in cells))

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.cells)

    @property
    def trace(self) -> int:
        return sum(self.cells[i][i] for i in range(self.n_classes))

    def row_sum(self, c: int) -> int:
        return sum(self.cells[c])


@dataclass(frozen=True)
class MapResult:
    value: float
    per_class: tuple[Optional[float], ...]  # None for skipped (no-positive) classes
    skipped_classes: int


@dataclass(frozen=True)
class UarResult:
    value: float
    per_class_recall: tuple[Optional[float], ...]  # None for classes absent from truth
    absent_classes: int


def average_precision(scores: Sequence[float], relevance: Sequence[int]) -> float:
    """Prefix-precision AP over one ranked list.

    Raises:
        UndefinedMetricError: if ``relevance`` contains no positives.
        ValueError: on length mismatch or empty input.
    """
    s = np.asarray(scores, dtype=np.float64)
    r = np.asarray(relevance, dtype=np.int64)
    if s.shape != r.shape or s.ndim != 1 or s.size == 0:
        raise ValueError(f"scores and relevance must be equal-length 1-d, got {s.shape} vs {r.shape}")
    positives = int(r.sum())
    if positives == 0:
        raise UndefinedMetricError("average precision undefined: no positive samples")
    # stable argsort on -scores: descending score, ties by ascending index
    order = np.argsort(-s, kind="stable")
    ranked = r[order]
    cum_pos = np.cumsum(ranked)
    ranks = np.arange(1, ranked.size + 1)
    return float((cum_pos[ranked == 1] / ranks[ranked == 1]).sum() / positives)


def mean_average_precision(
    predictions: Sequence[ScoredPrediction],
    truth: Sequence[LabelVector],
    truth_ids: Optional[Sequence[str]] = None,
) -> MapResult:
    """Unweighted mean of per-class AP over classes with at least one positive.

    ``predictions[i]`` must correspond to ``truth[i]``; pass ``truth_ids`` to
    have the alignment verified by sample id.
    """
    if len(predictions) != len(truth):
        raise ScoringError(
            f"length mismatch: {len(predictions)} predictions vs {len(truth)} truths"
        )
    if not predictions:
        raise ScoringError("nothing to score")
    if truth_ids is not None:
        offenders = [
            f"{p.sample_id!r} != {tid!r}"
            for p, tid in zip(predictions, truth_ids)
            if p.sample_id != tid
        ]
        if offenders:
            raise ScoringError("sample_id mismatch: " + ", ".join(offenders))
    n_classes = len(truth[0].bits)
    bad = [
        p.sample_id
        for p, t in zip(predictions, truth)
        if len(p.scores) != n_classes or len(t.bits) != n_classes
    ]
    if bad:
        raise ScoringError(f"arity mismatch for sample(s): {', '.join(bad)}")

    score_mat = np.array([p.scores for p in predictions], dtype=np.float64)
    truth_mat = np.array([t.bits for t in truth], dtype=np.int64)
    per_class: list[Optional[float]] = []
    scored: list[float] = []
    for c in range(n_classes):
        if truth_mat[:, c].sum() == 0:
            per_class.append(None)
            continue
        ap = average_precision(score_mat[:, c], truth_mat[:, c])
        per_class.append(ap)
        scored.append(ap)
    if not scored:
        raise UndefinedMetricError("mAP undefined: every class has zero positives")
    return MapResult(
        value=float(np.mean(scored)),
        per_class=tuple(per_class),
        skipped_classes=n_classes - len(scored),
    )


def accuracy(predicted: Sequence[int], truth: Sequence[int]) -> float:
    """Fraction of exact matches."""
    if len(predicted) != len(truth) or not truth:
        raise ScoringError(
            f"need equal non-zero lengths, got {len(predicted)} vs {len(truth)}"
        )
    return sum(1 for p, t in zip(predicted, truth) if p == t) / len(truth)


def uar(predicted: Sequence[int], truth: Sequence[int], n_classes: int) -> UarResult:
    """Unweighted average recall: mean of per-class diagonal / row-sum.

    Classes absent from the truth are excluded from the mean and counted in
    ``absent_classes``.
    """
    cm = ConfusionMatrix.from_labels(predicted, truth, n_classes)
    recalls: list[Optional[float]] = []
    present: list[float] = []
    for c in range(n_classes):
        support = cm.row_sum(c)
        if support == 0:
            recalls.append(None)
            continue
        recall = cm.cells[c][c] / support
        recalls.append(recall)
        present.append(recall)
    if not present:
        raise UndefinedMetricError("UAR undefined: no class present in truth")
    return UarResult(
        value=float(np.mean(present)),
        per_class_recall=tuple(recalls),
        absent_classes=n_classes - len(present),
    )


@dataclass(frozen=True)
class ScoreReport:
    task: str
    metric_name: str
    value: float
    per_class: tuple[Optional[float], ...]
    warnings: tuple[str, ...] = ()

    def to_json(self) -> str:
        return json.dumps(
            {
                "task": self.task,
                "metric_name": self.metric_name,
                "value": self.value,
                "per_class": list(self.per_class),
                "warnings": list(self.warnings),
            },
            indent=2,
        )

    def to_text(self) -> str:
        lines = [f"task: {self.task}", f"{self.metric_name}: {self.value:.6f}"]
        for i, v in enumerate(self.per_class):
            lines.append(f"  class {i}: " + ("skipped" if v is None else f"{v:.6f}"))
        for w in self.warnings:
            lines.append(f"warning: {w}")
        return "\n".join(lines)


def load_predictions(path: Union[str, Path], task: str) -> list[ScoredPrediction]:
    """Parse a prediction CSV.

    Score tasks (``bodily``, ``next_speaker``) use header
    ``sample_id,s0,...,s{K-1}``; the single-label eye task uses
    ``sample_id,label``. Malformed rows raise :class:`ScoringError` with the
    line number.
    """
    path = Path(path)
    preds: list[ScoredPrediction] = []
    problems: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ScoringError(f"{path}: empty prediction file")
        if task == "eye_contact":
            if header != ["sample_id", "label"]:
                raise ScoringError(f"{path}: bad header {header}, expected sample_id,label")
            n_cols = 1
        else:
            expected = ["sample_id"] + [f"s{i}" for i in range(len(header) - 1)]
            if len(header) < 2 or header != expected:
                raise ScoringError(
                    f"{path}: bad header {header}, expected sample_id,s0,...,s{{K-1}}"
                )
            n_cols = len(header) - 1
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != n_cols + 1:
                problems.append(f"line {line}: expected {n_cols + 1} fields, got {len(row)}")
                continue
            sample_id = row[0]
            if task == "eye_contact":
                try:
                    class_id = int(row[1])
                except ValueError:
                    problems.append(f"line {line}: label {row[1]!r} is not an integer")
                    continue
                if not 0 <= class_id < EYE_CLASSES:
                    problems.append(f"line {line}: label {class_id} outside [0, {EYE_CLASSES - 1}]")
                    continue
                preds.append(ScoredPrediction(sample_id, class_id=class_id))
            else:
                try:
                    scores = tuple(float(v) for v in row[1:])
                except ValueError:
                    problems.append(f"line {line}: non-numeric score in {row[1:]}")
                    continue
                preds.append(ScoredPrediction(sample_id, scores=scores))
    if problems:
        raise ScoringError(f"{path}: " + "; ".join(problems))
    return preds


def _speaker_flatten(
    entries: Sequence[ManifestEntry],
    by_id: dict[str, ScoredPrediction],
    strict_participants: bool,
    warnings: list[str],
) -> tuple[list[int], list[int]]:
    """Flatten (sample, participant) pairs into binary speaking instances."""
    predicted: list[int] = []
    truth: list[int] = []
    extra = 0
    for entry in entries:
        pred = by_id[entry.sample_id]
        assert isinstance(entry.labels, SpeakerBits)
        n = len(entry.view_order)
        if len(pred.scores) < n:
            raise ScoringError(
                f"sample {entry.sample_id!r}: {len(pred.scores)} scores for {n} participants"
            )
        if len(pred.scores) > n:
            if strict_participants:
                raise ScoringError(
                    f"sample {entry.sample_id!r}: {len(pred.scores)} scores for {n} participants"
                )
            extra += len(pred.scores) - n
        for k in range(n):
            v = pred.scores[k]
            if v not in (0.0, 1.0):
                raise ScoringError(
                    f"sample {entry.sample_id!r}: speaking prediction must be 0 or 1, got {v}"
                )
            predicted.append(int(v))
            truth.append(entry.labels.bits[k])
    if extra:
        warnings.append(f"ignored {extra} prediction(s) for absent participants")
    return predicted, truth


def score_submission(
    entries: Sequence[ManifestEntry],
    predictions_path: Union[str, Path],
    task: str,
    strict_participants: bool = False,
) -> ScoreReport:
    """Score a prediction file against labeled manifest entries.

    ``entries`` must already be filtered to one task and one labeled split.
    Aborts (raises :class:`ScoringError`) if any manifest sample lacks a
    prediction, if unknown sample ids appear, or on malformed rows.
    """
    entries = [e for e in entries if e.task == task]
    if not entries:
        raise ScoringError(f"no manifest entries for task {task!r}")
    unlabeled = [e.sample_id for e in entries if e.labels is None]
    if unlabeled:
        raise ScoringError(f"entries without labels (test split?): {', '.join(unlabeled[:5])}")

    preds = load_predictions(predictions_path, task)
    by_id: dict[str, ScoredPrediction] = {}
    dupes = []
    for p in preds:
        if p.sample_id in by_id:
            dupes.append(p.sample_id)
        by_id[p.sample_id] = p
    if dupes:
        raise ScoringError(f"duplicate prediction(s) for: {', '.join(sorted(set(dupes)))}")

    wanted = {e.sample_id for e in entries}
    missing = sorted(wanted - set(by_id))
    unknown = sorted(set(by_id) - wanted)
    if missing:
        raise ScoringError(f"missing prediction(s) for: {', '.join(missing)}")
    if unknown:
        raise ScoringError(f"unknown sample_id(s): {', '.join(unknown)}")

    warnings: list[str] = []
    if task == "bodily":
        prediction_rows = [by_id[e.sample_id] for e in entries]
        truth_rows = [e.labels for e in entries]
        result = mean_average_precision(
            prediction_rows, truth_rows, truth_ids=[e.sample_id for e in entries]
        )
        if result.skipped_classes:
            warnings.append(f"skipped {result.skipped_classes} class(es) with no positives")
        return ScoreReport("bodily", "mAP", result.value, result.per_class, tuple(warnings))
    if task == "eye_contact":
        predicted = []
        for e in entries:
            p = by_id[e.sample_id]
            if p.class_id is None:
                raise ScoringError(f"sample {e.sample_id!r}: expected a class label")
            predicted.append(p.class_id)
        truth = [e.labels.class_id for e in entries]
        value = accuracy(predicted, truth)
        recall = uar(predicted, truth, EYE_CLASSES)
        if recall.absent_classes:
            warnings.append(f"{recall.absent_classes} class(es) absent from truth")
        return ScoreReport("eye_contact", "accuracy", value, recall.per_class_recall, tuple(warnings))
    if task == "next_speaker":
        predicted, truth = _speaker_flatten(entries, by_id, strict_participants, warnings)
        result = uar(predicted, truth, 2)
        if result.absent_classes:
            warnings.append(f"{result.absent_classes} class(es) absent from truth")
        return ScoreReport(
            "next_speaker", "UAR", result.value, result.per_class_recall, tuple(warnings)
        )
    raise ScoringError(f"unknown task {task!r}")
