"""Dataset manifest ingestion and validation.

A manifest is a UTF-8 CSV with header
``sample_id,task,split,view_order,media,labels`` where

* ``view_order`` is a ``|``-joined list of view tags,
* ``media`` is a ``|``-joined list of ``tag=path`` pairs,
* ``labels`` is task-dependent: 14 ``|``-joined bits (bodily), a single
  class id in 0..3 (eye_contact), or one speaking bit per participant
  (next_speaker); the field is empty for test-split rows.

Loading enforces every schema invariant and reports each violation as a
distinct diagnostic carrying the CSV line number.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO, Union

__all__ = [
    "TASKS",
    "SPLITS",
    "LabelVector",
    "ClassLabel",
    "SpeakerBits",
    "ManifestEntry",
    "Diagnostic",
    "ManifestError",
    "load_manifest",
    "parse_manifest",
    "save_manifest",
    "split_counts",
    "enumerate_views",
]

TASKS = ("bodily", "eye_contact", "next_speaker")
SPLITS = ("train", "val", "test")

BODILY_CLASSES = 14
EYE_CLASSES = 4

_HEADER = ["sample_id", "task", "split", "view_order", "media", "labels"]


@dataclass(frozen=True)
class LabelVector:
    """14-dim binary indicator vector for the bodily behavior task.

    The background category is represented as the all-zeros vector, not as a
    15th bit.
    """

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.bits) != BODILY_CLASSES:
            raise ValueError(f"LabelVector needs {BODILY_CLASSES} bits, got {len(self.bits)}")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"LabelVector bits must be 0/1, got {self.bits}")


@dataclass(frozen=True)
class ClassLabel:
    """Eye-contact class id: 0=left, 1=frontal, 2=right, 3=no eye contact."""

    class_id: int

    def __post_init__(self) -> None:
        if self.class_id not in range(EYE_CLASSES):
            raise ValueError(f"class_id must be in [0, {EYE_CLASSES - 1}], got {self.class_id}")


@dataclass(frozen=True)
class SpeakerBits:
    """Per-participant speaking indicators, one bit per view in view order."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"SpeakerBits must be 0/1, got {self.bits}")


Labels = Union[LabelVector, ClassLabel, SpeakerBits]


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    task: str
    split: str
    media: tuple[tuple[str, str], ...]  # (view_tag, path), file order
    view_order: tuple[str, ...]
    labels: Optional[Labels]


@dataclass(frozen=True)
class Diagnostic:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


class ManifestError(ValueError):
    """Raised by :func:`load_manifest` when any row is invalid."""

    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__(
            "; ".join(str(d) for d in self.diagnostics) or "invalid manifest"
        )


def _parse_labels(
    task: str, raw: str, n_views: int
) -> Labels:
    if task == "bodily":
        bits = raw.split("|")
        if len(bits) != BODILY_CLASSES:
            raise ValueError(f"bodily labels need {BODILY_CLASSES} bits, got {len(bits)}")
        return LabelVector(tuple(_parse_bit(b) for b in bits))
    if task == "eye_contact":
        if "|" in raw:
            raise ValueError("eye_contact labels must be a single class token")
        try:
            class_id = int(raw)
        except ValueError:
            raise ValueError(f"eye_contact label {raw!r} is not an integer") from None
        return ClassLabel(class_id)
    bits = raw.split("|")
    if len(bits) != n_views:
        raise ValueError(
            f"next_speaker labels need one bit per view ({n_views}), got {len(bits)}"
        )
    return SpeakerBits(tuple(_parse_bit(b) for b in bits))


def _parse_bit(token: str) -> int:
    if token not in ("0", "1"):
        raise ValueError(f"label bit must be 0 or 1, got {token!r}")
    return int(token)


def parse_manifest(source: Union[str, Path, TextIO]) -> tuple[list[ManifestEntry], list[Diagnostic]]:
    """Parse a manifest, collecting every diagnostic instead of failing fast.

    Returns ``(entries, diagnostics)``; ``entries`` contains only rows that
    validated cleanly. Use :func:`load_manifest` for raise-on-error behavior.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return parse_manifest(fh)

    reader = csv.reader(source)
    entries: list[ManifestEntry] = []
    diagnostics: list[Diagnostic] = []
    seen_ids: set[tuple[str, str, str]] = set()

    try:
        header = next(reader)
    except StopIteration:
        return [], [Diagnostic(1, "empty file, expected header " + ",".join(_HEADER))]
    if header != _HEADER:
        missing = [c for c in _HEADER if c not in header]
        if missing:
            return [], [Diagnostic(1, f"missing column(s): {', '.join(missing)}")]
        return [], [Diagnostic(1, f"bad header order, expected {','.join(_HEADER)}")]

    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(_HEADER):
            diagnostics.append(Diagnostic(line, f"expected {len(_HEADER)} fields, got {len(row)}"))
            continue
        sample_id, task, split, view_order_raw, media_raw, labels_raw = row
        row_errors: list[str] = []

        if not sample_id:
            row_errors.append("empty sample_id")
        if task not in TASKS:
            row_errors.append(f"bad task token {task!r}, expected one of {'/'.join(TASKS)}")
        if split not in SPLITS:
            row_errors.append(f"bad split token {split!r}, expected one of {'/'.join(SPLITS)}")
        if row_errors:
            diagnostics.extend(Diagnostic(line, m) for m in row_errors)
            continue

        key = (task, split, sample_id)
        if key in seen_ids:
            diagnostics.append(
                Diagnostic(line, f"duplicate sample_id {sample_id!r} within ({task}, {split})")
            )
            continue

        view_order = tuple(t for t in view_order_raw.split("|") if t)
        media: list[tuple[str, str]] = []
        media_ok = True
        for pair in media_raw.split("|"):
            if not pair:
                continue
            tag, sep, mpath = pair.partition("=")
            if not sep or not tag or not mpath:
                diagnostics.append(Diagnostic(line, f"bad media pair {pair!r}, expected tag=path"))
                media_ok = False
                break
            media.append((tag, mpath))
        if not media_ok:
            continue

        if sorted(view_order) != sorted(tag for tag, _ in media):
            diagnostics.append(
                Diagnostic(
                    line,
                    f"view_order {list(view_order)} is not a permutation of media tags "
                    f"{[t for t, _ in media]}",
                )
            )
            continue
        if task in ("eye_contact", "next_speaker") and not 3 <= len(view_order) <= 4:
            diagnostics.append(
                Diagnostic(line, f"{task} requires 3 or 4 views, got {len(view_order)}")
            )
            continue
        if not view_order:
            diagnostics.append(Diagnostic(line, "view_order is empty"))
            continue

        labels: Optional[Labels] = None
        if split == "test":
            if labels_raw:
                diagnostics.append(Diagnostic(line, "test rows must have empty labels"))
                continue
        else:
            if not labels_raw:
                diagnostics.append(Diagnostic(line, f"{split} rows must carry labels"))
                continue
            try:
                labels = _parse_labels(task, labels_raw, len(view_order))
            except ValueError as exc:
                diagnostics.append(Diagnostic(line, str(exc)))
                continue

        seen_ids.add(key)
        entries.append(
            ManifestEntry(
                sample_id=sample_id,
                task=task,
                split=split,
                media=tuple(media),
                view_order=view_order,
                labels=labels,
            )
        )
    return entries, diagnostics


def load_manifest(source: Union[str, Path, TextIO]) -> list[ManifestEntry]:
    """Load and validate a manifest; raises :class:`ManifestError` on any issue."""
    entries, diagnostics = parse_manifest(source)
    if diagnostics:
        raise ManifestError(diagnostics)
    return entries


def _format_labels(entry: ManifestEntry) -> str:
    if entry.labels is None:
        return ""
    if isinstance(entry.labels, LabelVector):
        return "|".join(str(b) for b in entry.labels.bits)
    if isinstance(entry.labels, ClassLabel):
        return str(entry.labels.class_id)
    return "|".join(str(b) for b in entry.labels.bits)


def save_manifest(entries: Iterable[ManifestEntry], sink: Union[str, Path, TextIO]) -> None:
    """Emit entries in canonical form (media listed in view order, LF endings)."""
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            save_manifest(entries, fh)
            return
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(_HEADER)
    for entry in entries:
        ordered = enumerate_views(entry)
        writer.writerow(
            [
                entry.sample_id,
                entry.task,
                entry.split,
                "|".join(entry.view_order),
                "|".join(f"{tag}={path}" for tag, path in ordered),
                _format_labels(entry),
            ]
        )


def split_counts(entries: Iterable[ManifestEntry]) -> dict[str, int]:
    """Per-split entry counts; always reports all three splits."""
    counts = {split: 0 for split in SPLITS}
    for entry in entries:
        counts[entry.split] += 1
    return counts


def enumerate_views(entry: ManifestEntry) -> list[tuple[str, str]]:
    """Media reordered to match ``view_order`` exactly.

    Raises:
        ValueError: naming the tag, if ``view_order`` references a tag that
            is missing from ``media``.
    """
    by_tag = dict(entry.media)
    ordered: list[tuple[str, str]] = []
    for tag in entry.view_order:
        if tag not in by_tag:
            raise ValueError(f"view tag {tag!r} in view_order missing from media")
        ordered.append((tag, by_tag[tag]))
    return ordered
