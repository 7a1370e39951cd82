"""Shared fixture builders: small frame trees, manifests, prediction files."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from convaug import ImageBuffer, write_image

BITS14 = "|".join(["1"] + ["0"] * 12 + ["1"])


def random_image(rng: np.random.Generator, h: int = 8, w: int = 8) -> ImageBuffer:
    return ImageBuffer(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def write_clip(clip_dir: Path, n_frames: int, h: int, w: int, seed: int) -> None:
    """Write numbered PNG frames with reproducible random content."""
    rng = np.random.default_rng(seed)
    clip_dir.mkdir(parents=True, exist_ok=True)
    for i in range(1, n_frames + 1):
        write_image(random_image(rng, h, w), clip_dir / f"frame_{i:06d}.png")


def write_manifest(path: Path, rows: list[str]) -> Path:
    header = "sample_id,task,split,view_order,media,labels"
    path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20230814)


@pytest.fixture
def dataset(tmp_path: Path) -> dict:
    """One small sample per task, with frames on disk and a clean manifest."""
    frames = tmp_path / "frames"
    write_clip(frames / "clipA" / "cam1", 4, 10, 12, seed=1)
    for i, cam in enumerate(("cam1", "cam2", "cam3")):
        write_clip(frames / "clipB" / cam, 2, 6, 6, seed=10 + i)
    write_clip(frames / "clipC" / "cam2", 5, 20, 30, seed=20)
    (frames / "clipC" / "cam2" / "faces.csv").write_text(
        "frame_index,detected,x0,y0,x1,y1\n"
        "0,1,2,2,12,12\n"
        "1,0,0,0,0,0\n"
        "2,1,0,0,30,20\n"
        "3,1,5,5,6,6\n"
        "4,1,3,3,9,9\n",
        encoding="utf-8",
    )
    manifest = write_manifest(
        tmp_path / "manifest.csv",
        [
            f"b1,bodily,train,cam1,cam1=clipA/cam1,{BITS14}",
            "s1,next_speaker,train,cam1|cam2|cam3,"
            "cam1=clipB/cam1|cam2=clipB/cam2|cam3=clipB/cam3,1|0|1",
            "e1,eye_contact,train,cam2|cam1|cam3,"
            "cam2=clipC/cam2|cam1=clipB/cam1|cam3=clipB/cam3,2",
        ],
    )
    return {"root": tmp_path, "frames": frames, "manifest": manifest}
