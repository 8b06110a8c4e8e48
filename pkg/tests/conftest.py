from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from cosynth.corpus import ImageSample


def textured_image(size: int, rng: np.random.Generator) -> np.ndarray:
    """Deterministic busy background so paste diffs are detectable."""
    base = rng.integers(30, 220, size=(size, size, 3), dtype=np.uint8)
    yy, xx = np.mgrid[0:size, 0:size]
    ramp = ((xx + yy) % 97).astype(np.uint8)
    return (base // 2 + ramp[..., None]).astype(np.uint8)


def shape_mask(size: int, kind: str, center: tuple[int, int], radius: int) -> np.ndarray:
    cx, cy = center
    yy, xx = np.mgrid[0:size, 0:size]
    if kind == "disk":
        return (xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2
    if kind == "square":
        return (np.abs(xx - cx) <= radius) & (np.abs(yy - cy) <= radius)
    if kind == "diamond":
        return np.abs(xx - cx) + np.abs(yy - cy) <= radius
    if kind == "ellipse":
        return ((xx - cx) / radius) ** 2 + ((yy - cy) / (radius * 0.6)) ** 2 <= 1.0
    if kind == "cross":
        arm = max(radius // 3, 2)
        return ((np.abs(xx - cx) <= arm) & (np.abs(yy - cy) <= radius)) | (
            (np.abs(yy - cy) <= arm) & (np.abs(xx - cx) <= radius)
        )
    if kind == "diagonal":
        # slender 3-px band, inset so its cutout passes the completeness gate
        inset = max(size // 16, 3)
        return (np.abs(xx - yy) <= 1) & (xx >= inset) & (xx < size - inset)
    raise ValueError(kind)


def make_sample(
    sid: str,
    label: str,
    size: int = 96,
    kind: str = "disk",
    center: tuple[int, int] | None = None,
    radius: int | None = None,
    seed: int = 0,
) -> ImageSample:
    rng = np.random.default_rng([seed, len(sid), size])
    if center is None:
        center = (size // 4, size // 4)
    if radius is None:
        radius = max(size // 8, 4)
    image = textured_image(size, rng)
    mask = shape_mask(size, kind, center, radius)
    fg_color = rng.integers(0, 255, size=3, dtype=np.uint8)
    image[mask] = fg_color
    return ImageSample(id=sid, image=image, mask=mask, label=label)


def write_sample_files(sample: ImageSample, root: Path) -> dict:
    root.mkdir(parents=True, exist_ok=True)
    img_rel = f"images/{sample.id}.png"
    mask_rel = f"masks/{sample.id}.png"
    (root / "images").mkdir(exist_ok=True)
    (root / "masks").mkdir(exist_ok=True)
    Image.fromarray(sample.image).save(root / img_rel)
    Image.fromarray(sample.mask.astype(np.uint8) * 255).save(root / mask_rel)
    return {
        "id": sample.id,
        "image_path": img_rel,
        "mask_path": mask_rel,
        "label": sample.label,
    }


def write_manifest(records: list[dict], root: Path, name: str = "manifest.jsonl") -> Path:
    path = root / name
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return path


def build_corpus_on_disk(
    root: Path,
    groups: dict[str, int],
    size: int = 96,
    seed: int = 7,
) -> Path:
    """Write a synthetic corpus: one shape family per group label."""
    kinds = ["disk", "square", "diamond", "ellipse", "cross"]
    records = []
    rng = np.random.default_rng(seed)
    for gi, (label, count) in enumerate(groups.items()):
        kind = kinds[gi % len(kinds)]
        for i in range(count):
            jitter = rng.integers(-size // 16, size // 16 + 1, size=2)
            radius = int(size * 0.12) + int(rng.integers(0, size // 24))
            center = (size // 4 + int(jitter[0]), size // 4 + int(jitter[1]))
            sample = make_sample(
                f"{label}_{i:03d}", label, size=size, kind=kind,
                center=center, radius=radius, seed=seed + gi * 1000 + i,
            )
            records.append(write_sample_files(sample, root))
    return write_manifest(records, root)


def build_slender_corpus(root: Path, n_canvases: int = 6, size: int = 128) -> Path:
    """Slender diagonal canvases plus a block group to cut distractors from."""
    records = []
    for i in range(n_canvases):
        sample = make_sample(
            f"diag_{i:03d}", "diag", size=size, kind="diagonal", seed=100 + i
        )
        records.append(write_sample_files(sample, root))
    for i in range(max(4, n_canvases)):
        sample = make_sample(
            f"block_{i:03d}", "block", size=size, kind="square",
            center=(size // 4, size // 4), radius=size // 8, seed=200 + i,
        )
        records.append(write_sample_files(sample, root))
    return write_manifest(records, root)


@pytest.fixture
def small_manifest(tmp_path):
    return build_corpus_on_disk(tmp_path, {"alpha": 4, "beta": 4}, size=64)


@pytest.fixture
def five_group_manifest(tmp_path):
    return build_corpus_on_disk(
        tmp_path, {"g0": 4, "g1": 4, "g2": 4, "g3": 4, "g4": 4}, size=64
    )
