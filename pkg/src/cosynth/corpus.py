"""Data model, manifest I/O, sample validation, edge maps, and dataset layout."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

log = logging.getLogger(__name__)

MANIFEST_FORMAT_VERSION = 1
METADATA_FORMAT_VERSION = 1

# Mask pixels at or above this value are foreground; everything downstream
# operates on the resulting binary mask.
MASK_THRESHOLD = 128

REQUIRED_MANIFEST_KEYS = ("id", "image_path", "mask_path", "label")


class ManifestError(ValueError):
    """Raised for unreadable or inconsistent manifest files."""


class DatasetWriteError(RuntimeError):
    """Raised when write_dataset cannot produce a consistent layout."""


@dataclass
class ManifestRecord:
    id: str
    image_path: str
    mask_path: str
    label: str
    extras: dict = field(default_factory=dict)


@dataclass
class Manifest:
    records: list[ManifestRecord]
    root: Path
    path: Path | None = None  # file the manifest was loaded from, if any

    def __len__(self) -> int:
        return len(self.records)

    def resolve(self, rel: str) -> Path:
        return self.root / rel


@dataclass
class ImageSample:
    """One (image, mask, label) triple.

    image is H x W x 3 uint8, mask is H x W bool (already binarized).
    """

    id: str
    image: np.ndarray
    mask: np.ndarray
    label: str
    group_id: str | None = None
    origin: str = "source"

    @property
    def size(self) -> tuple[int, int]:
        """(width, height) in pixels."""
        h, w = self.image.shape[:2]
        return w, h


@dataclass
class WriteReport:
    out_dir: Path
    per_group: dict[str, int]
    per_origin: dict[str, int]
    n_files: int

    @property
    def total(self) -> int:
        return sum(self.per_group.values())


def imread_rgb(path: Path | str) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def imread_mask(path: Path | str, threshold: int = MASK_THRESHOLD) -> np.ndarray:
    with Image.open(path) as im:
        gray = np.asarray(im.convert("L"))
    return gray >= threshold


def save_png(array: np.ndarray, path: Path | str) -> None:
    arr = array
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    Image.fromarray(arr).save(path, format="PNG")


def load_manifest(path: Path | str) -> Manifest:
    """Parse a newline-delimited manifest, one JSON record per line.

    Records keep unknown keys in .extras so provenance survives a round trip.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")

    records: list[ManifestRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: malformed record: {exc}") from exc
            if not isinstance(obj, dict):
                raise ManifestError(f"{path}:{lineno}: record must be a JSON object")
            missing = [k for k in REQUIRED_MANIFEST_KEYS if k not in obj]
            if missing:
                raise ManifestError(f"{path}:{lineno}: missing keys {missing}")
            rid = str(obj["id"])
            if rid in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate id {rid!r}")
            seen.add(rid)
            extras = {k: v for k, v in obj.items() if k not in REQUIRED_MANIFEST_KEYS}
            record = ManifestRecord(
                id=rid,
                image_path=str(obj["image_path"]),
                mask_path=str(obj["mask_path"]),
                label=str(obj["label"]),
                extras=extras,
            )
            for rel in (record.image_path, record.mask_path):
                if not (path.parent / rel).is_file():
                    raise ManifestError(f"{path}:{lineno}: referenced file missing: {rel}")
            records.append(record)
    if not records:
        log.warning("manifest %s contains no records", path)
    return Manifest(records=records, root=path.parent, path=path)


def load_sample(record: ManifestRecord, root: Path | str) -> ImageSample:
    root = Path(root)
    image = imread_rgb(root / record.image_path)
    mask = imread_mask(root / record.mask_path)
    return ImageSample(
        id=record.id,
        image=image,
        mask=mask,
        label=record.label,
        group_id=record.extras.get("group"),
        origin=record.extras.get("origin", "source"),
    )


def validate_sample(
    sample: ImageSample,
    min_fg: float = 0.005,
    max_fg: float = 0.95,
) -> list[str]:
    """Return mechanical quality violations (empty list = sample usable)."""
    violations = []
    ih, iw = sample.image.shape[:2]
    mh, mw = sample.mask.shape[:2]
    if (ih, iw) != (mh, mw):
        violations.append(f"dimension-mismatch: image {iw}x{ih} vs mask {mw}x{mh}")
        return violations
    fg = int(np.count_nonzero(sample.mask))
    if fg == 0:
        violations.append("empty-mask")
        return violations
    frac = fg / sample.mask.size
    if frac < min_fg:
        violations.append(f"foreground-fraction-low: {frac:.4f} < {min_fg}")
    if frac > max_fg:
        violations.append(f"foreground-fraction-high: {frac:.4f} > {max_fg}")
    return violations


_NEIGHBORHOOD_8 = np.ones((3, 3), dtype=bool)


def mask_to_edge(mask: np.ndarray, thickness: int = 1) -> np.ndarray:
    """Inner 8-connectivity boundary of a binary mask, optionally thickened.

    A pixel is an edge pixel when it is foreground and at least one of its
    8-neighbors (image border counts as background) is background. For
    thickness 1 the edge is a subset of the mask foreground.
    """
    if thickness < 1:
        raise ValueError("thickness must be >= 1")
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("mask is empty")
    interior = ndimage.binary_erosion(mask, structure=_NEIGHBORHOOD_8, border_value=0)
    edge = mask & ~interior
    if thickness > 1:
        edge = ndimage.binary_dilation(
            edge, structure=_NEIGHBORHOOD_8, iterations=thickness - 1
        )
    return edge


def _group_dir_name(label: str) -> str:
    if "/" in label or "\\" in label or label in ("", ".", ".."):
        raise DatasetWriteError(f"group label {label!r} is not filesystem-safe")
    return label


def _metadata_record(sample, seed) -> dict:
    group = sample.group_id or sample.label
    placement = getattr(sample, "placement", None)
    rec = {
        "id": sample.id,
        "image_path": f"{group}/{sample.id}.png",
        "mask_path": f"{group}/{sample.id}_mask.png",
        "edge_path": f"{group}/{sample.id}_edge.png",
        "label": sample.label,
        "group": group,
        "origin": sample.origin,
        "canvas_id": getattr(sample, "canvas_id", None),
        "cutout_id": getattr(sample, "cutout_id", None),
        "source_group": getattr(sample, "source_group", None),
        "placement": list(placement) if placement is not None else None,
        "scale": getattr(sample, "scale_ratio", None),
        "flip": getattr(sample, "flipped", None),
        "occlusion_ratio": getattr(sample, "occlusion_ratio", None),
        "attempt": getattr(sample, "attempt", None),
        "sample_index": getattr(sample, "sample_index", None),
        "status": getattr(sample, "status", None),
        "seed": seed,
    }
    return rec


def _persist_rasters(sample, out_dir: Path) -> int:
    """Write image/mask/edge (and footprint sidecar) PNGs; returns file count."""
    group = _group_dir_name(sample.group_id or sample.label)
    gdir = out_dir / group
    gdir.mkdir(parents=True, exist_ok=True)
    save_png(sample.image, gdir / f"{sample.id}.png")
    save_png(sample.mask, gdir / f"{sample.id}_mask.png")
    save_png(mask_to_edge(sample.mask), gdir / f"{sample.id}_edge.png")
    n = 3
    footprint = getattr(sample, "footprint", None)
    if footprint is not None:
        fdir = out_dir / "footprints"
        fdir.mkdir(exist_ok=True)
        save_png(footprint, fdir / f"{sample.id}.png")
        n += 1
    return n


def append_sample(sample, out_dir: Path | str, seed: int | None = None) -> dict:
    """Add one sample to an existing dataset: rasters plus a metadata line."""
    out_dir = Path(out_dir)
    record = _metadata_record(sample, seed)
    _persist_rasters(sample, out_dir)
    with open(out_dir / "metadata.jsonl", "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
    return record


def write_dataset(
    samples: list,
    out_dir: Path | str,
    seed: int | None = None,
    overwrite: bool = False,
) -> WriteReport:
    """Materialize samples as out/<group>/<id>{,_mask,_edge}.png + metadata.jsonl.

    Synthesized samples additionally persist their paste footprint under
    out/footprints/ so curation can render overlays without re-synthesis.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta_path = out_dir / "metadata.jsonl"
    if meta_path.exists() and not overwrite:
        raise DatasetWriteError(
            f"{meta_path} already exists; pass overwrite to replace the dataset"
        )
    if not overwrite:
        for sample in samples:
            target = out_dir / _group_dir_name(sample.group_id or sample.label) / f"{sample.id}.png"
            if target.exists():
                raise DatasetWriteError(f"refusing to overwrite existing {target}")

    per_group: dict[str, int] = {}
    per_origin: dict[str, int] = {}
    n_files = 0
    lines = []
    for sample in samples:
        group = _group_dir_name(sample.group_id or sample.label)
        n_files += _persist_rasters(sample, out_dir)
        per_group[group] = per_group.get(group, 0) + 1
        per_origin[sample.origin] = per_origin.get(sample.origin, 0) + 1
        lines.append(json.dumps(_metadata_record(sample, seed), sort_keys=True))

    with open(meta_path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")
    return WriteReport(out_dir=out_dir, per_group=per_group, per_origin=per_origin, n_files=n_files)
