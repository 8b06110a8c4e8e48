"""Group occupancy patterns and dataset-level statistics reports."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .grouping import GroupedCorpus, GroupStats, group_statistics

PATTERN_SIZE = (224, 224)


@dataclass
class GroupPattern:
    label: str
    pattern: np.ndarray  # float64 in [0, 1], occupancy frequency per pixel

    def to_image(self) -> np.ndarray:
        return np.round(self.pattern * 255.0).astype(np.uint8)


@dataclass
class DatasetReport:
    stats: GroupStats
    group_sizes: dict[str, int]
    origin_counts: dict[str, int] = field(default_factory=dict)


def group_pattern(
    masks: list[np.ndarray],
    size: tuple[int, int] = PATTERN_SIZE,
    label: str = "",
) -> GroupPattern:
    """Pixel-wise mean of the group's masks, resized to a common canvas.

    Nearest-neighbor resize keeps each resized mask binary, so the pattern
    reads as an occupancy frequency.
    """
    if not masks:
        raise ValueError("group has no masks")
    w, h = size
    acc = np.zeros((h, w), dtype=np.float64)
    for mask in masks:
        m = np.asarray(mask, dtype=bool)
        if m.shape != (h, w):
            img = Image.fromarray(m.astype(np.uint8) * 255)
            m = np.asarray(img.resize((w, h), Image.NEAREST)) > 0
        acc += m
    return GroupPattern(label=label, pattern=acc / len(masks))


def dataset_report(
    corpus: GroupedCorpus, origin_by_id: dict[str, str] | None = None
) -> DatasetReport:
    """Headline statistics row plus per-group sizes and origin breakdown."""
    stats = group_statistics(corpus)
    sizes = {g.label: g.size for g in corpus.groups}
    origins: dict[str, int] = {}
    if origin_by_id:
        for g in corpus.groups:
            for sid in g.member_ids:
                origin = origin_by_id.get(sid, "source")
                origins[origin] = origins.get(origin, 0) + 1
    return DatasetReport(stats=stats, group_sizes=sizes, origin_counts=origins)
