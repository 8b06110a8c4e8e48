"""Semantic group construction from labels and the external-classifier adapter."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field

import numpy as np
import requests
from PIL import Image

from .corpus import Manifest

log = logging.getLogger(__name__)


class GroupingError(ValueError):
    pass


class ClassifierError(RuntimeError):
    """Adapter-level failure: unreachable endpoint or malformed response."""


@dataclass
class Group:
    label: str
    member_ids: list[str]
    superclass: str | None = None

    @property
    def size(self) -> int:
        return len(self.member_ids)


@dataclass
class GroupedCorpus:
    groups: list[Group]
    excluded: dict[str, list[str]] = field(default_factory=dict)

    @property
    def z(self) -> int:
        return len(self.groups)

    @property
    def labels(self) -> list[str]:
        return [g.label for g in self.groups]

    def group_of(self, sample_id: str) -> str:
        for g in self.groups:
            if sample_id in g.member_ids:
                return g.label
        raise KeyError(sample_id)


@dataclass
class GroupStats:
    n_images: int
    n_categories: int
    avg_per_group: float
    max_per_group: int
    min_per_group: int

    def row(self) -> str:
        """The five headline columns, average rounded to one decimal."""
        return (
            f"{self.n_images} {self.n_categories} "
            f"{self.avg_per_group:.1f} {self.max_per_group} {self.min_per_group}"
        )


def apply_label_overrides(manifest: Manifest, overrides: dict[str, str]) -> int:
    """Rewrite record labels in place; returns how many records changed."""
    changed = 0
    for rec in manifest.records:
        new = overrides.get(rec.id)
        if new is not None and new != rec.label:
            rec.label = new
            changed += 1
    return changed


def build_groups(manifest: Manifest, min_group_size: int = 4) -> GroupedCorpus:
    """Partition manifest records into one group per distinct label.

    Groups are ordered by first appearance, members keep manifest order.
    Groups below min_group_size are excluded (reported on the result).
    """
    by_label: dict[str, list[str]] = {}
    for rec in manifest.records:
        if not rec.label:
            raise GroupingError(f"record {rec.id!r} has an empty label")
        by_label.setdefault(rec.label, []).append(rec.id)

    groups = []
    excluded = {}
    for label, ids in by_label.items():
        if len(ids) >= min_group_size:
            groups.append(Group(label=label, member_ids=ids))
        else:
            excluded[label] = ids
    if excluded:
        log.info(
            "excluded %d group(s) below min size %d: %s",
            len(excluded), min_group_size, sorted(excluded),
        )
    if not groups:
        raise GroupingError(
            f"no group reaches min_group_size={min_group_size} "
            f"({len(by_label)} label(s) seen)"
        )
    return GroupedCorpus(groups=groups, excluded=excluded)


def classify_external(image: np.ndarray, endpoint: str, timeout: float = 30.0) -> str:
    """Ask a remote classifier for a top-1 label.

    POSTs PNG bytes to <endpoint>/classify and expects
    {"label": <string>, "confidence": <real>} back. The confidence is logged
    but not acted on; label corrections happen through curation overrides.
    """
    buf = io.BytesIO()
    Image.fromarray(np.asarray(image)).save(buf, format="PNG")
    url = endpoint.rstrip("/") + "/classify"
    try:
        resp = requests.post(
            url,
            data=buf.getvalue(),
            headers={"Content-Type": "application/octet-stream"},
            timeout=timeout,
        )
    except requests.RequestException as exc:
        raise ClassifierError(f"classifier at {endpoint} unreachable: {exc}") from exc
    if resp.status_code // 100 != 2:
        raise ClassifierError(f"classifier at {endpoint} returned HTTP {resp.status_code}")
    try:
        payload = resp.json()
    except ValueError as exc:
        raise ClassifierError(f"classifier at {endpoint} returned non-JSON body") from exc
    if "label" not in payload:
        raise ClassifierError(f"classifier response missing 'label' field: {payload}")
    if "confidence" in payload:
        log.debug("classifier confidence %.4f for label %r", payload["confidence"], payload["label"])
    return str(payload["label"])


def group_statistics(corpus: GroupedCorpus) -> GroupStats:
    sizes = [g.size for g in corpus.groups]
    n = sum(sizes)
    return GroupStats(
        n_images=n,
        n_categories=len(sizes),
        avg_per_group=n / len(sizes),
        max_per_group=max(sizes),
        min_per_group=min(sizes),
    )
