"""Human-in-the-loop review: verdict log, status replay, deterministic re-synthesis.

State is never stored, only derived: the dataset's metadata.jsonl gives the
initial statuses and an append-only verdicts.jsonl (re)plays on top of it.
Rejections synthesize a replacement for the same canvas slot with the attempt
counter advanced, using the exact RNG-derivation rule of the original run, so
a restarted service reproduces replacement ids byte for byte.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, asdict
from datetime import datetime, timezone
from pathlib import Path

from .corpus import (
    ImageSample,
    append_sample,
    imread_mask,
    imread_rgb,
    load_manifest,
    load_sample,
    write_dataset,
)
from .cutter import cut_sample
from .grouping import build_groups
from .paster import (
    RUN_REPORT_NAME,
    Rejection,
    SynthesisConfig,
    synthesize_sample,
)

log = logging.getLogger(__name__)

VERDICT_LOG_NAME = "verdicts.jsonl"
DECISIONS = ("accept", "reject", "relabel")


class CurationError(ValueError):
    pass


class UnknownResourceError(CurationError):
    """Lookup of a sample or group id that does not exist."""


@dataclass
class Verdict:
    sample_id: str
    decision: str
    reason: str | None = None
    reviewer: str | None = None
    timestamp: str | None = None
    new_label: str | None = None

    def __post_init__(self):
        if self.decision not in DECISIONS:
            raise CurationError(f"unknown decision {self.decision!r}; expected one of {DECISIONS}")
        if self.decision == "relabel" and not self.new_label:
            raise CurationError("relabel verdict requires new_label")


class _Resynthesizer:
    """Rebuilds the original run's corpus and cutout pools on first use."""

    def __init__(self, run_info: dict):
        manifest_path = run_info.get("manifest")
        if not manifest_path or not Path(manifest_path).is_file():
            raise CurationError(
                f"source manifest {manifest_path!r} is unavailable; cannot re-synthesize"
            )
        self.cfg = SynthesisConfig(**run_info["config"])
        manifest = load_manifest(manifest_path)
        self.corpus = build_groups(manifest, min_group_size=run_info.get("min_group_size", 4))
        border_tolerance = run_info.get("border_tolerance", 0.02)
        group_of = {}
        for g in self.corpus.groups:
            for sid in g.member_ids:
                group_of[sid] = g.label
        self.samples: dict[str, ImageSample] = {}
        self.cutouts: dict[str, list] = {g.label: [] for g in self.corpus.groups}
        for rec in manifest.records:
            if rec.id not in group_of:
                continue
            sample = load_sample(rec, manifest.root)
            sample.group_id = group_of[rec.id]
            self.samples[rec.id] = sample
            cutout, _, _ = cut_sample(sample, border_tolerance)
            if cutout.complete:
                self.cutouts[sample.group_id].append(cutout)

    def replacement_for(self, canvas_id: str, sample_index: int, start_attempt: int):
        canvas = self.samples.get(canvas_id)
        if canvas is None:
            raise CurationError(f"canvas {canvas_id!r} not found in source corpus")
        return synthesize_sample(
            canvas, self.corpus, self.cutouts, self.cfg, sample_index, start_attempt
        )


class CurationStore:
    """Single-writer review state over one synthesized dataset directory."""

    def __init__(self, dataset_dir: Path | str):
        self.dataset_dir = Path(dataset_dir)
        self.meta_path = self.dataset_dir / "metadata.jsonl"
        self.log_path = self.dataset_dir / VERDICT_LOG_NAME
        if not self.meta_path.is_file():
            raise CurationError(f"{self.meta_path} not found; not a dataset directory")
        self._lock = threading.Lock()
        self._records: dict[str, dict] = {}
        self._order: list[str] = []
        self._status: dict[str, str] = {}
        self._replacements: dict[str, str | None] = {}
        self.label_overrides: dict[str, str] = {}
        self._resynth: _Resynthesizer | None = None
        self.run_info: dict = {}

        run_path = self.dataset_dir / RUN_REPORT_NAME
        if run_path.is_file():
            with open(run_path, encoding="utf-8") as fh:
                self.run_info = json.load(fh)

        with open(self.meta_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                self._records[rec["id"]] = rec
                self._order.append(rec["id"])
                if rec.get("origin") == "synthesized":
                    self._status[rec["id"]] = rec.get("status") or "pending"

        if self.log_path.is_file():
            with open(self.log_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._apply(Verdict(**json.loads(line)), replay=True)

    # -- queries ------------------------------------------------------------

    def record(self, sample_id: str) -> dict:
        try:
            return self._records[sample_id]
        except KeyError:
            raise UnknownResourceError(f"unknown sample id {sample_id!r}") from None

    def status(self, sample_id: str) -> str | None:
        return self._status.get(sample_id)

    def groups(self) -> list[dict]:
        counts: dict[str, dict] = {}
        for sid, status in self._status.items():
            label = self._records[sid]["group"]
            bucket = counts.setdefault(
                label, {"label": label, "pending": 0, "accepted": 0, "rejected": 0}
            )
            bucket[status] += 1
        return [counts[k] for k in sorted(counts)]

    def next_candidates(
        self,
        group: str | None = None,
        page: int = 0,
        page_size: int = 20,
    ) -> list[dict]:
        """Pending candidates ordered by (group, id), paginated."""
        if group is not None:
            known = {self._records[sid]["group"] for sid in self._status}
            if group not in known:
                raise UnknownResourceError(f"unknown group {group!r}")
        pending = [
            sid
            for sid in self._status
            if self._status[sid] == "pending"
            and (group is None or self._records[sid]["group"] == group)
        ]
        pending.sort(key=lambda sid: (self._records[sid]["group"], sid))
        window = pending[page * page_size : (page + 1) * page_size]
        return [self.candidate_summary(sid) for sid in window]

    def candidate_summary(self, sid: str) -> dict:
        rec = self._records[sid]
        return {
            "sample_id": sid,
            "group": rec["group"],
            "occlusion_ratio": rec.get("occlusion_ratio"),
            "status": self._status.get(sid),
            "provenance": {
                "canvas_id": rec.get("canvas_id"),
                "cutout_id": rec.get("cutout_id"),
                "source_group": rec.get("source_group"),
                "placement": rec.get("placement"),
                "scale": rec.get("scale"),
                "flip": rec.get("flip"),
                "attempt": rec.get("attempt"),
                "seed": rec.get("seed"),
            },
            "paths": {
                "image": f"/api/sample/{sid}/image",
                "mask": f"/api/sample/{sid}/mask",
                "overlay": f"/api/sample/{sid}/overlay",
            },
        }

    def file_path(self, sample_id: str, kind: str) -> Path:
        rec = self.record(sample_id)
        key = {"image": "image_path", "mask": "mask_path", "edge": "edge_path"}[kind]
        return self.dataset_dir / rec[key]

    def footprint_path(self, sample_id: str) -> Path:
        return self.dataset_dir / "footprints" / f"{sample_id}.png"

    def stats(self) -> dict:
        tallies = {"pending": 0, "accepted": 0, "rejected": 0}
        for status in self._status.values():
            tallies[status] += 1
        decided = tallies["accepted"] + tallies["rejected"]
        n_supplement = sum(
            1 for rec in self._records.values() if rec.get("origin") == "supplement"
        )
        return {
            "synthesized": len(self._status),
            "supplement": n_supplement,
            **tallies,
            "rejection_rate": tallies["rejected"] / decided if decided else 0.0,
            "label_overrides": dict(sorted(self.label_overrides.items())),
            "run": {
                k: self.run_info.get(k)
                for k in ("seed", "n_canvases", "n_rejected", "n_retries")
            },
        }

    # -- verdicts -----------------------------------------------------------

    def apply_verdict(self, verdict: Verdict) -> dict:
        """Apply, persist to the log, and (on reject) synthesize a replacement."""
        with self._lock:
            outcome = self._apply(verdict, replay=False)
            self._append_log(verdict)
            return outcome

    def _apply(self, verdict: Verdict, replay: bool) -> dict:
        rec = self.record(verdict.sample_id)
        sid = verdict.sample_id

        if verdict.decision == "relabel":
            self.label_overrides[rec.get("canvas_id") or sid] = verdict.new_label
            return {"status": self._status.get(sid), "relabeled_to": verdict.new_label}

        if sid not in self._status:
            raise CurationError(f"sample {sid!r} is not a synthesized candidate")

        if verdict.decision == "accept":
            self._status[sid] = "accepted"
            return {"status": "accepted", "replacement_id": None}

        # reject: idempotent re-application returns the known replacement
        if self._status[sid] == "rejected" and sid in self._replacements:
            return {"status": "rejected", "replacement_id": self._replacements[sid]}
        self._status[sid] = "rejected"
        replacement_id = self._materialize_replacement(rec)
        self._replacements[sid] = replacement_id
        return {"status": "rejected", "replacement_id": replacement_id}

    def _materialize_replacement(self, rec: dict) -> str | None:
        canvas_id = rec.get("canvas_id")
        sample_index = rec.get("sample_index")
        attempt = rec.get("attempt")
        if canvas_id is None or sample_index is None or attempt is None:
            raise CurationError(
                f"sample {rec['id']!r} lacks synthesis provenance; cannot re-sample"
            )
        existing = self._find_existing_replacement(canvas_id, sample_index, attempt)
        if existing is not None:
            if existing not in self._status:
                self._status[existing] = "pending"
            return existing

        if self._resynth is None:
            self._resynth = _Resynthesizer(self.run_info)
        result = self._resynth.replacement_for(canvas_id, sample_index, attempt + 1)
        if isinstance(result, Rejection):
            log.warning(
                "replacement for %s exhausted attempts: %s", rec["id"], result.reason
            )
            return None
        new_rec = append_sample(result, self.dataset_dir, seed=self.run_info.get("seed"))
        self._records[result.id] = new_rec
        self._order.append(result.id)
        self._status[result.id] = "pending"
        return result.id

    def _find_existing_replacement(
        self, canvas_id: str, sample_index: int, attempt: int
    ) -> str | None:
        """The already-materialized successor of a slot, if a prior run made one."""
        best = None
        for rec in self._records.values():
            if (
                rec.get("canvas_id") == canvas_id
                and rec.get("sample_index") == sample_index
                and rec.get("attempt") is not None
                and rec["attempt"] > attempt
            ):
                if best is None or rec["attempt"] < best["attempt"]:
                    best = rec
        return best["id"] if best else None

    def _append_log(self, verdict: Verdict) -> None:
        if verdict.timestamp is None:
            verdict.timestamp = datetime.now(timezone.utc).isoformat()
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(asdict(verdict), sort_keys=True) + "\n")

    # -- export -------------------------------------------------------------

    def export_accepted(self, out_dir: Path | str, overwrite: bool = False):
        """Write the finalized dataset: accepted synthesized + all supplements."""
        keep = []
        for sid in self._order:
            rec = self._records[sid]
            if rec.get("origin") == "supplement" or self._status.get(sid) == "accepted":
                keep.append(rec)
        samples = []
        for rec in keep:
            sample = ImageSample(
                id=rec["id"],
                image=imread_rgb(self.dataset_dir / rec["image_path"]),
                mask=imread_mask(self.dataset_dir / rec["mask_path"]),
                label=rec["label"],
                group_id=rec["group"],
                origin=rec["origin"],
            )
            samples.append(sample)
        return write_dataset(
            samples, out_dir, seed=self.run_info.get("seed"), overwrite=overwrite
        )
