"""Counterfactual paste synthesis: distractor sampling, placement, compositing.

Every stochastic choice is drawn from a per-(canvas, sample, attempt) RNG
stream derived from the run seed, so results are independent of scheduling
and identical across re-runs, worker counts, and curation-time re-synthesis.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from PIL import Image

from .corpus import ImageSample, Manifest, WriteReport, load_sample, validate_sample, write_dataset
from .cutter import Cutout, cut_sample
from .grouping import GroupedCorpus, build_groups

log = logging.getLogger(__name__)

RUN_REPORT_NAME = "run.json"


class PasteError(RuntimeError):
    pass


class PlacementError(PasteError):
    """No anchor in the background region fits the scaled footprint."""


class CounterfactualError(PasteError):
    """Fewer than two groups: no foreign source group exists."""


@dataclass
class SynthesisConfig:
    ratio_min: float = 0.1
    ratio_max: float = 0.8
    flip_probability: float = 0.5
    occlusion_max: float = 0.05
    max_attempts: int = 10
    samples_per_canvas: int = 2
    supplement_factor: int = 2
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.ratio_min <= self.ratio_max < 1):
            raise ValueError(
                f"require 0 < ratio_min <= ratio_max < 1, got "
                f"[{self.ratio_min}, {self.ratio_max}]"
            )
        if not (0 <= self.occlusion_max < 1):
            raise ValueError(f"occlusion_max must be in [0, 1), got {self.occlusion_max}")
        if not (0 <= self.flip_probability <= 1):
            raise ValueError(f"flip_probability must be in [0, 1], got {self.flip_probability}")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.samples_per_canvas < 0 or self.supplement_factor < 0:
            raise ValueError("samples_per_canvas and supplement_factor must be >= 0")


@dataclass
class SynthesizedSample:
    id: str
    image: np.ndarray
    mask: np.ndarray
    label: str
    group_id: str
    canvas_id: str
    cutout_id: str
    source_group: str
    placement: tuple[int, int]
    scale_ratio: float
    flipped: bool
    footprint: np.ndarray
    occlusion_ratio: float
    attempt: int
    sample_index: int
    status: str = "pending"
    origin: str = "synthesized"


@dataclass
class Rejection:
    canvas_id: str
    sample_index: int
    attempts: int
    reason: str

    @property
    def id(self) -> str:
        return f"{self.canvas_id}_s{self.sample_index}"


def _id_hash(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


def derive_rng(seed: int, canvas_id: str, sample_index: int, attempt: int) -> np.random.Generator:
    """The one RNG derivation rule shared by the pipeline and curation re-synthesis."""
    return np.random.default_rng([seed, _id_hash(canvas_id), sample_index, attempt])


def pick_source_group(corpus: GroupedCorpus, target_group: str, rng: np.random.Generator) -> str:
    """Uniform draw over the other groups, each with probability 1/(z-1)."""
    if corpus.z < 2:
        raise CounterfactualError(
            "corpus has a single group; no foreign source group to sample from"
        )
    others = [g.label for g in corpus.groups if g.label != target_group]
    return others[int(rng.integers(len(others)))]


def scale_for_canvas(cutout: Cutout, canvas_size: tuple[int, int], ratio: float) -> Cutout:
    """Resample so the cutout's dominant side covers `ratio` of the canvas.

    Aspect ratio is preserved; pixels are resampled bilinearly, the alpha
    silhouette with nearest neighbor so it stays hard.
    """
    cw, ch = cutout.size
    w, h = canvas_size
    current = max(cw / w, ch / h)
    s = ratio / current
    new_w = int(round(cw * s))
    new_h = int(round(ch * s))
    if new_w < 1 or new_h < 1:
        raise PasteError(
            f"cutout {cw}x{ch} scales below one pixel at ratio {ratio:.3f} "
            f"on a {w}x{h} canvas"
        )
    pixels = np.asarray(
        Image.fromarray(cutout.pixels).resize((new_w, new_h), Image.BILINEAR)
    )
    alpha_img = Image.fromarray(cutout.alpha.astype(np.uint8) * 255)
    alpha = np.asarray(alpha_img.resize((new_w, new_h), Image.NEAREST)) > 0
    return Cutout(
        pixels=pixels,
        alpha=alpha,
        rect=cutout.rect,
        source_id=cutout.source_id,
        label=cutout.label,
        complete=cutout.complete,
        clamped=cutout.clamped,
    )


def sample_placement(
    canvas_mask: np.ndarray,
    scaled_size: tuple[int, int],
    rng: np.random.Generator,
) -> tuple[int, int]:
    """Uniform anchor over background pixels where the footprint box fits.

    The anchor is the pasted object's center pixel. Feasible anchors are
    enumerated exactly, so the draw is uniform by construction and failure
    means no feasible anchor exists at this size.
    """
    mask = np.asarray(canvas_mask, dtype=bool)
    h, w = mask.shape
    bg = ~mask
    if not bg.any():
        raise PlacementError("canvas mask covers the whole frame; background is empty")
    sw, sh = scaled_size
    if sw > w or sh > h:
        raise PlacementError(f"footprint {sw}x{sh} exceeds canvas {w}x{h}")
    x_lo, x_hi = sw // 2, w - sw + sw // 2
    y_lo, y_hi = sh // 2, h - sh + sh // 2
    window = np.zeros_like(bg)
    window[y_lo : y_hi + 1, x_lo : x_hi + 1] = True
    feasible = np.flatnonzero(bg & window)
    if len(feasible) == 0:
        raise PlacementError(
            f"no background anchor fits a {sw}x{sh} footprint inside the frame"
        )
    pick = int(feasible[int(rng.integers(len(feasible)))])
    return pick % w, pick // w


def composite(
    canvas: ImageSample,
    cutout: Cutout,
    placement: tuple[int, int],
    flip: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Paste the cutout's silhouette pixels; everything else stays canvas."""
    pixels = cutout.pixels
    alpha = cutout.alpha
    if flip:
        pixels = pixels[:, ::-1]
        alpha = alpha[:, ::-1]
    sh, sw = alpha.shape
    x, y = placement
    left, top = x - sw // 2, y - sh // 2
    h, w = canvas.mask.shape
    if left < 0 or top < 0 or left + sw > w or top + sh > h:
        raise PasteError(f"placement ({x}, {y}) puts the footprint outside the frame")
    image = canvas.image.copy()
    region = image[top : top + sh, left : left + sw]
    region[alpha] = pixels[alpha]
    footprint = np.zeros((h, w), dtype=bool)
    footprint[top : top + sh, left : left + sw] = alpha
    return image, footprint


def synthesize_mask(canvas_mask: np.ndarray, footprint: np.ndarray) -> np.ndarray:
    """New ground truth: canvas foreground minus the pasted footprint."""
    canvas_mask = np.asarray(canvas_mask, dtype=bool)
    footprint = np.asarray(footprint, dtype=bool)
    if canvas_mask.shape != footprint.shape:
        raise PasteError(
            f"mask {canvas_mask.shape} and footprint {footprint.shape} dims differ"
        )
    out = canvas_mask & ~footprint
    if not out.any():
        raise PasteError("paste occludes the entire canvas object")
    return out


def occlusion_ratio(canvas_mask: np.ndarray, footprint: np.ndarray) -> float:
    canvas_mask = np.asarray(canvas_mask, dtype=bool)
    fg = int(np.count_nonzero(canvas_mask))
    if fg == 0:
        raise PasteError("canvas mask is empty")
    overlap = int(np.count_nonzero(canvas_mask & np.asarray(footprint, dtype=bool)))
    return overlap / fg


def synthesize_sample(
    canvas: ImageSample,
    corpus: GroupedCorpus,
    cutouts: dict[str, list[Cutout]],
    cfg: SynthesisConfig,
    sample_index: int,
    start_attempt: int = 0,
) -> SynthesizedSample | Rejection:
    """Full per-sample synthesis with QC retries.

    Each attempt re-draws every stochastic choice from its own RNG stream.
    Placement failures shrink the size ratio by 0.9 (floored at ratio_min)
    before the attempt is counted as failed.
    """
    canvas_group = canvas.group_id or canvas.label
    if corpus.z < 2:
        raise CounterfactualError(
            "corpus has a single group; counterfactual synthesis is impossible"
        )
    eligible = GroupedCorpus(
        groups=[
            g for g in corpus.groups if g.label == canvas_group or cutouts.get(g.label)
        ]
    )
    if not any(g.label != canvas_group for g in eligible.groups):
        return Rejection(
            canvas_id=canvas.id,
            sample_index=sample_index,
            attempts=0,
            reason=f"no complete cutouts available outside group {canvas_group!r}",
        )
    w, h = canvas.size
    reason = "exhausted attempts"
    for attempt in range(start_attempt, start_attempt + cfg.max_attempts):
        rng = derive_rng(cfg.seed, canvas.id, sample_index, attempt)
        source_group = pick_source_group(eligible, canvas_group, rng)
        pool = cutouts[source_group]
        cutout = pool[int(rng.integers(len(pool)))]
        ratio = float(rng.uniform(cfg.ratio_min, cfg.ratio_max))
        flip = bool(rng.random() < cfg.flip_probability)

        placement = None
        scaled = None
        r = ratio
        while True:
            try:
                scaled = scale_for_canvas(cutout, (w, h), r)
            except PasteError as exc:
                reason = str(exc)
                break
            if not scaled.alpha.any():
                reason = "cutout silhouette vanished at this scale"
                break
            try:
                placement = sample_placement(canvas.mask, scaled.size, rng)
                break
            except PlacementError as exc:
                reason = "no feasible placement"
                log.debug("canvas %s attempt %d: %s", canvas.id, attempt, exc)
                if r <= cfg.ratio_min:
                    break
                r = max(r * 0.9, cfg.ratio_min)
        if placement is None:
            continue

        image, footprint = composite(canvas, scaled, placement, flip)
        try:
            mask = synthesize_mask(canvas.mask, footprint)
        except PasteError as exc:
            reason = str(exc)
            continue
        occ = occlusion_ratio(canvas.mask, footprint)
        if occ > cfg.occlusion_max:
            reason = f"occlusion {occ:.3f} above threshold {cfg.occlusion_max}"
            continue

        return SynthesizedSample(
            id=f"{canvas.id}_s{sample_index}_a{attempt}",
            image=image,
            mask=mask,
            label=canvas.label,
            group_id=canvas_group,
            canvas_id=canvas.id,
            cutout_id=cutout.source_id,
            source_group=source_group,
            placement=placement,
            scale_ratio=r,
            flipped=flip,
            footprint=footprint,
            occlusion_ratio=occ,
            attempt=attempt,
            sample_index=sample_index,
        )
    return Rejection(
        canvas_id=canvas.id,
        sample_index=sample_index,
        attempts=cfg.max_attempts,
        reason=reason,
    )


@dataclass
class PipelineReport:
    out_dir: Path
    n_canvases: int
    n_synthesized: int
    n_supplement: int
    n_rejected: int
    n_retries: int
    rejections: list[dict] = field(default_factory=list)
    excluded_groups: dict[str, list[str]] = field(default_factory=dict)
    invalid_samples: dict[str, list[str]] = field(default_factory=dict)
    incomplete_cutouts: list[str] = field(default_factory=list)
    write: WriteReport | None = None

    @property
    def total_emitted(self) -> int:
        return self.n_synthesized + self.n_supplement


def _supplement_copies(sample: ImageSample, k: int) -> list[ImageSample]:
    out = []
    for i in range(k):
        out.append(
            ImageSample(
                id=f"{sample.id}_u{i}",
                image=sample.image,
                mask=sample.mask,
                label=sample.label,
                group_id=sample.group_id,
                origin="supplement",
            )
        )
    return out


def run_pipeline(
    manifest: Manifest,
    cfg: SynthesisConfig,
    out_dir: Path | str,
    jobs: int = 1,
    min_group_size: int = 4,
    border_tolerance: float = 0.02,
    overwrite: bool = False,
) -> PipelineReport:
    """Synthesize the full dataset: per canvas, samples_per_canvas pastes plus
    supplement_factor unaugmented copies, written under out_dir."""
    out_dir = Path(out_dir)
    corpus = build_groups(manifest, min_group_size=min_group_size)
    if corpus.z < 2:
        raise CounterfactualError(
            f"need at least two groups after filtering, got {corpus.z}"
        )

    group_of = {}
    for g in corpus.groups:
        for sid in g.member_ids:
            group_of[sid] = g.label

    samples: dict[str, ImageSample] = {}
    invalid: dict[str, list[str]] = {}
    for rec in manifest.records:
        if rec.id not in group_of:
            continue
        sample = load_sample(rec, manifest.root)
        sample.group_id = group_of[rec.id]
        violations = validate_sample(sample)
        if violations:
            invalid[rec.id] = violations
        else:
            samples[rec.id] = sample

    cutouts: dict[str, list[Cutout]] = {g.label: [] for g in corpus.groups}
    incomplete = []
    for rec in manifest.records:
        sample = samples.get(rec.id)
        if sample is None:
            continue
        cutout, _, _ = cut_sample(sample, border_tolerance)
        if cutout.complete:
            cutouts[sample.group_id].append(cutout)
        else:
            incomplete.append(sample.id)

    canvases = [samples[rec.id] for rec in manifest.records if rec.id in samples]
    tasks = [(canvas, i) for canvas in canvases for i in range(cfg.samples_per_canvas)]

    def _run(task):
        canvas, index = task
        return synthesize_sample(canvas, corpus, cutouts, cfg, index)

    if jobs > 1 and tasks:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run, tasks))
    else:
        results = [_run(t) for t in tasks]

    by_canvas: dict[str, list] = {c.id: [] for c in canvases}
    rejections = []
    n_retries = 0
    for (canvas, index), result in zip(tasks, results):
        if isinstance(result, Rejection):
            rejections.append(result)
            n_retries += max(result.attempts - 1, 0)
        else:
            by_canvas[canvas.id].append(result)
            n_retries += result.attempt

    emitted = []
    n_supplement = 0
    for canvas in canvases:
        emitted.extend(by_canvas[canvas.id])
        copies = _supplement_copies(canvas, cfg.supplement_factor)
        emitted.extend(copies)
        n_supplement += len(copies)

    write = write_dataset(emitted, out_dir, seed=cfg.seed, overwrite=overwrite)

    report = PipelineReport(
        out_dir=out_dir,
        n_canvases=len(canvases),
        n_synthesized=len(emitted) - n_supplement,
        n_supplement=n_supplement,
        n_rejected=len(rejections),
        n_retries=n_retries,
        rejections=[asdict(r) for r in rejections],
        excluded_groups=corpus.excluded,
        invalid_samples=invalid,
        incomplete_cutouts=incomplete,
        write=write,
    )
    _write_run_report(report, manifest, cfg, min_group_size, border_tolerance)
    return report


def _write_run_report(
    report: PipelineReport,
    manifest: Manifest,
    cfg: SynthesisConfig,
    min_group_size: int,
    border_tolerance: float,
) -> None:
    payload = {
        "format": 1,
        "seed": cfg.seed,
        "config": asdict(cfg),
        "min_group_size": min_group_size,
        "border_tolerance": border_tolerance,
        "manifest": str(manifest.path.resolve()) if manifest.path else None,
        "n_canvases": report.n_canvases,
        "n_synthesized": report.n_synthesized,
        "n_supplement": report.n_supplement,
        "n_rejected": report.n_rejected,
        "n_retries": report.n_retries,
        "rejections": report.rejections,
        "excluded_groups": report.excluded_groups,
        "invalid_samples": report.invalid_samples,
        "incomplete_cutouts": report.incomplete_cutouts,
    }
    with open(report.out_dir / RUN_REPORT_NAME, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
