"""Command-line entry point: synth, eval, stats, patterns, cut, validate, serve, verdict."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .analytics import group_pattern
from .corpus import (
    MANIFEST_FORMAT_VERSION,
    METADATA_FORMAT_VERSION,
    imread_mask,
    imread_rgb,
    load_manifest,
    load_sample,
    save_png,
    validate_sample,
)
from .cutter import cut_sample
from .grouping import apply_label_overrides, build_groups, group_statistics
from .metrics import MetricError, evaluate_dataset, pair_maps
from .paster import SynthesisConfig, run_pipeline

VERSION_LINE = (
    f"cosynth {__version__} "
    f"(manifest format {MANIFEST_FORMAT_VERSION}, metadata format {METADATA_FORMAT_VERSION})"
)


def _fail(code: int, exc: BaseException | str) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _merge_config(ctx: click.Context, config: str | None, flags: dict) -> dict:
    """Layer values: explicit CLI flags beat the config file, which beats defaults."""
    if not config:
        return flags
    with open(config, encoding="utf-8") as fh:
        file_cfg = json.load(fh)
    merged = dict(flags)
    for key in flags:
        source = ctx.get_parameter_source(key)
        if source == click.core.ParameterSource.DEFAULT and key in file_cfg:
            merged[key] = file_cfg[key]
    return merged


@click.group()
@click.version_option(version=__version__, message=VERSION_LINE)
def main():
    """Synthesize, curate, and evaluate multi-foreground saliency datasets."""


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--samples-per-canvas", default=2, type=int, show_default=True)
@click.option("--supplement", default=2, type=int, show_default=True)
@click.option("--ratio-min", default=0.1, type=float, show_default=True)
@click.option("--ratio-max", default=0.8, type=float, show_default=True)
@click.option("--flip-prob", default=0.5, type=float, show_default=True)
@click.option("--occlusion-max", default=0.05, type=float, show_default=True)
@click.option("--max-attempts", default=10, type=int, show_default=True)
@click.option("--jobs", default=1, type=int, show_default=True)
@click.option("--min-group-size", default=4, type=int, show_default=True)
@click.option("--overrides", type=click.Path(), default=None,
              help="JSON file of {sample_id: corrected_label} applied before grouping.")
@click.option("--overwrite", is_flag=True, default=False)
@click.option("--config", type=click.Path(), default=None,
              help="JSON file mirroring the flags; explicit flags win.")
@click.pass_context
def synth(ctx, manifest_path, out_dir, seed, samples_per_canvas, supplement,
          ratio_min, ratio_max, flip_prob, occlusion_max, max_attempts,
          jobs, min_group_size, overrides, overwrite, config):
    """Run the full cut-paste synthesis pipeline over a manifest."""
    flags = _merge_config(ctx, config, {
        "seed": seed, "samples_per_canvas": samples_per_canvas,
        "supplement": supplement, "ratio_min": ratio_min, "ratio_max": ratio_max,
        "flip_prob": flip_prob, "occlusion_max": occlusion_max,
        "max_attempts": max_attempts, "jobs": jobs, "min_group_size": min_group_size,
    })
    try:
        cfg = SynthesisConfig(
            ratio_min=flags["ratio_min"],
            ratio_max=flags["ratio_max"],
            flip_probability=flags["flip_prob"],
            occlusion_max=flags["occlusion_max"],
            max_attempts=flags["max_attempts"],
            samples_per_canvas=flags["samples_per_canvas"],
            supplement_factor=flags["supplement"],
            seed=flags["seed"],
        )
    except ValueError as exc:
        _fail(1, exc)
    try:
        manifest = load_manifest(manifest_path)
        if overrides:
            with open(overrides, encoding="utf-8") as fh:
                apply_label_overrides(manifest, json.load(fh))
        report = run_pipeline(
            manifest, cfg, out_dir,
            jobs=flags["jobs"],
            min_group_size=flags["min_group_size"],
            overwrite=overwrite,
        )
    except Exception as exc:
        _fail(2, exc)
    click.echo(
        f"synthesized {report.n_synthesized} + {report.n_supplement} supplement "
        f"({report.n_rejected} rejected, {report.n_retries} resamples) -> {report.out_dir}",
        err=True,
    )


def _collect_pngs(root: Path) -> dict[str, Path]:
    out = {}
    for path in sorted(root.rglob("*.png")):
        if "footprints" in path.parts:
            continue
        out[path.stem] = path
    return out


def _collect_gt(gt_dir: Path) -> tuple[dict[str, Path], dict[str, str]]:
    """Ground-truth masks by id, plus a group assignment from subdirectories."""
    all_pngs = _collect_pngs(gt_dir)
    masks = {k[: -len("_mask")]: v for k, v in all_pngs.items() if k.endswith("_mask")}
    if not masks:
        masks = {k: v for k, v in all_pngs.items() if not k.endswith("_edge")}
    groups = {}
    for sid, path in masks.items():
        if path.parent != gt_dir:
            groups[sid] = path.parent.name
    return masks, groups


@main.command("eval")
@click.option("--pred", "pred_dir", required=True, type=click.Path())
@click.option("--gt", "gt_dir", required=True, type=click.Path())
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--per-group", is_flag=True, default=False)
def eval_cmd(pred_dir, gt_dir, report_path, per_group):
    """Score predicted saliency maps against ground-truth masks."""
    try:
        gt_paths, groups = _collect_gt(Path(gt_dir))
        pred_paths = {
            k: v for k, v in _collect_pngs(Path(pred_dir)).items()
            if not (k.endswith("_edge") or k.endswith("_mask"))
        }
        preds = {k: np.asarray(imread_rgb(v).mean(axis=2) / 255.0) for k, v in pred_paths.items()}
        gts = {k: imread_mask(v) for k, v in gt_paths.items()}
        pairs = pair_maps(preds, gts)
        result = evaluate_dataset(pairs, grouping=groups if per_group else None)
    except MetricError as exc:
        _fail(2, exc)
    except Exception as exc:
        _fail(2, exc)

    with open(report_path, "w", encoding="utf-8") as fh:
        for row in result.per_image:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
        agg = {"id": "aggregate", **result.aggregate}
        fh.write(json.dumps(agg, sort_keys=True) + "\n")
        for label, row in result.per_group.items():
            fh.write(json.dumps({"group": label, **row}, sort_keys=True) + "\n")
    click.echo(json.dumps(agg, sort_keys=True))


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
def stats(manifest_path):
    """Print the headline dataset row: #images #groups avg max min."""
    try:
        manifest = load_manifest(manifest_path)
        corpus = build_groups(manifest, min_group_size=1)
        row = group_statistics(corpus).row()
    except Exception as exc:
        _fail(2, exc)
    click.echo(row)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--size", default=224, type=int, show_default=True)
def patterns(manifest_path, out_dir, size):
    """Write one occupancy-pattern image per group."""
    try:
        manifest = load_manifest(manifest_path)
        corpus = build_groups(manifest, min_group_size=1)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        by_id = {rec.id: rec for rec in manifest.records}
        for group in corpus.groups:
            masks = [
                imread_mask(manifest.root / by_id[sid].mask_path)
                for sid in group.member_ids
            ]
            pattern = group_pattern(masks, size=(size, size), label=group.label)
            save_png(pattern.to_image(), out / f"{group.label}.png")
    except Exception as exc:
        _fail(2, exc)
    click.echo(f"wrote {corpus.z} pattern image(s) to {out_dir}", err=True)


@main.command()
@click.option("--image", "image_path", required=True, type=click.Path())
@click.option("--mask", "mask_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--border-tolerance", default=0.02, type=float, show_default=True)
def cut(image_path, mask_path, out_dir, border_tolerance):
    """Extract the largest object from one (image, mask) pair."""
    try:
        from .corpus import ImageSample

        sample = ImageSample(
            id=Path(image_path).stem,
            image=imread_rgb(image_path),
            mask=imread_mask(mask_path),
            label=Path(image_path).stem,
        )
        cutout, contour, rest = cut_sample(sample, border_tolerance)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_png(cutout.pixels, out / "cutout.png")
        save_png(cutout.alpha, out / "alpha.png")
        record = {
            "source": sample.id,
            "contour_points": len(contour),
            "rect": {
                "center": list(cutout.rect.center),
                "size": list(cutout.rect.size),
                "angle": cutout.rect.angle,
            },
            "complete": cutout.complete,
            "clamped": cutout.clamped,
            "other_components": len(rest),
        }
        with open(out / "cutout.json", "w", encoding="utf-8") as fh:
            json.dump(record, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except Exception as exc:
        _fail(2, exc)
    click.echo(f"cutout written to {out_dir}", err=True)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--min-fg", default=0.005, type=float, show_default=True)
@click.option("--max-fg", default=0.95, type=float, show_default=True)
def validate(manifest_path, min_fg, max_fg):
    """Check every manifest sample against the mechanical quality criteria."""
    try:
        manifest = load_manifest(manifest_path)
        n_bad = 0
        for rec in manifest.records:
            sample = load_sample(rec, manifest.root)
            violations = validate_sample(sample, min_fg=min_fg, max_fg=max_fg)
            for v in violations:
                click.echo(f"{rec.id}: {v}")
            n_bad += bool(violations)
    except Exception as exc:
        _fail(2, exc)
    click.echo(f"{len(manifest.records)} checked, {n_bad} with violations", err=True)
    if n_bad:
        sys.exit(1)


@main.command()
@click.option("--dataset", "dataset_dir", required=True, type=click.Path())
@click.option("--port", default=8008, type=int, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--ui-dir", type=click.Path(), default=None,
              help="Static frontend bundle to mount at /ui/.")
def serve(dataset_dir, port, host, ui_dir):
    """Run the curation review service."""
    try:
        from .service import serve as run_service

        run_service(dataset_dir, port=port, host=host, ui_dir=ui_dir)
    except Exception as exc:
        _fail(2, exc)


@main.command()
@click.option("--dataset", "dataset_dir", required=True, type=click.Path())
@click.option("--id", "sample_id", required=True)
@click.option("--decision", required=True, type=click.Choice(["accept", "reject", "relabel"]))
@click.option("--reason", default=None)
@click.option("--new-label", default=None)
def verdict(dataset_dir, sample_id, decision, reason, new_label):
    """Record one verdict without the UI; rejects trigger re-synthesis."""
    try:
        from .curation import CurationStore, Verdict

        store = CurationStore(dataset_dir)
        outcome = store.apply_verdict(
            Verdict(sample_id=sample_id, decision=decision, reason=reason, new_label=new_label)
        )
    except ValueError as exc:
        _fail(1, exc)
    except Exception as exc:
        _fail(2, exc)
    click.echo(json.dumps(outcome, sort_keys=True))


if __name__ == "__main__":
    main()
