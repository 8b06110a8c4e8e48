"""HTTP review service over a synthesized dataset directory."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel
from PIL import Image

from .corpus import imread_mask, imread_rgb, mask_to_edge
from .curation import CurationError, CurationStore, UnknownResourceError, Verdict

MASK_TINT = np.array([40, 200, 80], dtype=np.float64)
FOOTPRINT_COLOR = np.array([230, 40, 40], dtype=np.uint8)


class VerdictIn(BaseModel):
    sample_id: str
    decision: str
    reason: str | None = None
    reviewer: str | None = None
    new_label: str | None = None


def render_overlay(store: CurationStore, sample_id: str) -> np.ndarray:
    """Sample image with the mask tinted and the paste footprint outlined."""
    image = imread_rgb(store.file_path(sample_id, "image")).astype(np.float64)
    mask = imread_mask(store.file_path(sample_id, "mask"))
    image[mask] = 0.55 * image[mask] + 0.45 * MASK_TINT
    fp_path = store.footprint_path(sample_id)
    if fp_path.is_file():
        footprint = imread_mask(fp_path)
        if footprint.any():
            outline = mask_to_edge(footprint, thickness=2)
            image[outline] = FOOTPRINT_COLOR
    return image.astype(np.uint8)


def _png_bytes(array: np.ndarray) -> bytes:
    if array.dtype == bool:
        array = array.astype(np.uint8) * 255
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    return buf.getvalue()


def create_app(store: CurationStore, ui_dir: Path | str | None = None) -> FastAPI:
    app = FastAPI(title="cosynth curation service")

    def _bad(exc: CurationError) -> HTTPException:
        code = 404 if isinstance(exc, UnknownResourceError) else 400
        return HTTPException(status_code=code, detail=str(exc))

    @app.get("/api/groups")
    def groups():
        return store.groups()

    @app.get("/api/candidates")
    def candidates(group: str | None = None, page: int = 0, page_size: int = 20):
        try:
            return store.next_candidates(group=group, page=page, page_size=page_size)
        except CurationError as exc:
            raise _bad(exc)

    @app.get("/api/sample/{sample_id}/image")
    def sample_image(sample_id: str):
        try:
            data = _png_bytes(imread_rgb(store.file_path(sample_id, "image")))
        except CurationError as exc:
            raise _bad(exc)
        return Response(content=data, media_type="image/png")

    @app.get("/api/sample/{sample_id}/mask")
    def sample_mask(sample_id: str):
        try:
            data = _png_bytes(imread_mask(store.file_path(sample_id, "mask")))
        except CurationError as exc:
            raise _bad(exc)
        return Response(content=data, media_type="image/png")

    @app.get("/api/sample/{sample_id}/overlay")
    def sample_overlay(sample_id: str):
        try:
            data = _png_bytes(render_overlay(store, sample_id))
        except CurationError as exc:
            raise _bad(exc)
        return Response(content=data, media_type="image/png")

    @app.post("/api/verdict")
    def verdict(body: VerdictIn):
        try:
            v = Verdict(
                sample_id=body.sample_id,
                decision=body.decision,
                reason=body.reason,
                reviewer=body.reviewer,
                new_label=body.new_label,
            )
            outcome = store.apply_verdict(v)
        except CurationError as exc:
            raise _bad(exc)
        replacement_id = outcome.get("replacement_id")
        if replacement_id:
            outcome["replacement"] = store.candidate_summary(replacement_id)
        return outcome

    @app.get("/api/stats")
    def stats():
        return store.stats()

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(
    dataset_dir: Path | str,
    port: int = 8008,
    host: str = "127.0.0.1",
    ui_dir: Path | str | None = None,
) -> None:
    import uvicorn

    store = CurationStore(dataset_dir)
    app = create_app(store, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
