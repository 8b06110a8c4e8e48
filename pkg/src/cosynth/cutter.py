"""Object extraction: object maps, contour tracing, minimum-area rects, cutouts.

Geometry convention: points are (x, y) with x = column, y = row, matching
numpy arrays indexed [y, x]. "Clockwise" is in display orientation (y down).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .corpus import ImageSample


class CutError(ValueError):
    pass


@dataclass
class Contour:
    points: np.ndarray  # (n, 2) int, columns (x, y)
    closed: bool = True

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class RotatedRect:
    center: tuple[float, float]
    size: tuple[float, float]  # (w, h)
    angle: float  # radians, normalized to [-pi/2, pi/2)

    @property
    def area(self) -> float:
        return self.size[0] * self.size[1]

    def corners(self) -> np.ndarray:
        cx, cy = self.center
        w, h = self.size
        c, s = math.cos(self.angle), math.sin(self.angle)
        out = []
        for dx, dy in ((-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)):
            out.append((cx + dx * c - dy * s, cy + dx * s + dy * c))
        return np.array(out)


@dataclass
class Cutout:
    pixels: np.ndarray  # (h, w, 3) uint8, zero outside alpha
    alpha: np.ndarray  # (h, w) bool
    rect: RotatedRect
    source_id: str
    label: str
    complete: bool
    clamped: bool = False

    @property
    def size(self) -> tuple[int, int]:
        h, w = self.alpha.shape
        return w, h


def object_map(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Image with background zeroed: pixel kept iff mask foreground."""
    image = np.asarray(image)
    mask = np.asarray(mask, dtype=bool)
    if image.shape[:2] != mask.shape:
        raise CutError(f"image {image.shape[:2]} and mask {mask.shape} dims differ")
    if not mask.any():
        raise CutError("mask is empty")
    return np.where(mask[..., None], image, 0).astype(image.dtype)


# Clockwise 8-neighborhood starting north, as (dx, dy) with y pointing down.
_DIRS = ((0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1))
_EIGHT_CONN = np.ones((3, 3), dtype=int)


def _follow_border(component: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Clockwise Moore trace of one component's outer boundary.

    start must be the component's first pixel in raster order, so its west
    and north neighbors are background. The walk's future is fully determined
    by (pixel, outgoing move), so the trace stops when that pair repeats;
    this handles spurs, which legitimately revisit pixels mid-cycle.
    """
    h, w = component.shape

    def fg(x: int, y: int) -> bool:
        return 0 <= x < w and 0 <= y < h and component[y, x]

    points: list[tuple[int, int]] = []
    cx, cy = start
    scan_from = 7  # backtrack is west; scanning starts one step past it
    seen: set[tuple[int, int, int]] = set()
    while True:
        move = None
        for step in range(8):
            idx = (scan_from + step) % 8
            dx, dy = _DIRS[idx]
            if fg(cx + dx, cy + dy):
                move = idx
                break
        if move is None:  # isolated pixel
            points.append((cx, cy))
            break
        if (cx, cy, move) in seen:
            break
        seen.add((cx, cy, move))
        points.append((cx, cy))
        cx, cy = cx + _DIRS[move][0], cy + _DIRS[move][1]
        # One past the last background examined before the move; for axis
        # moves that position is itself the known-background backtrack, which
        # is harmless to re-check.
        scan_from = (move + 6) % 8
    return points


def trace_contours(mask: np.ndarray) -> list[Contour]:
    """External contour of every 8-connected foreground component.

    Components are ordered by their first pixel in raster order; each contour
    starts at that pixel and runs clockwise.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise CutError("mask is empty")
    labels, _ = ndimage.label(mask, structure=_EIGHT_CONN)
    flat = labels.ravel()
    values, first_idx = np.unique(flat, return_index=True)
    order = sorted(
        (int(first), int(lbl)) for lbl, first in zip(values, first_idx) if lbl != 0
    )

    contours = []
    w = mask.shape[1]
    for first, lbl in order:
        start = (first % w, first // w)  # (x, y)
        pts = _follow_border(labels == lbl, start)
        contours.append(Contour(points=np.array(pts, dtype=int), closed=True))
    return contours


def component_mask(mask: np.ndarray, contour: Contour) -> np.ndarray:
    """The 8-connected component a contour was traced from."""
    mask = np.asarray(mask, dtype=bool)
    labels, _ = ndimage.label(mask, structure=_EIGHT_CONN)
    x0, y0 = contour.points[0]
    lbl = labels[y0, x0]
    if lbl == 0:
        raise CutError("contour start is not a foreground pixel of this mask")
    return labels == lbl


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull, counterclockwise, no duplicate endpoint."""
    pts = np.unique(points, axis=0).astype(float)
    if len(pts) <= 2:
        return pts
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def _canonical(angle: float, w: float, h: float) -> tuple[float, float, float]:
    """Fold (angle, w, h) into angle in [0, pi/2) with sides swapped as needed."""
    angle = angle % math.pi
    if angle >= math.pi / 2:
        angle -= math.pi / 2
        w, h = h, w
    return angle, w, h


def min_area_rect(contour: Contour) -> RotatedRect:
    """Smallest-area oriented rectangle enclosing the contour points.

    The optimum is flush with a convex-hull edge, so hull edges are the only
    candidate orientations. Degenerate 1- or 2-point (or collinear) inputs
    give zero-area rects.
    """
    pts = np.asarray(contour.points, dtype=float)
    if len(pts) == 0:
        raise CutError("contour has no points")
    hull = _convex_hull(pts)

    if len(hull) == 1:
        return RotatedRect(center=(hull[0][0], hull[0][1]), size=(0.0, 0.0), angle=0.0)
    if len(hull) == 2:
        d = hull[1] - hull[0]
        length = float(np.hypot(d[0], d[1]))
        angle, w, h = _canonical(math.atan2(d[1], d[0]), length, 0.0)
        mid = (hull[0] + hull[1]) / 2
        return RotatedRect(center=(float(mid[0]), float(mid[1])), size=(w, h), angle=angle)

    best = None
    edges = np.roll(hull, -1, axis=0) - hull
    for ex, ey in edges:
        theta = math.atan2(ey, ex)
        c, s = math.cos(-theta), math.sin(-theta)
        xs = hull[:, 0] * c - hull[:, 1] * s
        ys = hull[:, 0] * s + hull[:, 1] * c
        w = xs.max() - xs.min()
        h = ys.max() - ys.min()
        area = w * h
        if best is None or area < best[0]:
            mx = (xs.max() + xs.min()) / 2
            my = (ys.max() + ys.min()) / 2
            # rotate the rect center back to image coordinates
            cx = mx * math.cos(theta) - my * math.sin(theta)
            cy = mx * math.sin(theta) + my * math.cos(theta)
            best = (area, theta, w, h, cx, cy)

    _, theta, w, h, cx, cy = best
    angle, w, h = _canonical(theta, w, h)
    return RotatedRect(center=(cx, cy), size=(float(w), float(h)), angle=angle)


def is_complete(
    contour: Contour,
    image_size: tuple[int, int],
    border_tolerance: float = 0.02,
) -> bool:
    """False iff more than border_tolerance of the contour hugs the frame."""
    w, h = image_size
    pts = np.asarray(contour.points)
    on_border = (
        (pts[:, 0] == 0) | (pts[:, 0] == w - 1) | (pts[:, 1] == 0) | (pts[:, 1] == h - 1)
    )
    return float(on_border.mean()) <= border_tolerance


def extract_cutout(
    sample: ImageSample,
    contour: Contour,
    rect: RotatedRect,
    border_tolerance: float = 0.02,
) -> Cutout:
    """Crop the rect's axis-aligned envelope, carrying the component as alpha.

    The crop keeps pixels whose centers fall inside the envelope; since every
    component pixel center lies within the rect, none are lost. Pixels are
    component-restricted (other components inside the crop stay zero), so only
    the traced silhouette ever transfers on paste.
    """
    w, h = sample.size
    corners = rect.corners()
    eps = 1e-9
    x_lo = math.ceil(corners[:, 0].min() - eps)
    x_hi = math.floor(corners[:, 0].max() + eps) + 1
    y_lo = math.ceil(corners[:, 1].min() - eps)
    y_hi = math.floor(corners[:, 1].max() + eps) + 1
    clamped = x_lo < 0 or y_lo < 0 or x_hi > w or y_hi > h
    x_lo, y_lo = max(x_lo, 0), max(y_lo, 0)
    x_hi, y_hi = min(x_hi, w), min(y_hi, h)

    comp = component_mask(sample.mask, contour)
    alpha = comp[y_lo:y_hi, x_lo:x_hi]
    pixels = object_map(sample.image, comp)[y_lo:y_hi, x_lo:x_hi]
    return Cutout(
        pixels=pixels,
        alpha=alpha,
        rect=rect,
        source_id=sample.id,
        label=sample.label,
        complete=is_complete(contour, (w, h), border_tolerance),
        clamped=clamped,
    )


def cut_sample(
    sample: ImageSample, border_tolerance: float = 0.02
) -> tuple[Cutout, Contour, list[Contour]]:
    """Largest-component cutout of a sample, its contour, and the leftovers."""
    contours = trace_contours(sample.mask)
    if len(contours) == 1:
        main = contours[0]
        rest: list[Contour] = []
    else:
        labels, _ = ndimage.label(sample.mask, structure=_EIGHT_CONN)
        sizes = []
        for c in contours:
            x0, y0 = c.points[0]
            sizes.append(int(np.count_nonzero(labels == labels[y0, x0])))
        main_idx = int(np.argmax(sizes))  # ties: earliest in raster order
        main = contours[main_idx]
        rest = [c for i, c in enumerate(contours) if i != main_idx]
    rect = min_area_rect(main)
    return extract_cutout(sample, main, rect, border_tolerance), main, rest
