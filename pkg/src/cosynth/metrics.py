"""Saliency evaluation: MAE, F-measure, E-measure, structure measure.

Predictions are grayscale maps interpreted in [0, 1]; ground truth is binary.
Threshold sweeps run over the 256 levels k/255. Degenerate ground truths
(all background / all foreground) follow the conventions of the published
metric definitions: E uses the inverted / plain binarized map, S degrades to
1 - mean(S) / mean(S).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

N_THRESHOLDS = 256
THRESHOLDS = np.arange(N_THRESHOLDS) / 255.0

METRIC_COLUMNS = ("mae", "f_max", "f_avg", "e_max", "e_avg", "s_alpha")


class MetricError(ValueError):
    pass


@dataclass
class MapPair:
    prediction: np.ndarray
    ground_truth: np.ndarray
    id: str = ""

    def __post_init__(self):
        self.prediction = as_unit_map(self.prediction)
        self.ground_truth = as_binary_map(self.ground_truth)
        if self.prediction.shape != self.ground_truth.shape:
            raise MetricError(
                f"{self.id or 'pair'}: prediction {self.prediction.shape} and "
                f"ground truth {self.ground_truth.shape} dims differ"
            )


@dataclass
class MetricReport:
    per_image: list[dict]
    aggregate: dict
    per_group: dict[str, dict] = field(default_factory=dict)


def as_unit_map(S: np.ndarray) -> np.ndarray:
    """Coerce a prediction raster to float64 in [0, 1]."""
    S = np.asarray(S)
    if S.dtype == np.uint8:
        return S.astype(np.float64) / 255.0
    if S.dtype == bool:
        return S.astype(np.float64)
    S = S.astype(np.float64)
    if S.size and (S.min() < 0 or S.max() > 1):
        raise MetricError("float prediction values must lie in [0, 1]")
    return S


def as_binary_map(G: np.ndarray) -> np.ndarray:
    G = np.asarray(G)
    if G.dtype == bool:
        return G
    if G.dtype == np.uint8:
        return G >= 128
    return G > 0.5


def binarize(S: np.ndarray, threshold: float) -> np.ndarray:
    return as_unit_map(S) >= threshold


def precision_recall(binS: np.ndarray, G: np.ndarray) -> tuple[float, float]:
    binS = np.asarray(binS, dtype=bool)
    G = as_binary_map(G)
    if binS.shape != G.shape:
        raise MetricError(f"shapes differ: {binS.shape} vs {G.shape}")
    tp = int(np.count_nonzero(binS & G))
    fp = int(np.count_nonzero(binS & ~G))
    fn = int(np.count_nonzero(~binS & G))
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return p, r


def mae(S: np.ndarray, G: np.ndarray) -> float:
    S = as_unit_map(S)
    G = as_binary_map(G).astype(np.float64)
    if S.shape != G.shape:
        raise MetricError(f"shapes differ: {S.shape} vs {G.shape}")
    return float(np.mean(np.abs(S - G)))


def _threshold_counts(S: np.ndarray, G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(TP, FP) per sweep threshold, via sorted-value suffix counts."""
    fg = np.sort(S[G])
    bg = np.sort(S[~G])
    tp = fg.size - np.searchsorted(fg, THRESHOLDS, side="left")
    fp = bg.size - np.searchsorted(bg, THRESHOLDS, side="left")
    return tp.astype(np.float64), fp.astype(np.float64)


def _f_from_counts(tp, fp, n_fg, beta2: float):
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        r = np.where(n_fg > 0, tp / n_fg, 0.0)
        denom = beta2 * p + r
        f = np.where(denom > 0, (1 + beta2) * p * r / denom, 0.0)
    return f


def adaptive_threshold(S: np.ndarray) -> float:
    """Twice the mean prediction, clamped below the top sweep level."""
    S = as_unit_map(S)
    return min(2.0 * float(S.mean()), 1.0 - 1.0 / 255.0)


def f_measure_curve(
    S: np.ndarray, G: np.ndarray, beta2: float = 0.3
) -> tuple[float, float]:
    """(F_max over the 256-threshold sweep, F at the adaptive threshold)."""
    S = as_unit_map(S)
    G = as_binary_map(G)
    if S.shape != G.shape:
        raise MetricError(f"shapes differ: {S.shape} vs {G.shape}")
    n_fg = int(np.count_nonzero(G))
    if n_fg == 0:
        raise MetricError("ground truth has no foreground; F-measure undefined")
    tp, fp = _threshold_counts(S, G)
    f_sweep = _f_from_counts(tp, fp, n_fg, beta2)

    binS = S >= adaptive_threshold(S)
    tp_a = float(np.count_nonzero(binS & G))
    fp_a = float(np.count_nonzero(binS & ~G))
    f_adp = float(_f_from_counts(np.array(tp_a), np.array(fp_a), n_fg, beta2))
    return float(f_sweep.max()), f_adp


def _alignment_term(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(1 + xi)^2 / 4 with xi = 2ab / (a^2 + b^2), and xi := 1 on 0/0."""
    denom = a * a + b * b
    with np.errstate(invalid="ignore", divide="ignore"):
        xi = np.where(denom > 0, 2.0 * a * b / np.where(denom > 0, denom, 1.0), 1.0)
    return (1.0 + xi) ** 2 / 4.0


def e_measure_curve(S: np.ndarray, G: np.ndarray) -> tuple[float, float]:
    """(E_max, E_avg) over the 256-threshold sweep.

    For a binarized map the alignment matrix takes one value per confusion
    cell, so each threshold's score reduces to arithmetic on TP/FP/FN/TN
    counts; no per-pixel pass is needed.
    """
    S = as_unit_map(S)
    G = as_binary_map(G)
    if S.shape != G.shape:
        raise MetricError(f"shapes differ: {S.shape} vs {G.shape}")
    n = S.size
    n_fg = int(np.count_nonzero(G))
    tp, fp = _threshold_counts(S, G)
    mu_s = (tp + fp) / n

    if n_fg == 0:
        q = 1.0 - mu_s
    elif n_fg == n:
        q = mu_s.copy()
    else:
        fn = n_fg - tp
        tn = n - n_fg - fp
        mu_g = n_fg / n
        a1, a0 = 1.0 - mu_s, -mu_s
        b1, b0 = 1.0 - mu_g, -mu_g
        q = (
            tp * _alignment_term(a1, np.full_like(a1, b1))
            + fp * _alignment_term(a1, np.full_like(a1, b0))
            + fn * _alignment_term(a0, np.full_like(a0, b1))
            + tn * _alignment_term(a0, np.full_like(a0, b0))
        ) / n
    return float(q.max()), float(q.mean())


def _s_object_half(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    x = float(values.mean())
    sigma = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return 2.0 * x / (x * x + 1.0 + sigma)


def _region_ssim(pred: np.ndarray, gt: np.ndarray) -> float:
    n = pred.size
    if n == 0:
        return 0.0
    x = float(pred.mean())
    y = float(gt.mean())
    denom = n - 1 if n > 1 else 1
    sigma_x = float(((pred - x) ** 2).sum()) / denom
    sigma_y = float(((gt - y) ** 2).sum()) / denom
    sigma_xy = float(((pred - x) * (gt - y)).sum()) / denom
    alpha = 4.0 * x * y * sigma_xy
    beta = (x * x + y * y) * (sigma_x + sigma_y)
    if alpha != 0.0:
        return alpha / beta
    return 1.0 if beta == 0.0 else 0.0


def _centroid(G: np.ndarray) -> tuple[int, int]:
    """Foreground centroid as 1-based split indices, so no quadrant slice
    starting at the origin is empty."""
    ys, xs = np.nonzero(G)
    cx = int(np.round(xs.mean())) + 1
    cy = int(np.round(ys.mean())) + 1
    return cx, cy


def s_measure(S: np.ndarray, G: np.ndarray, alpha: float = 0.5) -> float:
    """Structure measure: (1 - alpha) * object term + alpha * region term."""
    S = as_unit_map(S)
    G = as_binary_map(G)
    if S.shape != G.shape:
        raise MetricError(f"shapes differ: {S.shape} vs {G.shape}")
    mu = float(G.mean())
    if mu == 0.0:
        score = 1.0 - float(S.mean())
    elif mu == 1.0:
        score = float(S.mean())
    else:
        o_fg = _s_object_half(S[G])
        o_bg = _s_object_half(1.0 - S[~G])
        s_o = mu * o_fg + (1.0 - mu) * o_bg

        h, w = G.shape
        cx, cy = _centroid(G)
        area = h * w
        gf = G.astype(np.float64)
        quads = (
            (S[:cy, :cx], gf[:cy, :cx], (cx * cy) / area),
            (S[:cy, cx:], gf[:cy, cx:], ((w - cx) * cy) / area),
            (S[cy:, :cx], gf[cy:, :cx], (cx * (h - cy)) / area),
        )
        s_r = 0.0
        w4 = 1.0
        for ps, gs, wt in quads:
            s_r += wt * _region_ssim(ps, gs)
            w4 -= wt
        s_r += w4 * _region_ssim(S[cy:, cx:], gf[cy:, cx:])

        score = (1.0 - alpha) * s_o + alpha * s_r
    return float(min(1.0, max(0.0, score)))


def compute_image_metrics(S: np.ndarray, G: np.ndarray) -> dict[str, float]:
    f_max, f_avg = f_measure_curve(S, G)
    e_max, e_avg = e_measure_curve(S, G)
    return {
        "mae": mae(S, G),
        "f_max": f_max,
        "f_avg": f_avg,
        "e_max": e_max,
        "e_avg": e_avg,
        "s_alpha": s_measure(S, G),
    }


def pair_maps(
    predictions: dict[str, np.ndarray], ground_truths: dict[str, np.ndarray]
) -> list[MapPair]:
    """Match maps by id; any id present on only one side is an error."""
    missing_pred = sorted(set(ground_truths) - set(predictions))
    missing_gt = sorted(set(predictions) - set(ground_truths))
    if missing_pred or missing_gt:
        parts = []
        if missing_pred:
            parts.append(f"no prediction for: {', '.join(missing_pred)}")
        if missing_gt:
            parts.append(f"no ground truth for: {', '.join(missing_gt)}")
        raise MetricError("; ".join(parts))
    return [
        MapPair(prediction=predictions[k], ground_truth=ground_truths[k], id=k)
        for k in sorted(ground_truths)
    ]


def evaluate_dataset(
    pairs: list[MapPair], grouping: dict[str, str] | None = None
) -> MetricReport:
    """Per-image metrics plus unweighted aggregate means (and per-group means)."""
    if not pairs:
        raise MetricError("no map pairs to evaluate")
    per_image = []
    for pair in pairs:
        row = {"id": pair.id}
        row.update(compute_image_metrics(pair.prediction, pair.ground_truth))
        per_image.append(row)

    aggregate = {
        col: float(np.mean([row[col] for row in per_image])) for col in METRIC_COLUMNS
    }

    per_group: dict[str, dict] = {}
    if grouping:
        groups: dict[str, list[dict]] = {}
        for row in per_image:
            if row["id"] not in grouping:
                raise MetricError(f"no group assignment for id {row['id']!r}")
            groups.setdefault(grouping[row["id"]], []).append(row)
        for label in sorted(groups):
            rows = groups[label]
            per_group[label] = {
                col: float(np.mean([r[col] for r in rows])) for col in METRIC_COLUMNS
            }
            per_group[label]["n"] = len(rows)
    return MetricReport(per_image=per_image, aggregate=aggregate, per_group=per_group)
