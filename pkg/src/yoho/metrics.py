"""Per-image segmentation quality measures and dataset-level reports.

Degenerate ground-truth conventions (following the measure authors'
released conventions):

    ============  =========================  ==============================
    measure       G empty                    G full-frame
    ============  =========================  ==============================
    dice/iou/...  all four 1.0 if P empty,   formulas apply unchanged
                  else d=i=p=0, recall=1
    mae           formula applies            formula applies
    wfm           undefined -> error;        formula applies
                  report maps to 1 / 0
    s_measure     1 - mean(S)                mean(S)
    e_measure     enhanced matrix 1 - F_t    enhanced matrix F_t
    ============  =========================  ==============================
"""
from __future__ import annotations

import csv
import io
import math
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from PIL import Image
from scipy import ndimage

from yoho.errors import EmptyGroundTruth, ShapeError

_EPS = np.finfo(np.float64).eps

METRIC_COLUMNS = ("dice", "iou", "wfm", "s_alpha", "e_phi_max", "mae", "recall", "precision")


def _as_binary(mask: np.ndarray) -> np.ndarray:
    return np.asarray(mask).astype(bool)


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def region_metrics(pred: np.ndarray, gt: np.ndarray) -> dict[str, float]:
    """Overlap measures of two binary masks: dice, iou, recall, precision."""
    p = _as_binary(pred)
    g = _as_binary(gt)
    _check_same_shape(p, g)
    np_, ng = int(p.sum()), int(g.sum())
    inter = int((p & g).sum())
    if ng == 0:
        if np_ == 0:
            return {"dice": 1.0, "iou": 1.0, "recall": 1.0, "precision": 1.0}
        warnings.warn("empty ground truth with nonempty prediction", stacklevel=2)
        return {"dice": 0.0, "iou": 0.0, "recall": 1.0, "precision": 0.0}
    union = np_ + ng - inter
    return {
        "dice": 2.0 * inter / (np_ + ng),
        "iou": inter / union,
        "recall": inter / ng,
        "precision": inter / np_ if np_ > 0 else 0.0,
    }


def mae(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean absolute error between a soft map and a binary ground truth."""
    s = np.asarray(pred, dtype=np.float64)
    g = _as_binary(gt).astype(np.float64)
    _check_same_shape(s, g)
    return float(np.abs(s - g).mean())


def _matlab_gaussian_kernel(shape: tuple[int, int] = (7, 7), sigma: float = 5.0) -> np.ndarray:
    m, n = [(s - 1) / 2.0 for s in shape]
    y, x = np.ogrid[-m : m + 1, -n : n + 1]
    h = np.exp(-(x * x + y * y) / (2.0 * sigma * sigma))
    h[h < np.finfo(h.dtype).eps * h.max()] = 0.0
    if h.sum() != 0:
        h /= h.sum()
    return h


def weighted_fmeasure(pred: np.ndarray, gt: np.ndarray, beta2: float = 1.0) -> float:
    """Location-aware F-measure: errors are propagated by a Gaussian inside
    the ground truth and discounted with distance from it outside."""
    g = _as_binary(gt)
    s = np.asarray(pred, dtype=np.float64)
    _check_same_shape(s, g)
    if not g.any():
        raise EmptyGroundTruth("weighted F-measure undefined for empty ground truth")

    err = np.abs(s - g.astype(np.float64))
    dist, idx = ndimage.distance_transform_edt(~g, return_indices=True)
    err_prop = err.copy()
    err_prop[~g] = err_prop[idx[0][~g], idx[1][~g]]
    kernel = _matlab_gaussian_kernel((7, 7), 5.0)
    err_smooth = cv2.filter2D(err_prop, -1, kernel, borderType=cv2.BORDER_CONSTANT)
    err_min = np.where(g & (err_smooth < err), err_smooth, err)
    importance = np.where(g, 1.0, 2.0 - np.exp(np.log(0.5) / 5.0 * dist))
    weighted_err = err_min * importance

    tp_w = g.sum() - weighted_err[g].sum()
    fp_w = weighted_err[~g].sum()
    recall_w = 1.0 - weighted_err[g].mean()
    precision_w = tp_w / (tp_w + fp_w + _EPS)
    return float((1.0 + beta2) * precision_w * recall_w / (beta2 * precision_w + recall_w + _EPS))


def _object_score(values: np.ndarray) -> float:
    x = float(values.mean())
    sigma = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return 2.0 * x / (x * x + 1.0 + sigma + _EPS)


def _region_ssim(pred: np.ndarray, gt: np.ndarray) -> float:
    n = pred.size
    if n == 0:
        return 0.0
    x = float(pred.mean())
    y = float(gt.mean())
    sigma_x = float(((pred - x) ** 2).sum()) / (n - 1 + _EPS)
    sigma_y = float(((gt - y) ** 2).sum()) / (n - 1 + _EPS)
    sigma_xy = float(((pred - x) * (gt - y)).sum()) / (n - 1 + _EPS)
    num = 4.0 * x * y * sigma_xy
    den = (x * x + y * y) * (sigma_x + sigma_y)
    if num != 0.0:
        return num / (den + _EPS)
    return 1.0 if den == 0.0 else 0.0


def _gt_centroid(g: np.ndarray) -> tuple[int, int]:
    """1-based centroid column/row, rounded half away from zero."""
    h, w = g.shape
    total = g.sum()
    cols = np.arange(1, w + 1, dtype=np.float64)
    rows = np.arange(1, h + 1, dtype=np.float64)
    cx = int(math.floor(float(g.sum(axis=0) @ cols) / total + 0.5))
    cy = int(math.floor(float(g.sum(axis=1) @ rows) / total + 0.5))
    return cx, cy


def s_measure(pred: np.ndarray, gt: np.ndarray, alpha: float = 0.5) -> float:
    """Structural similarity between a soft map and a binary mask: a blend
    of object-level statistics and a 4-quadrant regional SSIM."""
    g = _as_binary(gt)
    s = np.asarray(pred, dtype=np.float64)
    _check_same_shape(s, g)
    y = g.mean()
    if y == 0.0:
        return float(1.0 - s.mean())
    if y == 1.0:
        return float(s.mean())

    o_fg = _object_score(s[g])
    o_bg = _object_score(1.0 - s[~g])
    s_object = y * o_fg + (1.0 - y) * o_bg

    h, w = g.shape
    cx, cy = _gt_centroid(g)
    area = h * w
    gd = g.astype(np.float64)
    quads = [
        (s[:cy, :cx], gd[:cy, :cx], cx * cy / area),
        (s[:cy, cx:], gd[:cy, cx:], (w - cx) * cy / area),
        (s[cy:, :cx], gd[cy:, :cx], cx * (h - cy) / area),
    ]
    w4 = 1.0 - sum(q[2] for q in quads)
    quads.append((s[cy:, cx:], gd[cy:, cx:], w4))
    s_region = sum(wq * _region_ssim(pq, gq) for pq, gq, wq in quads)

    return float(max(0.0, alpha * s_object + (1.0 - alpha) * s_region))


def _enhanced_value(f: int, g: int, mu_f: float, mu_g: float) -> float:
    df = f - mu_f
    dg = g - mu_g
    align = 2.0 * dg * df / (dg * dg + df * df + _EPS)
    return (align + 1.0) ** 2 / 4.0


def e_measure_max(pred: np.ndarray, gt: np.ndarray, n_thresholds: int = 256) -> float:
    """Enhanced-alignment score maximized over the 8-bit threshold grid.

    For binary maps the per-pixel enhanced value depends only on the
    (pred, gt) class pair, so each threshold reduces to a weighted sum of
    four contingency counts; counts for every threshold come from two
    sorted-value searches.
    """
    g = _as_binary(gt)
    s = np.clip(np.asarray(pred, dtype=np.float64), 0.0, 1.0)
    _check_same_shape(s, g)
    n = g.size
    ng = int(g.sum())
    thresholds = np.arange(n_thresholds) / (n_thresholds - 1)

    fg_sorted = np.sort(s[g]) if ng else np.empty(0)
    bg_sorted = np.sort(s[~g]) if ng < n else np.empty(0)
    n_fg_ge = ng - np.searchsorted(fg_sorted, thresholds, side="left")
    n_bg_ge = (n - ng) - np.searchsorted(bg_sorted, thresholds, side="left")

    best = 0.0
    for k in range(n_thresholds):
        c11, c10 = int(n_fg_ge[k]), int(n_bg_ge[k])
        c01, c00 = ng - c11, (n - ng) - c10
        nf = c11 + c10
        if ng == 0:
            score = (n - nf) / n  # enhanced matrix is 1 - F
        elif ng == n:
            score = nf / n  # enhanced matrix is F
        else:
            mu_f = nf / n
            mu_g = ng / n
            score = (
                c11 * _enhanced_value(1, 1, mu_f, mu_g)
                + c10 * _enhanced_value(1, 0, mu_f, mu_g)
                + c01 * _enhanced_value(0, 1, mu_f, mu_g)
                + c00 * _enhanced_value(0, 0, mu_f, mu_g)
            ) / n
        best = max(best, score)
    return float(best)


def compute_all(pred_map: np.ndarray, gt: np.ndarray, alpha: float = 0.5, beta2: float = 1.0) -> dict[str, float]:
    """All eight measures for one soft prediction map against a binary mask."""
    g = _as_binary(gt)
    s = np.clip(np.asarray(pred_map, dtype=np.float64), 0.0, 1.0)
    _check_same_shape(s, g)
    p = s >= 0.5
    row = region_metrics(p, g)
    row["mae"] = mae(s, g)
    row["s_alpha"] = s_measure(s, g, alpha=alpha)
    row["e_phi_max"] = e_measure_max(s, g)
    try:
        row["wfm"] = weighted_fmeasure(s, g, beta2=beta2)
    except EmptyGroundTruth:
        row["wfm"] = 1.0 if not p.any() else 0.0
    return row


@dataclass
class MetricsReport:
    rows: list[dict] = field(default_factory=list)
    means: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    missing: list[str] = field(default_factory=list)
    failed: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["id", *METRIC_COLUMNS])
        for row in self.rows:
            writer.writerow([row["id"], *(f"{row[c]:.6f}" for c in METRIC_COLUMNS)])
        if self.means:
            writer.writerow(["MEAN", *(f"{self.means[c]:.6f}" for c in METRIC_COLUMNS)])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"evaluated {len(self.rows)} image pair(s)  (alpha={self.config.get('alpha')}, "
                 f"beta2={self.config.get('beta2')}, thresholds={self.config.get('n_thresholds')})"]
        for c in METRIC_COLUMNS:
            if self.means:
                lines.append(f"  mean {c:<10} {self.means[c]:.4f}")
        if self.missing:
            lines.append(f"  INCOMPLETE: {len(self.missing)} missing pair(s): {', '.join(self.missing)}")
        if self.failed:
            lines.append(f"  INCOMPLETE: {len(self.failed)} failed pair(s): {', '.join(self.failed)}")
        return "\n".join(lines)


def _read_soft(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64) / 255.0


def _read_binary(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) >= 128


def evaluate_run(
    pred_dir: str | os.PathLike,
    gt_dir: str | os.PathLike,
    alpha: float = 0.5,
    beta2: float = 1.0,
    out_dir: str | os.PathLike | None = None,
) -> MetricsReport:
    """Score every prediction/ground-truth pair matched by file stem.

    Missing or broken pairs are flagged and skipped; means cover the
    scored rows. Writes report.csv and summary.txt when out_dir is given.
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    gt_files = {p.stem: p for p in sorted(gt_dir.iterdir()) if p.suffix.lower() == ".png"}
    pred_files = {p.stem: p for p in sorted(pred_dir.iterdir()) if p.suffix.lower() == ".png"}

    report = MetricsReport(config={"alpha": alpha, "beta2": beta2, "n_thresholds": 256})
    for stem in sorted(gt_files):
        if stem not in pred_files:
            report.missing.append(stem)
            continue
        try:
            s = _read_soft(pred_files[stem])
            g = _read_binary(gt_files[stem])
            row = compute_all(s, g, alpha=alpha, beta2=beta2)
        except (ShapeError, OSError) as exc:
            warnings.warn(f"{stem}: {exc}", stacklevel=2)
            report.failed.append(stem)
            continue
        report.rows.append({"id": stem, **row})

    if report.rows:
        report.means = {c: float(np.mean([r[c] for r in report.rows])) for c in METRIC_COLUMNS}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(report.to_csv())
        (out / "summary.txt").write_text(report.summary() + "\n")
    return report
