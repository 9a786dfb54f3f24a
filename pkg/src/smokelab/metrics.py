"""Pixel-wise segmentation metrics: binary, opacity-specific, and aggregated.

Undefined metrics (zero denominators) are reported as ``None`` and left out of
dataset means; the number of images skipped per metric is reported alongside.
"""
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .arrays import HIGH, LOW

OVERALL_FIELDS = ("recall", "precision", "f1", "iou_smoke", "iou_background", "miou", "mmse")
OPACITY_FIELDS = ("recall_high", "recall_low", "iou_high", "iou_low", "precision_high",
                  "precision_low", "f1_high", "f1_low", "miou_smoke")
METRIC_FIELDS = OVERALL_FIELDS + OPACITY_FIELDS
MMSE_MODES = ("binary", "prob", "region")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)


@dataclass(frozen=True)
class ImageMetrics:
    recall: Optional[float] = None
    precision: Optional[float] = None
    f1: Optional[float] = None
    iou_smoke: Optional[float] = None
    iou_background: Optional[float] = None
    miou: Optional[float] = None
    mmse: Optional[float] = None


@dataclass(frozen=True)
class OpacityMetrics:
    recall_high: Optional[float] = None
    recall_low: Optional[float] = None
    iou_high: Optional[float] = None
    iou_low: Optional[float] = None
    precision_high: Optional[float] = None
    precision_low: Optional[float] = None
    f1_high: Optional[float] = None
    f1_low: Optional[float] = None
    miou_smoke: Optional[float] = None


@dataclass
class AggregateReport:
    rows: list
    means: dict
    skipped: dict
    mode: str = "macro"

    def to_dict(self):
        return {"mode": self.mode, "means": self.means, "skipped": self.skipped, "rows": self.rows}


def _ratio(num, den):
    return num / den if den else None


def _harmonic(p, r):
    if p is None or r is None:
        return None
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


def _mean_present(*vals):
    present = [v for v in vals if v is not None]
    return sum(present) / len(present) if present else None


def _pair(pred, gt):
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: prediction {pred.shape} vs ground truth {gt.shape}")
    return pred, gt


def confusion(pred, gt):
    pred, gt = _pair(pred, gt)
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    return ConfusionCounts(tp, fp, fn, pred.size - tp - fp - fn)


def metrics_from_counts(c, sq_err=None, n_err=None):
    """Overall metrics from confusion counts.

    `sq_err` / `n_err` give the mMSE numerator and pixel count; by default
    the binary whole-image error ``(fp + fn) / total``.
    """
    recall = _ratio(c.tp, c.tp + c.fn)
    precision = _ratio(c.tp, c.tp + c.fp)
    iou_s = _ratio(c.tp, c.tp + c.fp + c.fn)
    iou_b = _ratio(c.tn, c.tn + c.fp + c.fn)
    if sq_err is None:
        sq_err, n_err = c.fp + c.fn, c.total
    return ImageMetrics(
        recall=recall,
        precision=precision,
        f1=_harmonic(precision, recall),
        iou_smoke=iou_s,
        iou_background=iou_b,
        miou=_mean_present(iou_s, iou_b),
        mmse=_ratio(sq_err, n_err),
    )


def mmse_terms(pred, gt, mode="binary", prob=None):
    """(sum of squared errors, pixel count) for the chosen mMSE definition.

    binary: whole image, binarised prediction (default); prob: whole image,
    raw probabilities; region: binarised prediction restricted to smoke truth.
    """
    pred, gt = _pair(pred, gt)
    g = gt.astype(np.float64)
    if mode == "binary":
        return float(np.sum((pred - g) ** 2)), pred.size
    if mode == "prob":
        p = pred.astype(np.float64) if prob is None else np.asarray(prob, dtype=np.float64)
        if p.shape != gt.shape:
            raise ValueError("probability map shape does not match ground truth")
        return float(np.sum((p - g) ** 2)), p.size
    if mode == "region":
        return float(np.count_nonzero(~pred & gt)), int(np.count_nonzero(gt))
    raise ValueError(f"unknown mmse mode {mode!r}; expected one of {MMSE_MODES}")


def overall_metrics(counts, pred, gt, mmse_mode="binary", prob=None):
    sq, n = mmse_terms(pred, gt, mmse_mode, prob)
    return metrics_from_counts(counts, sq, n)


def opacity_counts(pred, truth):
    """Counts needed by the opacity metrics: |P|, |G_x|, |P & G_x| for x in high/low."""
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: prediction {pred.shape} vs opacity truth {truth.shape}")
    hi = truth == HIGH
    lo = truth == LOW
    return np.array([np.count_nonzero(pred),
                     np.count_nonzero(hi), np.count_nonzero(pred & hi),
                     np.count_nonzero(lo), np.count_nonzero(pred & lo)], dtype=np.int64)


def _level_metrics(n_pred, n_g, inter):
    """(recall, iou, precision) for one opacity level; all absent when the level has no truth pixels."""
    if n_g == 0:
        return None, None, None
    return _ratio(inter, n_g), _ratio(inter, n_pred + n_g - inter), _ratio(inter, n_pred)


def metrics_from_opacity_counts(k):
    n_pred, n_hi, i_hi, n_lo, i_lo = (int(v) for v in k)
    rh, ih, ph = _level_metrics(n_pred, n_hi, i_hi)
    rl, il, pl = _level_metrics(n_pred, n_lo, i_lo)
    return OpacityMetrics(
        recall_high=rh, recall_low=rl, iou_high=ih, iou_low=il,
        precision_high=ph, precision_low=pl,
        f1_high=_harmonic(ph, rh), f1_low=_harmonic(pl, rl),
        miou_smoke=_mean_present(ih, il),
    )


def opacity_metrics(pred, truth):
    return metrics_from_opacity_counts(opacity_counts(pred, truth))


def opacity_to_binary(truth):
    return np.asarray(truth) != 0


def _row_dict(overall, opacity):
    row = asdict(overall)
    row.update(asdict(opacity) if opacity is not None else {k: None for k in OPACITY_FIELDS})
    return row


def aggregate(rows, names=None):
    """Macro average: per-metric mean over the images where it is defined."""
    rows = list(rows)
    if not rows:
        raise ValueError("no images to aggregate")
    flat = []
    for i, (overall, opacity) in enumerate(rows):
        d = _row_dict(overall, opacity)
        if names is not None:
            d = {"image": names[i], **d}
        flat.append(d)
    means, skipped = {}, {}
    for k in METRIC_FIELDS:
        vals = [r[k] for r in flat if r[k] is not None]
        # fsum is correctly rounded, so the mean does not depend on row order
        means[k] = math.fsum(vals) / len(vals) if vals else None
        skipped[k] = len(flat) - len(vals)
    return AggregateReport(flat, means, skipped, "macro")


def aggregate_micro(counts, mmse_terms_list, opacity_count_list=None, names=None):
    """Pooled-count metrics over the whole dataset (diagnostic mode)."""
    if not counts:
        raise ValueError("no images to aggregate")
    total = counts[0]
    for c in counts[1:]:
        total = total + c
    sq = sum(t[0] for t in mmse_terms_list)
    n = sum(t[1] for t in mmse_terms_list)
    overall = metrics_from_counts(total, sq, n)
    opacity = None
    if opacity_count_list:
        opacity = metrics_from_opacity_counts(np.sum(opacity_count_list, axis=0))
    per_image = [
        _row_dict(metrics_from_counts(c, *t),
                  metrics_from_opacity_counts(o) if opacity_count_list else None)
        for c, t, o in zip(counts, mmse_terms_list, opacity_count_list or [None] * len(counts))
    ]
    if names is not None:
        per_image = [{"image": nm, **r} for nm, r in zip(names, per_image)]
    means = _row_dict(overall, opacity)
    skipped = {k: 0 if means[k] is not None else len(counts) for k in METRIC_FIELDS}
    return AggregateReport(per_image, means, skipped, "micro")
