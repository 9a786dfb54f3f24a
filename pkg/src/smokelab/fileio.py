"""Image and label file formats.

Probability maps: 16-bit single-channel PNG, value / 65535.
Masks: 8-bit single-channel PNG with values {0, 255}.
Opacity truth: 8-bit single-channel PNG with 0 / 128 / 255 for BG / LOW / HIGH.
Labels: CSV with header ``video_id,label``.
"""
import csv
from pathlib import Path

import numpy as np
from PIL import Image

from .arrays import BG, HIGH, LOW, as_probmap
from .constraints import decode_label

_SIXTEEN_BIT = {"I;16", "I;16B", "I;16L", "I"}


def _open_single_channel(path):
    path = Path(path)
    try:
        img = Image.open(path)
        img.load()
    except (OSError, ValueError) as exc:
        raise ValueError(f"{path}: cannot read image ({exc})") from None
    if len(img.getbands()) != 1:
        raise ValueError(f"{path}: expected single channel, got mode {img.mode}")
    return img


def load_probmap(path):
    img = _open_single_channel(path)
    if img.mode not in _SIXTEEN_BIT:
        raise ValueError(f"{path}: expected 16-bit probability map, got mode {img.mode}")
    arr = np.asarray(img, dtype=np.int64)
    if arr.min() < 0 or arr.max() > 65535:
        raise ValueError(f"{path}: values outside the 16-bit range")
    return arr / 65535.0


def save_probmap(p, path):
    p = as_probmap(p)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.rint(p * 65535.0).astype(np.uint16)).save(path)


def _load_8bit(path, allowed):
    img = _open_single_channel(path)
    if img.mode != "L":
        raise ValueError(f"{path}: expected 8-bit image, got mode {img.mode}")
    arr = np.asarray(img)
    bad = np.setdiff1d(np.unique(arr), allowed)
    if bad.size:
        raise ValueError(f"{path}: unexpected pixel values {bad[:5].tolist()}; allowed {list(allowed)}")
    return arr


def load_mask(path):
    return _load_8bit(path, (0, 255)) == 255


def save_mask(mask, path):
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {mask.shape}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(path)


def load_opacity(path):
    arr = _load_8bit(path, (0, 128, 255))
    out = np.full(arr.shape, BG, dtype=np.uint8)
    out[arr == 128] = LOW
    out[arr == 255] = HIGH
    return out


def save_opacity(truth, path):
    truth = np.asarray(truth)
    enc = np.zeros(truth.shape, dtype=np.uint8)
    enc[truth == LOW] = 128
    enc[truth == HIGH] = 255
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(enc).save(path)


def load_prediction(path, threshold=0.5):
    """Load a prediction as (mask, probabilities); accepts 8-bit masks or 16-bit maps."""
    img = _open_single_channel(path)
    if img.mode in _SIXTEEN_BIT:
        prob = load_probmap(path)
        return prob > threshold, prob
    mask = load_mask(path)
    return mask, mask.astype(np.float64)


def load_labels(csv_path):
    """Map video_id -> WeakLabel; errors cite the offending line number."""
    labels = {}
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["video_id", "label"]:
            raise ValueError(f"{csv_path}:1: expected header 'video_id,label', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2 or not row[0].strip():
                raise ValueError(f"{csv_path}:{lineno}: malformed row {row}")
            vid, raw = row[0].strip(), row[1].strip()
            if vid in labels:
                raise ValueError(f"{csv_path}:{lineno}: duplicate video_id {vid!r}")
            try:
                labels[vid] = decode_label(int(raw))
            except ValueError:
                raise ValueError(f"{csv_path}:{lineno}: unknown label value {raw!r}") from None
    return labels
