"""Dense array primitives shared across the package.

Probability maps are 2-D float64 arrays in [0, 1]; masks are 2-D bool arrays.
"""
import numpy as np

# Opacity ground-truth labels
BG, LOW, HIGH = 0, 1, 2


def as_probmap(p):
    """Validate and return `p` as a float64 probability map."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
        raise ValueError(f"probability map must be a non-empty 2-D array, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("probability map values must lie in [0, 1]")
    return p


def as_mask(m):
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {m.shape}")
    return m.astype(bool, copy=False)


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def binarize(p, threshold=0.6):
    """Strict thresholding, ``p > threshold``."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    return as_probmap(p) > threshold


def foreground_ratio(p, threshold=0.6):
    p = as_probmap(p)
    return np.count_nonzero(p > threshold) / p.size


def iou(a, b):
    """Intersection over union of two boolean masks; two empty masks give 1.0."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    _check_same_shape(a, b)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def pearson_corr(p, q):
    """Sample Pearson correlation of two same-shape arrays.

    Constant inputs have no defined correlation; they score 1.0 when the two
    arrays are equal (to 1e-12) and 0.0 otherwise.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    _check_same_shape(p, q)
    dp = p.ravel() - p.mean()
    dq = q.ravel() - q.mean()
    sp = np.sqrt(np.dot(dp, dp))
    sq = np.sqrt(np.dot(dq, dq))
    if sp == 0.0 or sq == 0.0:
        return 1.0 if np.allclose(p, q, rtol=0.0, atol=1e-12) else 0.0
    r = np.dot(dp, dq) / (sp * sq)
    return float(np.clip(r, -1.0, 1.0))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out
