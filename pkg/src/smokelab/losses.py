"""Class-aware adaptation losses with closed-form gradients.

Every differentiable function ``f`` here has a companion ``f_grad`` returning
the gradient of ``f`` (or of ``w . f`` for vector-valued ``f``) with respect to
each array input. ``grad_check`` compares these against central differences.
"""
from dataclasses import dataclass

import numpy as np

from .arrays import sigmoid

NORM_EPS = 1e-12
SCORE_EPS = 1e-7


@dataclass(frozen=True)
class ContrastiveConfig:
    temperature: float = 0.1

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")


@dataclass(frozen=True)
class LossWeights:
    lambda_cont: float = 0.0
    lambda_da: float = 0.1
    lambda_p: float = 1.0
    lambda_grl: float = 1.0

    def __post_init__(self):
        for name in ("lambda_cont", "lambda_da", "lambda_p", "lambda_grl"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.lambda_grl > 1.0:
            raise ValueError("lambda_grl must be in [0, 1]")


@dataclass(frozen=True)
class DomainScores:
    d_smoke_source: float
    d_bg_source: float
    d_smoke_target: float
    d_bg_target: float

    def as_array(self):
        return np.array([self.d_smoke_source, self.d_bg_source,
                         self.d_smoke_target, self.d_bg_target])


# -- cosine similarity ------------------------------------------------------

def _vec_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def cosine_similarity(a, b):
    a, b = _vec_pair(a, b)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < NORM_EPS or nb < NORM_EPS:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def cosine_similarity_grad(a, b):
    a, b = _vec_pair(a, b)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < NORM_EPS or nb < NORM_EPS:
        return np.zeros_like(a), np.zeros_like(b)
    s = np.dot(a, b) / (na * nb)
    ga = b / (na * nb) - s * a / na**2
    gb = a / (na * nb) - s * b / nb**2
    return ga, gb


# -- class centres and contrastive loss -------------------------------------

def class_center(z, mask):
    """Mean embedding of the pixels selected by `mask` (rows of `z`)."""
    z = np.asarray(z, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool).ravel()
    if z.ndim != 2 or mask.shape[0] != z.shape[0]:
        raise ValueError(f"mask of length {mask.shape[0]} does not match embeddings {z.shape}")
    if not mask.any():
        raise ValueError("class has no pixels")
    return z[mask].mean(axis=0)


def class_center_grad(z, mask, w):
    """Gradient of ``w . class_center(z, mask)`` with respect to `z`."""
    z = np.asarray(z, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool).ravel()
    if not mask.any():
        raise ValueError("class has no pixels")
    g = np.zeros_like(z)
    g[mask] = np.asarray(w, dtype=np.float64) / mask.sum()
    return g


def _softplus(x):
    return np.logaddexp(0.0, x)


def pixel_contrastive(zi, center_smoke, center_bg, cfg=ContrastiveConfig()):
    """-log softmax weight of the smoke centre among {smoke, bg} centres."""
    s1 = cosine_similarity(zi, center_smoke)
    s2 = cosine_similarity(zi, center_bg)
    # -log(e^a / (e^a + e^b)) = log(1 + e^(b - a))
    return float(_softplus((s2 - s1) / cfg.temperature))


def pixel_contrastive_grad(zi, center_smoke, center_bg, cfg=ContrastiveConfig()):
    """Gradients with respect to (zi, center_smoke, center_bg)."""
    t = cfg.temperature
    s1 = cosine_similarity(zi, center_smoke)
    s2 = cosine_similarity(zi, center_bg)
    q = float(sigmoid((s2 - s1) / t))
    gz1, gc1 = cosine_similarity_grad(zi, center_smoke)
    gz2, gc2 = cosine_similarity_grad(zi, center_bg)
    return (q / t) * (gz2 - gz1), -(q / t) * gc1, (q / t) * gc2


def _check_contrastive_inputs(z_x, y_x, z_ref, y_ref):
    z_x = np.asarray(z_x, dtype=np.float64)
    z_ref = np.asarray(z_ref, dtype=np.float64)
    y_x = np.asarray(y_x, dtype=bool).ravel()
    y_ref = np.asarray(y_ref, dtype=bool).ravel()
    if not y_x.any():
        raise ValueError("class smoke has no pixels in the input image")
    if not y_ref.any():
        raise ValueError("class smoke has no pixels in the reference image")
    if y_ref.all():
        raise ValueError("class background has no pixels in the reference image")
    return z_x, y_x, z_ref, y_ref


def contrastive_loss(z_x, y_x, z_ref, y_ref, cfg=ContrastiveConfig()):
    """Mean per-pixel contrastive loss over the smoke pixels of x.

    Class centres come from the reference image's smoke and background pixels.
    """
    z_x, y_x, z_ref, y_ref = _check_contrastive_inputs(z_x, y_x, z_ref, y_ref)
    c_s = class_center(z_ref, y_ref)
    c_b = class_center(z_ref, ~y_ref)
    terms = [pixel_contrastive(z, c_s, c_b, cfg) for z in z_x[y_x]]
    return float(np.mean(terms))


def contrastive_loss_grad(z_x, y_x, z_ref, y_ref, cfg=ContrastiveConfig()):
    """Gradients with respect to (z_x, z_ref)."""
    z_x, y_x, z_ref, y_ref = _check_contrastive_inputs(z_x, y_x, z_ref, y_ref)
    c_s = class_center(z_ref, y_ref)
    c_b = class_center(z_ref, ~y_ref)
    n = y_x.sum()
    g_x = np.zeros_like(z_x)
    g_cs = np.zeros_like(c_s)
    g_cb = np.zeros_like(c_b)
    for i in np.flatnonzero(y_x):
        gz, gs, gb = pixel_contrastive_grad(z_x[i], c_s, c_b, cfg)
        g_x[i] = gz / n
        g_cs += gs / n
        g_cb += gb / n
    g_ref = class_center_grad(z_ref, y_ref, g_cs) + class_center_grad(z_ref, ~y_ref, g_cb)
    return g_x, g_ref


# -- attention pooling, masks, GRL ------------------------------------------

def _check_pool_inputs(f, a):
    f = np.asarray(f, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if f.ndim != 3 or a.shape != f.shape[1:]:
        raise ValueError(f"attention {a.shape} does not match feature map {f.shape}")
    if np.any(a < 0):
        raise ValueError("attention must be non-negative")
    total = a.sum()
    if not total > 0:
        raise ValueError("degenerate attention")
    return f, a, total


def attention_pool(f, a):
    """Attention-weighted spatial average of a C x H x W feature map."""
    f, a, total = _check_pool_inputs(f, a)
    return np.tensordot(f, a, axes=([1, 2], [0, 1])) / total


def attention_pool_grad(f, a, w):
    """Gradients of ``w . attention_pool(f, a)`` with respect to (f, a)."""
    f, a, total = _check_pool_inputs(f, a)
    w = np.asarray(w, dtype=np.float64)
    pooled = np.tensordot(f, a, axes=([1, 2], [0, 1])) / total
    gf = w[:, None, None] * a[None] / total
    ga = np.tensordot(w, f - pooled[:, None, None], axes=1) / total
    return gf, ga


def class_mask(logits, cls):
    """Predicted class mask: smoke where sigmoid(logit) > 0.5, bg elsewhere."""
    smoke = sigmoid(logits) > 0.5
    if cls == "smoke":
        return smoke
    if cls == "bg":
        return ~smoke
    raise ValueError(f"unknown class {cls!r}")


class GradientReversal:
    """Identity on the forward pass; scales incoming gradients by -lambda."""

    def __init__(self, lambda_grl=1.0):
        if lambda_grl < 0:
            raise ValueError("lambda_grl must be non-negative")
        self.lambda_grl = lambda_grl

    def forward(self, x):
        return x

    def backward(self, grad):
        return -self.lambda_grl * np.asarray(grad, dtype=np.float64)


def grl(x, lambda_grl=1.0):
    """Forward pass of the reversal layer and its backward function."""
    layer = GradientReversal(lambda_grl)
    return layer.forward(x), layer.backward


# -- domain and total loss --------------------------------------------------

def _scores_array(scores):
    d = scores.as_array() if isinstance(scores, DomainScores) else np.asarray(scores, dtype=np.float64)
    if d.shape != (4,):
        raise ValueError("expected four discriminator scores")
    if not np.all((d > 0.0) & (d < 1.0)):
        raise ValueError(f"discriminator scores must lie strictly in (0, 1), got {d}")
    return np.clip(d, SCORE_EPS, 1.0 - SCORE_EPS)


def domain_adaptation_loss(scores):
    """Mean binary cross-entropy of the four class/domain discriminator scores.

    Scores are ordered (smoke source, bg source, smoke target, bg target);
    source carries label 0 and target label 1.
    """
    d = _scores_array(scores)
    return float(-(np.log1p(-d[0]) + np.log1p(-d[1]) + np.log(d[2]) + np.log(d[3])) / 4.0)


def domain_adaptation_loss_grad(scores):
    d = _scores_array(scores)
    return np.array([1.0 / (1.0 - d[0]), 1.0 / (1.0 - d[1]), -1.0 / d[2], -1.0 / d[3]]) / 4.0


def total_loss(l_gen_source, l_gen_target, l_cont, l_da, w=LossWeights()):
    return (l_gen_source + w.lambda_p * l_gen_target) + w.lambda_cont * l_cont + w.lambda_da * l_da


# -- finite-difference checker ----------------------------------------------

def grad_check(loss_fn, x, epsilon=1e-6):
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn(x)`` must return ``(value, grad)`` with ``grad.shape == x.shape``.
    """
    x = np.array(x, dtype=np.float64)
    _, g_analytic = loss_fn(x.copy())
    g_analytic = np.asarray(g_analytic, dtype=np.float64)
    if g_analytic.shape != x.shape:
        raise ValueError(f"gradient shape {g_analytic.shape} != input shape {x.shape}")
    g_fd = np.empty_like(x)
    flat = x.reshape(-1)
    out = g_fd.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + epsilon
        f_plus = loss_fn(x.copy())[0]
        flat[i] = orig - epsilon
        f_minus = loss_fn(x.copy())[0]
        flat[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise FloatingPointError(f"non-finite loss when perturbing coordinate {i}")
        out[i] = (f_plus - f_minus) / (2.0 * epsilon)
    denom = np.maximum(1e-8, np.abs(g_analytic) + np.abs(g_fd))
    return float(np.max(np.abs(g_analytic - g_fd) / denom))
