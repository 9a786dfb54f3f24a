"""Randomised finite-difference checks for every differentiable loss op."""
import numpy as np

from . import losses as L

TOLERANCE = 1e-5


def _rand_vec(rng, d):
    return rng.normal(size=d)


def _check_cosine(rng, eps):
    a, b = _rand_vec(rng, 5), _rand_vec(rng, 5)
    ea = L.grad_check(lambda x: (L.cosine_similarity(x, b), L.cosine_similarity_grad(x, b)[0]), a, eps)
    eb = L.grad_check(lambda x: (L.cosine_similarity(a, x), L.cosine_similarity_grad(a, x)[1]), b, eps)
    return max(ea, eb)


def _check_class_center(rng, eps):
    z = rng.normal(size=(8, 4))
    mask = rng.random(8) < 0.5
    mask[0] = True
    w = rng.normal(size=4)
    return L.grad_check(lambda x: (w @ L.class_center(x, mask), L.class_center_grad(x, mask, w)), z, eps)


def _check_pixel_contrastive(rng, eps):
    cfg = L.ContrastiveConfig()
    zi, cs, cb = (_rand_vec(rng, 6) for _ in range(3))
    zi, cs, cb = zi / np.linalg.norm(zi), cs / np.linalg.norm(cs), cb / np.linalg.norm(cb)
    errs = []
    for pos in range(3):
        def fn(x, pos=pos):
            args = [zi, cs, cb]
            args[pos] = x
            return L.pixel_contrastive(*args, cfg), L.pixel_contrastive_grad(*args, cfg)[pos]
        errs.append(L.grad_check(fn, [zi, cs, cb][pos], eps))
    return max(errs)


def _check_contrastive_loss(rng, eps):
    # Moderate temperature keeps the softmax unsaturated; saturated pixels have
    # near-zero gradients that central differences cannot resolve relatively.
    cfg = L.ContrastiveConfig(temperature=0.5)
    z_x, z_ref = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    y_x = np.array([True, True, True, False])
    y_ref = np.array([True, True, False, False])
    ex = L.grad_check(lambda x: (L.contrastive_loss(x, y_x, z_ref, y_ref, cfg),
                                 L.contrastive_loss_grad(x, y_x, z_ref, y_ref, cfg)[0]), z_x, eps)
    er = L.grad_check(lambda x: (L.contrastive_loss(z_x, y_x, x, y_ref, cfg),
                                 L.contrastive_loss_grad(z_x, y_x, x, y_ref, cfg)[1]), z_ref, eps)
    return max(ex, er)


def _check_attention_pool(rng, eps):
    f = rng.normal(size=(3, 4, 5))
    a = rng.uniform(0.1, 1.0, size=(4, 5))
    w = rng.normal(size=3)
    ef = L.grad_check(lambda x: (w @ L.attention_pool(x, a), L.attention_pool_grad(x, a, w)[0]), f, eps)
    ea = L.grad_check(lambda x: (w @ L.attention_pool(f, x), L.attention_pool_grad(f, x, w)[1]), a, eps)
    return max(ef, ea)


def _check_domain_loss(rng, eps):
    d = rng.uniform(0.05, 0.95, size=4)
    return L.grad_check(lambda x: (L.domain_adaptation_loss(x), L.domain_adaptation_loss_grad(x)), d, eps)


CHECKS = {
    "cosine_similarity": _check_cosine,
    "class_center": _check_class_center,
    "pixel_contrastive": _check_pixel_contrastive,
    "contrastive_loss": _check_contrastive_loss,
    "attention_pool": _check_attention_pool,
    "domain_adaptation_loss": _check_domain_loss,
}


def run_gradient_suite(trials=20, eps=1e-6, seed=0):
    """Worst relative error per operation over `trials` random instances."""
    rng = np.random.default_rng(seed)
    return {name: max(check(rng, eps) for _ in range(trials)) for name, check in CHECKS.items()}
