import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smokelab import losses as L
from smokelab.gradcheck import CHECKS, TOLERANCE, run_gradient_suite

vec3 = arrays(np.float64, 3, elements=st.floats(-5, 5))


def unit(i, d=3):
    return np.eye(d)[i]


def test_cosine_examples():
    a = np.array([1.0, 2.0, 3.0])
    assert L.cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-15)
    assert L.cosine_similarity(unit(0), unit(1)) == 0.0
    assert L.cosine_similarity([1.0, 1.0], [1.0, 0.0]) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert L.cosine_similarity([0.0, 0.0], [1.0, 0.0]) == 0.0
    with pytest.raises(ValueError):
        L.cosine_similarity([1.0, 0.0], [1.0, 0.0, 0.0])


def test_class_center_examples():
    z = np.array([[1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_array_equal(L.class_center(z, [True, False]), [1.0, 0.0])
    np.testing.assert_allclose(L.class_center(z, [True, True]), [0.5, 0.5])
    with pytest.raises(ValueError, match="class has no pixels"):
        L.class_center(z, [False, False])


def test_pixel_contrastive_anchors():
    c = L.ContrastiveConfig(1.0)
    assert L.pixel_contrastive(unit(2), unit(0), unit(1)) == pytest.approx(math.log(2), abs=1e-12)
    assert L.pixel_contrastive(unit(0), unit(0), unit(1), c) == pytest.approx(0.31326168751822286, abs=1e-12)
    assert L.pixel_contrastive(unit(0), unit(0), unit(1), L.ContrastiveConfig(1e-3)) < 1e-12


def test_contrastive_loss_anchors():
    c = L.ContrastiveConfig(1.0)
    z_ref = np.array([unit(0), unit(1)])
    y_ref = np.array([True, False])
    z_x = np.array([unit(0), unit(0), unit(2)])
    y_x = np.array([True, True, False])
    assert L.contrastive_loss(z_x, y_x, z_ref, y_ref, c) == pytest.approx(math.log(1 + math.exp(-1)), abs=1e-12)
    z_eq = np.array([unit(2), unit(2)])
    assert L.contrastive_loss(z_eq, [True, True], z_ref, y_ref) == pytest.approx(math.log(2), abs=1e-12)


@pytest.mark.parametrize("yx,yref,msg", [([False, False], [True, False], "smoke"),
                                         ([True, True], [True, True], "background"),
                                         ([True, True], [False, False], "smoke")])
def test_contrastive_missing_class(yx, yref, msg):
    z = np.eye(2)
    with pytest.raises(ValueError, match=msg):
        L.contrastive_loss(z, np.array(yx), z, np.array(yref))


def test_attention_pool_examples():
    f = np.arange(24.0).reshape(2, 3, 4)
    np.testing.assert_allclose(L.attention_pool(f, np.ones((3, 4))), f.mean(axis=(1, 2)))
    a = np.zeros((3, 4))
    a[1, 2] = 2.0
    np.testing.assert_allclose(L.attention_pool(f, a), f[:, 1, 2])
    assert L.attention_pool(np.array([[[2.0, 6.0]]]), np.array([[1.0, 3.0]]))[0] == 5.0
    with pytest.raises(ValueError, match="degenerate attention"):
        L.attention_pool(f, np.zeros((3, 4)))


def test_class_mask_examples():
    assert L.class_mask(np.full((2, 2), 10.0), "smoke").all()
    assert not L.class_mask(np.full((2, 2), 10.0), "bg").any()
    assert not L.class_mask(np.zeros((2, 2)), "smoke").any()
    assert L.class_mask(np.array([-1.0, 1.0]), "smoke").tolist() == [False, True]


def test_grl_contract():
    x = np.array([1.0, -2.0, 3.0])
    y, back = L.grl(x, 0.5)
    assert y is x
    np.testing.assert_array_equal(back(np.array([2.0, -4.0, 0.5])), [-1.0, 2.0, -0.25])
    assert not np.any(L.grl(x, 0.0)[1](x))
    with pytest.raises(ValueError):
        L.GradientReversal(-1.0)


def test_domain_loss_anchors():
    assert L.domain_adaptation_loss([0.5] * 4) == pytest.approx(math.log(2), abs=1e-12)
    assert L.domain_adaptation_loss(L.DomainScores(0.1, 0.1, 0.9, 0.9)) == pytest.approx(-math.log(0.9), abs=1e-12)
    assert L.domain_adaptation_loss([0.5, 0.5, 1e-300, 0.5]) == pytest.approx(
        (3 * math.log(2) - math.log(1e-7)) / 4, rel=1e-9)
    for bad in ([0.0, 0.5, 0.5, 0.5], [0.5, 0.5, 1.0, 0.5], [0.5] * 3):
        with pytest.raises(ValueError):
            L.domain_adaptation_loss(bad)


def test_total_loss_examples():
    assert L.total_loss(1.5, 9.0, 9.0, 9.0, L.LossWeights(0, 0, 0, 0)) == 1.5
    assert L.total_loss(1, 1, 2, 3, L.LossWeights(lambda_cont=0.5, lambda_da=0.1, lambda_p=1.0)) == pytest.approx(3.3, abs=1e-15)
    assert L.LossWeights().lambda_da == 0.1


def test_grad_check_linear():
    w = np.array([1.5, -2.0, 0.25, 3.0])
    assert L.grad_check(lambda x: (float(w @ x), w), np.array([0.1, 0.2, 0.3, 0.4])) < 1e-10


def test_grad_check_nonfinite():
    with pytest.raises(FloatingPointError), np.errstate(invalid="ignore"):
        L.grad_check(lambda x: (float(np.log(x[0])), 1 / x), np.array([1e-9]), epsilon=1e-6)


def test_gradient_suite_default():
    errs = run_gradient_suite()
    assert set(errs) == set(CHECKS)
    assert max(errs.values()) <= TOLERANCE


def test_contrastive_gradient_absolute_accuracy(rng):
    # Saturated regime (default temperature, larger instances): relative error is
    # not meaningful for near-zero components, but absolute error must stay tiny.
    for _ in range(20):
        z_x, z_ref = rng.normal(size=(6, 4)), rng.normal(size=(6, 4))
        y_x = np.array([True] * 4 + [False] * 2)
        y_ref = np.array([True] * 3 + [False] * 3)
        _, g = L.contrastive_loss(z_x, y_x, z_ref, y_ref), L.contrastive_loss_grad(z_x, y_x, z_ref, y_ref)[0]
        fd = np.zeros_like(z_x)
        for i in np.ndindex(z_x.shape):
            zp, zm = z_x.copy(), z_x.copy()
            zp[i] += 1e-6
            zm[i] -= 1e-6
            fd[i] = (L.contrastive_loss(zp, y_x, z_ref, y_ref) - L.contrastive_loss(zm, y_x, z_ref, y_ref)) / 2e-6
        assert np.max(np.abs(g - fd)) < 1e-7


@given(vec3, vec3, vec3, st.floats(0.05, 5.0), st.floats(0.1, 10.0))
def test_pixel_contrastive_properties(zi, cs, cb, t, scale):
    cfg = L.ContrastiveConfig(t)
    v = L.pixel_contrastive(zi, cs, cb, cfg)
    assert v >= 0.0
    assert L.pixel_contrastive(scale * zi, cs, scale * cb, cfg) == pytest.approx(v, rel=1e-9, abs=1e-12)


@given(arrays(np.float64, (2, 3, 3), elements=st.floats(-10, 10)),
       arrays(np.float64, (3, 3), elements=st.floats(0, 1)))
def test_attention_pool_convex(f, a):
    if a.sum() <= 1e-6:
        return
    out = L.attention_pool(f, a)
    assert np.all(out >= f.min(axis=(1, 2)) - 1e-9)
    assert np.all(out <= f.max(axis=(1, 2)) + 1e-9)


@given(arrays(np.float64, (3, 3), elements=st.floats(-20, 20)))
def test_class_mask_partition(logits):
    s, b = L.class_mask(logits, "smoke"), L.class_mask(logits, "bg")
    assert np.all(s ^ b)


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_pixel_contrastive_monotone_in_s1(a, b):
    # zi fixed; rotate smoke centre toward zi raises s1 with s2 fixed
    zi = unit(0)
    cb = unit(1)
    lo, hi = sorted((a, b))
    if hi - lo < 1e-6:
        return
    c_lo = np.array([lo, 0.0, 1.0])
    c_hi = np.array([hi, 0.0, 1.0])
    # cosine with zi increases in the first coordinate
    assert L.pixel_contrastive(zi, c_hi, cb) < L.pixel_contrastive(zi, c_lo, cb)
