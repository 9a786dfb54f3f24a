"""Adversarial class-aware adaptation on synthetic two-domain pixel data.

A linear per-pixel generator feeds a logistic segmentation head and, through a
gradient reversal layer, two logistic domain discriminators (smoke and
background). Discriminators see attention-pooled features restricted to the
pixels the segmentation head assigns to their class. All gradients are written
out by hand; training is plain full-batch gradient descent, one update per
epoch, and is bit-for-bit deterministic given the seeds.
"""
import csv
from dataclasses import dataclass, field

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import train_test_split
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from .arrays import sigmoid
from .losses import SCORE_EPS, GradientReversal, LossWeights

SOURCE, TARGET = 0, 1


@dataclass(frozen=True)
class SyntheticDomainSpec:
    """Gaussian pixel features per (domain, class).

    `means` maps ``(domain, is_smoke)`` to a length-`feature_dim` mean vector.
    """
    feature_dim: int
    means: dict
    stddev: dict
    pixels_per_image: int = 4
    images_per_domain: int = 200
    smoke_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.feature_dim < 1 or self.pixels_per_image < 1 or self.images_per_domain < 1:
            raise ValueError("counts must be >= 1")
        for key in [(d, c) for d in (SOURCE, TARGET) for c in (True, False)]:
            if key not in self.means or key not in self.stddev:
                raise ValueError(f"missing mean/stddev for (domain, smoke) = {key}")
            if np.shape(self.means[key]) != (self.feature_dim,):
                raise ValueError(f"mean for {key} must have length {self.feature_dim}")
            if not self.stddev[key] > 0:
                raise ValueError("stddev must be positive")


def default_spec(offset=2.0, sigma=1.0, feature_dim=4, class_gap=1.5, **kw):
    """Classes split along axis 1; the target domain is shifted by `offset` sigmas along axis 0."""
    base = {True: np.eye(feature_dim)[1] * class_gap, False: -np.eye(feature_dim)[1] * class_gap}
    shift = np.eye(feature_dim)[0] * offset * sigma
    means = {(SOURCE, c): base[c] for c in (True, False)}
    means.update({(TARGET, c): base[c] + shift for c in (True, False)})
    stddev = {k: sigma for k in means}
    return SyntheticDomainSpec(feature_dim, means, stddev, **kw)


@dataclass
class ToyData:
    x: np.ndarray        # images x pixels x D
    labels: np.ndarray   # images x pixels, True = smoke
    domain: np.ndarray   # images, SOURCE or TARGET

    def split(self, dom):
        sel = self.domain == dom
        return self.x[sel], self.labels[sel]


def synth_dataset(spec):
    rng = np.random.default_rng(spec.seed)
    n, p, d = spec.images_per_domain, spec.pixels_per_image, spec.feature_dim
    xs, ys, doms = [], [], []
    for dom in (SOURCE, TARGET):
        labels = rng.random((n, p)) < spec.smoke_fraction
        noise = rng.standard_normal((n, p, d))
        x = np.empty((n, p, d))
        for cls in (True, False):
            sel = labels == cls
            x[sel] = np.asarray(spec.means[dom, cls]) + spec.stddev[dom, cls] * noise[sel]
        xs.append(x)
        ys.append(labels)
        doms.append(np.full(n, dom))
    return ToyData(np.concatenate(xs), np.concatenate(ys), np.concatenate(doms))


@dataclass
class ToyGenerator:
    weight: np.ndarray    # C x D
    bias: np.ndarray      # C
    head_w: np.ndarray    # C, segmentation head
    head_b: float = 0.0

    def features(self, x):
        return x @ self.weight.T + self.bias

    def logits(self, feats):
        return feats @ self.head_w + self.head_b


@dataclass
class ToyDiscriminator:
    weight: np.ndarray    # C
    bias: float = 0.0

    def scores(self, pooled):
        return np.clip(sigmoid(pooled @ self.weight + self.bias), SCORE_EPS, 1.0 - SCORE_EPS)


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int = 500
    learning_rate: float = 1.0
    lambda_grl_start: float = 0.0
    lambda_grl_end: float = 1.0
    weights: LossWeights = field(default_factory=LossWeights)
    channels: int = 4
    init_scale: float = 0.5
    # L2 on discriminator weights; damps the generator/discriminator oscillation
    disc_weight_decay: float = 0.03
    probe_every: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.disc_weight_decay < 0:
            raise ValueError("disc_weight_decay must be non-negative")
        for v in (self.lambda_grl_start, self.lambda_grl_end):
            if not 0.0 <= v <= 1.0:
                raise ValueError("lambda_grl ramp endpoints must be in [0, 1]")

    def lambda_grl(self, epoch):
        """Linear ramp from start (first epoch) to end (last epoch)."""
        if self.epochs == 1:
            return self.lambda_grl_end
        t = epoch / (self.epochs - 1)
        return self.lambda_grl_start + t * (self.lambda_grl_end - self.lambda_grl_start)


@dataclass
class ToyModel:
    gen: ToyGenerator
    disc: dict  # "smoke" / "bg" -> ToyDiscriminator

    def copy(self):
        return ToyModel(
            ToyGenerator(self.gen.weight.copy(), self.gen.bias.copy(), self.gen.head_w.copy(), self.gen.head_b),
            {k: ToyDiscriminator(d.weight.copy(), d.bias) for k, d in self.disc.items()},
        )


def init_model(feature_dim, sched):
    rng = np.random.default_rng(sched.seed)
    c = sched.channels
    gen = ToyGenerator(
        weight=sched.init_scale * rng.standard_normal((c, feature_dim)),
        bias=np.zeros(c),
        head_w=sched.init_scale * rng.standard_normal(c),
    )
    disc = {k: ToyDiscriminator(np.zeros(c)) for k in ("smoke", "bg")}
    return ToyModel(gen, disc)


# -- forward / backward -----------------------------------------------------

def _class_attention(prob):
    """Attention maps restricted to each predicted class mask.

    Rows whose mask is empty fall back to the soft class probability, and to
    uniform weights if that underflows, so the pooled feature stays defined.
    """
    smoke = prob > 0.5
    att = {"smoke": np.where(smoke, prob, 0.0), "bg": np.where(~smoke, 1.0 - prob, 0.0)}
    soft = {"smoke": prob, "bg": 1.0 - prob}
    for k in att:
        empty = att[k].sum(axis=1) == 0
        att[k][empty] = soft[k][empty]
        att[k][att[k].sum(axis=1) == 0] = 1.0
    return att


def _pool(feats, att):
    # feats: N x P x C, att: N x P -> N x C
    return np.einsum("npc,np->nc", feats, att) / att.sum(axis=1, keepdims=True)


def _bce_logits(z, y):
    return np.logaddexp(0.0, z) - y * z


def _domain_batch(model, x, labels):
    feats = model.gen.features(x)
    logits = model.gen.logits(feats)
    prob = sigmoid(logits)
    att = _class_attention(prob)  # treated as constant: no gradient through attention
    pooled = {k: _pool(feats, att[k]) for k in att}
    return feats, logits, att, pooled


def step_gradients(model, data, lambda_grl, weights, reverse=True, adversarial=True,
                   disc_weight_decay=0.0):
    """Losses and per-parameter gradients for one full-batch step.

    The generator's domain gradient passes through a reversal layer when
    `reverse` is True and through an identity when False. Returned gradients
    are kept separate by source (seg vs domain) so callers can inspect them.
    """
    gen = model.gen
    c = gen.weight.shape[0]
    out = {
        "gen_seg_w": np.zeros_like(gen.weight), "gen_seg_b": np.zeros(c),
        "gen_dom_w": np.zeros_like(gen.weight), "gen_dom_b": np.zeros(c),
        "head_w": np.zeros(c), "head_b": 0.0,
        "disc": {k: [np.zeros(c), 0.0] for k in ("smoke", "bg")},
    }
    seg_losses = {}
    cache = {}
    # strict alternation, source batch first
    for dom, seg_weight in ((SOURCE, 1.0), (TARGET, weights.lambda_p)):
        x, y = data.split(dom)
        feats, logits, att, pooled = _domain_batch(model, x, y)
        cache[dom] = (x, feats, att, pooled)
        seg_losses[dom] = float(_bce_logits(logits, y).mean())
        g_logit = seg_weight * (sigmoid(logits) - y) / logits.size
        out["head_w"] += np.einsum("np,npc->c", g_logit, feats)
        out["head_b"] += float(g_logit.sum())
        g_feat = g_logit[..., None] * gen.head_w
        out["gen_seg_w"] += np.einsum("npc,npd->cd", g_feat, x)
        out["gen_seg_b"] += g_feat.sum(axis=(0, 1))

    seg_loss = seg_losses[SOURCE] + weights.lambda_p * seg_losses[TARGET]
    da_loss = 0.0
    if adversarial:
        n_pairs = min(len(cache[SOURCE][0]), len(cache[TARGET][0]))
        layer = GradientReversal(lambda_grl)
        for dom, y_dom in ((SOURCE, 0.0), (TARGET, 1.0)):
            x, feats, att, pooled = cache[dom]
            g_feat = np.zeros_like(feats)
            for k, disc in model.disc.items():
                d = disc.scores(pooled[k])
                # BCE terms averaged over the four (class, domain) scores and over pairs
                term = -np.log(d) if y_dom else -np.log1p(-d)
                da_loss += term.sum() / (4.0 * n_pairs)
                g_z = weights.lambda_da * (d - y_dom) / (4.0 * n_pairs)
                out["disc"][k][0] += g_z @ pooled[k]
                out["disc"][k][1] += float(g_z.sum())
                g_pooled = g_z[:, None] * disc.weight
                norm = att[k] / att[k].sum(axis=1, keepdims=True)
                g_feat += norm[..., None] * g_pooled[:, None, :]
            g_feat = layer.backward(g_feat) if reverse else g_feat
            out["gen_dom_w"] += np.einsum("npc,npd->cd", g_feat, x)
            out["gen_dom_b"] += g_feat.sum(axis=(0, 1))
        for k, disc in model.disc.items():
            out["disc"][k][0] += disc_weight_decay * disc.weight
    out["seg_loss"] = seg_loss
    out["seg_source"], out["seg_target"] = seg_losses[SOURCE], seg_losses[TARGET]
    out["da_loss"] = float(da_loss)
    return out


def apply_step(model, grads, lr):
    g = model.gen
    g.weight = g.weight - lr * (grads["gen_seg_w"] + grads["gen_dom_w"])
    g.bias = g.bias - lr * (grads["gen_seg_b"] + grads["gen_dom_b"])
    g.head_w = g.head_w - lr * grads["head_w"]
    g.head_b = g.head_b - lr * grads["head_b"]
    for k, disc in model.disc.items():
        gw, gb = grads["disc"][k]
        disc.weight = disc.weight - lr * gw
        disc.bias = disc.bias - lr * gb


# -- probing ----------------------------------------------------------------

def pooled_features(gen, data):
    """Per-image features: class-conditional means of generator output, smoke then bg."""
    feats = gen.features(data.x)
    lab = data.labels[..., None]
    parts = []
    for sel in (lab, ~lab):
        cnt = sel.sum(axis=1)
        parts.append(np.where(cnt > 0, (feats * sel).sum(axis=1) / np.maximum(cnt, 1), 0.0))
    return np.concatenate(parts, axis=1)


def probe_accuracy(features, domains, seed=0):
    """Held-out accuracy of a fresh logistic domain classifier (70/30 split)."""
    features = np.asarray(features, dtype=np.float64)
    domains = np.asarray(domains)
    counts = np.bincount(domains.astype(int), minlength=2)
    if counts.min() < 2:
        raise ValueError("probe needs at least 2 images per domain")
    x_tr, x_te, y_tr, y_te = train_test_split(
        features, domains, test_size=0.3, random_state=seed, stratify=domains)
    probe = make_pipeline(StandardScaler(), LogisticRegression())
    probe.fit(x_tr, y_tr)
    return float(probe.score(x_te, y_te))


# -- training ---------------------------------------------------------------

@dataclass
class TrainResult:
    model: ToyModel
    initial: ToyModel
    history: list
    data: ToyData

    def probe(self, seed=0, frozen=False):
        gen = (self.initial if frozen else self.model).gen
        return probe_accuracy(pooled_features(gen, self.data), self.data.domain, seed)


def train(spec, sched, adversarial=True, data=None):
    data = synth_dataset(spec) if data is None else data
    model = init_model(spec.feature_dim, sched)
    initial = model.copy()
    history = []
    for epoch in range(sched.epochs):
        lam = sched.lambda_grl(epoch)
        grads = step_gradients(model, data, lam, sched.weights, adversarial=adversarial,
                               disc_weight_decay=sched.disc_weight_decay)
        if not (np.isfinite(grads["seg_loss"]) and np.isfinite(grads["da_loss"])):
            raise FloatingPointError(f"non-finite loss at epoch {epoch}")
        row = {"epoch": epoch, "seg_loss": grads["seg_loss"], "da_loss": grads["da_loss"],
               "lambda_grl": lam, "probe_accuracy": None}
        if sched.probe_every and epoch % sched.probe_every == 0:
            row["probe_accuracy"] = probe_accuracy(pooled_features(model.gen, data), data.domain, sched.seed)
        history.append(row)
        apply_step(model, grads, sched.learning_rate)
    return TrainResult(model, initial, history, data)


HISTORY_COLUMNS = ("epoch", "seg_loss", "da_loss", "lambda_grl", "probe_accuracy")


def write_history_csv(history, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS)
        w.writeheader()
        for row in history:
            w.writerow({k: ("" if row[k] is None else row[k]) for k in HISTORY_COLUMNS})
