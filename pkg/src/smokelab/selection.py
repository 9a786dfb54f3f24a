"""Heuristic frame selection and pseudo-label generation for one video.

Frames are ranked by a confidence score mixing mean activation and the
high-confidence foreground ratio. The top-k frames seed temporal groups of
+-n neighbours; each group is scored by its centre's confidence and the mean
pairwise similarity of its members, and the best group supplies the frames
that get binarised into pseudo-labels.
"""
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .arrays import as_probmap, binarize, foreground_ratio, iou, pearson_corr
from .constraints import ConstraintKind, FusionConfig, fuse_probability


@dataclass(frozen=True)
class SelectionConfig:
    alpha: float = 0.85
    tau: float = 0.6
    top_k: int = 3
    neighbor_radius: int = 2
    beta: float = 0.7
    gamma: float = 0.8

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.neighbor_radius < 0:
            raise ValueError("neighbor_radius must be >= 0")


@dataclass(frozen=True)
class FrameScore:
    frame_index: int
    confidence: float


@dataclass(frozen=True)
class TemporalGroup:
    center_index: int
    member_indices: tuple
    coherence: float
    composite_score: float


def confidence_score(p, cfg=SelectionConfig()):
    p = as_probmap(p)
    return cfg.alpha * float(p.mean()) + (1.0 - cfg.alpha) * foreground_ratio(p, cfg.tau)


def pair_similarity(pu, pv, cfg=SelectionConfig()):
    pu = as_probmap(pu)
    pv = as_probmap(pv)
    if pu.shape != pv.shape:
        raise ValueError(f"shape mismatch: {pu.shape} vs {pv.shape}")
    overlap = iou(binarize(pu, cfg.tau), binarize(pv, cfg.tau))
    return cfg.beta * overlap + (1.0 - cfg.beta) * pearson_corr(pu, pv)


def rank_frames(frames, cfg=SelectionConfig()):
    """Frame scores sorted by descending confidence, ties to the lower index."""
    scores = [FrameScore(i, confidence_score(f, cfg)) for i, f in enumerate(frames)]
    return sorted(scores, key=lambda s: (-s.confidence, s.frame_index))


def group_window(center, n_frames, radius):
    return tuple(range(max(0, center - radius), min(n_frames, center + radius + 1)))


def _coherence(members, frames, cfg, cache):
    pairs = list(combinations(members, 2))
    if not pairs:
        return 1.0
    total = 0.0
    for u, v in pairs:
        if (u, v) not in cache:
            cache[u, v] = pair_similarity(frames[u], frames[v], cfg)
        total += cache[u, v]
    return total / len(pairs)


def score_groups(frames, cfg=SelectionConfig(), return_all=False):
    """Score the temporal groups around the top-k frames and return the best.

    With ``return_all=True`` every candidate group is returned, in candidate
    rank order, instead of only the winner.
    """
    frames = [as_probmap(f) for f in frames]
    if not frames:
        raise ValueError("frame list is empty")
    ranked = rank_frames(frames, cfg)
    conf = {s.frame_index: s.confidence for s in ranked}
    cache = {}
    groups = []
    for cand in ranked[: cfg.top_k]:
        members = group_window(cand.frame_index, len(frames), cfg.neighbor_radius)
        coh = _coherence(members, frames, cfg, cache)
        score = cfg.gamma * conf[cand.frame_index] + (1.0 - cfg.gamma) * coh
        groups.append(TemporalGroup(cand.frame_index, members, coh, score))
    if return_all:
        return groups
    return min(groups, key=lambda g: (-g.composite_score, g.center_index))


def needs_fallback(frames, cfg=SelectionConfig()):
    if len(frames) < 2:
        return True
    return all(foreground_ratio(f, cfg.tau) == 0.0 for f in frames)


def select_frames(frames, cfg=SelectionConfig()):
    """Indices of the frames to pseudo-label, as a contiguous ascending window.

    Falls back to the most confident frame plus its immediate neighbours when
    the video is too short or no frame has any pixel above ``tau``.
    """
    frames = [as_probmap(f) for f in frames]
    if not frames:
        raise ValueError("frame list is empty")
    if needs_fallback(frames, cfg):
        best = rank_frames(frames, cfg)[0].frame_index
        return list(group_window(best, len(frames), 1))
    return list(score_groups(frames, cfg).member_indices)


def generate_pseudolabels(frames, decision, sel_cfg=SelectionConfig(), fus_cfg=FusionConfig()):
    """Fuse, select and binarise; returns ``[(frame_index, mask), ...]``."""
    if decision.kind is ConstraintKind.SKIP:
        raise ValueError("video excluded by negative label")
    fused = [fuse_probability(f, decision, fus_cfg) for f in frames]
    chosen = select_frames(fused, sel_cfg)
    return [(i, binarize(fused[i], sel_cfg.tau)) for i in chosen]
