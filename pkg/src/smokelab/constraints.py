"""Video-level weak labels and their fusion with model probability maps."""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .arrays import as_probmap


class ConstraintKind(Enum):
    POSITIVE = "positive"
    SKIP = "skip"
    NONE = "none"


@dataclass(frozen=True)
class WeakLabel:
    raw_value: int
    meaning: str
    expected_smoke: Optional[bool]  # None means unknown


@dataclass(frozen=True)
class ConstraintDecision:
    kind: ConstraintKind
    confidence: Optional[float] = None

    def __post_init__(self):
        if self.kind is ConstraintKind.POSITIVE:
            if self.confidence is None or not 0.0 < self.confidence <= 1.0:
                raise ValueError("positive constraint needs a confidence in (0, 1]")
        elif self.confidence is not None:
            raise ValueError(f"{self.kind.value} decision carries no confidence")


@dataclass(frozen=True)
class FusionConfig:
    lambda_positive: float = 0.8
    # Only used when negative labels are fused instead of skipped.
    lambda_negative: float = 0.4

    def __post_init__(self):
        for name in ("lambda_positive", "lambda_negative"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


# raw value -> (meaning, expected smoke, inference confidence or outcome)
LABEL_TABLE = {
    47: ("Gold Standard Positive", True, 0.9),
    32: ("Gold Standard Negative", False, "skip"),
    23: ("Strong Positive", True, 0.8),
    16: ("Strong Negative", False, "skip"),
    19: ("Weak Positive", True, 0.7),
    20: ("Weak Negative", False, "skip"),
    5: ("Maybe Positive", True, 0.65),
    4: ("Maybe Negative", False, "skip"),
    3: ("Disagreement", None, "none"),
    -1: ("No Data", None, "none"),
}


def decode_label(raw):
    try:
        meaning, smoke, _ = LABEL_TABLE[int(raw)]
    except (KeyError, ValueError, TypeError):
        raise ValueError(f"unknown label value: {raw!r}") from None
    return WeakLabel(int(raw), meaning, smoke)


def label_to_constraint(label):
    outcome = LABEL_TABLE[label.raw_value][2]
    if outcome == "skip":
        return ConstraintDecision(ConstraintKind.SKIP)
    if outcome == "none":
        return ConstraintDecision(ConstraintKind.NONE)
    return ConstraintDecision(ConstraintKind.POSITIVE, outcome)


def fuse_probability(p_model, decision, cfg=FusionConfig()):
    """Blend a model probability map with a video-level constraint.

    The constraint map is spatially uniform at the label's inference
    confidence, so a positive decision gives
    ``lambda_positive * p + (1 - lambda_positive) * confidence`` per pixel.
    """
    p = as_probmap(p_model)
    if decision.kind is ConstraintKind.SKIP:
        raise ValueError("video excluded by negative label")
    if decision.kind is ConstraintKind.NONE:
        return p.copy()
    lam = cfg.lambda_positive
    fused = lam * p + (1.0 - lam) * decision.confidence
    return np.clip(fused, 0.0, 1.0)
