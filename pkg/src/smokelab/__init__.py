"""Weak-label pseudo-labelling, class-aware adaptation losses and segmentation metrics for smoke."""
from .constraints import ConstraintKind, FusionConfig, WeakLabel, decode_label, fuse_probability, label_to_constraint
from .metrics import aggregate, confusion, opacity_metrics, overall_metrics
from .selection import SelectionConfig, generate_pseudolabels, select_frames

__version__ = "0.1.0"
