"""Dataset-level orchestration: pseudo-labelling, evaluation and cropping runs.

Dataset layout for pseudo-labelling::

    <dataset_root>/<video_id>/<frame>.png   16-bit probability maps (integer stems sort numerically)
    <labels_csv>                            video_id,label

Output: ``<output_dir>/<video_id>/<frame_index>.png`` masks and
``<output_dir>/manifest.json``.
"""
import csv
import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from PIL import Image

from .constraints import ConstraintKind, FusionConfig, decode_label, label_to_constraint
from .cropping import PatchSpec, crop_patches
from .fileio import load_labels, load_mask, load_opacity, load_prediction, load_probmap, save_mask
from .metrics import (METRIC_FIELDS, aggregate, aggregate_micro, confusion, mmse_terms,
                      opacity_counts, opacity_metrics, opacity_to_binary, overall_metrics)
from .selection import SelectionConfig, generate_pseudolabels

log = logging.getLogger(__name__)

SEED_ENV = "SMOKELAB_SEED"
NO_DATA = -1


@dataclass
class RunConfig:
    dataset_root: str
    labels_csv: str
    output_dir: str
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    parallelism: int = 1
    seed: int = 0
    base_dir: str = "."  # relative paths resolve against this

    def __post_init__(self):
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    def path(self, name):
        p = Path(getattr(self, name))
        return p if p.is_absolute() else Path(self.base_dir) / p

    @classmethod
    def from_dict(cls, d, base_dir="."):
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d["selection"] = SelectionConfig(**d.get("selection", {}))
        d["fusion"] = FusionConfig(**d.get("fusion", {}))
        d.setdefault("base_dir", str(base_dir))
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        path = Path(path)
        with open(path) as fh:
            return cls.from_dict(json.load(fh), base_dir=path.parent)

    def manifest_view(self):
        """Config as recorded in the manifest: no scheduling or machine-local fields."""
        return {
            "dataset_root": self.dataset_root,
            "labels_csv": self.labels_csv,
            "output_dir": self.output_dir,
            "selection": asdict(self.selection),
            "fusion": asdict(self.fusion),
            "seed": self.seed,
        }


def resolve_seed(cfg_seed, cli_seed=None):
    """CLI seed beats the environment, which beats the config file."""
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        return int(env)
    return int(cfg_seed)


def video_seed(run_seed, video_id):
    digest = hashlib.sha256(f"{run_seed}:{video_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def discover_videos(root):
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    vids = sorted(p.name for p in root.iterdir() if p.is_dir())
    if not vids:
        raise ValueError(f"no videos found under {root}")
    return vids


def frame_paths(video_dir):
    """PNG frames of one video in temporal order: numerically when every stem is an integer."""
    paths = list(Path(video_dir).glob("*.png"))
    if paths and all(p.stem.isdigit() for p in paths):
        return sorted(paths, key=lambda p: (int(p.stem), p.name))
    return sorted(paths, key=lambda p: p.name)


def _process_video(video_id, label, cfg, frames_dir, out_dir):
    entry = {"video_id": video_id, "label_raw": label.raw_value, "label_meaning": label.meaning,
             "seed": video_seed(cfg.seed, video_id)}
    decision = label_to_constraint(label)
    entry["decision"] = decision.kind.value
    entry["confidence"] = decision.confidence
    paths = frame_paths(frames_dir / video_id)
    entry["frame_count"] = len(paths)
    entry["selected_frames"] = []
    entry["output_mask_paths"] = []
    if decision.kind is ConstraintKind.SKIP:
        entry["status"] = "skipped"
        entry["reason"] = f"negative label {label.raw_value} ({label.meaning})"
        return entry
    try:
        if not paths:
            raise FileNotFoundError(f"no probability maps in {frames_dir / video_id}")
        frames = [load_probmap(p) for p in paths]
        shapes = {f.shape for f in frames}
        if len(shapes) != 1:
            raise ValueError(f"frames have differing shapes {sorted(shapes)}")
        masks = generate_pseudolabels(frames, decision, cfg.selection, cfg.fusion)
    except (OSError, ValueError) as exc:
        entry["status"] = "error"
        entry["reason"] = str(exc)
        return entry
    for idx, mask in masks:
        rel = f"{video_id}/{idx}.png"
        save_mask(mask, out_dir / rel)
        entry["selected_frames"].append(idx)
        entry["output_mask_paths"].append(rel)
    entry["status"] = "processed"
    entry["reason"] = None
    return entry


def run_pseudolabel(cfg, jobs=None):
    """Pseudo-label every video under the dataset root and write the manifest.

    Per-video failures are recorded in the manifest and do not stop the run.
    Output is independent of `jobs`.
    """
    frames_dir = cfg.path("dataset_root")
    out_dir = cfg.path("output_dir")
    labels = load_labels(cfg.path("labels_csv"))
    video_ids = discover_videos(frames_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = jobs or cfg.parallelism
    no_data = decode_label(NO_DATA)

    def work(vid):
        return _process_video(vid, labels.get(vid, no_data), cfg, frames_dir, out_dir)

    if jobs == 1:
        entries = [work(v) for v in video_ids]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(work, video_ids))
    missing = sorted(set(labels) - set(video_ids))
    summary = {s: sum(e["status"] == s for e in entries) for s in ("processed", "skipped", "error")}
    manifest = {
        "config": cfg.manifest_view(),
        "videos": entries,
        "labels_without_frames": missing,
        "summary": summary,
    }
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    log.info("pseudo-labelled %d videos (%d skipped, %d errors)",
             summary["processed"], summary["skipped"], summary["error"])
    return manifest


# -- evaluation -------------------------------------------------------------

def _png_index(root):
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"directory {root} does not exist")
    return {p.relative_to(root).as_posix(): p for p in sorted(root.rglob("*.png"))}


def pair_files(pred_dir, gt_dir, opacity_dir=None):
    preds = _png_index(pred_dir)
    dirs = {"ground truth": _png_index(gt_dir) if gt_dir is not None else None,
            "opacity ground truth": _png_index(opacity_dir) if opacity_dir is not None else None}
    problems = []
    for name, idx in dirs.items():
        if idx is None:
            continue
        if set(preds) - set(idx):
            problems.append(f"missing {name} for: {', '.join(sorted(set(preds) - set(idx)))}")
        if set(idx) - set(preds):
            problems.append(f"missing prediction for {name}: {', '.join(sorted(set(idx) - set(preds)))}")
    if problems:
        raise ValueError("unpaired files; " + "; ".join(problems))
    if not preds:
        raise ValueError(f"no prediction images found under {pred_dir}")
    return [(k, preds[k], dirs["ground truth"] and dirs["ground truth"][k],
             dirs["opacity ground truth"] and dirs["opacity ground truth"][k]) for k in preds]


def evaluate_pairs(pairs, micro=False, mmse_mode="binary", threshold=0.5):
    names, rows, counts, sq_terms, op_counts = [], [], [], [], []
    for name, pred_path, gt_path, op_path in pairs:
        pred, prob = load_prediction(pred_path, threshold)
        truth = load_opacity(op_path) if op_path is not None else None
        gt = load_mask(gt_path) if gt_path is not None else opacity_to_binary(truth)
        c = confusion(pred, gt)
        names.append(name)
        if micro:
            counts.append(c)
            sq_terms.append(mmse_terms(pred, gt, mmse_mode, prob))
            if truth is not None:
                op_counts.append(opacity_counts(pred, truth))
        else:
            rows.append((overall_metrics(c, pred, gt, mmse_mode, prob),
                         opacity_metrics(pred, truth) if truth is not None else None))
    if micro:
        return aggregate_micro(counts, sq_terms, op_counts or None, names)
    return aggregate(rows, names)


def write_report(report, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(out_dir / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_FIELDS)
        w.writerow(["" if report.means[k] is None else repr(report.means[k]) for k in METRIC_FIELDS])
    return out_dir / "report.json", out_dir / "report.csv"


def run_evaluate(pred_dir, gt_dir, out_dir, opacity_dir=None, micro=False, mmse_mode="binary",
                 threshold=0.5):
    if gt_dir is None and opacity_dir is None:
        raise ValueError("need a ground-truth or opacity ground-truth directory")
    report = evaluate_pairs(pair_files(pred_dir, gt_dir, opacity_dir), micro, mmse_mode, threshold)
    write_report(report, out_dir)
    return report


# -- cropping ---------------------------------------------------------------

def run_crop(images_dir, masks_dir, out_dir, spec=PatchSpec()):
    """Crop every image/mask pair into patches; writes patch PNGs and patches.json."""
    images = _png_index(images_dir)
    masks = _png_index(masks_dir)
    orphans = sorted(set(images) ^ set(masks))
    if orphans:
        raise ValueError(f"unpaired files: {', '.join(orphans)}")
    out_dir = Path(out_dir)
    record = {"size": spec.size, "offset_radius": spec.offset_radius, "seed": spec.seed,
              "connectivity": spec.connectivity, "images": {}}
    for name in images:
        img = Image.open(images[name])
        img.load()
        mask_img = Image.open(masks[name])
        gt = np.asarray(mask_img.convert("L")) > 0
        per_image = PatchSpec(spec.size, spec.offset_radius, video_seed(spec.seed, name), spec.connectivity)
        rects = crop_patches((img.height, img.width), gt, per_image)
        stem = name[:-len(".png")]
        for k, r in enumerate(rects):
            box = (r.left, r.top, r.left + r.width, r.top + r.height)
            for sub, src in (("images", img), ("masks", mask_img)):
                dst = out_dir / sub / f"{stem}_{k}.png"
                dst.parent.mkdir(parents=True, exist_ok=True)
                src.crop(box).save(dst)
        record["images"][name] = [asdict(r) for r in rects]
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "patches.json", "w") as fh:
        json.dump(record, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return record
