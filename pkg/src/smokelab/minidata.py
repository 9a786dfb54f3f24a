"""Deterministic bundled mini-dataset used by the tests and the acceptance gate.

Layout written by :func:`write_mini_dataset`::

    frames/vid_00{1,2,3}/{0..8}.png   16-bit probability maps, 64x64
    labels.csv                        vid_001=47, vid_002=16, vid_003=3
    config.json
    fallback/frames/vid_fb/{0,1}.png  two all-zero maps (exercises the fallback)
    fallback/labels.csv
    fallback/config.json
"""
import json
from pathlib import Path

import numpy as np

from .fileio import save_probmap

SIZE = 64
N_FRAMES = 9
LABELS = {"vid_001": 47, "vid_002": 16, "vid_003": 3}
FALLBACK_LABELS = {"vid_fb": 3}


def _blob(shape, center, sigma, peak):
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    d2 = (yy - center[0]) ** 2 + (xx - center[1]) ** 2
    return peak * np.exp(-d2 / (2.0 * sigma ** 2))


def smoke_video(rng, n_frames=N_FRAMES, size=SIZE, onset=3, offset=7, peak_frame=5):
    """Background noise everywhere; a drifting plume on frames onset..offset, strongest at peak_frame."""
    frames = []
    for t in range(n_frames):
        p = rng.uniform(0.0, 0.15, size=(size, size))
        if onset <= t <= offset:
            strength = 0.95 - 0.1 * abs(t - peak_frame)
            p = np.maximum(p, _blob((size, size), (size / 2, size / 3 + 2 * t), 10.0, strength))
        frames.append(np.clip(p, 0.0, 1.0))
    return frames


def mini_frames(seed=0):
    rng = np.random.default_rng(seed)
    return {
        "vid_001": smoke_video(rng),
        "vid_002": smoke_video(rng, onset=1, offset=4, peak_frame=2),
        "vid_003": [rng.uniform(0.0, 0.7, size=(SIZE, SIZE)) for _ in range(N_FRAMES)],
    }


def _write_labels(path, labels):
    with open(path, "w", newline="") as fh:
        fh.write("video_id,label\n")
        for vid, lab in labels.items():
            fh.write(f"{vid},{lab}\n")


def _write_config(path, seed=0):
    cfg = {"dataset_root": "frames", "labels_csv": "labels.csv", "output_dir": "out", "seed": seed}
    with open(path, "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_mini_dataset(root, seed=0):
    root = Path(root)
    for vid, frames in mini_frames(seed).items():
        for i, p in enumerate(frames):
            save_probmap(p, root / "frames" / vid / f"{i}.png")
    _write_labels(root / "labels.csv", LABELS)
    _write_config(root / "config.json")
    fb = root / "fallback"
    for i in range(2):
        save_probmap(np.zeros((SIZE, SIZE)), fb / "frames" / "vid_fb" / f"{i}.png")
    _write_labels(fb / "labels.csv", FALLBACK_LABELS)
    _write_config(fb / "config.json")
    return root
