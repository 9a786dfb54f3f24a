"""Connected components and multi-patch cropping around annotated smoke."""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class Component:
    pixels: np.ndarray     # K x 2 array of (row, col)
    centroid: tuple        # (row, col), rounded half up

    @property
    def size(self):
        return len(self.pixels)


@dataclass(frozen=True)
class PatchSpec:
    size: int = 600
    offset_radius: int = 100
    seed: int = 0
    connectivity: int = 4

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("patch size must be >= 1")
        if self.offset_radius < 0:
            raise ValueError("offset_radius must be >= 0")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


@dataclass(frozen=True)
class Rect:
    top: int
    left: int
    height: int
    width: int
    kind: str = "component"  # or "random"

    def contains(self, row, col):
        return self.top <= row < self.top + self.height and self.left <= col < self.left + self.width

    def slices(self):
        return slice(self.top, self.top + self.height), slice(self.left, self.left + self.width)


def connected_components(mask, connectivity=4):
    mask = np.asarray(mask, dtype=bool)
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    labeled, n = ndimage.label(mask, structure=structure)
    comps = []
    for k in range(1, n + 1):
        pix = np.argwhere(labeled == k)
        r, c = np.floor(pix.mean(axis=0) + 0.5).astype(int)
        comps.append(Component(pix, (int(r), int(c))))
    return comps


def _clip(start, limit):
    return int(min(max(start, 0), limit))


def crop_patches(image_dims, gt, spec=PatchSpec()):
    """Two jittered patches per smoke component plus one random patch per image.

    Component patches are centred on the component centroid plus a uniform
    integer offset, then shifted to stay inside the image. Offsets are capped
    below half the patch size so each patch still contains its centroid.
    """
    h, w = image_dims
    s = spec.size
    if h < s or w < s:
        raise ValueError(f"image {h}x{w} is smaller than patch size {s}")
    gt = np.asarray(gt, dtype=bool)
    if gt.shape != (h, w):
        raise ValueError(f"mask shape {gt.shape} does not match image {h}x{w}")
    rng = np.random.default_rng(spec.seed)
    radius = min(spec.offset_radius, (s - 1) // 2)
    rects = []
    for comp in connected_components(gt, spec.connectivity):
        cr, cc = comp.centroid
        for _ in range(2):
            dr, dc = rng.integers(-radius, radius + 1, size=2)
            top = _clip(cr + dr - s // 2, h - s)
            left = _clip(cc + dc - s // 2, w - s)
            rects.append(Rect(top, left, s, s, "component"))
    top = int(rng.integers(0, h - s + 1))
    left = int(rng.integers(0, w - s + 1))
    rects.append(Rect(top, left, s, s, "random"))
    return rects
