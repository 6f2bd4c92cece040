"""Class activation map numerics: weighted feature-map sums and bilinear upsampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, NumericError


@dataclass(frozen=True, eq=False)
class CamInput:
    feature_maps: np.ndarray  # (C, H, W)
    class_weights: np.ndarray  # (C,)

    def __post_init__(self):
        f = np.asarray(self.feature_maps, dtype=np.float64)
        w = np.asarray(self.class_weights, dtype=np.float64).reshape(-1)
        if f.ndim == 2:
            f = f[None]
        if f.ndim != 3 or f.shape[0] < 1 or f.shape[1] < 1 or f.shape[2] < 1:
            raise DimensionError(f"feature maps must be a non-empty C x H x W stack, got shape {f.shape}")
        if len(w) != f.shape[0]:
            raise DimensionError(f"{len(w)} weights for {f.shape[0]} feature maps")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(w))):
            raise NumericError("CAM inputs must be finite")
        object.__setattr__(self, "feature_maps", f)
        object.__setattr__(self, "class_weights", w)

    @classmethod
    def from_lists(cls, maps, weights) -> "CamInput":
        shapes = {(len(m), *{len(r) for r in m}) for m in maps}
        if len(shapes) != 1 or len(next(iter(shapes))) != 2:
            raise DimensionError("feature maps must all share one rectangular H x W shape")
        return cls(np.array(maps, dtype=np.float64), np.array(weights, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class CamMap:
    grid: np.ndarray
    source_shape: tuple[int, int]
    constant: bool = False

    @property
    def target_shape(self) -> tuple[int, int]:
        return tuple(self.grid.shape)


def compute_cam(cam_input: CamInput) -> np.ndarray:
    """sum_k w_k * f_k over the channel axis."""
    return np.tensordot(cam_input.class_weights, cam_input.feature_maps, axes=(0, 0))


def _interp_axis(a: np.ndarray, n_out: int, axis: int) -> np.ndarray:
    n_in = a.shape[axis]
    if n_out == n_in:
        return a.copy()
    if n_out == 1 or n_in == 1:
        idx = np.zeros(n_out, dtype=np.int64)
        return np.take(a, idx, axis=axis)
    # integer numerator keeps the last sample position exactly n_in - 1
    pos = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    i0 = np.minimum(np.floor(pos).astype(np.int64), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    t = pos - i0
    shape = [1] * a.ndim
    shape[axis] = n_out
    t = t.reshape(shape)
    lo = np.take(a, i0, axis=axis)
    hi = np.take(a, i1, axis=axis)
    # a + t*(b - a) returns a exactly when the neighbours are equal
    return lo + t * (hi - lo)


def bilinear_upsample(grid, target: tuple[int, int]) -> CamMap:
    """Corner-aligned bilinear resize: output corners coincide with input corners."""
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2 or min(g.shape) < 1:
        raise DimensionError(f"grid must be a non-empty 2-D array, got shape {g.shape}")
    h_out, w_out = (int(v) for v in target)
    if h_out < 1 or w_out < 1:
        raise DomainError("target dimensions must be >= 1")
    out = _interp_axis(_interp_axis(g, h_out, 0), w_out, 1)
    out = np.clip(out, g.min(), g.max())
    return CamMap(out, tuple(g.shape))


def normalize_cam(cam_map: CamMap) -> CamMap:
    """Min-max scale to [0, 1]; a constant map becomes all zeros with ``constant=True``."""
    g = cam_map.grid
    lo, hi = g.min(), g.max()
    if not hi > lo:
        return CamMap(np.zeros_like(g), cam_map.source_shape, constant=True)
    return CamMap((g - lo) / (hi - lo), cam_map.source_shape)


def to_pgm(cam_map: CamMap) -> str:
    """Plain (P2) 8-bit PGM of a map already scaled to [0, 1]."""
    q = np.clip(np.floor(cam_map.grid * 255 + 0.5), 0, 255).astype(np.int64)
    h, w = q.shape
    lines = ["P2", f"{w} {h}", "255"]
    lines += [" ".join(str(v) for v in row) for row in q]
    return "\n".join(lines) + "\n"
