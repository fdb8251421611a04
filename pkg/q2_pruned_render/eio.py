# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from q2_pruned_render.ero import RaySet
from q2_pruned_render.maps import ScalarMap
from q2_pruned_render.scene import CameraSpec, hit_mask

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EioConfig:
    n_patch: int = 2
    shift: bool = True
    epsilon: Optional[float] = None
    wide_threshold: Optional[float] = None
    n_s_reduced: int = 28
    n_s_full: int = 96
    pad: bool = False

    def __post_init__(self):
        if self.n_patch < 1:
            raise ValueError(f"n_patch must be at least 1, got {self.n_patch}.")
        if self.n_s_reduced < 2:
            raise ValueError(
                f"n_s_reduced must be at least 2, got {self.n_s_reduced}."
            )
        if self.n_s_reduced > self.n_s_full:
            raise ValueError(
                f"n_s_reduced ({self.n_s_reduced}) cannot exceed n_s_full "
                f"({self.n_s_full})."
            )
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}.")
        if self.wide_threshold is not None and self.wide_threshold < 0:
            raise ValueError(
                f"wide_threshold must be non-negative, got {self.wide_threshold}."
            )

    def margin(self, cam: CameraSpec) -> float:
        if self.epsilon is None:
            return 0.05 * cam.depth_range
        return self.epsilon

    def wide(self, cam: CameraSpec) -> float:
        if self.wide_threshold is None:
            return 0.25 * cam.depth_range
        return self.wide_threshold


@dataclass(frozen=True, eq=False)
class PatchBounds:
    """Depth extrema of the mesh inside each patch of a window grid.

    A pixel at (row, col) belongs to window
    ((row + offset_y) // patch_h, (col + offset_x) // patch_w).
    """

    near: np.ndarray
    far: np.ndarray
    valid: np.ndarray
    patch_h: int
    patch_w: int
    offset_y: int = 0
    offset_x: int = 0

    @property
    def grid_shape(self):
        return self.near.shape

    def window_index(self, height, width):
        rows = (np.arange(height) + self.offset_y) // self.patch_h
        cols = (np.arange(width) + self.offset_x) // self.patch_w
        return rows, cols

    def per_pixel(self, height, width):
        """Near, far and validity of the covering window for every pixel."""
        rows, cols = self.window_index(height, width)
        index = np.ix_(rows, cols)
        return self.near[index], self.far[index], self.valid[index]


@dataclass(frozen=True, eq=False)
class RayIntervals:
    near: np.ndarray
    far: np.ndarray
    n_s: np.ndarray

    def __post_init__(self):
        near = np.asarray(self.near, dtype=np.float64)
        far = np.asarray(self.far, dtype=np.float64)
        n_s = np.asarray(self.n_s, dtype=np.int64)
        if not near.shape == far.shape == n_s.shape or near.ndim != 2:
            raise ValueError(
                f"Interval arrays must share one 2-D shape, got {near.shape}, "
                f"{far.shape} and {n_s.shape}."
            )
        if np.any(near > far):
            raise ValueError("Every interval must satisfy T_n <= T_f.")
        object.__setattr__(self, "near", near)
        object.__setattr__(self, "far", far)
        object.__setattr__(self, "n_s", n_s)

    @property
    def shape(self):
        return self.near.shape

    @property
    def width(self) -> np.ndarray:
        return self.far - self.near

    def with_sample_counts(self, n_s) -> "RayIntervals":
        return RayIntervals(self.near, self.far, np.broadcast_to(n_s, self.shape))

    def as_maps(self):
        """(T_n, T_f, n_s) as scalar maps for export."""
        return ScalarMap(self.near), ScalarMap(self.far), ScalarMap(self.n_s)


def _patch_size(length, n_patch, pad):
    if length % n_patch and not pad:
        raise ValueError(
            f"Image side {length} is not divisible by n_patch={n_patch}; enable "
            f"padding or choose another patch count."
        )
    return math.ceil(length / n_patch)


def _window_bounds(depth, cam, patch_h, patch_w, offset_y, offset_x):
    height, width = depth.shape
    rows = (np.arange(height) + offset_y) // patch_h
    cols = (np.arange(width) + offset_x) // patch_w
    grid = (int(rows[-1]) + 1, int(cols[-1]) + 1)
    index = rows[:, None] * grid[1] + cols[None, :]

    values = depth.data.astype(np.float64)
    hit = hit_mask(depth, cam)
    near = np.full(grid[0] * grid[1], np.inf)
    far = np.full(grid[0] * grid[1], -np.inf)
    np.minimum.at(near, index[hit], values[hit])
    np.maximum.at(far, index[hit], values[hit])

    valid = np.isfinite(near)
    near[~valid] = cam.t_near
    far[~valid] = cam.t_far
    return PatchBounds(
        near.reshape(grid),
        far.reshape(grid),
        valid.reshape(grid),
        patch_h,
        patch_w,
        offset_y,
        offset_x,
    )


def patch_minmax(
    depth: ScalarMap, n_patch: int, cam: CameraSpec, pad: bool = False
) -> PatchBounds:
    """Min and max mesh depth in each of n_patch x n_patch patches.

    Sentinel (t_far) pixels are left out; a patch with no mesh pixel is
    invalid and carries (t_near, t_far).
    """
    patch_h = _patch_size(depth.height, n_patch, pad)
    patch_w = _patch_size(depth.width, n_patch, pad)
    return _window_bounds(depth, cam, patch_h, patch_w, 0, 0)


def shifted_patch_minmax(
    depth: ScalarMap, n_patch: int, cam: CameraSpec, pad: bool = False
) -> PatchBounds:
    """As patch_minmax on a grid moved by half a patch in both axes.

    Windows along the image border are cut short rather than wrapped.
    """
    patch_h = _patch_size(depth.height, n_patch, pad)
    patch_w = _patch_size(depth.width, n_patch, pad)
    return _window_bounds(depth, cam, patch_h, patch_w, patch_h // 2, patch_w // 2)


def fuse_bounds(
    patches: PatchBounds,
    shifted: Optional[PatchBounds],
    depth: ScalarMap,
    cam: CameraSpec,
    cfg: EioConfig,
) -> RayIntervals:
    """Per-pixel [T_n, T_f] from a pixel's patch and its shifted window.

    An invalid shifted window adds nothing; a pixel whose own patch holds no
    mesh keeps the full [t_near, t_far]. Misses substitute the fused far bound
    for their sentinel depth.
    """
    height, width = depth.shape
    near, far, valid = patches.per_pixel(height, width)
    if shifted is not None:
        s_near, s_far, s_valid = shifted.per_pixel(height, width)
        near = np.where(s_valid, np.minimum(near, s_near), near)
        far = np.where(s_valid, np.maximum(far, s_far), far)

    eps = cfg.margin(cam)
    values = depth.data.astype(np.float64)
    d_valid = np.where(hit_mask(depth, cam), values, far)
    t_n = np.maximum(cam.t_near, near - eps)
    t_f = np.minimum(cam.t_far, np.maximum(d_valid, far) + eps)

    t_n = np.where(valid, t_n, cam.t_near)
    t_f = np.where(valid, t_f, cam.t_far)
    return RayIntervals(t_n, t_f, np.full(depth.shape, cfg.n_s_reduced))


def assign_sample_counts(
    intervals: RayIntervals, cfg: EioConfig, cam: CameraSpec
) -> RayIntervals:
    n_s = np.where(intervals.width > cfg.wide(cam), cfg.n_s_full, cfg.n_s_reduced)
    return intervals.with_sample_counts(n_s)


def compute_intervals(
    depth: ScalarMap, cam: CameraSpec, cfg: EioConfig
) -> RayIntervals:
    patches = patch_minmax(depth, cfg.n_patch, cam, cfg.pad)
    shifted = None
    if cfg.shift:
        shifted = shifted_patch_minmax(depth, cfg.n_patch, cam, cfg.pad)
    intervals = assign_sample_counts(
        fuse_bounds(patches, shifted, depth, cam, cfg), cfg, cam
    )
    logger.debug(
        "Intervals for n_patch=%d shift=%s: %d of %d rays need the full count",
        cfg.n_patch,
        cfg.shift,
        int(np.count_nonzero(intervals.n_s == cfg.n_s_full)),
        intervals.n_s.size,
    )
    return intervals


def full_intervals(cam: CameraSpec, n_s: int) -> RayIntervals:
    shape = (cam.height, cam.width)
    return RayIntervals(
        np.full(shape, cam.t_near), np.full(shape, cam.t_far), np.full(shape, n_s)
    )


def offset_intervals(
    depth: ScalarMap, cam: CameraSpec, tau: float, n_s: int
) -> RayIntervals:
    """Per-pixel [D - tau, D] with no patch statistics.

    Misses get [t_far - tau, t_far], so cloth around the silhouette that no
    ray reaches the mesh through is never sampled.
    """
    far = np.where(hit_mask(depth, cam), depth.data.astype(np.float64), cam.t_far)
    near = np.maximum(cam.t_near, far - tau)
    return RayIntervals(near, far, np.full(depth.shape, n_s))


def sampling_volume_ratio(
    intervals: RayIntervals, rays: RaySet, cam: CameraSpec
) -> float:
    """Summed interval length over active rays relative to full sampling."""
    if intervals.shape != rays.shape:
        raise ValueError(
            f"Intervals {intervals.shape} and ray set {rays.shape} differ in shape."
        )
    total = intervals.near.size * cam.depth_range
    return float(intervals.width[rays.mask].sum() / total)


def sampling_intervals(
    depth: ScalarMap,
    t_near: float,
    t_far: float,
    n_patch: int = 2,
    shift: bool = True,
    epsilon: float = None,
    wide_threshold: float = None,
    n_s_reduced: int = 28,
    n_s_full: int = 96,
    pad: bool = False,
) -> (ScalarMap, ScalarMap, ScalarMap):
    cam = CameraSpec(
        width=depth.width, height=depth.height, t_near=t_near, t_far=t_far
    )
    cfg = EioConfig(
        n_patch, shift, epsilon, wide_threshold, n_s_reduced, n_s_full, pad
    )
    return compute_intervals(depth, cam, cfg).as_maps()
