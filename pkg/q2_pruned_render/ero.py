# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from q2_pruned_render.maps import (
    BoxKernelSpec,
    ScalarMap,
    binarize,
    binary_dilate,
    box_convolve,
    map_add,
)

logger = logging.getLogger(__name__)

CANDIDATE_MODES = ("average", "binary")
BINARY_WEIGHT_THRESHOLD = 1e-3
WEIGHT_UPPER_TOLERANCE = 1e-4


@dataclass(frozen=True)
class EroConfig:
    tau_ero: float = 0.9
    k1: int = 41
    k2: int = 21
    mode: str = "average"

    def __post_init__(self):
        if not self.tau_ero > 0:
            raise ValueError(f"tau_ero must be positive, got {self.tau_ero}.")
        for name in ("k1", "k2"):
            value = getattr(self, name)
            if value < 1 or value % 2 == 0:
                raise ValueError(f"{name} must be a positive odd size, got {value}.")
        if self.k2 > self.k1:
            raise ValueError(
                f"The inference kernel k2 ({self.k2}) cannot exceed the training "
                f"kernel k1 ({self.k1})."
            )
        if self.mode not in CANDIDATE_MODES:
            raise ValueError(
                f"Candidate mode must be one of {', '.join(CANDIDATE_MODES)}, "
                f"got {self.mode!r}."
            )


@dataclass(frozen=True, eq=False)
class RaySet:
    """Immutable pixel mask of rays that will be rendered."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.ndim != 2:
            raise ValueError(f"A ray set mask must be 2-D, got shape {mask.shape}.")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "_count", int(np.count_nonzero(mask)))

    @classmethod
    def full(cls, height, width):
        return cls(np.ones((height, width), dtype=bool))

    @classmethod
    def empty(cls, height, width):
        return cls(np.zeros((height, width), dtype=bool))

    @property
    def count(self) -> int:
        return self._count

    @property
    def shape(self):
        return self.mask.shape

    def __contains__(self, pixel):
        row, col = pixel
        return bool(self.mask[row, col])

    def pixels(self):
        """Active (row, col) pairs in row-major order."""
        return [tuple(int(v) for v in p) for p in np.argwhere(self.mask)]

    def as_map(self) -> ScalarMap:
        return ScalarMap(self.mask.astype(np.float32))

    def __eq__(self, other):
        if not isinstance(other, RaySet):
            return NotImplemented
        return np.array_equal(self.mask, other.mask)


def _check_binary(silhouette: ScalarMap):
    data = silhouette.data
    off = np.minimum(np.abs(data), np.abs(data - 1.0)) > 1e-6
    if np.any(off):
        raise ValueError(
            f"Silhouette must be binary; {int(np.count_nonzero(off))} pixel(s) hold "
            f"values outside {{0, 1}}."
        )


def candidate_train(silhouette: ScalarMap, cfg: EroConfig) -> ScalarMap:
    """Candidate map for the first frame, from the silhouette alone."""
    _check_binary(silhouette)
    if cfg.mode == "binary":
        return binary_dilate(silhouette, BoxKernelSpec(cfg.k1).radius)
    return box_convolve(silhouette, BoxKernelSpec(cfg.k1))


def candidate_infer(
    prev_weights: ScalarMap, silhouette: ScalarMap, cfg: EroConfig
) -> ScalarMap:
    """Candidate map from the previous frame's weights plus this silhouette."""
    if prev_weights.shape != silhouette.shape:
        raise ValueError(
            f"Previous weight map {prev_weights.height}x{prev_weights.width} does "
            f"not match the silhouette {silhouette.height}x{silhouette.width}."
        )
    weights = prev_weights.data
    if np.isnan(weights).any():
        raise ValueError("Previous weight map contains NaN values.")
    if weights.min() < 0 or weights.max() > 1 + WEIGHT_UPPER_TOLERANCE:
        raise ValueError(
            f"Previous weight map must lie in [0, 1], got range "
            f"[{weights.min()}, {weights.max()}]."
        )
    _check_binary(silhouette)

    combined = map_add(prev_weights, silhouette)
    if cfg.mode == "binary":
        return binary_dilate(
            binarize(combined, BINARY_WEIGHT_THRESHOLD), BoxKernelSpec(cfg.k2).radius
        )
    return box_convolve(combined, BoxKernelSpec(cfg.k2))


def build_candidates(
    frame: int,
    silhouette: ScalarMap,
    prev_weights: Optional[ScalarMap],
    cfg: EroConfig,
) -> ScalarMap:
    # the first frame has no rendered weights to carry forward
    if frame <= 1 or prev_weights is None:
        return candidate_train(silhouette, cfg)
    return candidate_infer(prev_weights, silhouette, cfg)


def threshold_rays(candidates: ScalarMap, tau: float) -> RaySet:
    """Rays whose candidate value is strictly above ``tau``."""
    if not np.isfinite(candidates.data).all():
        raise ValueError("Candidate map must be finite.")
    rays = RaySet(candidates.data > tau)
    logger.debug(
        "Kept %d of %d rays at tau=%s", rays.count, candidates.data.size, tau
    )
    return rays


def candidate_map(
    silhouette: ScalarMap,
    previous_weights: ScalarMap = None,
    tau: float = 0.9,
    k1: int = 41,
    k2: int = 21,
    mode: str = "average",
) -> ScalarMap:
    """Mask of the rays kept by empty ray omission.

    Without ``previous_weights`` the first-frame candidates are used.
    """
    cfg = EroConfig(tau, k1, k2, mode)
    frame = 1 if previous_weights is None else 2
    candidates = build_candidates(frame, silhouette, previous_weights, cfg)
    return threshold_rays(candidates, cfg.tau_ero).as_map()
