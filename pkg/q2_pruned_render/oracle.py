# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import math
from dataclasses import dataclass, replace

import numpy as np

from q2_pruned_render.eio import RayIntervals, full_intervals
from q2_pruned_render.ero import RaySet
from q2_pruned_render.maps import ScalarMap
from q2_pruned_render.render import RenderConfig, RenderOutput, render_frame
from q2_pruned_render.scene import CameraSpec, Scene

WEIGHT_THRESHOLD = 1e-2


@dataclass(frozen=True)
class ComparisonReport:
    psnr: float
    max_abs_error: float
    coverage_errors: int
    sampling_ratio: float
    speedup: float = float("nan")

    def to_dict(self):
        """Deterministic fields only; the speedup is wall-clock derived."""
        return {
            "psnr": format_psnr(self.psnr),
            "max_abs_error": self.max_abs_error,
            "coverage_errors": self.coverage_errors,
            "sampling_ratio": self.sampling_ratio,
        }


def format_psnr(value):
    return "inf" if math.isinf(value) else value


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for channels in [0, 1]."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"Images differ in shape: {a.shape} vs {b.shape}.")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def render_oracle(
    scene: Scene,
    cam: CameraSpec,
    frame: int = 1,
    n_s_full: int = 96,
    cfg: RenderConfig = RenderConfig(),
    depth: ScalarMap = None,
) -> RenderOutput:
    """Every ray, the whole depth range, stratum midpoints."""
    return render_frame(
        scene,
        cam,
        RaySet.full(cam.height, cam.width),
        full_intervals(cam, n_s_full),
        replace(cfg, jitter=False),
        depth=depth,
        frame=frame,
    )


def coverage_error_map(
    reference: RenderOutput,
    rays: RaySet,
    intervals: RayIntervals,
    weight_threshold: float = WEIGHT_THRESHOLD,
) -> np.ndarray:
    """Pixels with visible reference content that pruning could not reach.

    A pixel counts when the reference weight exceeds ``weight_threshold`` and
    the ray was omitted or its interval leaves out a reference sample that
    carried density.
    """
    if reference.shape != rays.shape or rays.shape != intervals.shape:
        raise ValueError("Reference, ray set and intervals must share a shape.")
    visible = reference.weights.data > weight_threshold
    with np.errstate(invalid="ignore"):
        outside = (reference.content_near < intervals.near) | (
            reference.content_far > intervals.far
        )
    return visible & (~rays.mask | outside)


def compare(
    pruned: RenderOutput,
    reference: RenderOutput,
    rays: RaySet,
    intervals: RayIntervals,
    weight_threshold: float = WEIGHT_THRESHOLD,
) -> ComparisonReport:
    if pruned.image.shape != reference.image.shape:
        raise ValueError(
            f"Pruned image {pruned.image.shape} and reference "
            f"{reference.image.shape} differ in shape."
        )
    errors = coverage_error_map(reference, rays, intervals, weight_threshold)
    ratio = 0.0
    if reference.points_sampled:
        ratio = pruned.points_sampled / reference.points_sampled
    speedup = math.nan
    if pruned.seconds > 0:
        speedup = reference.seconds / pruned.seconds
    return ComparisonReport(
        psnr=psnr(pruned.image, reference.image),
        max_abs_error=float(np.max(np.abs(pruned.image - reference.image))),
        coverage_errors=int(np.count_nonzero(errors)),
        sampling_ratio=ratio,
        speedup=speedup,
    )
