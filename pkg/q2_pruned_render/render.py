# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from q2_pruned_render.eio import RayIntervals
from q2_pruned_render.ero import RaySet
from q2_pruned_render.maps import ScalarMap
from q2_pruned_render.scene import (
    CameraSpec,
    Scene,
    hit_mask,
    query_field,
    rasterize_depth,
    surface_color,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RenderConfig:
    n_threads: int = 1
    chunk_size: int = 4096
    jitter: bool = False
    seed: int = 0
    deform_work_units: int = 0
    density_threshold: float = 0.0

    def __post_init__(self):
        if self.n_threads < 1:
            raise ValueError(f"n_threads must be at least 1, got {self.n_threads}.")
        if self.chunk_size < 1:
            raise ValueError(f"chunk_size must be at least 1, got {self.chunk_size}.")
        if self.deform_work_units < 0:
            raise ValueError("deform_work_units must be non-negative.")


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Ordered sample depths along one +z ray through (x, y)."""

    depths: np.ndarray
    origin: tuple = (0.0, 0.0)

    @property
    def positions(self) -> np.ndarray:
        depths = np.asarray(self.depths, dtype=np.float64)
        origin = np.asarray(self.origin, dtype=np.float64)
        xy = np.broadcast_to(origin, (depths.size, 2))
        return np.column_stack([xy, depths])


@dataclass(frozen=True, eq=False)
class RenderOutput:
    image: np.ndarray
    weights: ScalarMap
    points_sampled: int
    points_deformed: int
    rays_rendered: int
    content_near: np.ndarray
    content_far: np.ndarray
    seconds: float = 0.0
    checksum: float = 0.0

    @property
    def shape(self):
        return self.weights.shape


@dataclass(frozen=True)
class DeformStub:
    """Identity deformation that spends a fixed amount of work per point."""

    work_units: int = 0

    def __call__(self, points: np.ndarray):
        if self.work_units <= 0:
            return points, 0.0
        acc = points.sum(axis=-1)
        for _ in range(self.work_units):
            acc = acc * 0.999 + 1e-3
        return points, float(acc.sum())


def sample_depths(near, far, n_s, hit_depth=None, offsets=None) -> np.ndarray:
    """Stratified depths for a batch of rays sharing one sample count.

    The first n_s - 1 samples take one draw per equal stratum of
    [near, end), where end is the mesh depth on intersecting rays and the
    far bound otherwise; the last sample sits at end. ``offsets`` holds the
    in-stratum positions in [0, 1), stratum midpoints when omitted.
    """
    if n_s < 2:
        raise ValueError(f"At least two samples per ray are needed, got {n_s}.")
    near = np.atleast_1d(np.asarray(near, dtype=np.float64))
    far = np.atleast_1d(np.asarray(far, dtype=np.float64))
    end = far
    if hit_depth is not None:
        hit_depth = np.atleast_1d(np.asarray(hit_depth, dtype=np.float64))
        end = np.where(np.isfinite(hit_depth), hit_depth, far)
    if np.any(end < near):
        raise ValueError("Sample interval end lies before its start.")
    if offsets is None:
        offsets = np.full((near.size, n_s - 1), 0.5)
    strata = (np.arange(n_s - 1) + offsets) / (n_s - 1)
    span = (end - near)[:, None]
    depths = np.empty((near.size, n_s))
    depths[:, :-1] = near[:, None] + strata * span
    depths[:, -1] = end
    return depths


def stratified_sample(interval, n_s, seed=None, hit_depth=None, jitter=False):
    """Sample depths for a single ray over ``interval`` = (T_n, T_f)."""
    near, far = interval
    if near > far:
        raise ValueError(f"Interval start {near} lies after its end {far}.")
    offsets = None
    if jitter:
        offsets = np.random.default_rng(seed).random((1, n_s - 1))
    hit = None if hit_depth is None else [hit_depth]
    return sample_depths([near], [far], n_s, hit, offsets)[0]


def composite(sigma, colors, depths, final_color):
    """Alpha compositing of equal-length sample rows.

    The last sample only contributes the closing colour, weighted by the
    opacity left after the first n_s - 1 samples. Returns (rgb, weight).
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.isnan(sigma).any():
        raise FloatingPointError("NaN density reached the compositor.")
    delta = np.diff(np.asarray(depths, dtype=np.float64), axis=-1)
    optical = sigma[..., :-1] * delta
    before = np.cumsum(optical, axis=-1) - optical
    alpha = np.exp(-before) * -np.expm1(-optical)
    weight = alpha.sum(axis=-1)
    rgb = (alpha[..., None] * np.asarray(colors)[..., :-1, :]).sum(axis=-2)
    rgb = rgb + (1.0 - weight)[..., None] * np.asarray(final_color)
    return rgb, weight


def render_ray(samples: SampleSet, scene: Scene, intersects_mesh: bool, frame=1):
    """Colour and accumulated weight of one ray."""
    points = samples.positions
    if len(points) < 2:
        raise ValueError("At least two samples per ray are needed.")
    sigma, colors = query_field(scene, points, frame)
    final = surface_color(scene, points[-1], frame) if intersects_mesh else colors[-1]
    rgb, weight = composite(
        sigma[None], np.asarray(colors)[None], points[None, :, 2], final[None]
    )
    return rgb[0], float(weight[0])


def _check_inputs(cam, rays, intervals, depth):
    expected = (cam.height, cam.width)
    for name, shape in (
        ("ray set", rays.shape),
        ("intervals", intervals.shape),
        ("depth map", depth.shape),
    ):
        if shape != expected:
            raise ValueError(
                f"The {name} has shape {shape}, expected {expected} from the camera."
            )


def _render_chunk(task, scene, frame, stub, density_threshold):
    xs, ys, near, far, hit, depth, n_s, offsets = task
    depths = sample_depths(near, far, n_s, np.where(hit, depth, np.inf), offsets)
    points = np.empty(depths.shape + (3,))
    points[..., 0] = xs[:, None]
    points[..., 1] = ys[:, None]
    points[..., 2] = depths
    points, checksum = stub(points)

    sigma, colors = query_field(scene, points, frame)
    final = np.array(colors[:, -1, :])
    if hit.any():
        final[hit] = surface_color(scene, points[hit, -1, :], frame)
    rgb, weight = composite(sigma, colors, depths, final)

    dense = sigma > density_threshold
    content_near = np.where(dense, depths, np.inf).min(axis=-1)
    content_far = np.where(dense, depths, -np.inf).max(axis=-1)
    return rgb, weight, content_near, content_far, checksum


def render_frame(
    scene: Scene,
    cam: CameraSpec,
    rays: RaySet,
    intervals: RayIntervals,
    cfg: RenderConfig = RenderConfig(),
    depth: Optional[ScalarMap] = None,
    frame: int = 1,
) -> RenderOutput:
    """Render the active rays of one frame; omitted pixels show background.

    Rays are grouped by sample count and rendered chunk by chunk on a thread
    pool. Results are written back in submission order, so the output does
    not depend on the number of threads.
    """
    if depth is None:
        depth = rasterize_depth(scene, cam, frame)
    _check_inputs(cam, rays, intervals, depth)

    # omitted rays keep the background and zero weight
    height, width = rays.shape
    image = np.empty((height * width, 3))
    image[:] = scene.background
    weights = np.zeros(height * width)
    content_near = np.full(height * width, np.nan)
    content_far = np.full(height * width, np.nan)

    # flatten per-pixel inputs so chunks can index them directly
    xs, ys = cam.ray_grid()
    xs, ys = xs.reshape(-1), ys.reshape(-1)
    near, far = intervals.near.reshape(-1), intervals.far.reshape(-1)
    n_s = intervals.n_s.reshape(-1)
    values = depth.data.reshape(-1).astype(np.float64)
    hit = hit_mask(depth, cam).reshape(-1)
    active = np.flatnonzero(rays.mask.reshape(-1))

    # one task per chunk of rays sharing a sample count; jitter is drawn
    # up front in task order
    rng = np.random.default_rng([cfg.seed, frame]) if cfg.jitter else None
    tasks, targets = [], []
    for count in np.unique(n_s[active]):
        group = active[n_s[active] == count]
        offsets = rng.random((group.size, count - 1)) if rng is not None else None
        for start in range(0, group.size, cfg.chunk_size):
            idx = group[start:start + cfg.chunk_size]
            chunk_offsets = None
            if offsets is not None:
                chunk_offsets = offsets[start:start + cfg.chunk_size]
            tasks.append(
                (xs[idx], ys[idx], near[idx], far[idx], hit[idx], values[idx],
                 int(count), chunk_offsets)
            )
            targets.append(idx)

    # timed stage: deformation and compositing only
    stub = DeformStub(cfg.deform_work_units)
    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=cfg.n_threads) as pool:
        results = list(
            pool.map(
                lambda task: _render_chunk(
                    task, scene, frame, stub, cfg.density_threshold
                ),
                tasks,
            )
        )
    seconds = time.perf_counter() - started

    # scatter chunk results back to their pixels
    checksum = 0.0
    for idx, (rgb, weight, c_near, c_far, chunk_sum) in zip(targets, results):
        image[idx] = rgb
        weights[idx] = weight
        content_near[idx] = np.where(np.isfinite(c_near), c_near, np.nan)
        content_far[idx] = np.where(np.isfinite(c_far), c_far, np.nan)
        checksum += chunk_sum
    logger.debug("Rendered %d chunks in %.3f s", len(tasks), seconds)

    points = int(n_s[active].sum())
    return RenderOutput(
        image=image.reshape(height, width, 3),
        weights=ScalarMap(np.clip(weights, 0.0, 1.0).reshape(height, width)),
        points_sampled=points,
        points_deformed=points,
        rays_rendered=rays.count,
        content_near=content_near.reshape(height, width),
        content_far=content_far.reshape(height, width),
        seconds=seconds,
        checksum=checksum,
    )
