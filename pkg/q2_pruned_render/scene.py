# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, Union

import numpy as np

from q2_pruned_render.maps import ScalarMap

RGB = Tuple[float, float, float]
Vec3 = Tuple[float, float, float]

SURFACE_TOLERANCE = 1e-4


@dataclass(frozen=True)
class CameraSpec:
    """Orthographic camera looking down +z, one ray per pixel centre.

    Row 0 is the top of the image (largest y); column 0 is the smallest x.
    """

    width: int = 256
    height: int = 256
    x_min: float = -2.0
    x_max: float = 2.0
    y_min: float = -2.0
    y_max: float = 2.0
    t_near: float = 2.0
    t_far: float = 10.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("Camera width and height must be at least one pixel.")
        if not self.x_min < self.x_max or not self.y_min < self.y_max:
            raise ValueError("Camera frustum extents must be increasing.")
        if not 0 <= self.t_near < self.t_far:
            raise ValueError(
                f"Camera depth range must satisfy 0 <= t_near < t_far, got "
                f"[{self.t_near}, {self.t_far}]."
            )

    @classmethod
    def square(cls, size=256, extent=2.0, t_near=2.0, t_far=10.0):
        return cls(size, size, -extent, extent, -extent, extent, t_near, t_far)

    @property
    def depth_range(self) -> float:
        return self.t_far - self.t_near

    @property
    def pixel_size(self) -> float:
        """Largest world extent of a pixel along either axis."""
        return max(
            (self.x_max - self.x_min) / self.width,
            (self.y_max - self.y_min) / self.height,
        )

    def pixel_centers(self):
        """World x of every column and world y of every row."""
        dx = (self.x_max - self.x_min) / self.width
        dy = (self.y_max - self.y_min) / self.height
        xs = self.x_min + (np.arange(self.width) + 0.5) * dx
        ys = self.y_max - (np.arange(self.height) + 0.5) * dy
        return xs, ys

    def ray_grid(self):
        """H x W arrays of ray-origin x and y."""
        xs, ys = self.pixel_centers()
        return np.meshgrid(xs, ys)


@dataclass(frozen=True)
class Sphere:
    center: Vec3
    radius: float
    albedo: RGB = (0.9, 0.75, 0.65)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"Sphere radius must be positive, got {self.radius}.")

    def translated(self, offset) -> "Sphere":
        return replace(self, center=tuple(np.add(self.center, offset)))

    def depth_extent(self):
        return self.center[2] - self.radius, self.center[2] + self.radius

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(points - np.asarray(self.center), axis=-1) - self.radius

    # Front intersection of +z rays through (x, y); inf where the ray misses
    def ray_depth(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        cx, cy, cz = self.center
        lateral = (xs - cx) ** 2 + (ys - cy) ** 2
        inside = lateral <= self.radius**2
        half = np.sqrt(np.where(inside, self.radius**2 - lateral, 0.0))
        return np.where(inside, cz - half, np.inf)


@dataclass(frozen=True)
class Capsule:
    start: Vec3
    end: Vec3
    radius: float
    albedo: RGB = (0.9, 0.75, 0.65)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"Capsule radius must be positive, got {self.radius}.")
        if np.allclose(self.start, self.end):
            raise ValueError("Capsule end points must differ; use a Sphere instead.")

    def translated(self, offset) -> "Capsule":
        return replace(
            self,
            start=tuple(np.add(self.start, offset)),
            end=tuple(np.add(self.end, offset)),
        )

    def depth_extent(self):
        zs = (self.start[2], self.end[2])
        return min(zs) - self.radius, max(zs) + self.radius

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        a = np.asarray(self.start)
        ba = np.asarray(self.end) - a
        pa = points - a
        h = np.clip((pa @ ba) / (ba @ ba), 0.0, 1.0)
        return np.linalg.norm(pa - h[..., None] * ba, axis=-1) - self.radius

    # A capsule is the union of its side cylinder and two end spheres, so the
    # first hit is the nearest first hit among those three pieces
    def ray_depth(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        a = np.asarray(self.start, dtype=np.float64)
        ba = np.asarray(self.end, dtype=np.float64) - a
        length = np.linalg.norm(ba)
        u = ba / length

        depth = np.minimum(
            Sphere(self.start, self.radius).ray_depth(xs, ys),
            Sphere(self.end, self.radius).ray_depth(xs, ys),
        )

        vv = 1.0 - u[2] ** 2
        if vv < 1e-12:
            return depth

        # Ray p(t) = (x, y, 0) + t * z; w is the origin offset orthogonal to u
        oa = np.stack([xs - a[0], ys - a[1], np.full_like(xs, -a[2])], axis=-1)
        w = oa - (oa @ u)[..., None] * u
        v = np.array([0.0, 0.0, 1.0]) - u[2] * u
        wv = w @ v
        disc = wv**2 - vv * ((w * w).sum(axis=-1) - self.radius**2)
        hit = disc >= 0
        t = (-wv - np.sqrt(np.where(hit, disc, 0.0))) / vv
        along = oa @ u + t * u[2]
        hit &= (along >= 0) & (along <= length)
        return np.minimum(depth, np.where(hit, t, np.inf))


Primitive = Union[Sphere, Capsule]


@dataclass(frozen=True)
class ProxyBody:
    """Union of spheres and capsules standing in for the refined mesh."""

    primitives: Tuple[Primitive, ...]

    def translated(self, offset) -> "ProxyBody":
        return ProxyBody(tuple(p.translated(offset) for p in self.primitives))

    def depth_extent(self):
        if not self.primitives:
            return None
        extents = [p.depth_extent() for p in self.primitives]
        return min(e[0] for e in extents), max(e[1] for e in extents)

    def distances(self, points: np.ndarray) -> np.ndarray:
        """Signed distance to every primitive, shape (n_primitives, ...)."""
        return np.stack([p.signed_distance(points) for p in self.primitives])

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        if not self.primitives:
            return np.full(np.shape(points)[:-1], np.inf)
        return self.distances(points).min(axis=0)


@dataclass(frozen=True)
class ProtrusionLobe:
    """Gaussian blob of cloth density placed away from the body."""

    center: Vec3
    radius: float
    sigma_max: float


@dataclass(frozen=True)
class ClothField:
    shell_offset: float = 0.08
    falloff: float = 0.03
    sigma_max: float = 6.0
    albedo: RGB = (0.25, 0.35, 0.7)
    lobe: Optional[ProtrusionLobe] = None

    def __post_init__(self):
        if self.falloff <= 0:
            raise ValueError(f"Cloth falloff must be positive, got {self.falloff}.")
        if self.sigma_max < 0:
            raise ValueError("Cloth peak density must be non-negative.")

    @property
    def band(self) -> float:
        """Largest distance from the body surface that carries density."""
        return self.shell_offset + 3 * self.falloff

    def translated(self, offset) -> "ClothField":
        if self.lobe is None:
            return self
        return replace(
            self,
            lobe=replace(self.lobe, center=tuple(np.add(self.lobe.center, offset))),
        )

    def density(self, body_distance: np.ndarray, points: np.ndarray) -> np.ndarray:
        u = (body_distance - self.shell_offset) / self.falloff
        sigma = np.where(np.abs(u) <= 3.0, self.sigma_max * np.exp(-0.5 * u * u), 0.0)
        if self.lobe is not None:
            q = np.linalg.norm(points - np.asarray(self.lobe.center), axis=-1)
            q = q / self.lobe.radius
            sigma = sigma + np.where(
                q <= 3.0, self.lobe.sigma_max * np.exp(-0.5 * q * q), 0.0
            )
        return sigma


@dataclass(frozen=True)
class FrameSequence:
    """Per-frame rigid body offsets, frames indexed from 1."""

    offsets: Tuple[Tuple[float, float], ...] = ((0.0, 0.0),)
    pixel_size: float = 1.0

    def __post_init__(self):
        if not self.offsets:
            raise ValueError("A frame sequence needs at least one frame.")

    @classmethod
    def static(cls, frames=1, pixel_size=1.0):
        return cls(((0.0, 0.0),) * frames, pixel_size)

    @classmethod
    def sway(cls, frames, amplitude, period, pixel_size):
        """Sinusoidal side-to-side sway with a half-amplitude vertical bob.

        Offsets are snapped to whole pixels so that silhouettes move by exact
        pixel shifts between frames.
        """
        if frames < 1:
            raise ValueError(f"Frame count must be at least 1, got {frames}.")
        if period <= 0:
            raise ValueError(f"Sway period must be positive, got {period}.")
        offsets = []
        for t in range(frames):
            phase = 2 * math.pi * t / period
            dx = amplitude * math.sin(phase)
            dy = 0.5 * amplitude * math.sin(2 * phase)
            offsets.append(
                (
                    round(dx / pixel_size) * pixel_size,
                    round(dy / pixel_size) * pixel_size,
                )
            )
        return cls(tuple(offsets), pixel_size)

    @property
    def frames(self) -> int:
        return len(self.offsets)

    def offset(self, frame: int):
        if not 1 <= frame <= self.frames:
            raise ValueError(f"Frame {frame} is outside 1..{self.frames}.")
        dx, dy = self.offsets[frame - 1]
        return (dx, dy, 0.0)

    @property
    def max_motion_px(self) -> int:
        """Largest Chebyshev pixel shift between consecutive frames."""
        steps = [
            max(abs(b[0] - a[0]), abs(b[1] - a[1])) / self.pixel_size
            for a, b in zip(self.offsets, self.offsets[1:])
        ]
        return int(math.ceil(max(steps) - 1e-9)) if steps else 0


@dataclass(frozen=True)
class Scene:
    body: ProxyBody
    cloth: ClothField = field(default_factory=ClothField)
    frames: FrameSequence = field(default_factory=FrameSequence)
    background: RGB = (1.0, 1.0, 1.0)

    def posed(self, frame: int) -> "Scene":
        """The scene with the frame's rigid offset applied, as frame 1."""
        offset = self.frames.offset(frame)
        return Scene(
            self.body.translated(offset),
            self.cloth.translated(offset),
            FrameSequence(pixel_size=self.frames.pixel_size),
            self.background,
        )


def check_depth_range(body: ProxyBody, cam: CameraSpec):
    extent = body.depth_extent()
    if extent is not None and not (cam.t_near < extent[0] and extent[1] < cam.t_far):
        raise ValueError(
            f"Proxy body depth range [{extent[0]}, {extent[1]}] must lie strictly "
            f"inside the camera range ({cam.t_near}, {cam.t_far})."
        )


def rasterize_depth(scene: Scene, cam: CameraSpec, frame: int = 1) -> ScalarMap:
    """Nearest ray-primitive depth per pixel; misses carry t_far exactly."""
    body = scene.posed(frame).body
    check_depth_range(body, cam)
    xs, ys = cam.ray_grid()
    depth = np.full(xs.shape, np.inf)
    for primitive in body.primitives:
        depth = np.minimum(depth, primitive.ray_depth(xs, ys))
    return ScalarMap(np.where(np.isfinite(depth), depth, cam.t_far))


def rasterize_silhouette(scene: Scene, cam: CameraSpec, frame: int = 1) -> ScalarMap:
    return silhouette_from_depth(rasterize_depth(scene, cam, frame), cam)


def hit_mask(depth: ScalarMap, cam: CameraSpec) -> np.ndarray:
    """True where the ray meets the body.

    The sentinel is compared at the float32 precision the depth map stores.
    """
    return depth.data < np.float32(cam.t_far)


def silhouette_from_depth(depth: ScalarMap, cam: CameraSpec) -> ScalarMap:
    return ScalarMap(hit_mask(depth, cam).astype(np.float32))


def query_field(scene: Scene, points, frame: int = 1):
    """Cloth density and colour at world points of shape (..., 3).

    Colour fades from the cloth albedo to the scene background as density
    drops, so empty space renders as background.
    """
    posed = scene.posed(frame)
    points = np.asarray(points, dtype=np.float64)
    if not np.isfinite(points).all():
        raise FloatingPointError("Field queried at non-finite positions.")
    sigma = posed.cloth.density(posed.body.signed_distance(points), points)
    if np.isnan(sigma).any():
        raise FloatingPointError("Cloth field produced a NaN density.")
    peak = max(
        posed.cloth.sigma_max,
        posed.cloth.lobe.sigma_max if posed.cloth.lobe is not None else 0.0,
    )
    mix = np.clip(sigma / peak, 0.0, 1.0)[..., None] if peak > 0 else 0.0
    background = np.asarray(scene.background)
    color = background + (np.asarray(posed.cloth.albedo) - background) * mix
    color = np.broadcast_to(color, points.shape)
    return sigma, color


def surface_color(scene: Scene, points, frame: int = 1) -> np.ndarray:
    """Albedo of the nearest primitive for points lying on the body surface.

    Ties go to the lower-indexed primitive.
    """
    posed = scene.posed(frame)
    points = np.asarray(points, dtype=np.float64)
    if not posed.body.primitives:
        raise ValueError("The scene has no body surface to colour.")
    distances = np.abs(posed.body.distances(points))
    nearest = distances.argmin(axis=0)
    off_surface = distances.min(axis=0) > SURFACE_TOLERANCE
    if np.any(off_surface):
        raise ValueError(
            f"{int(np.count_nonzero(off_surface))} point(s) lie farther than "
            f"{SURFACE_TOLERANCE} from every body surface."
        )
    albedos = np.array([p.albedo for p in posed.body.primitives], dtype=np.float64)
    return albedos[nearest]


def default_body() -> ProxyBody:
    skin = (0.93, 0.78, 0.66)
    return ProxyBody(
        (
            Sphere((0.0, 1.05, 3.95), 0.17, skin),
            Capsule((0.0, 0.55, 4.0), (0.0, -0.15, 4.0), 0.2, (0.85, 0.7, 0.6)),
            Capsule((-0.3, 0.6, 4.0), (-0.65, -0.05, 3.9), 0.07, skin),
            Capsule((0.3, 0.6, 4.0), (0.62, 0.0, 4.1), 0.07, skin),
            Capsule((-0.12, -0.3, 4.0), (-0.18, -1.1, 4.05), 0.09, (0.4, 0.3, 0.25)),
            Capsule((0.12, -0.3, 4.0), (0.2, -1.1, 3.95), 0.09, (0.4, 0.3, 0.25)),
        )
    )


def default_scene(
    cam: CameraSpec = None,
    frames: int = 30,
    amplitude: float = 0.15,
    period: float = 30.0,
    cloth: ClothField = None,
    background: RGB = (1.0, 1.0, 1.0),
) -> Scene:
    """Stick-figure body in a cloth shell, swaying across ``frames`` frames."""
    cam = cam or CameraSpec()
    return Scene(
        default_body(),
        cloth or ClothField(),
        FrameSequence.sway(frames, amplitude, period, cam.pixel_size),
        background,
    )


def protrusion_scene(
    cam: CameraSpec = None,
    cloth: ClothField = None,
    background: RGB = (1.0, 1.0, 1.0),
) -> Scene:
    """Two bodies at different depths with a cloth lobe bridging the gap.

    The lobe hangs off the near right-hand body and crosses the vertical
    centre line into image columns whose only surface is the far left-hand
    body, outside the dilated silhouette.
    """
    cam = cam or CameraSpec()
    cloth = cloth or ClothField()
    body = ProxyBody(
        (
            Capsule((-0.75, 0.8, 6.0), (-0.75, -0.8, 6.0), 0.25, (0.85, 0.7, 0.6)),
            Capsule((0.7, 0.6, 4.0), (0.7, -0.6, 4.0), 0.2, (0.93, 0.78, 0.66)),
        )
    )
    lobe = ProtrusionLobe((-0.25, 0.0, 4.0), 0.12, 10.0)
    return Scene(
        body,
        replace(cloth, lobe=lobe),
        FrameSequence.static(1, cam.pixel_size),
        background,
    )


SCENE_PRESETS = {
    "default": default_scene,
    "protrusion": protrusion_scene,
}
