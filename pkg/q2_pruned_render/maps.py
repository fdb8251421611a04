# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True, eq=False)
class ScalarMap:
    """Dense H x W grid of float32 scalars stored row-major.

    Houses silhouettes, depth maps, weight maps and candidate maps.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32)
        if data.ndim != 2:
            raise ValueError(
                f"A scalar map must be two-dimensional, got shape {data.shape}."
            )
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("A scalar map needs at least one row and one column.")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, height, width):
        return cls(np.zeros((height, width), dtype=np.float32))

    @classmethod
    def full(cls, height, width, value):
        return cls(np.full((height, width), value, dtype=np.float32))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def flat(self) -> np.ndarray:
        """Row-major values, length width * height."""
        return self.data.reshape(-1)

    def __eq__(self, other):
        if not isinstance(other, ScalarMap):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"ScalarMap({self.height}x{self.width})"


@dataclass(frozen=True)
class BoxKernelSpec:
    """Square averaging kernel of odd size k filled with 1/k^2."""

    size: int

    def __post_init__(self):
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError(
                f"Box kernel size must be a positive odd number, got {self.size}."
            )

    @property
    def radius(self) -> int:
        return (self.size - 1) // 2

    @property
    def normalization(self) -> float:
        return 1.0 / (self.size * self.size)


def _check_same_shape(a: ScalarMap, b: ScalarMap):
    if a.shape != b.shape:
        raise ValueError(
            f"Map dimensions do not match: {a.height}x{a.width} vs "
            f"{b.height}x{b.width}."
        )


# Sum over a centred window of 2*radius+1 along one axis, zero padded.
# Each output is a direct sum of k terms, so runs of zeros stay exactly zero.
def _window_reduce(values, radius, axis, reducer, fill):
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(values, pad, mode="constant", constant_values=fill)
    windows = sliding_window_view(padded, 2 * radius + 1, axis=axis)
    return reducer(windows, axis=-1)


def max_kernel_size(height: int, width: int) -> int:
    """Largest box kernel that still changes a height x width map."""
    return 2 * max(height, width) + 1


def box_convolve(scalar_map: ScalarMap, kernel: BoxKernelSpec) -> ScalarMap:
    """Mean over the k x k neighbourhood of every pixel, zero padded.

    Computed as two separable window sums in float64 and scaled once by 1/k^2,
    which agrees with the direct k^2 definition to within 1e-12.
    """
    limit = max_kernel_size(scalar_map.height, scalar_map.width)
    if kernel.size > limit:
        raise ValueError(
            f"Kernel size {kernel.size} exceeds the largest meaningful size "
            f"{limit} for a {scalar_map.height}x{scalar_map.width} map."
        )
    if kernel.size == 1:
        return ScalarMap(scalar_map.data)

    values = scalar_map.data.astype(np.float64)
    rows = _window_reduce(values, kernel.radius, 0, np.sum, 0.0)
    sums = _window_reduce(rows, kernel.radius, 1, np.sum, 0.0)
    return ScalarMap(sums * kernel.normalization)


def binarize(scalar_map: ScalarMap, threshold: float = 0.0) -> ScalarMap:
    """1 where the value is strictly above ``threshold``, else 0."""
    return ScalarMap((scalar_map.data > threshold).astype(np.float32))


def binary_dilate(scalar_map: ScalarMap, radius: int) -> ScalarMap:
    """Chebyshev dilation of the positive support by ``radius`` pixels."""
    if radius < 0:
        raise ValueError(f"Dilation radius must be non-negative, got {radius}.")
    mask = scalar_map.data > 0
    if radius > 0:
        mask = _window_reduce(mask, radius, 0, np.any, False)
        mask = _window_reduce(mask, radius, 1, np.any, False)
    return ScalarMap(mask.astype(np.float32))


def map_add(a: ScalarMap, b: ScalarMap) -> ScalarMap:
    """Pixelwise sum; values above 1 are kept as they are."""
    _check_same_shape(a, b)
    total = a.data.astype(np.float64) + b.data.astype(np.float64)
    return ScalarMap(total)


def support_violations(inner: ScalarMap, outer: ScalarMap) -> int:
    """Pixels that are positive in ``inner`` but not in ``outer``."""
    _check_same_shape(inner, outer)
    return int(np.count_nonzero((inner.data > 0) & ~(outer.data > 0)))
