# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import os

import numpy as np

from q2_pruned_render.maps import ScalarMap

EPSM_MAGIC = b"EPSM"
EPSM_DTYPE_F32 = 0
EPSM_HEADER = np.dtype(
    [("magic", "S4"), ("width", "<u4"), ("height", "<u4"), ("dtype", "<u4")]
)


def create_directory(path):
    """
    Create a directory at the specified path. If the directory already exists,
    no action is taken.

    Args:
    path (str): The path where the directory is to be created.

    Returns:
    bool: True if the directory was created, False if it already existed.
    """

    try:
        os.makedirs(path)
        return True
    except FileExistsError:
        return False


def encode_epsm(scalar_map: ScalarMap) -> bytes:
    """Serialize a map as a 16-byte little-endian header plus f32 payload."""
    header = np.array(
        [(EPSM_MAGIC, scalar_map.width, scalar_map.height, EPSM_DTYPE_F32)],
        dtype=EPSM_HEADER,
    )
    payload = scalar_map.data.astype("<f4", copy=False)
    return header.tobytes() + payload.tobytes(order="C")


def decode_epsm(buffer: bytes) -> ScalarMap:
    """Parse an EPSM container, checking magic, dtype tag and payload size."""
    if len(buffer) < EPSM_HEADER.itemsize:
        raise ValueError("EPSM container is shorter than its 16-byte header.")
    header = np.frombuffer(buffer, dtype=EPSM_HEADER, count=1)[0]
    if header["magic"] != EPSM_MAGIC:
        raise ValueError(f"Bad EPSM magic {header['magic']!r}.")
    if header["dtype"] != EPSM_DTYPE_F32:
        raise ValueError(f"Unsupported EPSM dtype tag {int(header['dtype'])}.")
    width, height = int(header["width"]), int(header["height"])
    expected = EPSM_HEADER.itemsize + 4 * width * height
    if len(buffer) != expected:
        raise ValueError(
            f"EPSM payload holds {len(buffer) - EPSM_HEADER.itemsize} bytes, "
            f"expected {4 * width * height} for a {height}x{width} map."
        )
    payload = np.frombuffer(buffer, dtype="<f4", offset=EPSM_HEADER.itemsize)
    return ScalarMap(payload.reshape(height, width))


def write_epsm(scalar_map: ScalarMap, fp):
    with open(fp, "wb") as fh:
        fh.write(encode_epsm(scalar_map))


def read_epsm(fp) -> ScalarMap:
    with open(fp, "rb") as fh:
        return decode_epsm(fh.read())


# Map [0, 1] linearly onto [0, 255], clamping out-of-range values
def _to_bytes(values):
    scaled = np.rint(np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0) * 255)
    return scaled.astype(np.uint8)


def encode_pgm(scalar_map: ScalarMap) -> bytes:
    header = f"P5\n{scalar_map.width} {scalar_map.height}\n255\n".encode("ascii")
    return header + _to_bytes(scalar_map.data).tobytes()


def encode_ppm(image: np.ndarray) -> bytes:
    """Binary 8-bit pixmap (P6) of an H x W x 3 image in [0, 1]."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"Expected an H x W x 3 image, got shape {image.shape}.")
    height, width = image.shape[:2]
    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    return header + _to_bytes(image).tobytes()


def write_pgm(scalar_map: ScalarMap, fp):
    with open(fp, "wb") as fh:
        fh.write(encode_pgm(scalar_map))


def write_ppm(image: np.ndarray, fp):
    with open(fp, "wb") as fh:
        fh.write(encode_ppm(image))
