"""Dense-grid sampling and upright SIFT descriptors.

Descriptors are 128-dimensional gradient-orientation histograms (4x4 spatial
cells x 8 orientation bins) computed on fixed-size patches centered on a
regular grid, then byte-quantized to 0..255. No orientation assignment and
no scale pyramid: one patch size, grid stride in pixels.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .corpus import Image

DESCRIPTOR_DIMS = 128
N_SPATIAL_CELLS = 4  # per axis
N_ORIENT_BINS = 8
CLAMP_THRESHOLD = 0.2
BYTE_SCALE = 512.0

CACHE_MAGIC = b"BVWD"
CACHE_VERSION = 1


@dataclass(frozen=True)
class GridParams:
    """Dense sampling grid: stride between patch centers and patch size."""

    stride: int = 6
    patch_size: int = 16

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.patch_size < 4 or self.patch_size % 4 != 0:
            raise ValueError("patch_size must be a positive multiple of 4")


class Keypoint(NamedTuple):
    x: int
    y: int


@dataclass
class DescriptorSet:
    """Per-image grid keypoints with parallel 128-d byte descriptors."""

    keypoints: np.ndarray  # (N, 2) int32, columns (x, y)
    descriptors: np.ndarray  # (N, 128) uint8
    source_image: str

    def __post_init__(self) -> None:
        if len(self.keypoints) != len(self.descriptors):
            raise ValueError("keypoints and descriptors must be parallel")
        if len(self.keypoints) < 1:
            raise ValueError("descriptor set must contain at least one point")
        if self.descriptors.shape[1] != DESCRIPTOR_DIMS:
            raise ValueError(f"descriptors must have {DESCRIPTOR_DIMS} dims")

    def __len__(self) -> int:
        return len(self.keypoints)


def dense_grid(width: int, height: int, params: GridParams) -> list[Keypoint]:
    """Patch centers on a regular grid, row-major.

    A patch centered at (x, y) covers pixels [x-h, x+h-1] x [y-h, y+h-1]
    with h = patch_size/2; centers start at (h, h) and advance by the stride
    while the patch still fits.
    """
    h = params.patch_size // 2
    if width < params.patch_size or height < params.patch_size:
        raise ValueError(
            f"image {width}x{height} smaller than one {params.patch_size}-pixel patch"
        )
    xs = range(h, width - h + 1, params.stride)
    ys = range(h, height - h + 1, params.stride)
    return [Keypoint(x, y) for y in ys for x in xs]


def sift_descriptor(image: Image, kp: Keypoint, params: GridParams) -> np.ndarray:
    """Upright SIFT descriptor of the patch centered at ``kp``.

    Returns a (128,) uint8 vector; a constant-intensity patch yields all
    zeros (normalization is skipped when the histogram norm is zero).
    """
    h = params.patch_size // 2
    if not (h <= kp.x <= image.width - h and h <= kp.y <= image.height - h):
        raise ValueError(f"patch at {kp} out of bounds for {image.width}x{image.height}")
    patch = image.pixels[kp.y - h : kp.y + h, kp.x - h : kp.x + h]
    return _describe_patches(patch[np.newaxis].astype(np.float64), params.patch_size)[0]


def extract_dense_sift(image: Image, params: GridParams, source: str = "") -> DescriptorSet:
    """One descriptor per dense-grid keypoint, in grid order."""
    kps = dense_grid(image.width, image.height, params)
    s = params.patch_size
    h = s // 2
    patches = np.empty((len(kps), s, s), dtype=np.float64)
    for i, (x, y) in enumerate(kps):
        patches[i] = image.pixels[y - h : y + h, x - h : x + h]
    descriptors = _describe_patches(patches, s)
    keypoints = np.array(kps, dtype=np.int32).reshape(len(kps), 2)
    return DescriptorSet(keypoints=keypoints, descriptors=descriptors, source_image=source)


def _describe_patches(patches: np.ndarray, patch_size: int) -> np.ndarray:
    """Vectorized descriptor computation for a (N, S, S) float patch stack.

    Pipeline per patch: central-difference gradients with replicated borders
    (the patch is self-contained; pixels outside it are never read), Gaussian
    magnitude weighting (sigma = S/2 about the patch center), trilinear
    soft-binning into 4x4 cells x 8 orientation bins, L2 normalization, 0.2
    clamp, renormalization and x512 byte quantization.
    """
    n, s = patches.shape[0], patch_size
    cs = s // N_SPATIAL_CELLS

    padded = np.pad(patches, ((0, 0), (1, 1), (1, 1)), mode="edge")
    gx = (padded[:, 1:-1, 2:] - padded[:, 1:-1, :-2]) / 2.0
    gy = (padded[:, 2:, 1:-1] - padded[:, :-2, 1:-1]) / 2.0
    mag = np.hypot(gx, gy)
    theta = np.arctan2(gy, gx)

    center = (s - 1) / 2.0
    sigma_w = s / 2.0
    coords = np.arange(s, dtype=np.float64)
    g1d = np.exp(-((coords - center) ** 2) / (2.0 * sigma_w**2))
    weighted = mag * (g1d[:, np.newaxis] * g1d[np.newaxis, :])

    # orientation soft-binning: each pixel splits its mass between the two
    # adjacent bins on the 8-bin circle
    bin_width = 2.0 * np.pi / N_ORIENT_BINS
    ob = np.mod(theta, 2.0 * np.pi) / bin_width
    o0 = np.floor(ob).astype(np.intp) % N_ORIENT_BINS
    fo = ob - np.floor(ob)
    orient = np.zeros((n, s, s, N_ORIENT_BINS), dtype=np.float64)
    np.put_along_axis(orient, o0[..., np.newaxis], (weighted * (1.0 - fo))[..., np.newaxis], axis=3)
    o1 = (o0 + 1) % N_ORIENT_BINS
    prev = np.take_along_axis(orient, o1[..., np.newaxis], axis=3)
    np.put_along_axis(orient, o1[..., np.newaxis], prev + (weighted * fo)[..., np.newaxis], axis=3)

    # spatial bilinear weights are data-independent: (S, 4) per axis
    cell_coord = (coords - (cs - 1) / 2.0) / cs
    i0 = np.floor(cell_coord).astype(np.intp)
    fr = cell_coord - i0
    axis_w = np.zeros((s, N_SPATIAL_CELLS), dtype=np.float64)
    for p in range(s):
        if 0 <= i0[p] < N_SPATIAL_CELLS:
            axis_w[p, i0[p]] += 1.0 - fr[p]
        if 0 <= i0[p] + 1 < N_SPATIAL_CELLS:
            axis_w[p, i0[p] + 1] += fr[p]
    # combined pixel -> cell map, (S*S, 16)
    spatial = (axis_w[:, np.newaxis, :, np.newaxis] * axis_w[np.newaxis, :, np.newaxis, :]).reshape(
        s * s, N_SPATIAL_CELLS * N_SPATIAL_CELLS
    )

    flat = orient.reshape(n, s * s, N_ORIENT_BINS)
    hist = np.einsum("npo,pc->nco", flat, spatial).reshape(n, DESCRIPTOR_DIMS)

    norms = np.linalg.norm(hist, axis=1, keepdims=True)
    nonzero = norms[:, 0] > 0.0
    out = np.zeros((n, DESCRIPTOR_DIMS), dtype=np.uint8)
    if np.any(nonzero):
        v = hist[nonzero] / norms[nonzero]
        np.minimum(v, CLAMP_THRESHOLD, out=v)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        q = np.clip(np.round(v * BYTE_SCALE), 0.0, 255.0)
        out[nonzero] = q.astype(np.uint8)
    return out


def cache_path(cache_dir: str | Path, image_path: str | Path, params: GridParams) -> Path:
    """Cache file location keyed by (absolute image path, grid params)."""
    key = f"{Path(image_path).resolve()}|stride={params.stride}|patch={params.patch_size}"
    digest = hashlib.sha1(key.encode("utf-8")).hexdigest()
    return Path(cache_dir) / f"{digest}.desc"


def save_descriptor_cache(path: str | Path, ds: DescriptorSet, params: GridParams) -> None:
    """Write a descriptor cache file.

    Layout (little-endian): magic, version, N, dims, stride, patch_size as
    u32 fields, then N records of (x: u32, y: u32, 128 descriptor bytes).
    """
    n = len(ds)
    header = CACHE_MAGIC + struct.pack(
        "<5I", CACHE_VERSION, n, DESCRIPTOR_DIMS, params.stride, params.patch_size
    )
    body = bytearray()
    for i in range(n):
        body += struct.pack("<2I", int(ds.keypoints[i, 0]), int(ds.keypoints[i, 1]))
        body += ds.descriptors[i].tobytes()
    Path(path).write_bytes(header + bytes(body))


def load_descriptor_cache(
    path: str | Path, params: GridParams, source_image: str = ""
) -> DescriptorSet:
    data = Path(path).read_bytes()
    if data[:4] != CACHE_MAGIC:
        raise ValueError(f"{path}: not a descriptor cache file")
    version, n, dims, stride, patch = struct.unpack_from("<5I", data, 4)
    if version != CACHE_VERSION:
        raise ValueError(f"{path}: unsupported cache version {version}")
    if dims != DESCRIPTOR_DIMS:
        raise ValueError(f"{path}: unexpected descriptor dims {dims}")
    if (stride, patch) != (params.stride, params.patch_size):
        raise ValueError(
            f"{path}: cache built with stride={stride}, patch={patch}; "
            f"requested stride={params.stride}, patch={params.patch_size}"
        )
    record = 8 + DESCRIPTOR_DIMS
    expected = 24 + n * record
    if len(data) != expected:
        raise ValueError(f"{path}: truncated cache ({len(data)} bytes, expected {expected})")
    keypoints = np.empty((n, 2), dtype=np.int32)
    descriptors = np.empty((n, DESCRIPTOR_DIMS), dtype=np.uint8)
    pos = 24
    for i in range(n):
        keypoints[i] = struct.unpack_from("<2I", data, pos)
        descriptors[i] = np.frombuffer(data, dtype=np.uint8, count=DESCRIPTOR_DIMS, offset=pos + 8)
        pos += record
    return DescriptorSet(keypoints=keypoints, descriptors=descriptors, source_image=source_image)
