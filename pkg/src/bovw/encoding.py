"""Descriptor-to-word assignment and pooling into bag-of-words vectors.

Soft assignment gives each point a Gaussian-kernel weight per word,
normalized to sum to 1; hard assignment is a one-hot row at the nearest
word. Pooling collapses the per-point rows to one k-vector, either by
elementwise maximum or by averaging (the classic normalized histogram).
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .codebook import Codebook
from .features import DescriptorSet

BOW_MAGIC = b"BVWB"
BOW_VERSION = 1

# points per streamed chunk; bounds working memory at CHUNK x k independent
# of how many grid points an image has
_CHUNK = 512

ASSIGNMENTS = ("soft", "hard")
POOLINGS = ("max", "average")


@dataclass(frozen=True)
class EncodingParams:
    sigma: float = 60.0
    assignment: str = "soft"
    pooling: str = "max"
    l2_normalize: bool = False

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.assignment not in ASSIGNMENTS:
            raise ValueError(f"assignment must be one of {ASSIGNMENTS}")
        if self.pooling not in POOLINGS:
            raise ValueError(f"pooling must be one of {POOLINGS}")


@dataclass
class BowVector:
    """Pooled k-dimensional representation of one image."""

    h: np.ndarray  # (k,) float64
    image: str
    codebook_id: str

    def __len__(self) -> int:
        return len(self.h)


def soft_assign(profile: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian-kernel soft assignment of one point across all words.

    alphas[j] = exp(-d_j^2 / (2 sigma^2)) normalized to sum to 1. The
    Gaussian normalization constant cancels in the ratio and is omitted;
    the minimum squared distance is subtracted before exponentiation so the
    largest term is exp(0) and the denominator can never underflow to zero.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d2 = np.asarray(profile, dtype=np.float64) ** 2
    shifted = d2 - d2.min()
    weights = np.exp(-shifted / (2.0 * sigma * sigma))
    return weights / weights.sum()


def hard_assign(profile: np.ndarray) -> np.ndarray:
    """One-hot row at the minimum distance; ties break to the lowest index."""
    profile = np.asarray(profile, dtype=np.float64)
    row = np.zeros(len(profile), dtype=np.float64)
    row[int(np.argmin(profile))] = 1.0
    return row


def max_pool(rows: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Elementwise maximum over assignment rows."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ValueError("need at least one assignment row")
    return rows.max(axis=0)


def average_pool(rows: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Arithmetic mean over assignment rows."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ValueError("need at least one assignment row")
    return rows.mean(axis=0)


def encode_image(ds: DescriptorSet, cb: Codebook, params: EncodingParams) -> BowVector:
    """Assign every grid point to the codebook and pool into one k-vector.

    Streams points in bounded chunks so the full N x k assignment matrix is
    never materialized; max and mean accumulation are both order-independent.
    """
    if ds.descriptors.shape[1] != cb.words.shape[1]:
        raise ValueError("descriptor dims do not match codebook dims")
    words = cb.words.astype(np.float64)
    w_sq = np.einsum("kc,kc->k", words, words)
    n = len(ds)
    acc = np.zeros(cb.k, dtype=np.float64)
    inv_two_sigma_sq = 1.0 / (2.0 * params.sigma * params.sigma)

    for start in range(0, n, _CHUNK):
        pts = ds.descriptors[start : start + _CHUNK].astype(np.float64)
        p_sq = np.einsum("bc,bc->b", pts, pts)
        # byte-valued inputs keep every term integer-exact in float64, so the
        # expanded form equals the direct sum of squared differences
        d2 = p_sq[:, np.newaxis] + w_sq[np.newaxis, :] - 2.0 * (pts @ words.T)
        np.maximum(d2, 0.0, out=d2)
        if params.assignment == "soft":
            rows = np.exp(-(d2 - d2.min(axis=1, keepdims=True)) * inv_two_sigma_sq)
            rows /= rows.sum(axis=1, keepdims=True)
        else:
            rows = np.zeros_like(d2)
            rows[np.arange(len(d2)), np.argmin(d2, axis=1)] = 1.0
        if params.pooling == "max":
            np.maximum(acc, rows.max(axis=0), out=acc)
        else:
            acc += rows.sum(axis=0)

    if params.pooling == "average":
        acc /= n
    if params.l2_normalize:
        norm = np.linalg.norm(acc)
        if norm > 0:
            acc /= norm
    return BowVector(h=acc, image=ds.source_image, codebook_id=cb.codebook_id)


def save_bows(bows: Sequence[BowVector], path: str | Path) -> None:
    """Binary batch file: header (magic, version, count, k, codebook id)
    then count rows of k little-endian float64 values, in input order."""
    if not bows:
        raise ValueError("no vectors to save")
    k = len(bows[0])
    codebook_id = bows[0].codebook_id
    for b in bows:
        if len(b) != k or b.codebook_id != codebook_id:
            raise ValueError("all vectors in a batch must share k and codebook")
    raw = codebook_id.encode("utf-8")
    header = BOW_MAGIC + struct.pack("<4I", BOW_VERSION, len(bows), k, len(raw)) + raw
    body = b"".join(np.ascontiguousarray(b.h, dtype="<f8").tobytes() for b in bows)
    Path(path).write_bytes(header + body)


def load_bows(path: str | Path) -> tuple[np.ndarray, str]:
    """Read a batch file back as ((count, k) array, codebook id)."""
    data = Path(path).read_bytes()
    if data[:4] != BOW_MAGIC:
        raise ValueError(f"{path}: not a bag-of-words batch file")
    version, count, k, id_len = struct.unpack_from("<4I", data, 4)
    if version != BOW_VERSION:
        raise ValueError(f"{path}: unsupported batch version {version}")
    pos = 20
    codebook_id = data[pos : pos + id_len].decode("utf-8")
    pos += id_len
    expected = pos + count * k * 8
    if len(data) != expected:
        raise ValueError(f"{path}: truncated batch ({len(data)} bytes, expected {expected})")
    mat = np.frombuffer(data, dtype="<f8", count=count * k, offset=pos).reshape(count, k)
    return mat.copy(), codebook_id


def export_bows_csv(bows: Sequence[BowVector], path: str | Path) -> None:
    """Plain CSV (image id, k values) for eyeballing encodings."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for b in bows:
            writer.writerow([b.image] + [repr(float(v)) for v in b.h])
