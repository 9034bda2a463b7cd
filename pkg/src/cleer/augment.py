"""Context-view generation: random crop pairs on raw windows and Bernoulli
timestamp masking on latent vectors.

Crop indices are 1-based inclusive and satisfy the ordering chain
0 < a1 <= a2 <= b1 <= b2 <= T, so the overlap [a2, b1] is never empty.
Samplers take an explicit numpy Generator; use one per worker.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import DiffTensor, mul


@dataclass(frozen=True)
class CropPair:
    """Two crop intervals [a1, b1] and [a2, b2] with guaranteed overlap."""
    a1: int
    b1: int
    a2: int
    b2: int

    def __post_init__(self):
        if not (0 < self.a1 <= self.a2 <= self.b1 <= self.b2):
            raise ConfigError(f"crop ordering violated: {self}")

    @property
    def view1(self):
        return (self.a1, self.b1)

    @property
    def view2(self):
        return (self.a2, self.b2)

    @property
    def overlap(self):
        return (self.a2, self.b1)

    @property
    def overlap_length(self):
        return self.b1 - self.a2 + 1

    def overlap_offsets(self):
        """0-based start of the overlap inside view 1 and view 2."""
        return self.a2 - self.a1, 0


@dataclass(frozen=True)
class MaskVector:
    """Binary keep/mask pattern over a latent sequence (1 = keep)."""
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.int8)
        if bits.ndim != 1:
            raise ShapeError(f"MaskVector expects a 1-d bit array, got {bits.shape}")
        object.__setattr__(self, "bits", bits)

    def __len__(self):
        return self.bits.shape[0]

    @property
    def masked_fraction(self):
        return 1.0 - float(self.bits.mean())


def sample_crop_pair(T, rng):
    """Draw a CropPair over 1..T. Sampling order a2, b1, a1, b2 makes every
    draw feasible without rejection."""
    if T < 1:
        raise ConfigError(f"sample_crop_pair: T must be >= 1, got {T}")
    a2 = int(rng.integers(1, T + 1))
    b1 = int(rng.integers(a2, T + 1))
    a1 = int(rng.integers(1, a2 + 1))
    b2 = int(rng.integers(b1, T + 1))
    return CropPair(a1=a1, b1=b1, a2=a2, b2=b2)


def apply_crop(segment, interval):
    """Slice timestamps [a, b] (1-based inclusive) along the time axis.

    segment: array shaped (..., T, C). Returns the contiguous view; combine
    with CropPair.overlap_offsets() to index-align the two views' overlap.
    """
    segment = np.asarray(segment)
    a, b = interval
    T = segment.shape[-2]
    if not (1 <= a <= b <= T):
        raise IndexError(
            f"apply_crop: interval [{a}, {b}] outside [1, {T}]")
    return segment[..., a - 1:b, :]


def sample_mask(L, p, rng):
    """Bernoulli mask over L positions; each position is masked (bit=0)
    independently with probability p."""
    if L < 1:
        raise ConfigError(f"sample_mask: L must be >= 1, got {L}")
    bits = (rng.random(L) >= p).astype(np.int8)
    return MaskVector(bits=bits)


def sample_mask_batch(B, L, p, rng):
    """Independent masks for every batch item, as a (B, L) bit array."""
    if L < 1 or B < 1:
        raise ConfigError(f"sample_mask_batch: B and L must be >= 1, got {B}, {L}")
    return (rng.random((B, L)) >= p).astype(np.int8)


def apply_mask(z, mask):
    """Zero the latent vectors at masked timestamps.

    z: DiffTensor (B, L, D); mask: MaskVector, (L,) or (B, L) bit array.
    Gradients flow only through unmasked positions.
    """
    if not isinstance(z, DiffTensor):
        z = DiffTensor(z)
    if isinstance(mask, MaskVector):
        bits = mask.bits
    else:
        bits = np.asarray(mask)
    B, L = z.shape[0], z.shape[1]
    if bits.ndim == 1:
        if bits.shape[0] != L:
            raise ShapeError(
                f"apply_mask: mask length {bits.shape[0]} != latent length {L}")
        factor = bits.reshape(1, L, 1)
    elif bits.ndim == 2:
        if bits.shape != (B, L):
            raise ShapeError(
                f"apply_mask: mask shape {bits.shape} != latent batch shape {(B, L)}")
        factor = bits.reshape(B, L, 1)
    else:
        raise ShapeError(f"apply_mask: unsupported mask shape {bits.shape}")
    return mul(z, DiffTensor(factor.astype(z.dtype)))
