"""Multi-scale pattern-count features over daily activity bit sequences.

For each scale s the extractor samples one window of length
``l_s = 2 + (s - 1) * z`` around every active day (so an all-zero day never
contributes), encodes each window as a binary pattern, and histograms the
patterns. Per-scale histograms are concatenated into one vector; the all-zero
pattern has no slot because every sampled window contains the active center.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ValidationError

MAX_WINDOW_LENGTH = 24  # memory guard: a block has 2**l - 1 slots


def window_length(scale: int, step: int) -> int:
    return 2 + (scale - 1) * step


def block_width(length: int) -> int:
    return (1 << length) - 1


@dataclass(frozen=True)
class RegularityConfig:
    max_scale: int = 4
    scale_step: int = 1
    min_count: int = 1
    normalize: bool = False

    def __post_init__(self):
        if self.max_scale < 1 or self.scale_step < 1 or self.min_count < 1:
            raise ValidationError("max_scale, scale_step and min_count must be >= 1")
        if self.window_lengths[-1] > MAX_WINDOW_LENGTH:
            raise ValidationError(
                f"largest window length {self.window_lengths[-1]} exceeds "
                f"{MAX_WINDOW_LENGTH}"
            )

    @property
    def window_lengths(self) -> list[int]:
        return [window_length(s, self.scale_step) for s in range(1, self.max_scale + 1)]

    @property
    def width(self) -> int:
        return sum(block_width(l) for l in self.window_lengths)

    def block_slices(self) -> list[slice]:
        slices, lo = [], 0
        for l in self.window_lengths:
            slices.append(slice(lo, lo + block_width(l)))
            lo += block_width(l)
        return slices


@dataclass(eq=False)
class RegularityVector:
    """Per-scale pattern-count blocks plus their concatenation."""

    blocks: list[np.ndarray]

    @property
    def concatenated(self) -> np.ndarray:
        return np.concatenate(self.blocks) if self.blocks else np.zeros(0)


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise ValidationError("sequence must be binary")
    return arr


def _pad(bits: np.ndarray, length: int) -> np.ndarray:
    # Window for center i spans [i - (l-1)//2, i + ceil((l-1)/2)]; for even l
    # this is the center-right convention. Zero-pad beyond the boundaries.
    left = (length - 1) // 2
    right = length - 1 - left
    return np.concatenate(
        [np.zeros(left, dtype=np.uint8), bits, np.zeros(right, dtype=np.uint8)]
    )


def sample_windows(bits, length: int) -> np.ndarray:
    """One window per nonzero bit, as an (n_ones, length) array in position
    order. All-zero input yields an empty array."""
    if length < 2:
        raise ValidationError("window length must be >= 2")
    arr = _as_bits(bits)
    centers = np.flatnonzero(arr)
    if centers.size == 0:
        return np.zeros((0, length), dtype=np.uint8)
    padded = _pad(arr, length)
    # Window starting at padded index i covers original center i.
    return sliding_window_view(padded, length)[centers].copy()


def _window_codes(bits: np.ndarray, length: int) -> np.ndarray:
    """Big-endian integer code of the window around every nonzero bit."""
    centers = np.flatnonzero(bits)
    if centers.size == 0:
        return np.zeros(0, dtype=np.int64)
    padded = _pad(bits, length)
    weights = (1 << np.arange(length - 1, -1, -1)).astype(np.int64)
    return sliding_window_view(padded, length)[centers] @ weights


def bag_counts(windows, length: int, min_count: int = 1) -> np.ndarray:
    """Histogram windows into a (2**length - 1)-slot count vector.

    Slot k holds the count of the pattern whose big-endian value is k + 1;
    counts below `min_count` are zeroed (the slot is kept so the vector
    dimension stays fixed).
    """
    windows = np.asarray(windows, dtype=np.int64)
    if windows.size == 0:
        return np.zeros(block_width(length), dtype=np.float64)
    if windows.ndim != 2 or windows.shape[1] != length:
        raise ValidationError("windows must be (n, length)")
    weights = (1 << np.arange(length - 1, -1, -1)).astype(np.int64)
    codes = windows @ weights
    if (codes == 0).any():
        raise ValidationError("windows must contain at least one active bit")
    counts = np.bincount(codes, minlength=(1 << length))[1:].astype(np.float64)
    counts[counts < min_count] = 0.0
    return counts


def extract_blocks(bits, cfg: RegularityConfig) -> RegularityVector:
    arr = _as_bits(bits)
    if arr.size == 0:
        raise ValidationError("bit sequence must be nonempty")
    n_ones = int(arr.sum())
    blocks = []
    for length in cfg.window_lengths:
        codes = _window_codes(arr, length)
        counts = np.bincount(codes, minlength=(1 << length))[1:].astype(np.float64)
        counts[counts < cfg.min_count] = 0.0
        if cfg.normalize:
            counts /= max(1, n_ones)
        blocks.append(counts)
    return RegularityVector(blocks)


def extract(bits, cfg: RegularityConfig) -> np.ndarray:
    """Concatenated multi-scale pattern counts for one binary sequence."""
    return extract_blocks(bits, cfg).concatenated


def extract_matrix(bit_rows: np.ndarray, cfg: RegularityConfig) -> np.ndarray:
    """Row-wise extract over a (n_students, days) bit matrix."""
    out = np.zeros((bit_rows.shape[0], cfg.width), dtype=np.float64)
    for i in range(bit_rows.shape[0]):
        out[i] = extract(bit_rows[i], cfg)
    return out


def feature_names(cfg: RegularityConfig, prefix: str) -> list[str]:
    names = []
    for s, length in enumerate(cfg.window_lengths, start=1):
        for code in range(1, 1 << length):
            names.append(f"{prefix}s{s}_p{code:0{length}b}")
    return names
