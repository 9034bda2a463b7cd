"""Recordings, windowed segmentation, the portable SEGD container, synthetic
dataset generation and stratified fold splitting.

Label convention is three classes {0, 1, 2} (negative/neutral/positive).
A SegmentSet is immutable in practice: nothing in the package mutates one
after construction, so it is safe to share across folds and workers.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigError, DataFormatError, EmptyInputError,
                     ShapeError, StratificationError)

N_CLASSES = 3

# 62-electrode layout of the extended 10-20 system, front to back.
MONTAGE_62 = (
    "FP1", "FPZ", "FP2", "AF3", "AF4",
    "F7", "F5", "F3", "F1", "FZ", "F2", "F4", "F6", "F8",
    "FT7", "FC5", "FC3", "FC1", "FCZ", "FC2", "FC4", "FC6", "FT8",
    "T7", "C5", "C3", "C1", "CZ", "C2", "C4", "C6", "T8",
    "TP7", "CP5", "CP3", "CP1", "CPZ", "CP2", "CP4", "CP6", "TP8",
    "P7", "P5", "P3", "P1", "PZ", "P2", "P4", "P6", "P8",
    "PO7", "PO5", "PO3", "POZ", "PO4", "PO6", "PO8",
    "CB1", "O1", "OZ", "O2", "CB2",
)


def default_channel_names(c):
    if c == len(MONTAGE_62):
        return list(MONTAGE_62)
    return [f"CH{i:02d}" for i in range(c)]


@dataclass
class Recording:
    """Raw multichannel signal with a per-sample or per-recording label."""
    signal: np.ndarray                      # (C, S)
    sample_rate_hz: float = 200.0
    labels: object = 0                      # int or int array (S,)
    subject_id: int = 0
    session_id: int = 0

    def __post_init__(self):
        self.signal = np.asarray(self.signal, dtype=np.float64)
        if self.signal.ndim != 2:
            raise ShapeError(f"Recording signal must be (C, S), got {self.signal.shape}")
        if self.sample_rate_hz <= 0:
            raise ConfigError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if np.isscalar(self.labels) or np.ndim(self.labels) == 0:
            self.labels = int(self.labels)
            lab_vals = np.array([self.labels])
        else:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.signal.shape[1],):
                raise ShapeError(
                    f"label stream shape {self.labels.shape} does not match"
                    f" sample count {self.signal.shape[1]}")
            lab_vals = self.labels
        if lab_vals.min() < 0 or lab_vals.max() >= N_CLASSES:
            raise ConfigError(f"labels must lie in [0, {N_CLASSES})")

    @property
    def n_channels(self):
        return self.signal.shape[0]

    @property
    def n_samples(self):
        return self.signal.shape[1]


@dataclass
class SegmentSet:
    """Stack of fixed-length labeled windows, (N, T, C)."""
    data: np.ndarray
    labels: np.ndarray
    window_seconds: float = 2.0
    overlap_seconds: float = 0.2
    sample_rate_hz: float = 200.0
    channel_names: list = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.data.ndim != 3:
            raise ShapeError(f"SegmentSet data must be (N, T, C), got {self.data.shape}")
        n, t, c = self.data.shape
        if self.labels.shape != (n,):
            raise ShapeError(
                f"labels shape {self.labels.shape} does not match N={n}")
        if n and (self.labels.min() < 0 or self.labels.max() >= N_CLASSES):
            raise ConfigError(f"labels must lie in [0, {N_CLASSES})")
        expected_t = int(round(self.window_seconds * self.sample_rate_hz))
        if t != expected_t:
            raise ConfigError(
                f"T={t} does not match window_seconds*sample_rate_hz={expected_t}")
        if not self.channel_names:
            self.channel_names = default_channel_names(c)
        elif len(self.channel_names) != c:
            raise ShapeError(
                f"{len(self.channel_names)} channel names for C={c} channels")

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def t(self):
        return self.data.shape[1]

    @property
    def c(self):
        return self.data.shape[2]

    def select_channels(self, channels):
        channels = list(channels)
        return SegmentSet(
            data=self.data[:, :, channels],
            labels=self.labels.copy(),
            window_seconds=self.window_seconds,
            overlap_seconds=self.overlap_seconds,
            sample_rate_hz=self.sample_rate_hz,
            channel_names=[self.channel_names[i] for i in channels])

    def subset(self, indices):
        return SegmentSet(
            data=self.data[indices],
            labels=self.labels[indices],
            window_seconds=self.window_seconds,
            overlap_seconds=self.overlap_seconds,
            sample_rate_hz=self.sample_rate_hz,
            channel_names=list(self.channel_names))


@dataclass
class FoldSplit:
    k: int
    fold_assignments: np.ndarray

    def train_val_indices(self, fold):
        val = np.where(self.fold_assignments == fold)[0]
        train = np.where(self.fold_assignments != fold)[0]
        return train, val


def segment_count(n_samples, window_samples, stride):
    if n_samples < window_samples:
        return 0
    return (n_samples - window_samples) // stride + 1


def _majority_label(window_labels):
    """Majority vote; ties go to the class whose first occurrence in the
    window is earliest."""
    counts = np.bincount(window_labels, minlength=N_CLASSES)
    best = counts.max()
    tied = np.where(counts == best)[0]
    if len(tied) == 1:
        return int(tied[0])
    first_seen = {int(lab): pos for pos, lab in
                  reversed(list(enumerate(window_labels)))}
    return int(min(tied, key=lambda cls: first_seen.get(int(cls), len(window_labels))))


def segment_recording(rec, window_s=2.0, overlap_s=0.2):
    """Cut a recording into overlapping windows of window_s seconds.

    Windows start every (window_s - overlap_s) seconds; each keeps the
    majority label over its samples; layout per segment is (T, C).
    """
    if not (window_s > overlap_s >= 0):
        raise ConfigError(
            f"need window > overlap >= 0, got window={window_s}, overlap={overlap_s}")
    fs = rec.sample_rate_hz
    t_win = int(round(window_s * fs))
    stride = int(round((window_s - overlap_s) * fs))
    if stride < 1:
        raise ConfigError("stride shorter than one sample")
    n_seg = segment_count(rec.n_samples, t_win, stride)
    if n_seg == 0:
        raise EmptyInputError(
            f"recording has {rec.n_samples} samples, shorter than one"
            f" {t_win}-sample window")
    data = np.empty((n_seg, t_win, rec.n_channels), dtype=np.float32)
    labels = np.empty(n_seg, dtype=np.int64)
    per_sample = not np.isscalar(rec.labels)
    for i in range(n_seg):
        start = i * stride
        data[i] = rec.signal[:, start:start + t_win].T
        if per_sample:
            labels[i] = _majority_label(rec.labels[start:start + t_win])
        else:
            labels[i] = rec.labels
    return SegmentSet(data=data, labels=labels, window_seconds=window_s,
                      overlap_seconds=overlap_s, sample_rate_hz=fs)


DEFAULT_CLASS_FREQS = (4.0, 10.0, 20.0)


def make_synthetic_dataset(n_per_class, T, C, informative_channels, snr_db,
                           seed, sample_rate_hz=200.0,
                           class_freqs=DEFAULT_CLASS_FREQS):
    """Frequency-coded three-class dataset.

    Class k puts a sinusoid of class_freqs[k] Hz with random phase on the
    informative channels; every channel carries unit-variance Gaussian
    noise. The sinusoid amplitude is set so that its power is snr_db above
    the noise power. Deterministic given seed.
    """
    informative = sorted(int(ch) for ch in informative_channels)
    if not informative:
        raise ConfigError("informative_channels must not be empty")
    if informative[0] < 0 or informative[-1] >= C:
        raise ConfigError(
            f"informative channels {informative} outside [0, {C})")
    rng = np.random.default_rng(seed)
    n = n_per_class * N_CLASSES
    amplitude = np.sqrt(2.0 * 10.0 ** (snr_db / 10.0))
    tgrid = np.arange(T) / sample_rate_hz
    data = rng.standard_normal((n, T, C))
    labels = np.repeat(np.arange(N_CLASSES), n_per_class)
    for i in range(n):
        freq = class_freqs[labels[i]]
        for ch in informative:
            phase = rng.uniform(0, 2 * np.pi)
            data[i, :, ch] += amplitude * np.sin(2 * np.pi * freq * tgrid + phase)
    return SegmentSet(
        data=data.astype(np.float32), labels=labels,
        window_seconds=T / sample_rate_hz, overlap_seconds=0.0,
        sample_rate_hz=sample_rate_hz)


def stratified_kfold(labels, k=5, seed=0):
    """Class-wise round-robin fold assignment after a seeded shuffle.

    Per fold, each class count deviates from N_class/k by at most 1.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    rng = np.random.default_rng(seed)
    assignments = np.full(labels.shape[0], -1, dtype=np.int64)
    for cls in np.unique(labels):
        idx = np.where(labels == cls)[0]
        if len(idx) < k:
            raise StratificationError(
                f"class {cls} has {len(idx)} members, fewer than k={k}")
        rng.shuffle(idx)
        assignments[idx] = np.arange(len(idx)) % k
    return FoldSplit(k=k, fold_assignments=assignments)


def contiguous_kfold(labels, k=5):
    """Block-wise stratified variant: each class's segments are assigned to
    folds in temporal order, keeping overlapping neighbours together."""
    labels = np.asarray(labels)
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    assignments = np.full(labels.shape[0], -1, dtype=np.int64)
    for cls in np.unique(labels):
        idx = np.where(labels == cls)[0]
        if len(idx) < k:
            raise StratificationError(
                f"class {cls} has {len(idx)} members, fewer than k={k}")
        for fold, chunk in enumerate(np.array_split(idx, k)):
            assignments[chunk] = fold
    return FoldSplit(k=k, fold_assignments=assignments)


# -- SEGD container -------------------------------------------------------------

_SEGD_MAGIC = b"SEGD"
_SEGD_VERSION = 1


def save_segments(segments, path):
    """SEGD: magic | version u32 | header-len u32 | JSON header | float32
    payload in (segment, time, channel) order, little-endian."""
    header = {
        "n": segments.n, "t": segments.t, "c": segments.c,
        "sample_rate_hz": segments.sample_rate_hz,
        "window_seconds": segments.window_seconds,
        "overlap_seconds": segments.overlap_seconds,
        "labels": segments.labels.tolist(),
        "channel_names": list(segments.channel_names),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = np.ascontiguousarray(segments.data, dtype="<f4")
    with open(path, "wb") as f:
        f.write(_SEGD_MAGIC)
        f.write(struct.pack("<II", _SEGD_VERSION, len(blob)))
        f.write(blob)
        f.write(payload.tobytes())


def load_segments(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != _SEGD_MAGIC:
        raise DataFormatError(f"bad SEGD magic at offset 0: {raw[:4]!r}")
    if len(raw) < 12:
        raise DataFormatError(f"truncated SEGD header at offset {len(raw)}")
    version, header_len = struct.unpack_from("<II", raw, 4)
    if version != _SEGD_VERSION:
        raise DataFormatError(f"unsupported SEGD version {version} at offset 4")
    header_end = 12 + header_len
    if len(raw) < header_end:
        raise DataFormatError(
            f"truncated SEGD header at offset {len(raw)} (need {header_end})")
    try:
        header = json.loads(raw[12:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataFormatError(f"unreadable SEGD header at offset 12: {e}")
    try:
        n, t, c = int(header["n"]), int(header["t"]), int(header["c"])
        labels = np.asarray(header["labels"], dtype=np.int64)
        names = list(header["channel_names"])
    except (KeyError, TypeError, ValueError) as e:
        raise DataFormatError(f"invalid SEGD header fields at offset 12: {e}")
    expected_bytes = 4 * n * t * c
    payload = raw[header_end:]
    if len(payload) != expected_bytes:
        raise DataFormatError(
            f"SEGD payload size mismatch at offset {header_end}: header says"
            f" {n}x{t}x{c} ({expected_bytes} bytes), got {len(payload)}")
    if labels.shape != (n,):
        raise DataFormatError(
            f"SEGD header at offset 12 lists {labels.shape[0]} labels for n={n}")
    data = np.frombuffer(payload, dtype="<f4").reshape(n, t, c)
    return SegmentSet(
        data=data.astype(np.float32), labels=labels,
        window_seconds=float(header["window_seconds"]),
        overlap_seconds=float(header["overlap_seconds"]),
        sample_rate_hz=float(header["sample_rate_hz"]),
        channel_names=names)
