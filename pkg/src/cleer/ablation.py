"""Per-channel importance analysis and representation export.

Channel importance retrains the model from scratch on each single-channel
slice of the dataset with shared fold assignments and seeds, so the
resulting accuracies are directly comparable. Retraining every channel is
expensive; pass a reduced config (fewer epochs, smaller dims) for wide
montages. An occlusion variant evaluates one multichannel model on inputs
where all channels but one are zeroed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import N_CLASSES, SegmentSet
from .errors import ConfigError
from .model import ClassifierConfig, EncoderConfig
from .trainer import evaluate, make_split, run_skcv, train_fold
from .tensor import DiffTensor, no_grad


@dataclass
class ChannelRow:
    channel_index: int
    channel_name: str
    mean_accuracy: float


@dataclass
class ChannelReport:
    rows: list

    def ranked(self):
        """Rows by descending accuracy; ties broken by channel index."""
        return sorted(self.rows,
                      key=lambda r: (-r.mean_accuracy, r.channel_index))

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["channel_index", "channel_name", "mean_accuracy"])
            for r in self.ranked():
                w.writerow([r.channel_index, r.channel_name,
                            repr(r.mean_accuracy)])


def per_channel_eval(dataset, config, enc_cfg=None, clf_cfg=None,
                     method="retrain"):
    """Mean cross-validated accuracy of each channel on its own.

    method="retrain" runs a full SKCV per single-channel dataset;
    method="occlusion" trains once on all channels and evaluates with all
    but one channel zeroed.
    """
    if dataset.c < 1:
        raise ConfigError("dataset has no channels")
    if method == "retrain":
        return _retrain_eval(dataset, config, enc_cfg, clf_cfg)
    if method == "occlusion":
        return _occlusion_eval(dataset, config, enc_cfg, clf_cfg)
    raise ConfigError(f"unknown ablation method {method!r}")


def _retrain_eval(dataset, config, enc_cfg, clf_cfg):
    rows = []
    for ch in range(dataset.c):
        single = dataset.select_channels([ch])
        e_cfg = enc_cfg
        if e_cfg is None:
            e_cfg = EncoderConfig(in_channels=1)
        elif e_cfg.in_channels != 1:
            raise ConfigError("retrain ablation needs a 1-channel encoder config")
        result = run_skcv(single, config, e_cfg, clf_cfg)
        rows.append(ChannelRow(channel_index=ch,
                               channel_name=dataset.channel_names[ch],
                               mean_accuracy=result.mean_accuracy))
    return ChannelReport(rows=rows)


def _occlusion_eval(dataset, config, enc_cfg, clf_cfg):
    if enc_cfg is None:
        enc_cfg = EncoderConfig(in_channels=dataset.c)
    if clf_cfg is None:
        clf_cfg = ClassifierConfig(in_dim=enc_cfg.repr_dim)
    split = make_split(dataset, config)
    per_channel = np.zeros((dataset.c, config.k_folds))
    for fold in range(config.k_folds):
        train_idx, val_idx = split.train_val_indices(fold)
        _, model, _ = train_fold(dataset, train_idx, val_idx, config,
                                 enc_cfg, clf_cfg, fold)
        val = dataset.subset(val_idx)
        for ch in range(dataset.c):
            occluded = np.zeros_like(val.data)
            occluded[:, :, ch] = val.data[:, :, ch]
            masked = SegmentSet(
                data=occluded, labels=val.labels,
                window_seconds=val.window_seconds,
                overlap_seconds=val.overlap_seconds,
                sample_rate_hz=val.sample_rate_hz,
                channel_names=list(val.channel_names))
            acc, _ = evaluate(model, masked)
            per_channel[ch, fold] = acc
    rows = [ChannelRow(channel_index=ch,
                       channel_name=dataset.channel_names[ch],
                       mean_accuracy=float(per_channel[ch].mean()))
            for ch in range(dataset.c)]
    return ChannelReport(rows=rows)


def export_representations(model, segments, path, batch_size=256):
    """Write one CSV row per segment: index, label, then the time-max-pooled
    representation vector."""
    reprs = []
    with no_grad():
        for start in range(0, segments.n, batch_size):
            xb = segments.data[start:start + batch_size]
            r = model.encode(DiffTensor(xb)).data     # (b, L, D)
            reprs.append(r.max(axis=1))
    pooled = np.concatenate(reprs, axis=0) if reprs else np.zeros((0, 0))
    d = pooled.shape[1]
    with open(path, "w", newline="") as f:
        f.write("segment_index,label," +
                ",".join(f"r_{j}" for j in range(d)) + "\n")
        for i in range(segments.n):
            vals = ",".join(repr(float(v)) for v in pooled[i])
            f.write(f"{i},{segments.labels[i]},{vals}\n")


def representation_separation(path):
    """Mean inter-class centroid distance over mean intra-class spread,
    computed from an exported representation CSV."""
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    labels = data[:, 1].astype(int)
    feats = data[:, 2:]
    centroids = {}
    spreads = []
    for cls in range(N_CLASSES):
        members = feats[labels == cls]
        if len(members) == 0:
            continue
        centroid = members.mean(axis=0)
        centroids[cls] = centroid
        spreads.append(np.linalg.norm(members - centroid, axis=1).mean())
    keys = sorted(centroids)
    inter = [np.linalg.norm(centroids[a] - centroids[b])
             for i, a in enumerate(keys) for b in keys[i + 1:]]
    return float(np.mean(inter)) / float(np.mean(spreads))
