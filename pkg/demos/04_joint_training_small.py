"""Desk-scale joint training: cross-validated runs on an easy synthetic
task, the three-arm mode comparison, and channel importance.

Uses a small model and few epochs so the whole script finishes in about a
minute; scale the config up for real experiments.

Run:  python demos/04_joint_training_small.py
"""

import tempfile
import time

import numpy as np

from cleer.ablation import per_channel_eval
from cleer.data import make_synthetic_dataset
from cleer.model import ClassifierConfig, EncoderConfig
from cleer.trainer import TrainConfig, compare_modes, run_skcv

dataset = make_synthetic_dataset(n_per_class=60, T=96, C=4,
                                 informative_channels={1, 3}, snr_db=6.0,
                                 seed=21)
enc = EncoderConfig(in_channels=4, hidden_dim=24, repr_dim=32, n_blocks=3)
clf = ClassifierConfig(in_dim=32, conv_channels=32, fc_dims=(16,))
config = TrainConfig(epochs=15, batch_size=16, k_folds=3, seed=21, jobs=2)

t0 = time.time()
result = run_skcv(dataset, config, enc, clf)
print(f"joint 3-fold mean accuracy: {result.mean_accuracy:.3f}"
      f"  ({time.time() - t0:.0f}s)")
for rep in result.fold_reports:
    first = rep.loss_history[0]
    last = rep.loss_history[-1]
    print(f"  fold {rep.fold_index}: accuracy {rep.accuracy:.3f},"
          f" total loss {first.total:.2f} -> {last.total:.2f}")

with tempfile.TemporaryDirectory() as out:
    results = compare_modes(dataset, config, enc, clf, out_dir=out)
    print("mode comparison (same splits, same seeds):")
    for mode, res in results.items():
        print(f"  {mode:16s} {res.mean_accuracy:.3f}")

enc1 = EncoderConfig(in_channels=1, hidden_dim=16, repr_dim=24, n_blocks=2)
clf1 = ClassifierConfig(in_dim=24, conv_channels=16, fc_dims=(8,))
report = per_channel_eval(dataset, TrainConfig(epochs=20, batch_size=16,
                                               k_folds=3, seed=21, jobs=2),
                          enc1, clf1)
print("per-channel accuracy (signal lives on channels 1 and 3):")
for row in report.ranked():
    bar = "#" * int(row.mean_accuracy * 30)
    print(f"  ch{row.channel_index} {row.channel_name:5s}"
          f" {row.mean_accuracy:.3f} {bar}")
