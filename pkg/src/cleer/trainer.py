"""Joint-training loop, stratified cross-validation driver, evaluation and
checkpointing.

Determinism contract: (seed, config, dataset) fixes fold assignments, batch
order, augmentations and therefore every reported number. Three independent
seeded streams (init, epoch ordering, augmentation) are derived per fold, so
switching augmentation on or off never reshuffles the data order. Folds are
independent and can run in parallel processes.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .augment import apply_crop, sample_crop_pair, sample_mask_batch
from .data import contiguous_kfold, stratified_kfold, N_CLASSES
from .errors import ConfigError, ContractError
from .losses import (LossBreakdown, LevelLoss, hcl_loss, joint_loss, n_levels)
from .model import ClassifierConfig, EncoderConfig, Model, save_checkpoint
from .optim import Adam
from .tensor import DiffTensor, cross_entropy

MODES = ("joint", "classifier_only", "two_step")

# stream ids for per-fold RNG derivation
_STREAM_SPLIT, _STREAM_INIT, _STREAM_ORDER, _STREAM_AUG = 0, 1, 2, 3


@dataclass
class TrainConfig:
    epochs: int = 50
    lr: float = 0.001
    batch_size: int = 32
    k_folds: int = 5
    lambda_class: float = 1.0
    mask_p: float = 0.5
    seed: int = 0
    mode: str = "joint"
    symmetrize: bool = False
    contiguous_folds: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.k_folds < 1:
            raise ConfigError("epochs, batch_size and k_folds must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode in ("joint", "two_step") and self.batch_size < 2:
            raise ConfigError(
                "contrastive modes need batch_size >= 2 (instance-wise loss"
                " is degenerate at B=1)")


@dataclass
class FoldReport:
    fold_index: int
    accuracy: float
    confusion: np.ndarray
    loss_history: list = field(default_factory=list)

    def to_dict(self):
        return {
            "fold_index": self.fold_index,
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "loss_history": [asdict(bd) for bd in self.loss_history],
        }


@dataclass
class SKCVResult:
    fold_reports: list
    mean_accuracy: float
    metrics_rows: list

    def to_dict(self):
        return {
            "mean_accuracy": self.mean_accuracy,
            "folds": [r.to_dict() for r in self.fold_reports],
        }


def _stream(seed, stream, fold=0):
    return np.random.default_rng(np.random.SeedSequence((seed, stream, fold)))


def evaluate(model, segments, batch_size=256):
    """Accuracy and 3x3 confusion matrix (rows: true, cols: predicted) from
    argmax over class probabilities; ties go to the lowest class index."""
    x, y = segments.data, segments.labels
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for start in range(0, len(y), batch_size):
        xb = x[start:start + batch_size]
        pred = model.predict(xb)
        for t_cls, p_cls in zip(y[start:start + batch_size], pred):
            confusion[t_cls, p_cls] += 1
    total = confusion.sum()
    accuracy = float(np.trace(confusion) / total) if total else 0.0
    return accuracy, confusion


def _contrastive_branch(model, xb, config, aug_rng):
    """Crop two views, mask them, encode, align the overlap and return the
    hierarchical loss with its breakdown."""
    B, t_len = xb.shape[0], xb.shape[1]
    pair = sample_crop_pair(t_len, aug_rng)
    view1 = apply_crop(xb, pair.view1)
    view2 = apply_crop(xb, pair.view2)
    mask1 = sample_mask_batch(B, view1.shape[1], config.mask_p, aug_rng)
    mask2 = sample_mask_batch(B, view2.shape[1], config.mask_p, aug_rng)
    z1 = model.encode(view1, mask1)
    z2 = model.encode(view2, mask2)
    off1, off2 = pair.overlap_offsets()
    k = pair.overlap_length
    z1o = z1[:, off1:off1 + k, :]
    z2o = z2[:, off2:off2 + k, :]
    return hcl_loss(z1o, z2o, symmetrize=config.symmetrize)


def train_step(model, optimizer, xb, yb, config, aug_rng, phase=None):
    """One optimizer step on a batch.

    phase selects the objective: None follows config.mode ("joint" or
    "classifier_only"); "contrastive" and "classifier" are the two halves
    used by the two-step baseline.
    """
    if xb.shape[0] == 0:
        raise ConfigError("train_step: empty batch")
    objective = phase or config.mode
    if objective == "joint":
        hcl, breakdown = _contrastive_branch(model, xb, config, aug_rng)
        probs = model.classify(DiffTensor(xb))
        total, breakdown = joint_loss(hcl, probs, yb, config.lambda_class,
                                      breakdown)
    elif objective == "contrastive":
        total, breakdown = _contrastive_branch(model, xb, config, aug_rng)
    elif objective in ("classifier_only", "classifier"):
        probs = model.classify(DiffTensor(xb))
        ce = cross_entropy(probs, yb)
        total = ce
        breakdown = LossBreakdown(hcl=0.0, class_loss=float(ce.data),
                                  total=float(ce.data))
    else:
        raise ConfigError(f"unknown training objective {objective!r}")
    total.backward()
    optimizer.step()
    return breakdown


def _aggregate(breakdowns):
    """Mean LossBreakdown over one epoch. Level lengths vary step to step
    (the overlap is resampled), so aggregated rows carry length=-1."""
    agg = LossBreakdown()
    if not breakdowns:
        return agg
    max_levels = max(len(bd.per_level) for bd in breakdowns)
    for lvl in range(max_levels):
        rows = [bd.per_level[lvl] for bd in breakdowns if len(bd.per_level) > lvl]
        agg.per_level.append(LevelLoss(
            level=lvl, length=-1,
            tcl=float(np.mean([r.tcl for r in rows])),
            icl=float(np.mean([r.icl for r in rows])),
            dcl=float(np.mean([r.dcl for r in rows]))))
    agg.hcl = float(np.mean([bd.hcl for bd in breakdowns]))
    agg.class_loss = float(np.mean([bd.class_loss for bd in breakdowns]))
    agg.total = float(np.mean([bd.total for bd in breakdowns]))
    return agg


def _phase_schedule(config):
    """Objective per epoch index for each mode."""
    if config.mode == "two_step":
        first = config.epochs // 2
        return ["contrastive"] * first + ["classifier"] * (config.epochs - first)
    return [None] * config.epochs


def train_fold(dataset, train_idx, val_idx, config, enc_cfg, clf_cfg, fold):
    """Train one fold from a fresh seeded init.

    Returns (FoldReport, Model, metrics rows for the CSV writer)."""
    if set(train_idx) & set(val_idx):
        raise ContractError("validation indices leaked into the training split")
    init_rng = _stream(config.seed, _STREAM_INIT, fold)
    order_rng = _stream(config.seed, _STREAM_ORDER, fold)
    aug_rng = _stream(config.seed, _STREAM_AUG, fold)
    model = Model(enc_cfg, clf_cfg, seed=init_rng)
    val_set = dataset.subset(val_idx)
    x, y = dataset.data, dataset.labels

    schedule = _phase_schedule(config)
    optimizer = _make_optimizer(model, schedule[0], config)
    history = []
    prev_phase = schedule[0]
    for epoch, phase in enumerate(schedule):
        if phase != prev_phase:
            optimizer = _phase_switch(model, phase, config)
            prev_phase = phase
        perm = order_rng.permutation(train_idx)
        n_full = len(perm) // config.batch_size   # drop last partial batch
        step_bds = []
        for b in range(n_full):
            sel = perm[b * config.batch_size:(b + 1) * config.batch_size]
            bd = train_step(model, optimizer, x[sel], y[sel], config,
                            aug_rng, phase=phase)
            step_bds.append(bd)
        epoch_bd = _aggregate(step_bds)
        val_acc, _ = evaluate(model, val_set)
        history.append((epoch_bd, val_acc))

    accuracy, confusion = evaluate(model, val_set)
    report = FoldReport(fold_index=fold, accuracy=accuracy,
                        confusion=confusion,
                        loss_history=[bd for bd, _ in history])
    rows = [_metrics_row(fold, epoch, bd, val_acc)
            for epoch, (bd, val_acc) in enumerate(history)]
    return report, model, rows


def _make_optimizer(model, phase, config):
    """Optimize only the parameters the phase's objective reaches, so every
    optimized parameter is guaranteed a gradient each step."""
    if phase == "contrastive":
        params = list(model.encoder.named_parameters().values())
    elif phase == "classifier":
        params = list(model.classifier.named_parameters().values())
    else:
        params = model.parameters()
    return Adam(params, lr=config.lr)


def _phase_switch(model, phase, config):
    """Two-step baseline phase change: freeze the encoder and hand the
    optimizer only the classifier parameters."""
    if phase != "classifier":
        raise ConfigError(f"unexpected phase transition to {phase!r}")
    for p in model.encoder.named_parameters().values():
        p.requires_grad = False
        p.grad = None
    return _make_optimizer(model, phase, config)


def _metrics_row(fold, epoch, bd, val_acc):
    levels = {f"level{l.level}_dcl": l.dcl for l in bd.per_level}
    has_contrastive = bool(bd.per_level)
    return {
        "epoch": epoch, "fold": fold, "levels": levels,
        "hcl": bd.hcl if has_contrastive else None,
        "class_loss": bd.class_loss, "total": bd.total,
        "val_accuracy": val_acc,
    }


def _fold_worker(payload):
    (dataset, config, enc_cfg, clf_cfg, fold, train_idx, val_idx, ckpt_path,
     limit_threads) = payload
    limiter = None
    if limit_threads:
        try:
            from threadpoolctl import threadpool_limits
            limiter = threadpool_limits(limits=1)    # one BLAS thread per worker
        except ImportError:
            pass
    try:
        report, model, rows = train_fold(dataset, train_idx, val_idx, config,
                                         enc_cfg, clf_cfg, fold)
        if ckpt_path:
            save_checkpoint(model, ckpt_path)
        return report, rows
    finally:
        if limiter is not None:
            limiter.unregister()


def make_split(dataset, config):
    if config.contiguous_folds:
        return contiguous_kfold(dataset.labels, k=config.k_folds)
    return stratified_kfold(dataset.labels, k=config.k_folds,
                            seed=np.random.SeedSequence(
                                (config.seed, _STREAM_SPLIT, 0)))


def run_skcv(dataset, config, enc_cfg=None, clf_cfg=None, out_dir=None):
    """Stratified k-fold cross-validation: fresh model per fold, trained on
    the other folds, evaluated on the held-out one. Writes metrics.csv,
    fold_reports.json and per-fold checkpoints when out_dir is given."""
    if enc_cfg is None:
        enc_cfg = EncoderConfig(in_channels=dataset.c)
    if clf_cfg is None:
        clf_cfg = ClassifierConfig(in_dim=enc_cfg.repr_dim)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    split = make_split(dataset, config)
    parallel = config.jobs > 1 and config.k_folds > 1
    jobs = []
    for fold in range(config.k_folds):
        train_idx, val_idx = split.train_val_indices(fold)
        ckpt = os.path.join(out_dir, f"fold{fold}.ckpt") if out_dir else None
        jobs.append((dataset, config, enc_cfg, clf_cfg, fold,
                     train_idx, val_idx, ckpt, parallel))

    if parallel:
        import multiprocessing as mp
        with mp.get_context("fork").Pool(min(config.jobs, config.k_folds)) as pool:
            outcomes = pool.map(_fold_worker, jobs)
    else:
        outcomes = [_fold_worker(j) for j in jobs]

    reports = [r for r, _ in outcomes]
    rows = [row for _, fold_rows in outcomes for row in fold_rows]
    mean_acc = float(np.mean([r.accuracy for r in reports]))
    result = SKCVResult(fold_reports=reports, mean_accuracy=mean_acc,
                        metrics_rows=rows)
    if out_dir:
        write_metrics_csv(result, dataset, os.path.join(out_dir, "metrics.csv"))
        with open(os.path.join(out_dir, "fold_reports.json"), "w") as f:
            json.dump(result.to_dict(), f, indent=2, sort_keys=True)
    return result


def two_step_baseline(dataset, config, enc_cfg=None, clf_cfg=None, out_dir=None):
    """Pretrain-then-classify baseline: same splits and epoch budget as the
    joint mode under the same seed, phases split half and half."""
    cfg = TrainConfig(**{**asdict(config), "mode": "two_step"})
    return run_skcv(dataset, cfg, enc_cfg, clf_cfg, out_dir)


def compare_modes(dataset, config, enc_cfg=None, clf_cfg=None, out_dir=None,
                  modes=MODES):
    """Run every training mode on identical splits; returns {mode: SKCVResult}
    and writes a comparison table when out_dir is given."""
    results = {}
    for mode in modes:
        cfg = TrainConfig(**{**asdict(config), "mode": mode})
        sub_dir = os.path.join(out_dir, mode) if out_dir else None
        if sub_dir:
            os.makedirs(sub_dir, exist_ok=True)
        results[mode] = run_skcv(dataset, cfg, enc_cfg, clf_cfg, sub_dir)
    if out_dir:
        write_mode_table(results, os.path.join(out_dir, "mode_comparison.csv"))
    return results


# -- reporting ----------------------------------------------------------------

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def max_levels_for(dataset):
    return n_levels(dataset.t)


def write_metrics_csv(result, dataset, path):
    """One row per (fold, epoch); column set is fixed by the dataset's
    window length so files from identical runs are byte-identical."""
    m = max_levels_for(dataset)
    level_cols = [f"level{i}_dcl" for i in range(m)]
    header = ["epoch", "fold"] + level_cols + ["hcl", "class_loss", "total",
                                               "val_accuracy"]
    rows = sorted(result.metrics_rows, key=lambda r: (r["fold"], r["epoch"]))
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for r in rows:
            cells = [str(r["epoch"]), str(r["fold"])]
            cells += [_fmt(r["levels"].get(c)) for c in level_cols]
            cells += [_fmt(r["hcl"]), _fmt(r["class_loss"]), _fmt(r["total"]),
                      _fmt(r["val_accuracy"])]
            f.write(",".join(cells) + "\n")


def write_mode_table(results, path):
    with open(path, "w", newline="") as f:
        f.write("mode,mean_accuracy," +
                ",".join(f"fold{i}_accuracy" for i in
                         range(len(next(iter(results.values())).fold_reports)))
                + "\n")
        for mode, res in results.items():
            accs = [repr(r.accuracy) for r in res.fold_reports]
            f.write(f"{mode},{res.mean_accuracy!r}," + ",".join(accs) + "\n")
