"""Training harness: determinism, leakage guards, mode behaviour and
reporting surfaces. Uses tiny configs so the whole module stays fast."""

import os

import numpy as np
import pytest

from cleer.data import make_synthetic_dataset
from cleer.errors import ConfigError, ContractError
from cleer.model import ClassifierConfig, EncoderConfig, Model
from cleer.optim import Adam
from cleer.trainer import (TrainConfig, _stream, compare_modes, evaluate,
                           make_split, run_skcv, train_fold, train_step,
                           two_step_baseline)


def tiny_dataset(seed=0, n_per_class=10, T=32, C=3, snr_db=20.0):
    return make_synthetic_dataset(n_per_class, T, C, {0}, snr_db, seed=seed)


def tiny_configs():
    enc = EncoderConfig(in_channels=3, hidden_dim=8, repr_dim=12, n_blocks=2,
                        dilation_schedule=(1, 2))
    clf = ClassifierConfig(in_dim=12, conv_channels=8, fc_dims=(6,))
    return enc, clf


def tiny_train_config(**overrides):
    base = dict(epochs=2, batch_size=8, k_folds=3, seed=5)
    base.update(overrides)
    return TrainConfig(**base)


class TestTrainStep:
    def test_joint_decreases_loss_on_easy_data(self):
        ds = tiny_dataset(snr_db=20.0, n_per_class=20)
        enc, clf = tiny_configs()
        model = Model(enc, clf, seed=1)
        cfg = tiny_train_config()
        opt = Adam(model.parameters(), lr=cfg.lr)
        aug = _stream(cfg.seed, 3, 0)
        rng = np.random.default_rng(0)
        losses = []
        for step in range(20):
            sel = rng.choice(len(ds.labels), size=8, replace=False)
            bd = train_step(model, opt, ds.data[sel], ds.labels[sel], cfg, aug)
            losses.append(bd.total)
        assert np.mean(losses[-5:]) < np.mean(losses[:5])

    def test_lambda_zero_keeps_fresh_classifier_fixed(self):
        ds = tiny_dataset()
        enc, clf = tiny_configs()
        model = Model(enc, clf, seed=2)
        cfg = tiny_train_config(lambda_class=0.0)
        opt = Adam(model.parameters(), lr=cfg.lr)
        aug = _stream(cfg.seed, 3, 0)
        before_clf = {n: p.data.copy()
                      for n, p in model.classifier.named_parameters().items()}
        before_enc = {n: p.data.copy()
                      for n, p in model.encoder.named_parameters().items()}
        train_step(model, opt, ds.data[:8], ds.labels[:8], cfg, aug)
        for n, p in model.classifier.named_parameters().items():
            np.testing.assert_array_equal(p.data, before_clf[n])
        moved = [n for n, p in model.encoder.named_parameters().items()
                 if not np.array_equal(p.data, before_enc[n])]
        assert moved    # contrastive gradient still reaches the encoder

    def test_identical_seeds_identical_trajectories(self):
        ds = tiny_dataset()
        enc, clf = tiny_configs()
        cfg = tiny_train_config()
        split = make_split(ds, cfg)
        tr, va = split.train_val_indices(0)
        r1, _, rows1 = train_fold(ds, tr, va, cfg, enc, clf, 0)
        r2, _, rows2 = train_fold(ds, tr, va, cfg, enc, clf, 0)
        assert rows1 == rows2
        assert r1.accuracy == r2.accuracy
        np.testing.assert_array_equal(r1.confusion, r2.confusion)

    def test_empty_batch_rejected(self):
        ds = tiny_dataset()
        enc, clf = tiny_configs()
        model = Model(enc, clf, seed=0)
        cfg = tiny_train_config()
        opt = Adam(model.parameters(), lr=cfg.lr)
        with pytest.raises(ConfigError):
            train_step(model, opt, ds.data[:0], ds.labels[:0], cfg,
                       _stream(0, 3, 0))


class TestEvaluate:
    def test_uniform_model_predicts_class_zero(self):
        ds = tiny_dataset()
        enc, clf = tiny_configs()
        model = Model(enc, clf, seed=0)
        w, b = model.classifier.fcs[-1]
        w.data[:] = 0.0
        b.data[:] = 0.0
        acc, confusion = evaluate(model, ds)
        assert confusion[:, 0].sum() == ds.n        # every prediction is 0
        assert acc == pytest.approx(np.mean(ds.labels == 0))

    def test_perfect_oracle_diagonal_confusion(self):
        ds = tiny_dataset()

        class Oracle:
            def predict(self, xb):
                # recover labels by matching rows against the dataset
                idx = [np.argmin(np.abs(ds.data - seg).sum(axis=(1, 2)))
                       for seg in xb]
                return ds.labels[idx]

        acc, confusion = evaluate(Oracle(), ds)
        assert acc == 1.0
        assert confusion.sum() == np.trace(confusion)

    def test_confusion_row_sums_match_class_counts(self):
        ds = tiny_dataset()
        enc, clf = tiny_configs()
        model = Model(enc, clf, seed=1)
        _, confusion = evaluate(model, ds)
        for cls in range(3):
            assert confusion[cls].sum() == np.sum(ds.labels == cls)


class TestRunSkcv:
    def test_shapes_and_mean(self, tmp_path):
        ds = tiny_dataset(n_per_class=10)
        enc, clf = tiny_configs()
        cfg = tiny_train_config()
        res = run_skcv(ds, cfg, enc, clf, out_dir=str(tmp_path))
        assert len(res.fold_reports) == 3
        per_fold_val = [len(np.where(make_split(ds, cfg).fold_assignments == f)[0])
                        for f in range(3)]
        assert [r.confusion.sum() for r in res.fold_reports] == per_fold_val
        assert res.mean_accuracy == pytest.approx(
            np.mean([r.accuracy for r in res.fold_reports]))
        for name in ("metrics.csv", "fold_reports.json", "fold0.ckpt"):
            assert (tmp_path / name).exists()

    def test_no_validation_leakage(self):
        ds = tiny_dataset()
        cfg = tiny_train_config()
        split = make_split(ds, cfg)
        for fold in range(cfg.k_folds):
            train, val = split.train_val_indices(fold)
            assert not set(train) & set(val)

    def test_metrics_csv_byte_identical_across_runs(self, tmp_path):
        ds = tiny_dataset()
        enc, clf = tiny_configs()
        cfg = tiny_train_config()
        run_skcv(ds, cfg, enc, clf, out_dir=str(tmp_path / "a"))
        run_skcv(ds, cfg, enc, clf, out_dir=str(tmp_path / "b"))
        a = (tmp_path / "a" / "metrics.csv").read_bytes()
        b = (tmp_path / "b" / "metrics.csv").read_bytes()
        assert a == b

    def test_parallel_folds_match_sequential(self, tmp_path):
        ds = tiny_dataset()
        enc, clf = tiny_configs()
        seq = run_skcv(ds, tiny_train_config(jobs=1), enc, clf,
                       out_dir=str(tmp_path / "seq"))
        par = run_skcv(ds, tiny_train_config(jobs=2), enc, clf,
                       out_dir=str(tmp_path / "par"))
        assert seq.mean_accuracy == par.mean_accuracy
        assert ((tmp_path / "seq" / "metrics.csv").read_bytes()
                == (tmp_path / "par" / "metrics.csv").read_bytes())

    def test_batch_size_one_rejected_in_joint_mode(self):
        with pytest.raises(ConfigError, match="batch_size"):
            tiny_train_config(batch_size=1)


class TestTwoStep:
    def test_phase2_freezes_encoder(self):
        from cleer.trainer import _make_optimizer, _phase_switch
        ds = tiny_dataset()
        enc, clf = tiny_configs()
        model = Model(enc, clf, seed=3)
        cfg = tiny_train_config(mode="two_step")
        aug = _stream(cfg.seed, 3, 0)
        opt = _make_optimizer(model, "contrastive", cfg)
        for step in range(2):
            train_step(model, opt, ds.data[:8], ds.labels[:8], cfg, aug,
                       phase="contrastive")
        frozen = {n: p.data.copy()
                  for n, p in model.encoder.named_parameters().items()}
        clf_before = {n: p.data.copy()
                      for n, p in model.classifier.named_parameters().items()}
        opt = _phase_switch(model, "classifier", cfg)
        for step in range(2):
            train_step(model, opt, ds.data[:8], ds.labels[:8], cfg, aug,
                       phase="classifier")
        for n, p in model.encoder.named_parameters().items():
            np.testing.assert_array_equal(p.data, frozen[n])
        moved = [n for n, p in model.classifier.named_parameters().items()
                 if not np.array_equal(p.data, clf_before[n])]
        assert moved

    def test_same_split_as_joint_under_same_seed(self):
        ds = tiny_dataset()
        joint_split = make_split(ds, tiny_train_config(mode="joint"))
        two_split = make_split(ds, tiny_train_config(mode="two_step"))
        np.testing.assert_array_equal(joint_split.fold_assignments,
                                      two_split.fold_assignments)

    def test_comparison_table_emitted(self, tmp_path):
        ds = tiny_dataset()
        enc, clf = tiny_configs()
        cfg = tiny_train_config(epochs=2)
        results = compare_modes(ds, cfg, enc, clf, out_dir=str(tmp_path))
        table = (tmp_path / "mode_comparison.csv").read_text().splitlines()
        assert table[0].startswith("mode,mean_accuracy")
        assert {line.split(",")[0] for line in table[1:]} == {
            "joint", "two_step", "classifier_only"}
        assert set(results) == {"joint", "two_step", "classifier_only"}

    def test_two_step_baseline_wrapper(self):
        ds = tiny_dataset()
        enc, clf = tiny_configs()
        res = two_step_baseline(ds, tiny_train_config(epochs=2), enc, clf)
        assert len(res.fold_reports) == 3


class TestConfigValidation:
    def test_unknown_mode_rejected(self):
        with pytest.raises(ConfigError):
            TrainConfig(mode="pretrain")

    def test_nonpositive_epochs_rejected(self):
        with pytest.raises(ConfigError):
            TrainConfig(epochs=0)


@pytest.fixture(scope="module")
def trained():
    # fast class frequencies: several cycles fit in the short window
    ds = make_synthetic_dataset(25, 32, 3, {0, 2}, 10.0, seed=31,
                                class_freqs=(12.5, 25.0, 50.0))
    enc, clf = tiny_configs()
    cfg = TrainConfig(epochs=20, batch_size=8, k_folds=3, seed=31)
    split = make_split(ds, cfg)
    tr, va = split.train_val_indices(0)
    _, model, _ = train_fold(ds, tr, va, cfg, enc, clf, 0)
    return ds, model


class TestTrainedRepresentations:
    """Post-training behaviour of the learned representation space."""

    def test_overlap_consistency_after_training(self, trained):
        # aligned overlap representations of two crops of the SAME segment
        # must be more similar than representations of DIFFERENT segments
        # at the same timestamp
        from cleer.augment import apply_crop, sample_crop_pair
        ds, model = trained
        rng = np.random.default_rng(1)
        pos_sims, neg_sims = [], []
        x = ds.data[:24]
        for _ in range(10):
            pair = sample_crop_pair(ds.t, rng)
            v1 = model.encode(apply_crop(x, pair.view1)).data
            v2 = model.encode(apply_crop(x, pair.view2)).data
            off1, off2 = pair.overlap_offsets()
            k = pair.overlap_length
            z1 = v1[:, off1:off1 + k, :]
            z2 = v2[:, off2:off2 + k, :]
            norm1 = z1 / (np.linalg.norm(z1, axis=2, keepdims=True) + 1e-12)
            norm2 = z2 / (np.linalg.norm(z2, axis=2, keepdims=True) + 1e-12)
            pos_sims.append((norm1 * norm2).sum(axis=2).mean())
            rolled = np.roll(norm2, 1, axis=0)     # pair each with another segment
            neg_sims.append((norm1 * rolled).sum(axis=2).mean())
        assert np.mean(pos_sims) > np.mean(neg_sims)

    def test_training_improves_class_separation(self, trained, tmp_path):
        # the absolute inter>intra claim needs a fully converged model (see
        # the acceptance-marked ablation test); here: training must at least
        # beat a fresh init on the same data
        from cleer.ablation import (export_representations,
                                    representation_separation)
        ds, model = trained
        enc, clf = tiny_configs()
        untrained = Model(enc, clf, seed=99)
        trained_path = tmp_path / "trained.csv"
        fresh_path = tmp_path / "fresh.csv"
        export_representations(model, ds, trained_path)
        export_representations(untrained, ds, fresh_path)
        assert (representation_separation(trained_path)
                > representation_separation(fresh_path))
