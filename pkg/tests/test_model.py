import numpy as np
import pytest

from modsense import model, sigsynth
from modsense.errors import ConfigurationError, ShapeError


class TestTraining:
    def test_loss_decreases(self, tiny_dataset):
        data = model.amp_phase_dataset(tiny_dataset)
        cfg = model.ClassifierConfig(depth=1, cells=8, input_dim=2,
                                     n_classes=3, keep_prob=1.0, seed=0)
        tcfg = model.TrainConfig(minibatch=18, epochs=6, lr=0.01,
                                 snr_min_train=None)
        m = model.train(data, cfg, tcfg)
        assert m.history[-1]["loss"] < m.history[0]["loss"]

    def test_training_deterministic(self, tiny_dataset):
        data = model.amp_phase_dataset(tiny_dataset)
        cfg = model.ClassifierConfig(depth=1, cells=6, input_dim=2,
                                     n_classes=3, keep_prob=0.8, seed=1)
        tcfg = model.TrainConfig(minibatch=18, epochs=2, lr=0.01,
                                 snr_min_train=None)
        m1 = model.train(data, cfg, tcfg)
        m2 = model.train(data, cfg, tcfg)
        for a, b in zip(m1.layers, m2.layers):
            np.testing.assert_array_equal(a.W_x, b.W_x)
            np.testing.assert_array_equal(a.W_h, b.W_h)
        assert m1.history == m2.history

    def test_snr_filter_applies_to_train_only(self, tiny_dataset):
        data = model.amp_phase_dataset(tiny_dataset)
        cfg = model.ClassifierConfig(depth=1, cells=4, input_dim=2,
                                     n_classes=3, keep_prob=1.0, seed=0)
        tcfg = model.TrainConfig(minibatch=8, epochs=1, lr=0.01,
                                 snr_min_train=15.0)
        m = model.train(data, cfg, tcfg)
        n_kept = np.sum(data.snrs[data.train_idx] >= 15.0)
        assert m.provenance["n_train"] == n_kept

    def test_filter_leaving_nothing_rejected(self, tiny_dataset):
        data = model.amp_phase_dataset(tiny_dataset)
        cfg = model.ClassifierConfig(depth=1, cells=4, input_dim=2,
                                     n_classes=3, seed=0)
        tcfg = model.TrainConfig(minibatch=8, epochs=1, snr_min_train=99.0)
        with pytest.raises(ConfigurationError):
            model.train(data, cfg, tcfg)

    def test_feature_dim_mismatch_rejected(self, tiny_dataset):
        data = model.amp_phase_dataset(tiny_dataset)
        cfg = model.ClassifierConfig(depth=1, cells=4, input_dim=1,
                                     n_classes=3, seed=0)
        with pytest.raises(ShapeError):
            model.train(data, cfg, model.TrainConfig(epochs=1))

    def test_buckets_never_mix_lengths(self):
        spec = sigsynth.DatasetSpec(
            schemes=("BPSK", "QPSK"), snr_grid_db=(18,), sps_set=(4,),
            length_set=(64, 128), frames_per_cell=6, master_seed=2)
        data = model.amp_phase_dataset(sigsynth.generate_dataset(spec))
        buckets = model._length_buckets(data.train_idx, data.sequences)
        assert set(buckets) == {64, 128}
        for length, idx in buckets.items():
            assert all(len(data.sequences[int(i)]) == length for i in idx)


class TestPredict:
    def test_valid_distribution(self, tiny_model, tiny_dataset):
        data = model.amp_phase_dataset(tiny_dataset)
        probs = model.predict(tiny_model, data.sequences[0])
        assert probs.shape == (3,)
        assert np.sum(probs) == pytest.approx(1.0, abs=1e-6)

    def test_shorter_sequence_accepted(self, tiny_model):
        # a model trained on length 64 still classifies length 32 input
        rng = np.random.default_rng(0)
        seq = np.column_stack([np.abs(rng.normal(size=32)),
                               rng.uniform(-1, 1, 32)])
        probs = model.predict(tiny_model, seq)
        assert np.sum(probs) == pytest.approx(1.0, abs=1e-6)

    def test_wrong_width_rejected(self, tiny_model):
        with pytest.raises(ShapeError):
            model.predict(tiny_model, np.zeros((10, 3)))

    def test_batch_matches_single(self, tiny_model, tiny_dataset):
        data = model.amp_phase_dataset(tiny_dataset)
        seqs = [data.sequences[i] for i in range(10)]
        batched = model.predict_batch(tiny_model, seqs)
        singles = np.array([int(np.argmax(model.predict(tiny_model, s)))
                            for s in seqs])
        np.testing.assert_array_equal(batched, singles)


class TestEvaluate:
    def test_oracle_predictor_identity_confusion(self, tiny_model,
                                                 tiny_dataset):
        data = model.amp_phase_dataset(tiny_dataset)
        truth = data.labels[data.test_idx]
        rep = model.evaluate(tiny_model, data, predictions=truth)
        assert rep.overall_accuracy == 1.0
        np.testing.assert_array_equal(rep.confusion, np.eye(3))

    def test_uniform_random_predictor_chance_level(self):
        # balanced 11-class truth vs uniform predictions: about 9.09%
        rng = np.random.default_rng(0)
        n = 22_000
        truth = np.tile(np.arange(11), n // 11)
        preds = rng.integers(11, size=n)
        acc = np.mean(preds == truth)
        assert acc == pytest.approx(1 / 11, abs=0.01)

    def test_confusion_rows_sum_to_one(self, tiny_model, tiny_dataset):
        data = model.amp_phase_dataset(tiny_dataset)
        rep = model.evaluate(tiny_model, data)
        np.testing.assert_allclose(rep.confusion.sum(axis=1),
                                   np.ones(3), atol=1e-9)

    def test_accuracy_at_threshold(self, tiny_model, tiny_dataset):
        data = model.amp_phase_dataset(tiny_dataset)
        rep = model.evaluate(tiny_model, data)
        assert rep.accuracy_at(15) == pytest.approx(
            rep.acc_per_snr[rep.snr_grid >= 15].mean())


class TestSweep:
    def test_reports_each_config(self, tiny_dataset):
        data = model.amp_phase_dataset(tiny_dataset)
        tcfg = model.TrainConfig(minibatch=18, epochs=1, lr=0.01,
                                 snr_min_train=None)
        base = model.ClassifierConfig(input_dim=2, n_classes=3,
                                      keep_prob=1.0, seed=0)
        rows = model.sweep([1, 2], [4], data, tcfg, base_cfg=base)
        assert [(r["depth"], r["cells"]) for r in rows] == [(1, 4), (2, 4)]

    def test_empty_grid_rejected(self, tiny_dataset):
        data = model.amp_phase_dataset(tiny_dataset)
        with pytest.raises(ConfigurationError):
            model.sweep([], [4], data, model.TrainConfig())


class TestCheckpoint:
    def test_round_trip_predictions_exact(self, tiny_model, tiny_dataset,
                                          tmp_path):
        path = tmp_path / "m.msm"
        model.save_model(tiny_model, path)
        loaded = model.load_model(path)
        data = model.amp_phase_dataset(tiny_dataset)
        for i in range(5):
            np.testing.assert_array_equal(
                model.predict(tiny_model, data.sequences[i]),
                model.predict(loaded, data.sequences[i]))

    def test_round_trip_bytes_stable(self, tiny_model, tmp_path):
        p1, p2 = tmp_path / "a.msm", tmp_path / "b.msm"
        model.save_model(tiny_model, p1)
        model.save_model(model.load_model(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_corrupted_blob_rejected(self, tiny_model, tmp_path):
        path = tmp_path / "m.msm"
        model.save_model(tiny_model, path)
        raw = bytearray(path.read_bytes())
        raw[-1] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(ShapeError):
            model.load_model(path)
