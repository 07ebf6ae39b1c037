import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modsense import nncore
from modsense.errors import ConfigurationError, ShapeError

from conftest import random_params


def scalar_lstm_step(x, h_prev, c_prev, p):
    """Loop-based reference for one cell step, scalar by scalar."""
    H = p.cells
    h = np.zeros(H)
    c = np.zeros(H)
    for j in range(H):
        zi = zf = zo = zc = 0.0
        for d in range(p.input_dim):
            zi += x[d] * p.W_x[d, j]
            zf += x[d] * p.W_x[d, H + j]
            zo += x[d] * p.W_x[d, 2 * H + j]
            zc += x[d] * p.W_x[d, 3 * H + j]
        for k in range(H):
            zi += h_prev[k] * p.W_h[k, j]
            zf += h_prev[k] * p.W_h[k, H + j]
            zo += h_prev[k] * p.W_h[k, 2 * H + j]
            zc += h_prev[k] * p.W_h[k, 3 * H + j]
        i = 1 / (1 + np.exp(-(zi + p.b[j])))
        f = 1 / (1 + np.exp(-(zf + p.b[H + j])))
        o = 1 / (1 + np.exp(-(zo + p.b[2 * H + j])))
        c_in = np.tanh(zc + p.b[3 * H + j])
        c[j] = f * c_prev[j] + i * c_in
        h[j] = o * np.tanh(c[j])
    return h, c


class TestCellStep:
    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(0)
        for trial in range(100):
            layers, _ = random_params(1, 3, 2, 2, seed=trial)
            p = layers[0]
            x = rng.normal(size=2)
            h_prev = rng.normal(size=3)
            c_prev = rng.normal(size=3)
            state = nncore.CellState(h=h_prev[None], c=c_prev[None])
            out = nncore.lstm_cell_step(x, state, p)
            h_ref, c_ref = scalar_lstm_step(x, h_prev, c_prev, p)
            np.testing.assert_allclose(out.h[0], h_ref, rtol=1e-12)
            np.testing.assert_allclose(out.c[0], c_ref, rtol=1e-12)

    def test_wrong_input_dim_rejected(self):
        layers, _ = random_params(1, 3, 2, 2, seed=0)
        state = nncore.zero_state(1, 3)
        with pytest.raises(ShapeError):
            nncore.lstm_cell_step(np.zeros(5), state, layers[0])

    def test_forward_agrees_with_stepping(self):
        layers, _ = random_params(1, 4, 2, 2, seed=1)
        rng = np.random.default_rng(1)
        seq = rng.normal(size=(6, 2))
        h_last, caches = nncore.lstm_forward(seq, layers)
        state = nncore.zero_state(1, 4)
        for t in range(6):
            state = nncore.lstm_cell_step(seq[t], state, layers[0])
        np.testing.assert_allclose(h_last, state.h[0], rtol=1e-12)
        np.testing.assert_allclose(caches[0].c[0, -1], state.c[0], rtol=1e-12)


class TestSoftmax:
    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=12))
    @settings(max_examples=50)
    def test_sums_to_one(self, logits):
        p = nncore.softmax(np.array(logits))
        assert np.sum(p) == pytest.approx(1.0, abs=1e-6)
        assert np.all(p >= 0)

    def test_shift_invariance(self):
        z = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(nncore.softmax(z),
                                   nncore.softmax(z + 1000.0), rtol=1e-9)

    def test_cross_entropy_gradient_single(self):
        z = np.array([0.5, -1.0, 2.0])
        loss, grad = nncore.softmax_cross_entropy(z, 2)
        p = nncore.softmax(z)
        assert loss == pytest.approx(-np.log(p[2]))
        expected = p.copy()
        expected[2] -= 1
        np.testing.assert_allclose(grad, expected, rtol=1e-12)

    def test_cross_entropy_batched_mean(self):
        z = np.array([[1.0, 0.0], [0.0, 1.0]])
        y = np.array([0, 1])
        loss, grad = nncore.softmax_cross_entropy(z, y)
        l0, _ = nncore.softmax_cross_entropy(z[0], 0)
        l1, _ = nncore.softmax_cross_entropy(z[1], 1)
        assert loss == pytest.approx((l0 + l1) / 2)
        assert grad.shape == (2, 2)

    def test_label_out_of_range(self):
        with pytest.raises(IndexError):
            nncore.softmax_cross_entropy(np.zeros(3), 7)


def numeric_gradients(layers, dense, seq, label, h=1e-4):
    """Central finite differences of the loss wrt every parameter."""
    def loss_fn():
        hid, _ = nncore.lstm_forward(seq, layers)
        logits = nncore.dense_forward(hid, dense)
        loss, _ = nncore.softmax_cross_entropy(logits, label)
        return loss

    grads = []
    for arr in nncore.param_arrays(layers, dense):
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            lp = loss_fn()
            flat[k] = orig - h
            lm = loss_fn()
            flat[k] = orig
            gflat[k] = (lp - lm) / (2 * h)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


class TestBPTT:
    def test_gradients_match_finite_differences(self):
        # full check on one moderate instance; the acceptance suite runs 20
        layers, dense = random_params(2, 5, 2, 3, seed=7)
        rng = np.random.default_rng(7)
        seq = rng.normal(size=(6, 2))
        hid, caches = nncore.lstm_forward(seq, layers)
        logits = nncore.dense_forward(hid, dense)
        _, grad_logits = nncore.softmax_cross_entropy(logits, 1)
        lg, dg = nncore.bptt(caches, layers, dense, grad_logits)
        analytic = nncore.param_arrays(lg, dg)
        numeric = numeric_gradients(layers, dense, seq, 1)
        assert max_relative_error(analytic, numeric) < 1e-4

    def test_batched_gradient_is_mean_of_singles(self):
        layers, dense = random_params(1, 4, 2, 3, seed=9)
        rng = np.random.default_rng(9)
        x = rng.normal(size=(3, 5, 2))
        y = np.array([0, 1, 2])

        hid, caches = nncore.lstm_forward(x, layers)
        logits = nncore.dense_forward(hid, dense)
        _, grad_logits = nncore.softmax_cross_entropy(logits, y)
        lg, dg = nncore.bptt(caches, layers, dense, grad_logits)

        acc = None
        for b in range(3):
            hb, cb = nncore.lstm_forward(x[b], layers)
            zb = nncore.dense_forward(hb, dense)
            _, gb = nncore.softmax_cross_entropy(zb, int(y[b]))
            lgb, dgb = nncore.bptt(cb, layers, dense, gb)
            arrs = nncore.param_arrays(lgb, dgb)
            acc = arrs if acc is None else [a + b2 for a, b2 in zip(acc, arrs)]
        mean = [a / 3 for a in acc]
        for got, want in zip(nncore.param_arrays(lg, dg), mean):
            np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-12)

    def test_deterministic(self):
        layers, dense = random_params(2, 4, 2, 3, seed=4)
        rng = np.random.default_rng(4)
        seq = rng.normal(size=(8, 2))

        def run():
            hid, caches = nncore.lstm_forward(seq, layers)
            logits = nncore.dense_forward(hid, dense)
            _, g = nncore.softmax_cross_entropy(logits, 0)
            lg, dg = nncore.bptt(caches, layers, dense, g)
            return nncore.param_arrays(lg, dg)

        for a, b in zip(run(), run()):
            np.testing.assert_array_equal(a, b)


class TestInitAndCounting:
    def test_forget_bias_one(self):
        layers, _ = nncore.init_params(2, 8, 2, 4, seed=0)
        for p in layers:
            np.testing.assert_array_equal(p.b[p.gate_slice("f")], 1.0)
            np.testing.assert_array_equal(p.b[p.gate_slice("i")], 0.0)

    def test_uniform_unit_scaling_bounds(self):
        layers, dense = nncore.init_params(1, 64, 2, 4, seed=1)
        p = layers[0]
        assert np.all(np.abs(p.W_x) <= np.sqrt(3 / 2))
        assert np.all(np.abs(p.W_h) <= np.sqrt(3 / 64))
        assert np.all(np.abs(dense.W) <= np.sqrt(3 / 64))

    def test_param_count_reference_model(self):
        assert nncore.param_count(2, 128, 2, 11) == 200_075

    def test_param_count_matches_arrays(self):
        layers, dense = nncore.init_params(3, 16, 2, 5, seed=2)
        total = sum(a.size for a in nncore.param_arrays(layers, dense))
        assert total == nncore.param_count(3, 16, 2, 5)

    def test_macs_reference_model(self):
        # 4*128*(2+128) + 4*128*(128+128)
        assert nncore.macs_per_timestep(2, 128, 2) == 197_632

    def test_bad_arch_rejected(self):
        with pytest.raises(ConfigurationError):
            nncore.init_params(0, 8, 2, 4, seed=0)
        with pytest.raises(ConfigurationError):
            nncore.param_count(1, 8, 2, 1)


class TestBlob:
    def test_round_trip_exact(self):
        layers, dense = nncore.init_params(2, 8, 2, 4, seed=5)
        blob = nncore.params_to_blob(layers, dense)
        l2, d2 = nncore.params_from_blob(blob, 2, 8, 2, 4)
        for a, b in zip(nncore.param_arrays(layers, dense),
                        nncore.param_arrays(l2, d2)):
            np.testing.assert_array_equal(a, b)
        assert nncore.params_to_blob(l2, d2) == blob

    def test_blob_size(self):
        layers, dense = nncore.init_params(2, 8, 2, 4, seed=5)
        blob = nncore.params_to_blob(layers, dense)
        assert len(blob) == 4 * nncore.param_count(2, 8, 2, 4)

    def test_wrong_size_rejected(self):
        with pytest.raises(ShapeError):
            nncore.params_from_blob(b"\x00" * 40, 2, 8, 2, 4)


class TestDropout:
    def test_identity_when_not_training(self):
        v = np.ones(100)
        np.testing.assert_array_equal(
            nncore.dropout(v, 0.5, training=False), v)

    def test_inverted_scaling_preserves_mean(self):
        rng = np.random.default_rng(0)
        v = np.ones(200_000)
        out = nncore.dropout(v, 0.8, rng=rng)
        assert np.mean(out) == pytest.approx(1.0, abs=0.01)
        kept = out[out > 0]
        np.testing.assert_allclose(kept, 1 / 0.8)

    def test_bad_keep_prob(self):
        with pytest.raises(ConfigurationError):
            nncore.dropout(np.ones(4), 0.0)
