"""Minimal dense/LSTM engine: forward, BPTT, loss, Adam, init, dropout.

Everything is plain numpy. Per-layer weights are stored concatenated for
speed: W_x is (input_dim, 4*cells) and W_h is (cells, 4*cells), with the
gate order i, f, o, c along the last axis. Per-gate tensors are exposed as
views for quantization and serialization.

The cell recursion is

    i = sigmoid(W_xi x + W_hi h_prev + b_i)
    f = sigmoid(W_xf x + W_hf h_prev + b_f)
    o = sigmoid(W_xo x + W_ho h_prev + b_o)
    c_in = tanh(W_xc x + W_hc h_prev + b_c)
    c = f * c_prev + i * c_in
    h = o * tanh(c)

Batched inputs are (B, T, D); single sequences (T, D) are accepted
everywhere. Dtype follows the parameters (float32 for trained models,
float64 for gradient-check instances).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateInputError, ShapeError

GATE_ORDER = ("i", "f", "o", "c")


def sigmoid(z):
    # piecewise form avoids overflow warnings for saturated gates
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LSTMLayerParams:
    """One LSTM layer; gate order i, f, o, c along the 4*cells axis."""
    W_x: np.ndarray  # (input_dim, 4*cells)
    W_h: np.ndarray  # (cells, 4*cells)
    b: np.ndarray    # (4*cells,)

    @property
    def cells(self) -> int:
        return self.W_h.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_x.shape[0]

    def gate_slice(self, gate: str) -> slice:
        g = GATE_ORDER.index(gate)
        return slice(g * self.cells, (g + 1) * self.cells)

    def gate_tensors(self, gate: str):
        """Views (W_x_gate, W_h_gate, b_gate) for one gate."""
        s = self.gate_slice(gate)
        return self.W_x[:, s], self.W_h[:, s], self.b[s]

    def copy(self) -> "LSTMLayerParams":
        return LSTMLayerParams(self.W_x.copy(), self.W_h.copy(), self.b.copy())


@dataclass
class DenseParams:
    W: np.ndarray  # (classes, cells)
    b: np.ndarray  # (classes,)

    def copy(self) -> "DenseParams":
        return DenseParams(self.W.copy(), self.b.copy())


@dataclass
class CellState:
    h: np.ndarray
    c: np.ndarray


def zero_state(batch: int, cells: int, dtype=np.float64) -> CellState:
    return CellState(h=np.zeros((batch, cells), dtype=dtype),
                     c=np.zeros((batch, cells), dtype=dtype))


def lstm_cell_step(x: np.ndarray, state: CellState,
                   p: LSTMLayerParams) -> CellState:
    """One recursion step. x is (B, input_dim) or (input_dim,)."""
    x = np.atleast_2d(np.asarray(x))
    if x.shape[-1] != p.input_dim:
        raise ShapeError(f"input dim {x.shape[-1]} != layer dim {p.input_dim}")
    H = p.cells
    z = x @ p.W_x + state.h @ p.W_h + p.b
    i = sigmoid(z[:, :H])
    f = sigmoid(z[:, H:2 * H])
    o = sigmoid(z[:, 2 * H:3 * H])
    c_in = np.tanh(z[:, 3 * H:])
    c = f * state.c + i * c_in
    h = o * np.tanh(c)
    return CellState(h=h, c=c)


@dataclass
class LayerCache:
    """Per-timestep activations of one layer needed for BPTT and analysis."""
    x: np.ndarray       # (B, T, input_dim) layer input (after dropout below)
    i: np.ndarray       # (B, T, H)
    f: np.ndarray
    o: np.ndarray
    c_in: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray       # pre-dropout hidden outputs
    mask: np.ndarray | None  # inverted-dropout mask on outputs, or None


def lstm_forward(seq: np.ndarray, layers: list[LSTMLayerParams],
                 keep_prob: float = 1.0, rng=None, training: bool = False):
    """Stacked forward pass.

    Returns (h_last, caches): h_last is the last-timestep top-layer hidden
    vector (after dropout when training), caches hold per-timestep
    activations for BPTT and introspection.
    """
    seq = np.asarray(seq)
    squeeze = seq.ndim == 2
    if squeeze:
        seq = seq[None]
    if seq.ndim != 3:
        raise ShapeError(f"expected (B, T, D) sequence, got {seq.shape}")
    B, T, _ = seq.shape
    if T < 1:
        raise DegenerateInputError("empty sequence")
    dtype = layers[0].W_x.dtype
    x = seq.astype(dtype, copy=False)

    caches = []
    for p in layers:
        H = p.cells
        cache = LayerCache(
            x=x,
            i=np.empty((B, T, H), dtype), f=np.empty((B, T, H), dtype),
            o=np.empty((B, T, H), dtype), c_in=np.empty((B, T, H), dtype),
            c=np.empty((B, T, H), dtype), tanh_c=np.empty((B, T, H), dtype),
            h=np.empty((B, T, H), dtype), mask=None,
        )
        state = zero_state(B, H, dtype)
        for t in range(T):
            z = x[:, t] @ p.W_x + state.h @ p.W_h + p.b
            i = sigmoid(z[:, :H])
            f = sigmoid(z[:, H:2 * H])
            o = sigmoid(z[:, 2 * H:3 * H])
            c_in = np.tanh(z[:, 3 * H:])
            c = f * state.c + i * c_in
            tanh_c = np.tanh(c)
            h = o * tanh_c
            cache.i[:, t], cache.f[:, t], cache.o[:, t] = i, f, o
            cache.c_in[:, t], cache.c[:, t] = c_in, c
            cache.tanh_c[:, t], cache.h[:, t] = tanh_c, h
            state = CellState(h=h, c=c)
        out = cache.h
        if training and keep_prob < 1.0:
            if rng is None:
                rng = np.random.default_rng()
            mask = (rng.random(out.shape) < keep_prob).astype(dtype) / keep_prob
            cache.mask = mask
            out = out * mask
        caches.append(cache)
        x = out

    h_last = x[:, -1]
    if squeeze:
        h_last = h_last[0]
    return h_last, caches


def dense_forward(h: np.ndarray, dense: DenseParams) -> np.ndarray:
    return h @ dense.W.T + dense.b


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, label):
    """Loss and gradient wrt logits.

    Single example: logits (K,), integer label; grad = softmax - onehot.
    Batched: logits (B, K), labels (B,); loss is the batch mean and the
    gradient carries the 1/B factor so downstream parameter gradients are
    minibatch means.
    """
    logits = np.asarray(logits)
    if logits.ndim == 1:
        k = logits.shape[0]
        label = int(label)
        if label >= k or label < 0:
            raise IndexError(f"label {label} out of range for {k} classes")
        p = softmax(logits)
        loss = -np.log(p[label])
        grad = p.copy()
        grad[label] -= 1.0
        return loss, grad
    labels = np.asarray(label)
    b, k = logits.shape
    if labels.max(initial=0) >= k:
        raise IndexError("label out of range")
    p = softmax(logits)
    losses = -np.log(p[np.arange(b), labels])
    grad = p.copy()
    grad[np.arange(b), labels] -= 1.0
    return float(np.mean(losses)), grad / b


def bptt(caches: list[LayerCache], layers: list[LSTMLayerParams],
         dense: DenseParams, grad_logits: np.ndarray):
    """Exact reverse-mode gradients of the scalar loss wrt every parameter.

    grad_logits is dLoss/dlogits, (B, K) or (K,). Returns
    (layer_grads, dense_grads) shaped like the parameters.
    """
    grad_logits = np.atleast_2d(np.asarray(grad_logits))
    top = caches[-1]
    h_top = top.h[:, -1]
    if top.mask is not None:
        h_top = h_top * top.mask[:, -1]

    dW_dense = grad_logits.T @ h_top
    db_dense = grad_logits.sum(axis=0)
    dh_last = grad_logits @ dense.W  # (B, H_top), wrt dropped output

    layer_grads: list[LSTMLayerParams | None] = [None] * len(layers)
    B, T, _ = caches[0].x.shape

    # dh_ext[t]: gradient flowing into this layer's (dropped) output at step t
    dh_ext = np.zeros_like(caches[-1].h)
    dh_ext[:, -1] = dh_last

    for li in range(len(layers) - 1, -1, -1):
        p, cache = layers[li], caches[li]
        H = p.cells
        if cache.mask is not None:
            dh_ext = dh_ext * cache.mask

        dW_x = np.zeros_like(p.W_x)
        dW_h = np.zeros_like(p.W_h)
        db = np.zeros_like(p.b)
        dx = np.empty_like(cache.x)
        dh_rec = np.zeros((B, H), dtype=p.W_x.dtype)
        dc_next = np.zeros((B, H), dtype=p.W_x.dtype)
        dz = np.empty((B, 4 * H), dtype=p.W_x.dtype)

        for t in range(T - 1, -1, -1):
            i, f, o = cache.i[:, t], cache.f[:, t], cache.o[:, t]
            c_in, tanh_c = cache.c_in[:, t], cache.tanh_c[:, t]
            c_prev = cache.c[:, t - 1] if t > 0 else np.zeros((B, H), p.W_x.dtype)
            h_prev = cache.h[:, t - 1] if t > 0 else np.zeros((B, H), p.W_x.dtype)

            dh = dh_ext[:, t] + dh_rec
            do = dh * tanh_c
            dc = dh * o * (1.0 - tanh_c**2) + dc_next
            di = dc * c_in
            dc_in = dc * i
            df = dc * c_prev
            dc_next = dc * f

            dz[:, :H] = di * i * (1.0 - i)
            dz[:, H:2 * H] = df * f * (1.0 - f)
            dz[:, 2 * H:3 * H] = do * o * (1.0 - o)
            dz[:, 3 * H:] = dc_in * (1.0 - c_in**2)

            dW_x += cache.x[:, t].T @ dz
            dW_h += h_prev.T @ dz
            db += dz.sum(axis=0)
            dx[:, t] = dz @ p.W_x.T
            dh_rec = dz @ p.W_h.T

        layer_grads[li] = LSTMLayerParams(W_x=dW_x, W_h=dW_h, b=db)
        dh_ext = dx  # feeds the layer below

    return layer_grads, DenseParams(W=dW_dense, b=db_dense)


@dataclass
class AdamState:
    """First/second-moment accumulators, one slot per parameter array."""
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def param_arrays(layers: list[LSTMLayerParams], dense: DenseParams) -> list:
    """Flat view of all parameter arrays in a fixed order."""
    out = []
    for p in layers:
        out.extend([p.W_x, p.W_h, p.b])
    out.extend([dense.W, dense.b])
    return out


def adam_update(params: list, grads: list, state: AdamState) -> AdamState:
    """Standard Adam with bias correction; updates parameter arrays in place."""
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.t += 1
    b1t = 1.0 - state.beta1 ** state.t
    b2t = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / b1t) / (np.sqrt(v / b2t) + state.eps)
    return state


def init_params(depth: int, cells: int, input_dim: int, n_classes: int,
                seed, dtype=np.float32):
    """Uniform unit-scaling init: W ~ U(-sqrt(3/fan_in), +sqrt(3/fan_in)).

    All biases zero except the forget bias, set to one.
    """
    _validate_arch(depth, cells, input_dim, n_classes)
    rng = np.random.default_rng(seed)

    def uniform(fan_in, shape):
        a = np.sqrt(3.0 / fan_in)
        return rng.uniform(-a, a, size=shape).astype(dtype)

    layers = []
    d = input_dim
    for _ in range(depth):
        p = LSTMLayerParams(
            W_x=uniform(d, (d, 4 * cells)),
            W_h=uniform(cells, (cells, 4 * cells)),
            b=np.zeros(4 * cells, dtype=dtype),
        )
        p.b[p.gate_slice("f")] = 1.0
        layers.append(p)
        d = cells
    dense = DenseParams(W=uniform(cells, (n_classes, cells)),
                        b=np.zeros(n_classes, dtype=dtype))
    return layers, dense


def _validate_arch(depth, cells, input_dim, n_classes):
    if depth < 1:
        raise ConfigurationError("depth must be >= 1")
    if cells < 1:
        raise ConfigurationError("cells must be >= 1")
    if input_dim < 1:
        raise ConfigurationError("input_dim must be >= 1")
    if n_classes < 2:
        raise ConfigurationError("need at least 2 classes")


def param_count(depth: int, cells: int, input_dim: int, n_classes: int) -> int:
    """Total scalar parameter count of the stacked model."""
    _validate_arch(depth, cells, input_dim, n_classes)
    total = 0
    d = input_dim
    for _ in range(depth):
        total += 4 * (cells * (d + cells) + cells)
        d = cells
    total += cells * n_classes + n_classes
    return total


def macs_per_timestep(depth: int, cells: int, input_dim: int) -> int:
    """Multiply-accumulates per LSTM timestep (gate matmuls only)."""
    total = 0
    d = input_dim
    for _ in range(depth):
        total += 4 * cells * (d + cells)
        d = cells
    return total


def dropout(vector: np.ndarray, keep_prob: float, rng=None,
            training: bool = True) -> np.ndarray:
    """Inverted dropout: Bernoulli(keep_prob)/keep_prob mask when training."""
    if keep_prob <= 0 or keep_prob > 1:
        raise ConfigurationError("keep_prob must be in (0, 1]")
    vector = np.asarray(vector)
    if not training or keep_prob == 1.0:
        return vector
    if rng is None:
        rng = np.random.default_rng()
    mask = (rng.random(vector.shape) < keep_prob).astype(vector.dtype)
    return vector * mask / keep_prob


# -- parameter blob serialization ------------------------------------------
# Fixed order: for each layer (bottom to top), for each gate in (i, f, o, c):
# W_x gate block (row-major), W_h gate block, bias block; then dense W
# (row-major) and dense b. Little-endian float32.

def params_to_blob(layers: list[LSTMLayerParams], dense: DenseParams) -> bytes:
    parts = []
    for p in layers:
        for gate in GATE_ORDER:
            wx, wh, b = p.gate_tensors(gate)
            parts.extend([np.ascontiguousarray(wx, dtype="<f4").tobytes(),
                          np.ascontiguousarray(wh, dtype="<f4").tobytes(),
                          np.ascontiguousarray(b, dtype="<f4").tobytes()])
    parts.append(np.ascontiguousarray(dense.W, dtype="<f4").tobytes())
    parts.append(np.ascontiguousarray(dense.b, dtype="<f4").tobytes())
    return b"".join(parts)


def params_from_blob(blob: bytes, depth: int, cells: int, input_dim: int,
                     n_classes: int):
    flat = np.frombuffer(blob, dtype="<f4")
    expected = param_count(depth, cells, input_dim, n_classes)
    if len(flat) != expected:
        raise ShapeError(f"blob holds {len(flat)} floats, expected {expected}")
    pos = 0

    def take(shape):
        nonlocal pos
        n = int(np.prod(shape))
        arr = flat[pos:pos + n].reshape(shape).astype(np.float32)
        pos += n
        return arr

    layers = []
    d = input_dim
    for _ in range(depth):
        p = LSTMLayerParams(
            W_x=np.empty((d, 4 * cells), dtype=np.float32),
            W_h=np.empty((cells, 4 * cells), dtype=np.float32),
            b=np.empty(4 * cells, dtype=np.float32),
        )
        for gate in GATE_ORDER:
            s = p.gate_slice(gate)
            p.W_x[:, s] = take((d, cells))
            p.W_h[:, s] = take((cells, cells))
            p.b[s] = take((cells,))
        layers.append(p)
        d = cells
    dense = DenseParams(W=take((n_classes, cells)), b=take((n_classes,)))
    return layers, dense
