"""Post-training quantization: ternary weights, reduced-precision activations.

Weight ternarization uses the threshold rule delta = 0.7 * mean(|W|) with a
per-tensor scale alpha = mean(|W_i| : |W_i| > delta). Activations for the
4-bit variant are quantized on a uniform 16-level grid over [-1, 1]; the cell
state itself stays unquantized but is clipped to [-4, 4] so tanh(c) remains
well inside [-1, 1]. The binary variant (sign weights, hard-threshold
activations) is included as a documented-degenerate baseline.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import nncore
from .errors import ConfigurationError, ShapeError
from .model import ClassifierConfig, TrainedModel, predict
from .nncore import GATE_ORDER, DenseParams, LSTMLayerParams

QUANT_SCHEMES = ("FULL", "TW_FA", "TW_4BA", "BIN")
QUANT_MAGIC = b"MSQ1"

CELL_CLIP = 4.0


def ternarize(W: np.ndarray):
    """Ternary tensor T in {-1, 0, +1} and positive scale alpha.

    alpha defaults to 1 when no entry exceeds the threshold (all-zero T).
    """
    W = np.asarray(W)
    delta = 0.7 * np.mean(np.abs(W))
    mask = np.abs(W) > delta
    T = np.sign(W) * mask
    alpha = float(np.mean(np.abs(W[mask]))) if mask.any() else 1.0
    return T.astype(np.float32), alpha


def binarize(W: np.ndarray):
    """Sign tensor in {-1, +1} with absmean scale (degenerate baseline)."""
    W = np.asarray(W)
    T = np.where(W >= 0, 1.0, -1.0)
    alpha = float(np.mean(np.abs(W))) or 1.0
    return T.astype(np.float32), alpha


def quantize_act_4bit(x: np.ndarray) -> np.ndarray:
    """Uniform 16-level quantizer on [-1, 1]: round(x * 7.5) / 7.5, clamped."""
    return np.clip(np.round(np.asarray(x) * 7.5) / 7.5, -1.0, 1.0)


def _binarize_act(x: np.ndarray, signed: bool) -> np.ndarray:
    if signed:
        return np.where(np.asarray(x) >= 0, 1.0, -1.0)
    return (np.asarray(x) >= 0.5).astype(np.float64)


@dataclass
class QuantizedLayer:
    """Per-gate ternary tensors and scales for one LSTM layer."""
    T_x: dict      # gate -> ternary (input_dim, cells)
    T_h: dict      # gate -> ternary (cells, cells)
    alpha_x: dict  # gate -> scale
    alpha_h: dict
    b: np.ndarray  # full-precision biases (4*cells,)


@dataclass
class QuantizedModel:
    scheme: str
    config: ClassifierConfig
    layers: list            # QuantizedLayer per LSTM layer
    dense_T: np.ndarray
    dense_alpha: float
    dense_b: np.ndarray
    full_model: TrainedModel | None = None  # kept for the FULL pass-through

    def dequantized_layers(self) -> list[LSTMLayerParams]:
        out = []
        for ql in self.layers:
            cells = ql.T_h["i"].shape[0]
            d = ql.T_x["i"].shape[0]
            p = LSTMLayerParams(
                W_x=np.empty((d, 4 * cells), dtype=np.float64),
                W_h=np.empty((cells, 4 * cells), dtype=np.float64),
                b=ql.b.astype(np.float64),
            )
            for gate in GATE_ORDER:
                s = p.gate_slice(gate)
                p.W_x[:, s] = ql.alpha_x[gate] * ql.T_x[gate]
                p.W_h[:, s] = ql.alpha_h[gate] * ql.T_h[gate]
            out.append(p)
        return out

    def dequantized_dense(self) -> DenseParams:
        return DenseParams(W=self.dense_alpha * self.dense_T.astype(np.float64),
                           b=self.dense_b.astype(np.float64))


def quantize_model(model: TrainedModel, scheme: str) -> QuantizedModel:
    """Quantize a trained model's weights per the selected scheme."""
    if scheme not in QUANT_SCHEMES:
        raise ConfigurationError(
            f"unknown quantization scheme {scheme!r}; one of {QUANT_SCHEMES}")
    reduce_w = binarize if scheme == "BIN" else ternarize
    qlayers = []
    for p in model.layers:
        ql = QuantizedLayer(T_x={}, T_h={}, alpha_x={}, alpha_h={},
                            b=np.asarray(p.b, dtype=np.float32).copy())
        for gate in GATE_ORDER:
            wx, wh, _ = p.gate_tensors(gate)
            ql.T_x[gate], ql.alpha_x[gate] = reduce_w(wx)
            ql.T_h[gate], ql.alpha_h[gate] = reduce_w(wh)
        qlayers.append(ql)
    dT, dalpha = reduce_w(model.dense.W)
    return QuantizedModel(scheme=scheme, config=model.config, layers=qlayers,
                          dense_T=dT, dense_alpha=dalpha,
                          dense_b=np.asarray(model.dense.b,
                                             dtype=np.float32).copy(),
                          full_model=model)


def _quantized_lstm_forward(seq, layers, act_bits: int | None):
    """Forward recursion with optional activation quantization per step."""
    if act_bits == 4:
        qact = quantize_act_4bit
        qgate = quantize_act_4bit
    elif act_bits == 1:
        qact = lambda x: _binarize_act(x, signed=True)
        qgate = lambda x: _binarize_act(x, signed=False)
    else:
        qact = qgate = lambda x: x

    x = np.asarray(seq, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    B, T, _ = x.shape
    for p in layers:
        H = p.cells
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        out = np.empty((B, T, H))
        for t in range(T):
            z = x[:, t] @ p.W_x + h @ p.W_h + p.b
            i = qgate(nncore.sigmoid(z[:, :H]))
            f = qgate(nncore.sigmoid(z[:, H:2 * H]))
            o = qgate(nncore.sigmoid(z[:, 2 * H:3 * H]))
            c_in = qact(np.tanh(z[:, 3 * H:]))
            c = np.clip(f * c + i * c_in, -CELL_CLIP, CELL_CLIP)
            h = qact(o * qact(np.tanh(c)))
            out[:, t] = h
        x = out
    return x[:, -1]


def quantized_forward(qmodel: QuantizedModel, seq: np.ndarray) -> np.ndarray:
    """Probability vector from the quantized recursion.

    FULL is an exact pass-through to the unquantized model. TW_FA runs the
    standard recursion with dequantized (alpha * T) weights. TW_4BA
    additionally quantizes every gate output, c_in, tanh(c), and h to the
    4-bit grid. The dense head always produces full-precision logits.
    """
    seq = np.asarray(seq)
    if seq.ndim != 2 or seq.shape[1] != qmodel.config.input_dim:
        raise ShapeError(
            f"expected (T, {qmodel.config.input_dim}) sequence, got {seq.shape}")
    if qmodel.scheme == "FULL":
        if qmodel.full_model is None:
            raise ConfigurationError("FULL scheme requires the original model")
        return predict(qmodel.full_model, seq)

    layers = qmodel.dequantized_layers()
    act_bits = {"TW_FA": None, "TW_4BA": 4, "BIN": 1}[qmodel.scheme]
    h = _quantized_lstm_forward(seq[None], layers, act_bits)[0]
    dense = qmodel.dequantized_dense()
    logits = h @ dense.W.T + dense.b
    return nncore.softmax(logits)


def quantized_predict_batch(qmodel: QuantizedModel, sequences: list) -> np.ndarray:
    """Argmax class indices for many sequences, batched per length bucket."""
    if qmodel.scheme == "FULL":
        if qmodel.full_model is None:
            raise ConfigurationError("FULL scheme requires the original model")
        from .model import predict_batch
        return predict_batch(qmodel.full_model, sequences)
    layers = qmodel.dequantized_layers()
    dense = qmodel.dequantized_dense()
    act_bits = {"TW_FA": None, "TW_4BA": 4, "BIN": 1}[qmodel.scheme]
    preds = np.empty(len(sequences), dtype=int)
    buckets: dict[int, list] = {}
    for idx, s in enumerate(sequences):
        buckets.setdefault(len(s), []).append(idx)
    for idx in buckets.values():
        idx = np.array(idx)
        for s in range(0, len(idx), 512):
            chunk = idx[s:s + 512]
            x = np.stack([sequences[i] for i in chunk])
            h = _quantized_lstm_forward(x, layers, act_bits)
            preds[chunk] = np.argmax(h @ dense.W.T + dense.b, axis=1)
    return preds


@dataclass
class Footprint:
    weight_count: int
    bits_total: int          # weight payload only
    macs_per_timestep: int
    scale_overhead_bits: int  # float32 per-tensor scales, reported separately
    bits_per_weight: int


def footprint(model, scheme: str | None = None) -> Footprint:
    """Weight memory and per-timestep MAC accounting."""
    if isinstance(model, QuantizedModel):
        cfg = model.config
        scheme = model.scheme
    else:
        cfg = model.config
        scheme = scheme or "FULL"
    count = nncore.param_count(cfg.depth, cfg.cells, cfg.input_dim,
                               cfg.n_classes)
    bpw = {"FULL": 32, "TW_FA": 2, "TW_4BA": 2, "BIN": 1}[scheme]
    n_tensors = 8 * cfg.depth + 1  # per-gate W_x/W_h per layer + dense W
    overhead = 0 if scheme == "FULL" else 32 * n_tensors
    return Footprint(
        weight_count=count,
        bits_total=count * bpw,
        macs_per_timestep=nncore.macs_per_timestep(cfg.depth, cfg.cells,
                                                   cfg.input_dim),
        scale_overhead_bits=overhead,
        bits_per_weight=bpw,
    )


# -- quantized checkpoint: 2 bits per weight, packed little-endian ---------
# Code map: 0 -> 0b00, +1 -> 0b01, -1 -> 0b11. Entry j of a group of four
# occupies bits 2j..2j+1 of its byte. Tensor order matches the full-precision
# blob: per layer, per gate (i, f, o, c): T_x then T_h; then dense T.
# Biases are stored full precision after the packed section.

_CODES = {0.0: 0, 1.0: 1, -1.0: 3}
_DECODE = {0: 0.0, 1: 1.0, 3: -1.0}


def _pack_ternary(T: np.ndarray) -> bytes:
    flat = np.asarray(T, dtype=np.float64).ravel()
    codes = np.zeros(len(flat), dtype=np.uint8)
    codes[flat > 0] = 1
    codes[flat < 0] = 3
    pad = (-len(codes)) % 4
    codes = np.concatenate([codes, np.zeros(pad, dtype=np.uint8)])
    groups = codes.reshape(-1, 4)
    packed = (groups[:, 0] | (groups[:, 1] << 2)
              | (groups[:, 2] << 4) | (groups[:, 3] << 6))
    return packed.astype(np.uint8).tobytes()


def _unpack_ternary(buf: bytes, shape) -> np.ndarray:
    n = int(np.prod(shape))
    packed = np.frombuffer(buf, dtype=np.uint8)
    codes = np.empty(len(packed) * 4, dtype=np.uint8)
    codes[0::4] = packed & 3
    codes[1::4] = (packed >> 2) & 3
    codes[2::4] = (packed >> 4) & 3
    codes[3::4] = (packed >> 6) & 3
    vals = np.zeros(n, dtype=np.float32)
    c = codes[:n]
    vals[c == 1] = 1.0
    vals[c == 3] = -1.0
    return vals.reshape(shape)


def _tensor_list(qmodel: QuantizedModel):
    out = []
    for ql in qmodel.layers:
        for gate in GATE_ORDER:
            out.append(("x", gate, ql.T_x[gate], ql.alpha_x[gate]))
            out.append(("h", gate, ql.T_h[gate], ql.alpha_h[gate]))
    out.append(("dense", "", qmodel.dense_T, qmodel.dense_alpha))
    return out


def save_quantized(qmodel: QuantizedModel, path) -> None:
    if qmodel.scheme == "FULL":
        raise ConfigurationError("FULL models use the standard checkpoint")
    packed = b"".join(_pack_ternary(t) for _, _, t, _ in _tensor_list(qmodel))
    biases = b"".join(
        np.ascontiguousarray(ql.b, dtype="<f4").tobytes()
        for ql in qmodel.layers)
    biases += np.ascontiguousarray(qmodel.dense_b, dtype="<f4").tobytes()
    manifest = {
        "scheme": qmodel.scheme,
        "config": asdict(qmodel.config),
        "alphas": [a for _, _, _, a in _tensor_list(qmodel)],
        "packed_bytes": len(packed),
    }
    header = json.dumps(manifest, sort_keys=True,
                        separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(QUANT_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(packed)
        fh.write(biases)


def load_quantized(path) -> QuantizedModel:
    with open(path, "rb") as fh:
        if fh.read(4) != QUANT_MAGIC:
            raise ShapeError(f"{path}: not a quantized checkpoint (bad magic)")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        manifest = json.loads(fh.read(hlen).decode("utf-8"))
        packed = fh.read(manifest["packed_bytes"])
        biases = np.frombuffer(fh.read(), dtype="<f4")

    cfg = ClassifierConfig(**manifest["config"])
    alphas = list(manifest["alphas"])
    d = cfg.input_dim
    pos = 0
    bpos = 0

    def take_packed(shape):
        nonlocal pos
        nbytes = (int(np.prod(shape)) + 3) // 4
        t = _unpack_ternary(packed[pos:pos + nbytes], shape)
        pos += nbytes
        return t

    layers = []
    ai = iter(alphas)
    for _ in range(cfg.depth):
        ql = QuantizedLayer(T_x={}, T_h={}, alpha_x={}, alpha_h={},
                            b=None)
        for gate in GATE_ORDER:
            ql.T_x[gate] = take_packed((d, cfg.cells))
            ql.alpha_x[gate] = next(ai)
            ql.T_h[gate] = take_packed((cfg.cells, cfg.cells))
            ql.alpha_h[gate] = next(ai)
        ql.b = biases[bpos:bpos + 4 * cfg.cells].astype(np.float32)
        bpos += 4 * cfg.cells
        layers.append(ql)
        d = cfg.cells
    dense_T = take_packed((cfg.n_classes, cfg.cells))
    dense_alpha = next(ai)
    dense_b = biases[bpos:bpos + cfg.n_classes].astype(np.float32)
    return QuantizedModel(scheme=manifest["scheme"], config=cfg,
                          layers=layers, dense_T=dense_T,
                          dense_alpha=dense_alpha, dense_b=dense_b)
