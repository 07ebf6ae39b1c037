"""Model introspection: gate saturation statistics, activation traces, CSV emission.

A gate is left saturated when its sigmoid activation is below 0.1 and right
saturated above 0.9; fractions are counted over the timesteps of one frame.
All operations are pure reads of the model.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import nncore
from .errors import ModsenseError
from .features import to_amp_phase
from .model import TrainedModel
from .sigsynth import IQFrame

LEFT_THRESHOLD = 0.1
RIGHT_THRESHOLD = 0.9

GATES = ("i", "f", "o")


@dataclass
class GateSaturation:
    """Per (layer, cell, gate) saturation fractions; gate axis order i, f, o."""
    left: np.ndarray   # (depth, cells, 3) in [0, 1]
    right: np.ndarray  # (depth, cells, 3)
    left_threshold: float = LEFT_THRESHOLD
    right_threshold: float = RIGHT_THRESHOLD


@dataclass
class ActivationTrace:
    """Per-layer temporal activations plus the input rows for plotting."""
    inputs: np.ndarray       # (T, input_dim)
    tanh_c: list             # per layer (T, cells), entries in (-1, 1)
    gates: list              # per layer (T, cells, 3), sigmoid activations


def _features_of(model: TrainedModel, frame) -> np.ndarray:
    if isinstance(frame, IQFrame):
        return to_amp_phase(frame)
    return np.asarray(frame)


def _run_instrumented(model: TrainedModel, frame):
    seq = _features_of(model, frame)
    _, caches = nncore.lstm_forward(seq, model.layers)
    return seq, caches


def gate_saturation(model: TrainedModel, frame,
                    left_threshold: float = LEFT_THRESHOLD,
                    right_threshold: float = RIGHT_THRESHOLD) -> GateSaturation:
    """Fractions of timesteps each gate spends left/right saturated."""
    _, caches = _run_instrumented(model, frame)
    depth = len(caches)
    cells = caches[0].i.shape[-1]
    left = np.zeros((depth, cells, 3))
    right = np.zeros((depth, cells, 3))
    for li, cache in enumerate(caches):
        for gi, gate in enumerate(GATES):
            act = getattr(cache, gate)[0]  # (T, cells)
            left[li, :, gi] = np.mean(act < left_threshold, axis=0)
            right[li, :, gi] = np.mean(act > right_threshold, axis=0)
    return GateSaturation(left=left, right=right,
                          left_threshold=left_threshold,
                          right_threshold=right_threshold)


def activation_trace(model: TrainedModel, frame) -> ActivationTrace:
    """tanh(c) and gate activations per cell per timestep, with the inputs."""
    seq, caches = _run_instrumented(model, frame)
    tanh_c = [cache.tanh_c[0].copy() for cache in caches]
    gates = [np.stack([getattr(cache, g)[0] for g in GATES], axis=-1)
             for cache in caches]
    return ActivationTrace(inputs=seq, tanh_c=tanh_c, gates=gates)


def saturation_from_trace(trace: ActivationTrace,
                          left_threshold: float = LEFT_THRESHOLD,
                          right_threshold: float = RIGHT_THRESHOLD) -> GateSaturation:
    """Recompute saturation fractions from an emitted trace (two-path check)."""
    depth = len(trace.gates)
    cells = trace.gates[0].shape[1]
    left = np.zeros((depth, cells, 3))
    right = np.zeros((depth, cells, 3))
    for li, acts in enumerate(trace.gates):
        left[li] = np.mean(acts < left_threshold, axis=0)
        right[li] = np.mean(acts > right_threshold, axis=0)
    return GateSaturation(left=left, right=right,
                          left_threshold=left_threshold,
                          right_threshold=right_threshold)


# -- CSV emission ----------------------------------------------------------

def _write_rows(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise ModsenseError(f"cannot write {path}: {exc}") from exc


def emit_eval_report(report, outdir, run_id: str = "run") -> list:
    """Write per-SNR accuracy and confusion-matrix CSVs; returns paths."""
    from pathlib import Path
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    snr_path = outdir / f"{run_id}_accuracy_vs_snr.csv"
    _write_rows(snr_path, ["snr_db", "accuracy"],
                [[f"{s:g}", f"{a:.6f}"]
                 for s, a in zip(report.snr_grid, report.acc_per_snr)])

    conf_path = outdir / f"{run_id}_confusion.csv"
    header = ["truth"] + list(report.class_names)
    rows = [[name] + [f"{v:.6f}" for v in row]
            for name, row in zip(report.class_names, report.confusion)]
    _write_rows(conf_path, header, rows)
    return [snr_path, conf_path]


def emit_saturation(sat: GateSaturation, path) -> None:
    rows = []
    depth, cells, _ = sat.left.shape
    for li in range(depth):
        for ci in range(cells):
            for gi, gate in enumerate(GATES):
                rows.append([li, ci, gate,
                             f"{sat.left[li, ci, gi]:.6f}",
                             f"{sat.right[li, ci, gi]:.6f}"])
    _write_rows(path, ["layer", "cell", "gate", "left_frac", "right_frac"],
                rows)


def emit_trace(trace: ActivationTrace, path) -> None:
    """One row per (layer, timestep): tanh(c) of every cell, then the inputs."""
    rows = []
    t_steps, input_dim = trace.inputs.shape
    for li, mat in enumerate(trace.tanh_c):
        for t in range(t_steps):
            rows.append([li, t]
                        + [f"{v:.6f}" for v in trace.inputs[t]]
                        + [f"{v:.6f}" for v in mat[t]])
    cells = trace.tanh_c[0].shape[1]
    header = (["layer", "t"]
              + [f"input_{d}" for d in range(input_dim)]
              + [f"tanh_c_{c}" for c in range(cells)])
    _write_rows(path, header, rows)


def emit_trace_gates(trace: ActivationTrace, path) -> None:
    """Gate activations per (layer, timestep, cell), gate columns i, f, o."""
    rows = []
    for li, acts in enumerate(trace.gates):
        t_steps, cells, _ = acts.shape
        for t in range(t_steps):
            for c in range(cells):
                rows.append([li, t, c] + [f"{v:.8f}" for v in acts[t, c]])
    _write_rows(path, ["layer", "t", "cell", "gate_i", "gate_f", "gate_o"],
                rows)
