#!/usr/bin/env python3
"""Quantization study: accuracy and memory footprint per weight scheme.

Trains the desk-scale 4-class model, then evaluates FULL, TW_FA, TW_4BA,
and BIN inference on the high-SNR test frames. Post-training quantization
of this deliberately small model degrades sharply; the table documents it.
"""

import argparse
from pathlib import Path

import numpy as np

from modsense import model, quant, sigsynth


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/quant")
    ap.add_argument("--frames-per-cell", type=int, default=400)
    ap.add_argument("--epochs", type=int, default=25)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    spec = sigsynth.DatasetSpec(
        schemes=("BPSK", "QPSK", "GFSK", "PAM4"),
        snr_grid_db=(0, 6, 12, 18),
        sps_set=(4,), length_set=(128,),
        frames_per_cell=args.frames_per_cell,
        master_seed=7, cfo_max_frac=0.0, enable_noise=True)
    ds = sigsynth.generate_dataset(spec)
    data = model.amp_phase_dataset(ds)
    cfg = model.ClassifierConfig(depth=2, cells=32, input_dim=2,
                                 n_classes=4, keep_prob=1.0, seed=2)
    tcfg = model.TrainConfig(minibatch=100, epochs=args.epochs, lr=0.02,
                             snr_min_train=None)
    trained = model.train(data, cfg, tcfg)

    sel = data.snrs[data.test_idx] >= 12
    idx = data.test_idx[sel]
    seqs = [data.sequences[int(i)] for i in idx]
    truth = data.labels[idx]

    print(f"{'scheme':8s} {'acc@>=12dB':>10s} {'weight bits':>12s} "
          f"{'bits/w':>7s}")
    for scheme in quant.QUANT_SCHEMES:
        qm = quant.quantize_model(trained, scheme)
        preds = quant.quantized_predict_batch(qm, seqs)
        acc = float(np.mean(preds == truth))
        fp = quant.footprint(qm)
        print(f"{scheme:8s} {acc:10.3f} {fp.bits_total:12d} "
              f"{fp.bits_per_weight:7d}")
        if scheme != "FULL":
            quant.save_quantized(qm, out / f"{scheme.lower()}.msq")
    print(f"quantized checkpoints written to {out}")


if __name__ == "__main__":
    main()
