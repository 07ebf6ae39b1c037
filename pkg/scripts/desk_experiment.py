#!/usr/bin/env python3
"""Desk-scale 4-class experiment: synthesize, train, evaluate, emit reports.

Runs in a few minutes on one CPU core. Produces accuracy-vs-SNR and
confusion-matrix CSVs plus a gate saturation dump under --out.
"""

import argparse
from pathlib import Path

from modsense import analysis, datafile, model, sigsynth


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/desk")
    ap.add_argument("--frames-per-cell", type=int, default=400)
    ap.add_argument("--epochs", type=int, default=25)
    ap.add_argument("--lr", type=float, default=0.02)
    ap.add_argument("--seed", type=int, default=2)
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
    datafile.save_dataset(ds, out / "dataset.msd")
    print(f"generated {len(ds)} frames")

    data = model.amp_phase_dataset(ds)
    cfg = model.ClassifierConfig(depth=2, cells=32, input_dim=2,
                                 n_classes=4, keep_prob=1.0, seed=args.seed)
    tcfg = model.TrainConfig(minibatch=100, epochs=args.epochs, lr=args.lr,
                             snr_min_train=None)
    trained = model.train(data, cfg, tcfg)
    model.save_model(trained, out / "checkpoint.msm")
    print(f"final train accuracy {trained.history[-1]['accuracy']:.3f}")

    report = model.evaluate(trained, data)
    analysis.emit_eval_report(report, out, run_id="desk")
    print("accuracy per SNR:")
    for snr, acc in zip(report.snr_grid, report.acc_per_snr):
        print(f"  {snr:+5.1f} dB  {acc:.3f}")
    print(f"high-SNR (>= 12 dB) accuracy: {report.accuracy_at(12):.3f}")

    sat = analysis.gate_saturation(trained, ds.frames[0])
    analysis.emit_saturation(sat, out / "saturation.csv")
    trace = analysis.activation_trace(trained, ds.frames[0])
    analysis.emit_trace(trace, out / "trace_tanh_c.csv")
    print(f"artifacts written to {out}")


if __name__ == "__main__":
    main()
