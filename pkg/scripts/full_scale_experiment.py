#!/usr/bin/env python3
"""Full-scale 11-class training run (hours to days on one CPU core).

Reproduces the reference protocol: 11 schemes over a -20..18 dB SNR grid,
82,500 training vectors, a 2x128-cell amplitude-phase model, minibatch 400,
learning rate 0.001, 70 epochs, dropout keep probability 0.8, and training
restricted to SNR >= -10 dB. Not part of the test suite; run offline.
"""

import argparse
from pathlib import Path

from modsense import analysis, datafile, model, sigsynth


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/full")
    ap.add_argument("--epochs", type=int, default=70)
    ap.add_argument("--frames-per-cell", type=int, default=375)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    spec = sigsynth.DatasetSpec(
        schemes=sigsynth.SCHEME_NAMES,
        snr_grid_db=tuple(range(-20, 20, 2)),
        sps_set=(8,), length_set=(128,),
        frames_per_cell=args.frames_per_cell,
        master_seed=0, cfo_max_frac=0.01, sro_max_ppm=50.0,
        enable_fading=True, enable_noise=True)
    ds = sigsynth.generate_dataset(spec)
    datafile.save_dataset(ds, out / "dataset.msd")
    print(f"generated {len(ds)} frames "
          f"({len(ds.train_idx)} train / {len(ds.test_idx)} test)")

    data = model.amp_phase_dataset(ds)
    cfg = model.ClassifierConfig(depth=2, cells=128, input_dim=2,
                                 n_classes=11, keep_prob=0.8, seed=0)
    tcfg = model.TrainConfig(minibatch=400, epochs=args.epochs, lr=0.001,
                             snr_min_train=-10.0)
    trained = model.train(data, cfg, tcfg)
    model.save_model(trained, out / "checkpoint.msm")

    report = model.evaluate(trained, data)
    analysis.emit_eval_report(report, out, run_id="full")
    print(f"overall accuracy {report.overall_accuracy:.3f}; "
          f"high-SNR accuracy {report.accuracy_at(10):.3f}")


if __name__ == "__main__":
    main()
