"""Command-line entry point.

Subcommands: gen, train, eval, quantize, gates, scan, bench, export-features.
Each run takes an optional JSON config file (--config); command-line flags
override file values. The resolved configuration is written next to the
outputs so any run can be reproduced bit-for-bit from its artifacts.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 validation error.
The MODSENSE_OUT environment variable sets the default output root.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, datafile, features, model as model_mod, quant, sigsynth
from .errors import ModsenseError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


def _out_root() -> Path:
    return Path(os.environ.get("MODSENSE_OUT", "."))


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _resolve(cfg_file: dict, overrides: dict) -> dict:
    resolved = dict(cfg_file)
    for key, val in overrides.items():
        if val is not None:
            resolved[key] = val
    return resolved


def _write_resolved(resolved: dict, outdir: Path, name: str) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / name, "w") as fh:
        json.dump(resolved, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _dataset_spec(resolved: dict) -> sigsynth.DatasetSpec:
    return sigsynth.DatasetSpec(
        schemes=tuple(resolved.get("schemes", sigsynth.SCHEME_NAMES)),
        snr_grid_db=tuple(resolved.get("snr_grid_db", range(-20, 20, 2))),
        sps_set=tuple(resolved.get("sps_set", (4,))),
        length_set=tuple(resolved.get("length_set", (128,))),
        frames_per_cell=int(resolved.get("frames_per_cell", 100)),
        master_seed=int(resolved.get("master_seed", 0)),
        cfo_max_frac=float(resolved.get("cfo_max_frac", 0.01)),
        sro_max_ppm=float(resolved.get("sro_max_ppm", 0.0)),
        enable_fading=bool(resolved.get("enable_fading", False)),
        enable_noise=bool(resolved.get("enable_noise", True)),
    )


def _sequence_dataset(ds, kind: str, resolved: dict):
    if kind == "amp_phase":
        return model_mod.amp_phase_dataset(ds)
    if kind == "raw_iq":
        return model_mod.raw_iq_dataset(ds)
    if kind == "psd":
        return model_mod.psd_dataset(
            ds, fft_size=resolved.get("psd_fft_size"),
            avg_factor=int(resolved.get("psd_avg_factor", 1)))
    raise ModsenseError(f"unknown feature kind {kind!r}")


def cmd_gen(args) -> int:
    resolved = _resolve(_load_config(args.config), {
        "frames_per_cell": args.frames_per_cell,
        "master_seed": args.seed,
    })
    spec = _dataset_spec(resolved)
    ds = sigsynth.generate_dataset(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    datafile.save_dataset(ds, out)
    _write_resolved(resolved, out.parent, out.stem + ".config.json")
    print(f"wrote {len(ds.frames)} frames to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    resolved = _resolve(_load_config(args.config), {
        "features": args.features, "depth": args.depth, "cells": args.cells,
        "epochs": args.epochs, "minibatch": args.minibatch, "lr": args.lr,
        "seed": args.seed, "snr_min_train": args.snr_min_train,
    })
    ds = datafile.load_dataset(args.dataset)
    kind = resolved.get("features", "amp_phase")
    data = _sequence_dataset(ds, kind, resolved)

    cfg = model_mod.ClassifierConfig(
        depth=int(resolved.get("depth", 2)),
        cells=int(resolved.get("cells", 128)),
        input_dim=data.input_dim,
        n_classes=len(data.class_names),
        keep_prob=float(resolved.get("keep_prob", 0.8)),
        seed=int(resolved.get("seed", 0)))
    tcfg = model_mod.TrainConfig(
        minibatch=int(resolved.get("minibatch", 400)),
        epochs=int(resolved.get("epochs", 70)),
        lr=float(resolved.get("lr", 0.001)),
        snr_min_train=resolved.get("snr_min_train", -10.0))

    trained = model_mod.train(data, cfg, tcfg)
    outdir = Path(args.out) if args.out else _out_root() / "train"
    outdir.mkdir(parents=True, exist_ok=True)
    model_mod.save_model(trained, outdir / "checkpoint.msm")
    with open(outdir / "history.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "accuracy"])
        for e, row in enumerate(trained.history):
            w.writerow([e, f"{row['loss']:.6f}", f"{row['accuracy']:.6f}"])
    _write_resolved(resolved, outdir, "train.config.json")
    final = trained.history[-1]
    print(f"trained {cfg.depth}x{cfg.cells} on {kind}: "
          f"final loss {final['loss']:.4f}, accuracy {final['accuracy']:.3f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    resolved = _resolve(_load_config(args.config), {"features": args.features})
    trained = model_mod.load_model(args.model)
    ds = datafile.load_dataset(args.dataset)
    kind = resolved.get("features",
                        trained.provenance.get("feature_kind", "amp_phase"))
    data = _sequence_dataset(ds, kind, resolved)
    report = model_mod.evaluate(trained, data)
    outdir = Path(args.out) if args.out else _out_root() / "eval"
    paths = analysis.emit_eval_report(report, outdir, run_id=args.run_id)
    with open(outdir / f"{args.run_id}_summary.json", "w") as fh:
        json.dump({"overall_accuracy": report.overall_accuracy,
                   "classes": list(report.class_names)}, fh, indent=2)
        fh.write("\n")
    _write_resolved(resolved, outdir, "eval.config.json")
    print(f"overall accuracy {report.overall_accuracy:.3f}; "
          f"wrote {', '.join(str(p) for p in paths)}")
    return EXIT_OK


def cmd_quantize(args) -> int:
    trained = model_mod.load_model(args.model)
    qm = quant.quantize_model(trained, args.scheme)
    outdir = Path(args.out) if args.out else _out_root() / "quantize"
    outdir.mkdir(parents=True, exist_ok=True)
    quant.save_quantized(qm, outdir / "quantized.msq")
    fp = quant.footprint(qm)
    with open(outdir / "footprint.json", "w") as fh:
        json.dump({"scheme": args.scheme, "weight_count": fp.weight_count,
                   "bits_total": fp.bits_total,
                   "bits_per_weight": fp.bits_per_weight,
                   "scale_overhead_bits": fp.scale_overhead_bits,
                   "macs_per_timestep": fp.macs_per_timestep}, fh, indent=2)
        fh.write("\n")
    _write_resolved({"scheme": args.scheme, "model": str(args.model)},
                    outdir, "quantize.config.json")
    print(f"{args.scheme}: {fp.weight_count} weights, {fp.bits_total} bits")
    return EXIT_OK


def cmd_gates(args) -> int:
    trained = model_mod.load_model(args.model)
    ds = datafile.load_dataset(args.dataset)
    frame = ds.frames[args.frame_index]
    sat = analysis.gate_saturation(trained, frame)
    trace = analysis.activation_trace(trained, frame)
    outdir = Path(args.out) if args.out else _out_root() / "gates"
    outdir.mkdir(parents=True, exist_ok=True)
    analysis.emit_saturation(sat, outdir / "saturation.csv")
    analysis.emit_trace(trace, outdir / "trace_tanh_c.csv")
    analysis.emit_trace_gates(trace, outdir / "trace_gates.csv")
    _write_resolved({"model": str(args.model), "dataset": str(args.dataset),
                     "frame_index": args.frame_index}, outdir,
                    "gates.config.json")
    print(f"wrote saturation and trace CSVs to {outdir}")
    return EXIT_OK


def cmd_scan(args) -> int:
    resolved = _resolve(_load_config(args.config), {
        "psd_fft_size": args.fft_size, "psd_avg_factor": args.avg_factor,
    })
    ds = datafile.load_dataset(args.dataset)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    train_set = set(int(i) for i in ds.train_idx)
    rows = []
    for idx, frame in enumerate(ds.frames):
        psd = features.psd_from_frame(
            frame, fft_size=resolved.get("psd_fft_size"),
            avg_factor=int(resolved.get("psd_avg_factor", 1)))
        split = "train" if idx in train_set else "test"
        rows.append([frame.label, f"{frame.snr_db:g}", split]
                    + [f"{v:.6e}" for v in psd])
    n_bins = len(rows[0]) - 3
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "snr_db", "split"]
                   + [f"bin_{i}" for i in range(n_bins)])
        w.writerows(rows)
    _write_resolved(resolved, out.parent, out.stem + ".config.json")
    print(f"wrote {len(rows)} PSD vectors to {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    trained = model_mod.load_model(args.model)
    rng = np.random.default_rng(0)
    seqs = [np.column_stack([
        np.abs(rng.normal(size=args.length)),
        rng.uniform(-1, 1, size=args.length)]).astype(np.float32)[:, :trained.config.input_dim]
        for _ in range(args.frames)]

    def rate(fn):
        start = time.perf_counter()
        for s in seqs:
            fn(s)
        return args.frames / (time.perf_counter() - start)

    results = {"FULL": rate(lambda s: model_mod.predict(trained, s))}
    for scheme in ("TW_FA", "TW_4BA"):
        qm = quant.quantize_model(trained, scheme)
        results[scheme] = rate(lambda s, q=qm: quant.quantized_forward(q, s))

    outdir = Path(args.out) if args.out else _out_root() / "bench"
    outdir.mkdir(parents=True, exist_ok=True)
    payload = {
        "classifications_per_second": results,
        "host": {"platform": platform.platform(),
                 "machine": platform.machine(),
                 "python": platform.python_version()},
        "note": ("host-dependent microbenchmark; numbers are not comparable "
                 "across machines or to published hardware figures"),
    }
    with open(outdir / "bench.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    for scheme, cps in results.items():
        print(f"{scheme}: {cps:.1f} classifications/s")
    print(payload["note"])
    return EXIT_OK


def cmd_export_features(args) -> int:
    ds = datafile.load_dataset(args.dataset)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for frame in ds.frames:
        if args.mode == "psd":
            vec = features.psd_from_frame(frame)
        else:
            vec = features.to_amp_phase(frame).ravel()
        rows.append([frame.label, f"{frame.snr_db:g}"]
                    + [f"{v:.6e}" for v in vec])
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "snr_db"]
                   + [f"f_{i}" for i in range(len(rows[0]) - 2)])
        w.writerows(rows)
    print(f"wrote {len(rows)} feature rows to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="modsense",
        description="Modulation classification and spectrum sensing toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="synthesize a dataset file")
    g.add_argument("--config")
    g.add_argument("--out", required=True)
    g.add_argument("--frames-per-cell", dest="frames_per_cell", type=int)
    g.add_argument("--seed", type=int)
    g.set_defaults(fn=cmd_gen)

    t = sub.add_parser("train", help="train a classifier on a dataset file")
    t.add_argument("--config")
    t.add_argument("--dataset", required=True)
    t.add_argument("--out")
    t.add_argument("--features", choices=("amp_phase", "raw_iq", "psd"))
    t.add_argument("--depth", type=int)
    t.add_argument("--cells", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--minibatch", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--snr-min-train", dest="snr_min_train", type=float)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    e.add_argument("--config")
    e.add_argument("--model", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--out")
    e.add_argument("--features", choices=("amp_phase", "raw_iq", "psd"))
    e.add_argument("--run-id", default="run")
    e.set_defaults(fn=cmd_eval)

    q = sub.add_parser("quantize", help="quantize a trained checkpoint")
    q.add_argument("--model", required=True)
    q.add_argument("--scheme", choices=("TW_FA", "TW_4BA", "BIN"),
                   default="TW_4BA")
    q.add_argument("--out")
    q.set_defaults(fn=cmd_quantize)

    ga = sub.add_parser("gates", help="gate saturation and activation traces")
    ga.add_argument("--model", required=True)
    ga.add_argument("--dataset", required=True)
    ga.add_argument("--frame-index", dest="frame_index", type=int, default=0)
    ga.add_argument("--out")
    ga.set_defaults(fn=cmd_gates)

    s = sub.add_parser("scan", help="convert an IQ dataset to PSD vectors")
    s.add_argument("--config")
    s.add_argument("--dataset", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--fft-size", dest="fft_size", type=int)
    s.add_argument("--avg-factor", dest="avg_factor", type=int)
    s.set_defaults(fn=cmd_scan)

    b = sub.add_parser("bench", help="inference throughput microbenchmark")
    b.add_argument("--model", required=True)
    b.add_argument("--frames", type=int, default=50)
    b.add_argument("--length", type=int, default=128)
    b.add_argument("--out")
    b.set_defaults(fn=cmd_bench)

    x = sub.add_parser("export-features",
                       help="dump amp-phase or PSD feature CSVs")
    x.add_argument("--dataset", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--mode", choices=("amp_phase", "psd"),
                   default="amp_phase")
    x.set_defaults(fn=cmd_export_features)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        print(f"error: missing input file: {exc.filename}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ModsenseError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
