"""Single-file dataset container: JSON header + float32 interleaved I/Q payload.

Layout: 4-byte magic ``MSD1``, little-endian uint64 header length, UTF-8 JSON
header (spec, per-frame metadata, split indices, payload offsets), then the
payload of interleaved little-endian float32 I/Q pairs, frame-major. The
header JSON is emitted with sorted keys and fixed separators so identical
datasets serialize to identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict

import numpy as np

from .errors import ShapeError
from .sigsynth import Dataset, DatasetSpec, IQFrame

MAGIC = b"MSD1"


def _header_dict(ds: Dataset) -> dict:
    offsets = []
    cursor = 0
    for f in ds.frames:
        offsets.append(cursor)
        cursor += 2 * len(f.samples)  # float32 count
    return {
        "spec": asdict(ds.spec),
        "labels": [f.label for f in ds.frames],
        "snr_db": [float(f.snr_db) for f in ds.frames],
        "sps": [int(f.sps) for f in ds.frames],
        "lengths": [len(f.samples) for f in ds.frames],
        "offsets": offsets,
        "train_idx": [int(i) for i in ds.train_idx],
        "test_idx": [int(i) for i in ds.test_idx],
        "total_floats": cursor,
    }


def save_dataset(ds: Dataset, path) -> None:
    header = json.dumps(_header_dict(ds), sort_keys=True,
                        separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for f in ds.frames:
            iq = np.empty(2 * len(f.samples), dtype="<f4")
            iq[0::2] = f.samples.real
            iq[1::2] = f.samples.imag
            fh.write(iq.tobytes())


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ShapeError(f"{path}: not a dataset file (bad magic)")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        payload = np.frombuffer(fh.read(), dtype="<f4")
    if len(payload) != header["total_floats"]:
        raise ShapeError(f"{path}: truncated payload")

    spec_d = dict(header["spec"])
    for key in ("schemes", "snr_grid_db", "sps_set", "length_set"):
        spec_d[key] = tuple(spec_d[key])
    spec = DatasetSpec(**spec_d)

    frames = []
    for label, snr, sps, length, off in zip(
            header["labels"], header["snr_db"], header["sps"],
            header["lengths"], header["offsets"]):
        chunk = payload[off:off + 2 * length]
        samples = chunk[0::2].astype(np.float64) + 1j * chunk[1::2].astype(np.float64)
        frames.append(IQFrame(samples=samples, label=label, snr_db=snr,
                              sps=sps, meta={"clean": False}))
    return Dataset(spec=spec, frames=frames,
                   train_idx=np.array(header["train_idx"]),
                   test_idx=np.array(header["test_idx"]))
