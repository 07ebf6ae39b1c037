"""Amplitude-phase feature extraction and the averaged magnitude-FFT scan.

The classifier input for IQ data is a per-timestep [amplitude, phase] matrix:
amplitude L2-normalized over the frame, phase in [-1, 1] (radians / pi). For
bandwidth-limited sensors, a sequential scan mixes a wideband source down to
each center frequency in turn and concatenates averaged magnitude-FFT rows.

FFT convention: unnormalized forward transform, raw magnitudes. The averaging
uses exactly M blocks per segment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateInputError, ShapeError, TruncationError
from .sigsynth import IQFrame


def to_amp_phase(frame: IQFrame) -> np.ndarray:
    """Per-timestep [amplitude, phase] rows; L2-normalized amplitude.

    amplitude_t = |sample_t| / ||amplitude||_2, phase_t = atan2(Q, I) / pi.
    """
    x = np.asarray(frame.samples)
    if len(x) == 0:
        raise DegenerateInputError("empty frame")
    amp = np.abs(x)
    norm = np.linalg.norm(amp)
    if norm == 0:
        raise DegenerateInputError("all-zero frame: L2 norm undefined")
    phase = np.arctan2(x.imag, x.real) / np.pi
    return np.column_stack([amp / norm, phase])


def raw_iq_features(frame: IQFrame) -> np.ndarray:
    """Per-timestep [I, Q] rows, L2-normalized over the frame (ablation input)."""
    x = np.asarray(frame.samples)
    if len(x) == 0:
        raise DegenerateInputError("empty frame")
    norm = np.linalg.norm(np.abs(x))
    if norm == 0:
        raise DegenerateInputError("all-zero frame: L2 norm undefined")
    return np.column_stack([x.real / norm, x.imag / norm])


def averaged_magnitude_fft(segments: np.ndarray) -> np.ndarray:
    """Elementwise mean over M segments of |FFT(segment)|, natural bin order."""
    segments = np.asarray(segments)
    if segments.ndim == 1:
        segments = segments[None, :]
    if segments.ndim != 2:
        raise ShapeError(f"expected (M, fft_size) segments, got {segments.shape}")
    return np.mean(np.abs(np.fft.fft(segments, axis=1)), axis=0)


@dataclass(frozen=True)
class ScanConfig:
    """Sequential-scan settings: per-band dwell is M blocks of fft_size samples."""
    fft_size: int = 256
    avg_factor: int = 5
    center_freqs: tuple = (0.0,)

    def __post_init__(self):
        if self.fft_size < 2 or self.fft_size & (self.fft_size - 1):
            raise ConfigurationError("fft_size must be a power of two >= 2")
        if self.avg_factor < 1:
            raise ConfigurationError("avg_factor must be >= 1")
        if any(b <= a for a, b in zip(self.center_freqs, self.center_freqs[1:])):
            raise ConfigurationError("center_freqs must be strictly increasing")

    @property
    def segment_count(self) -> int:
        return len(self.center_freqs)

    @property
    def dwell(self) -> int:
        return self.avg_factor * self.fft_size


def sequential_scan(wideband: np.ndarray, cfg: ScanConfig) -> np.ndarray:
    """Concatenated averaged magnitude spectra from a sequentially retuned scan.

    For each center frequency in order, the source is mixed down by that
    frequency, M consecutive fft_size-sample blocks are taken starting at the
    running time cursor, and their averaged magnitude FFT appended. Segments
    are captured sequentially, never simultaneously; total samples consumed is
    segment_count * M * fft_size.
    """
    wideband = np.asarray(wideband, dtype=complex)
    needed = cfg.segment_count * cfg.dwell
    if len(wideband) < needed:
        raise TruncationError(
            f"scan needs {needed} samples, source has {len(wideband)}")
    rows = []
    cursor = 0
    for f_i in cfg.center_freqs:
        t = np.arange(cursor, cursor + cfg.dwell)
        block = wideband[cursor:cursor + cfg.dwell] * np.exp(-2j * np.pi * f_i * t)
        segs = block.reshape(cfg.avg_factor, cfg.fft_size)
        rows.append(averaged_magnitude_fft(segs))
        cursor += cfg.dwell
    return np.concatenate(rows)


def psd_features(psd: np.ndarray) -> np.ndarray:
    """Classifier input for a PSD vector: max-normalized to [0,1], one column."""
    psd = np.asarray(psd, dtype=float)
    peak = psd.max()
    if peak <= 0:
        raise DegenerateInputError("PSD vector has no positive bins")
    return (psd / peak)[:, None]


def psd_from_frame(frame: IQFrame, fft_size: int | None = None,
                   avg_factor: int = 1) -> np.ndarray:
    """Averaged magnitude spectrum of a single frame (single-band scan)."""
    n = len(frame.samples)
    if fft_size is None:
        fft_size = n // avg_factor
    cfg = ScanConfig(fft_size=fft_size, avg_factor=avg_factor,
                     center_freqs=(0.0,))
    return sequential_scan(frame.samples, cfg)


def export_psd_csv(vectors, path) -> None:
    """Write PSD vectors as CSV, one vector per row, bin-index header."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    header = ",".join(f"bin_{i}" for i in range(vectors.shape[1]))
    np.savetxt(path, vectors, delimiter=",", header=header, comments="")
