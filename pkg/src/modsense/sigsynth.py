"""Synthesis of labeled complex-baseband modulated frames with channel impairments.

Eleven modulation schemes (digital linear, continuous-phase, and analog),
root-raised-cosine pulse shaping, and a channel chain of multipath fading,
sample-rate offset, carrier-frequency offset, and AWGN with exact per-sample
SNR. Dataset generation is deterministic given a master seed and fully
balanced across (scheme, snr, sps, length) cells.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

# Class labels are assigned in alphabetical order of the scheme names.
SCHEME_NAMES = (
    "8PSK", "AM-DSB", "AM-SSB", "BPSK", "CPFSK", "GFSK",
    "PAM4", "QAM16", "QAM64", "QPSK", "WBFM",
)

ANALOG_SCHEMES = frozenset({"AM-DSB", "AM-SSB", "WBFM"})
CPM_SCHEMES = frozenset({"CPFSK", "GFSK"})

# Pulse shaping and CPM defaults (GNU Radio conventions).
RRC_ROLLOFF = 0.35
RRC_SPAN_SYMBOLS = 8
GFSK_BT = 0.35
FSK_MOD_INDEX = 0.5
WBFM_DEVIATION = 0.25  # peak frequency deviation, fraction of sample rate

# Synthetic audio source: 3 sinusoids, block-gated silence.
AUDIO_FREQ_RANGE = (0.01, 0.05)
AUDIO_SILENCE_PROB = 0.2
AUDIO_BLOCK = 64


def class_label(scheme: str) -> int:
    """Integer class label 0..10 for a scheme name."""
    try:
        return SCHEME_NAMES.index(scheme)
    except ValueError:
        raise ConfigurationError(f"unknown modulation scheme: {scheme!r}") from None


def symbol_alphabet(scheme: str) -> np.ndarray:
    """Unit-mean-power complex symbol alphabet for a linear digital scheme."""
    if scheme == "BPSK":
        return np.array([1.0, -1.0], dtype=complex)
    if scheme == "QPSK":
        return np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))
    if scheme == "8PSK":
        return np.exp(1j * np.pi / 4 * np.arange(8))
    if scheme == "PAM4":
        levels = np.array([-3.0, -1.0, 1.0, 3.0])
        return (levels / np.sqrt(np.mean(levels**2))).astype(complex)
    if scheme == "QAM16":
        pts = np.array([-3.0, -1.0, 1.0, 3.0])
        grid = (pts[:, None] + 1j * pts[None, :]).ravel()
        return grid / np.sqrt(np.mean(np.abs(grid) ** 2))
    if scheme == "QAM64":
        pts = np.arange(-7.0, 8.0, 2.0)
        grid = (pts[:, None] + 1j * pts[None, :]).ravel()
        return grid / np.sqrt(np.mean(np.abs(grid) ** 2))
    raise ConfigurationError(f"{scheme} has no linear symbol alphabet")


def rrc_taps(sps: int, rolloff: float = RRC_ROLLOFF,
             span: int = RRC_SPAN_SYMBOLS) -> np.ndarray:
    """Root-raised-cosine filter taps, span symbols long, unit peak gain."""
    n = span * sps
    t = (np.arange(n + 1) - n / 2) / sps  # time in symbol units
    beta = rolloff
    taps = np.zeros_like(t)
    for k, tk in enumerate(t):
        if abs(tk) < 1e-12:
            taps[k] = 1.0 - beta + 4.0 * beta / np.pi
        elif beta > 0 and abs(abs(tk) - 1.0 / (4.0 * beta)) < 1e-12:
            taps[k] = (beta / np.sqrt(2.0)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
                + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
            )
        else:
            num = (np.sin(np.pi * tk * (1 - beta))
                   + 4 * beta * tk * np.cos(np.pi * tk * (1 + beta)))
            den = np.pi * tk * (1 - (4 * beta * tk) ** 2)
            taps[k] = num / den
    return taps / np.max(np.abs(taps))


@dataclass
class IQFrame:
    """Complex baseband frame with label and generation metadata."""
    samples: np.ndarray
    label: str
    snr_db: float
    sps: int
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def class_index(self) -> int:
        return class_label(self.label)


def _normalize_power(x: np.ndarray) -> np.ndarray:
    p = np.mean(np.abs(x) ** 2)
    if p == 0:
        raise ConfigurationError("cannot power-normalize an all-zero signal")
    return x / np.sqrt(p)


def modulate_symbols(scheme: str, symbols: np.ndarray, sps: int,
                     pulse_shaping: bool = True) -> np.ndarray:
    """Pulse-shape an explicit symbol sequence for a linear scheme.

    With pulse_shaping=False each symbol is held for sps samples
    (rectangular pulse). Output is not power-normalized.
    """
    symbols = np.asarray(symbols, dtype=complex)
    if not pulse_shaping:
        return np.repeat(symbols, sps)
    up = np.zeros(len(symbols) * sps, dtype=complex)
    up[::sps] = symbols
    taps = rrc_taps(sps)
    shaped = np.convolve(up, taps)
    delay = (len(taps) - 1) // 2
    return shaped[delay:delay + len(up)]


def _audio_source(n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Synthetic speech-like source: 3 tones with gated silence blocks."""
    freqs = rng.uniform(*AUDIO_FREQ_RANGE, size=3)
    phases = rng.uniform(0, 2 * np.pi, size=3)
    t = np.arange(n_samples)
    audio = np.sum(np.sin(2 * np.pi * freqs[:, None] * t[None, :]
                          + phases[:, None]), axis=0)
    audio /= 3.0  # bound to [-1, 1]
    n_blocks = int(np.ceil(n_samples / AUDIO_BLOCK))
    gates = rng.random(n_blocks) >= AUDIO_SILENCE_PROB
    if not gates.any():
        gates[int(rng.integers(n_blocks))] = True
    mask = np.repeat(gates.astype(float), AUDIO_BLOCK)[:n_samples]
    return audio * mask


def _cpm_waveform(scheme: str, sps: int, n_samples: int,
                  rng: np.random.Generator) -> np.ndarray:
    n_sym = int(np.ceil(n_samples / sps)) + 2 * RRC_SPAN_SYMBOLS
    nrz = rng.choice([-1.0, 1.0], size=n_sym)
    freq = np.repeat(nrz, sps)
    if scheme == "GFSK":
        # Gaussian frequency pulse, BT = 0.35, truncated to 4 symbols.
        sigma = np.sqrt(np.log(2)) / (2 * np.pi * GFSK_BT)
        half = 2 * sps
        k = np.arange(-half, half + 1)
        g = np.exp(-0.5 * (k / (sigma * sps)) ** 2)
        g /= g.sum()
        freq = np.convolve(freq, g, mode="same")
    phase = np.pi * FSK_MOD_INDEX * np.cumsum(freq) / sps
    wave = np.exp(1j * phase)
    start = RRC_SPAN_SYMBOLS * sps
    return wave[start:start + n_samples]


def modulate(scheme: str, sps: int, n_samples: int, rng_seed,
             pulse_shaping: bool = True) -> IQFrame:
    """Generate a clean (impairment-free) frame with unit mean power.

    Digital schemes draw i.i.d. uniform symbols; analog schemes modulate a
    synthetic audio source with intermittent silence intervals.
    """
    if sps < 2:
        raise ConfigurationError(f"sps must be >= 2, got {sps}")
    if n_samples < sps:
        raise ConfigurationError(
            f"n_samples ({n_samples}) must be >= sps ({sps})")
    if scheme not in SCHEME_NAMES:
        raise ConfigurationError(f"unknown modulation scheme: {scheme!r}")

    rng = np.random.default_rng(rng_seed)
    if scheme in CPM_SCHEMES:
        x = _cpm_waveform(scheme, sps, n_samples, rng)
    elif scheme in ANALOG_SCHEMES:
        audio = _audio_source(n_samples, rng)
        if scheme == "AM-DSB":
            x = (1.0 + 0.5 * audio).astype(complex)
        elif scheme == "AM-SSB":
            x = _analytic(audio) + 0.05  # small carrier leak keeps power finite
        else:  # WBFM
            phase = 2 * np.pi * WBFM_DEVIATION * np.cumsum(audio)
            x = np.exp(1j * phase)
    else:
        alphabet = symbol_alphabet(scheme)
        n_sym = int(np.ceil(n_samples / sps)) + 2 * RRC_SPAN_SYMBOLS
        symbols = alphabet[rng.integers(len(alphabet), size=n_sym)]
        shaped = modulate_symbols(scheme, symbols, sps, pulse_shaping)
        start = RRC_SPAN_SYMBOLS * sps if pulse_shaping else 0
        x = shaped[start:start + n_samples]

    x = _normalize_power(np.asarray(x, dtype=complex))
    return IQFrame(samples=x, label=scheme, snr_db=float("inf"), sps=sps,
                   meta={"clean": True, "seed": str(rng_seed)})


def _analytic(real_signal: np.ndarray) -> np.ndarray:
    """Analytic signal via FFT (one-sided spectrum)."""
    n = len(real_signal)
    spec = np.fft.fft(real_signal)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1:n // 2] = 2.0
    else:
        h[1:(n + 1) // 2] = 2.0
    return np.fft.ifft(spec * h)


@dataclass
class ChannelConfig:
    """Receiver impairment chain settings.

    Impairments apply in the order fading -> SRO -> CFO -> AWGN so the
    requested SNR is exact against the fully impaired signal.
    """
    snr_db: float = 0.0
    cfo_frac: float = 0.0
    sro_ppm: float = 0.0
    phase_rad: float = 0.0
    fading_taps: tuple = ()
    apply_fading: bool = False
    apply_sro: bool = False
    apply_cfo: bool = False
    apply_noise: bool = False
    rng_seed: int = 0


def rician_taps(rng: np.random.Generator, k_factor: float = 4.0,
                delays: tuple = (0, 1, 2)) -> tuple:
    """Random Rician multipath profile, total tap power normalized to 1."""
    gains = []
    for i, _ in enumerate(delays):
        diffuse = (rng.normal() + 1j * rng.normal()) / np.sqrt(2)
        if i == 0:
            los = np.sqrt(k_factor)
            g = (los + diffuse) / np.sqrt(k_factor + 1)
        else:
            g = 0.3 * diffuse
        gains.append(g)
    gains = np.asarray(gains)
    gains /= np.sqrt(np.sum(np.abs(gains) ** 2))
    return tuple(zip(delays, gains))


def apply_channel(frame: IQFrame, cfg: ChannelConfig) -> IQFrame:
    """Impair a frame: fading, sample-rate offset, CFO rotation, then AWGN.

    Output length equals input length. With every impairment disabled the
    output is bit-exact equal to the input.
    """
    x = frame.samples
    n = len(x)
    rng = np.random.default_rng(cfg.rng_seed)

    if cfg.apply_fading and cfg.fading_taps:
        max_delay = max(d for d, _ in cfg.fading_taps)
        h = np.zeros(max_delay + 1, dtype=complex)
        for d, g in cfg.fading_taps:
            h[d] += g
        x = np.convolve(x, h)[:n]

    if cfg.apply_sro and cfg.sro_ppm != 0.0:
        ratio = 1.0 + cfg.sro_ppm * 1e-6
        idx = np.clip(np.arange(n) * ratio, 0, n - 1)
        lo = np.floor(idx).astype(int)
        hi = np.minimum(lo + 1, n - 1)
        frac = idx - lo
        x = x[lo] * (1 - frac) + x[hi] * frac

    if cfg.apply_cfo:
        t = np.arange(n)
        x = x * np.exp(1j * (2 * np.pi * cfg.cfo_frac * t + cfg.phase_rad))

    snr_db = frame.snr_db
    if cfg.apply_noise:
        p_sig = np.mean(np.abs(x) ** 2)
        p_noise = p_sig / 10.0 ** (cfg.snr_db / 10.0)
        noise = (rng.normal(size=n) + 1j * rng.normal(size=n)) * np.sqrt(p_noise / 2)
        x = x + noise
        snr_db = cfg.snr_db

    meta = dict(frame.meta)
    meta.update(clean=False, cfo_frac=cfg.cfo_frac, sro_ppm=cfg.sro_ppm,
                faded=bool(cfg.apply_fading and cfg.fading_taps))
    return IQFrame(samples=x, label=frame.label, snr_db=snr_db,
                   sps=frame.sps, meta=meta)


@dataclass(frozen=True)
class DatasetSpec:
    """Balanced dataset grid plus per-frame channel randomization envelopes.

    frames_per_cell counts frames per split half: each
    (scheme, snr, sps, length) cell contributes frames_per_cell train frames
    and frames_per_cell test frames.
    """
    schemes: tuple
    snr_grid_db: tuple
    sps_set: tuple = (4,)
    length_set: tuple = (128,)
    frames_per_cell: int = 100
    master_seed: int = 0
    cfo_max_frac: float = 0.0
    sro_max_ppm: float = 0.0
    enable_fading: bool = False
    enable_noise: bool = True
    fading_profile: str = "rician-k4"  # stand-in default; recorded in metadata

    def cells(self):
        return list(itertools.product(
            sorted(self.schemes, key=class_label),
            self.snr_grid_db, sorted(self.sps_set), sorted(self.length_set)))


@dataclass
class Dataset:
    """Labeled frames plus a disjoint deterministic train/test split."""
    spec: DatasetSpec
    frames: list
    train_idx: np.ndarray
    test_idx: np.ndarray

    def __len__(self) -> int:
        return len(self.frames)


def _frame_seed(master_seed: int, cell_index: int, frame_index: int):
    return np.random.SeedSequence([int(master_seed) & (2**64 - 1),
                                   cell_index, frame_index])


def synth_frame(spec: DatasetSpec, cell_index: int, frame_index: int) -> IQFrame:
    """Generate one frame of a dataset cell; pure function of its indices."""
    scheme, snr_db, sps, length = spec.cells()[cell_index]
    seed = _frame_seed(spec.master_seed, cell_index, frame_index)
    rng = np.random.default_rng(seed)
    mod_seed, chan_seed = rng.integers(2**63, size=2)

    frame = modulate(scheme, sps, length, mod_seed)
    cfg = ChannelConfig(
        snr_db=snr_db,
        cfo_frac=rng.uniform(-spec.cfo_max_frac, spec.cfo_max_frac),
        sro_ppm=rng.uniform(-spec.sro_max_ppm, spec.sro_max_ppm),
        phase_rad=rng.uniform(0, 2 * np.pi),
        fading_taps=rician_taps(rng) if spec.enable_fading else (),
        apply_fading=spec.enable_fading,
        apply_sro=spec.sro_max_ppm > 0,
        apply_cfo=True,
        apply_noise=spec.enable_noise,
        rng_seed=chan_seed,
    )
    return apply_channel(frame, cfg)


def generate_dataset(spec: DatasetSpec) -> Dataset:
    """Generate a balanced dataset with a deterministic disjoint split.

    Per-frame seeds derive from (master_seed, cell index, frame index), so
    generation is reproducible and parallelizable across frames.
    """
    if spec.frames_per_cell <= 0:
        raise ConfigurationError("frames_per_cell must be positive")
    cells = spec.cells()
    if not cells:
        raise ConfigurationError("dataset spec has no cells")

    per_cell = 2 * spec.frames_per_cell
    frames = []
    train_idx, test_idx = [], []
    split_rng = np.random.default_rng(
        np.random.SeedSequence([int(spec.master_seed) & (2**64 - 1), 0xA11CE]))
    for ci in range(len(cells)):
        base = len(frames)
        for fi in range(per_cell):
            frames.append(synth_frame(spec, ci, fi))
        perm = split_rng.permutation(per_cell) + base
        train_idx.extend(perm[:spec.frames_per_cell])
        test_idx.extend(perm[spec.frames_per_cell:])

    train_idx = np.array(train_idx)
    test_idx = np.array(test_idx)
    split_rng.shuffle(train_idx)
    split_rng.shuffle(test_idx)
    return Dataset(spec=spec, frames=frames, train_idx=train_idx,
                   test_idx=test_idx)
