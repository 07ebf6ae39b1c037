import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modsense import sigsynth
from modsense.errors import ConfigurationError


class TestSchemes:
    def test_eleven_schemes(self):
        assert len(sigsynth.SCHEME_NAMES) == 11

    def test_labels_alphabetical(self):
        assert list(sigsynth.SCHEME_NAMES) == sorted(sigsynth.SCHEME_NAMES)
        for i, name in enumerate(sigsynth.SCHEME_NAMES):
            assert sigsynth.class_label(name) == i

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ConfigurationError):
            sigsynth.class_label("OOK")

    def test_pam4_alphabet(self):
        # levels {-3,-1,1,3} scaled to unit mean power: E[a^2] = 5
        alpha = sigsynth.symbol_alphabet("PAM4")
        np.testing.assert_allclose(
            sorted(alpha.real), np.array([-3, -1, 1, 3]) / np.sqrt(5))
        assert np.allclose(alpha.imag, 0)

    @pytest.mark.parametrize("scheme,size", [
        ("BPSK", 2), ("QPSK", 4), ("8PSK", 8),
        ("PAM4", 4), ("QAM16", 16), ("QAM64", 64),
    ])
    def test_alphabets_unit_power(self, scheme, size):
        alpha = sigsynth.symbol_alphabet(scheme)
        assert len(alpha) == size
        assert np.mean(np.abs(alpha) ** 2) == pytest.approx(1.0)


class TestModulate:
    def test_bpsk_rectangular_antipodal(self):
        # held symbols with no shaping: +1 then -1, four samples each
        x = sigsynth.modulate_symbols("BPSK", np.array([1.0, -1.0]), 4,
                                      pulse_shaping=False)
        np.testing.assert_array_equal(
            x, np.array([1, 1, 1, 1, -1, -1, -1, -1], dtype=complex))
        assert np.allclose(x.imag, 0)

    @pytest.mark.parametrize("scheme", sigsynth.SCHEME_NAMES)
    def test_unit_mean_power(self, scheme):
        frame = sigsynth.modulate(scheme, 4, 512, rng_seed=5)
        power = np.mean(np.abs(frame.samples) ** 2)
        assert power == pytest.approx(1.0, abs=1e-6)
        assert len(frame) == 512

    def test_sps_too_small_rejected(self):
        with pytest.raises(ConfigurationError):
            sigsynth.modulate("BPSK", 1, 64, rng_seed=0)

    def test_frame_shorter_than_symbol_rejected(self):
        with pytest.raises(ConfigurationError):
            sigsynth.modulate("BPSK", 8, 4, rng_seed=0)

    @given(seed=st.integers(0, 2**32 - 1),
           scheme=st.sampled_from(sigsynth.SCHEME_NAMES),
           length=st.sampled_from([64, 128, 256]))
    @settings(max_examples=25, deadline=None)
    def test_power_normalized_for_any_seed(self, seed, scheme, length):
        frame = sigsynth.modulate(scheme, 4, length, rng_seed=seed)
        assert np.mean(np.abs(frame.samples) ** 2) == pytest.approx(1.0,
                                                                    abs=1e-6)

    def test_deterministic(self):
        a = sigsynth.modulate("QAM16", 4, 128, rng_seed=9)
        b = sigsynth.modulate("QAM16", 4, 128, rng_seed=9)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_cpm_constant_envelope(self):
        for scheme in ("GFSK", "CPFSK"):
            frame = sigsynth.modulate(scheme, 4, 256, rng_seed=2)
            np.testing.assert_allclose(np.abs(frame.samples),
                                       np.ones(256), rtol=1e-9)


class TestChannel:
    def test_all_disabled_is_identity(self):
        frame = sigsynth.modulate("QPSK", 4, 128, rng_seed=1)
        out = sigsynth.apply_channel(frame, sigsynth.ChannelConfig())
        np.testing.assert_array_equal(out.samples, frame.samples)

    def test_cfo_moves_fft_peak(self):
        # tone at 0.1 shifted by cfo 0.05 peaks at bin 0.15 * n
        n = 1024
        t = np.arange(n)
        tone = np.exp(2j * np.pi * 0.1 * t)
        frame = sigsynth.IQFrame(samples=tone, label="BPSK", snr_db=np.inf,
                                 sps=4)
        cfg = sigsynth.ChannelConfig(cfo_frac=0.05, apply_cfo=True)
        out = sigsynth.apply_channel(frame, cfg)
        peak = np.argmax(np.abs(np.fft.fft(out.samples)))
        assert peak == round(0.15 * n)

    def test_awgn_snr_monte_carlo(self):
        n = 100_000
        frame = sigsynth.modulate("QPSK", 4, n, rng_seed=3)
        cfg = sigsynth.ChannelConfig(snr_db=0.0, apply_noise=True, rng_seed=42)
        out = sigsynth.apply_channel(frame, cfg)
        noise = out.samples - frame.samples
        snr = 10 * np.log10(np.mean(np.abs(frame.samples) ** 2)
                            / np.mean(np.abs(noise) ** 2))
        assert abs(snr - 0.0) < 0.5

    def test_output_length_preserved(self):
        frame = sigsynth.modulate("8PSK", 4, 256, rng_seed=1)
        rng = np.random.default_rng(0)
        cfg = sigsynth.ChannelConfig(
            snr_db=10, cfo_frac=0.01, sro_ppm=50, phase_rad=1.0,
            fading_taps=sigsynth.rician_taps(rng),
            apply_fading=True, apply_sro=True, apply_cfo=True,
            apply_noise=True, rng_seed=7)
        out = sigsynth.apply_channel(frame, cfg)
        assert len(out) == 256

    def test_rician_taps_unit_power(self):
        rng = np.random.default_rng(5)
        taps = sigsynth.rician_taps(rng)
        power = sum(abs(g) ** 2 for _, g in taps)
        assert power == pytest.approx(1.0)

    @given(seed=st.integers(0, 2**16))
    @settings(max_examples=20, deadline=None)
    def test_phase_rotation_preserves_power(self, seed):
        frame = sigsynth.modulate("QPSK", 4, 128, rng_seed=seed)
        cfg = sigsynth.ChannelConfig(phase_rad=1.234, apply_cfo=True)
        out = sigsynth.apply_channel(frame, cfg)
        np.testing.assert_allclose(np.abs(out.samples),
                                   np.abs(frame.samples), rtol=1e-9)


class TestDataset:
    def test_split_disjoint_and_covering(self, tiny_dataset):
        train = set(tiny_dataset.train_idx.tolist())
        test = set(tiny_dataset.test_idx.tolist())
        assert not train & test
        assert train | test == set(range(len(tiny_dataset)))

    def test_balanced_cells(self, tiny_dataset):
        spec = tiny_dataset.spec
        for split in (tiny_dataset.train_idx, tiny_dataset.test_idx):
            counts = {}
            for i in split:
                f = tiny_dataset.frames[int(i)]
                counts[(f.label, f.snr_db)] = counts.get(
                    (f.label, f.snr_db), 0) + 1
            assert set(counts.values()) == {spec.frames_per_cell}

    def test_generation_deterministic(self, tiny_dataset):
        again = sigsynth.generate_dataset(tiny_dataset.spec)
        for a, b in zip(tiny_dataset.frames, again.frames):
            np.testing.assert_array_equal(a.samples, b.samples)
        np.testing.assert_array_equal(tiny_dataset.train_idx, again.train_idx)

    def test_frames_pure_function_of_indices(self, tiny_dataset):
        frame = sigsynth.synth_frame(tiny_dataset.spec, 2, 5)
        np.testing.assert_array_equal(frame.samples,
                                      tiny_dataset.frames[2 * 24 + 5].samples)

    def test_zero_frames_rejected(self):
        spec = sigsynth.DatasetSpec(schemes=("BPSK",), snr_grid_db=(0,),
                                    frames_per_cell=0)
        with pytest.raises(ConfigurationError):
            sigsynth.generate_dataset(spec)

    def test_multi_sps_length_grid(self):
        spec = sigsynth.DatasetSpec(
            schemes=("BPSK", "QPSK"), snr_grid_db=(10,),
            sps_set=(4, 8), length_set=(64, 128), frames_per_cell=2,
            master_seed=1)
        ds = sigsynth.generate_dataset(spec)
        combos = {(f.sps, len(f)) for f in ds.frames}
        assert combos == {(4, 64), (4, 128), (8, 64), (8, 128)}
        assert len(ds) == 2 * 1 * 4 * 2 * 2
