"""Signal-kernel tests: filter design/application against transfer-function
oracles, STFT against a brute-force windowed-DFT oracle, plus the geometry
and resize/segment arithmetic."""

import numpy as np
import pytest

from tfoc.dsp import (
    SEGMENT_IDS,
    IirFilterSos,
    Spectrogram,
    StftConfig,
    apply_filter,
    assemble_model_input,
    design_butterworth_bandpass,
    frame_count,
    frequency_response,
    pad_symmetric,
    resize_bilinear,
    slice_segment,
    spectrogram,
    stability_margin,
    stft,
    window_vector,
)


def stft_oracle(x, window_len, overlap, window_fn):
    """Brute-force STFT: explicit frame loop, explicit windowing, naive DFT.

    Independent of the production path: no fft, no stride tricks, and its
    own window formula.
    """
    x = np.asarray(x, dtype=np.float64)
    hop = window_len - overlap
    n_frames = (len(x) - window_len) // hop + 1
    if window_fn == "hann":
        win = np.array(
            [0.5 - 0.5 * np.cos(2.0 * np.pi * k / window_len) for k in range(window_len)]
        )
    else:
        win = np.ones(window_len)
    n_bins = window_len // 2 + 1
    out = np.zeros((n_bins, n_frames), dtype=complex)
    for t in range(n_frames):
        frame = x[t * hop : t * hop + window_len] * win
        for k in range(n_bins):
            basis = np.exp(-2j * np.pi * k * np.arange(window_len) / window_len)
            out[k, t] = np.sum(frame * basis)
    return out


class TestFilterDesign:
    def test_band_edges_at_minus_3db(self):
        filt = design_butterworth_bandpass(6, 8, 30, 250)
        mags = np.abs(frequency_response(filt, [8.0, 30.0]))
        assert np.all(mags >= 0.705) and np.all(mags <= 0.709)

    def test_band_center_near_unity(self):
        filt = design_butterworth_bandpass(6, 8, 30, 250)
        mag = abs(frequency_response(filt, [19.0])[0])
        assert 0.99 <= mag <= 1.0

    def test_zeros_at_dc_and_nyquist(self):
        filt = design_butterworth_bandpass(2, 8, 30, 100)
        mags = np.abs(frequency_response(filt, [0.0, 50.0]))
        assert np.all(mags < 1e-12)

    @pytest.mark.parametrize(
        "order,low,high,fs",
        [(6, 30, 8, 250), (6, 0, 30, 250), (6, 8, 130, 250), (5, 8, 30, 250), (0, 8, 30, 250)],
    )
    def test_invalid_designs_rejected(self, order, low, high, fs):
        with pytest.raises(ValueError):
            design_butterworth_bandpass(order, low, high, fs)

    def test_all_designed_biquads_stable(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            fs = rng.uniform(64, 1000)
            low = rng.uniform(0.01 * fs, 0.2 * fs)
            high = rng.uniform(low * 1.2, 0.45 * fs)
            order = int(rng.choice([2, 4, 6, 8]))
            filt = design_butterworth_bandpass(order, low, high, fs)
            assert stability_margin(filt) > 1e-9


@pytest.fixture(scope="module")
def filt():
    return design_butterworth_bandpass(6, 8, 30, 250)


class TestApplyFilter:

    def test_zero_in_zero_out(self, filt):
        y = apply_filter(filt, np.zeros(500))
        assert np.all(y == 0)

    def test_impulse_response_parseval(self, filt):
        """Time-domain energy equals the mean squared transfer-function
        magnitude over a dense DFT grid (Parseval, cross-domain oracle)."""
        n = 16384
        impulse = np.zeros(n)
        impulse[0] = 1.0
        h = apply_filter(filt, impulse, mode="causal")
        energy = np.sum(h**2)
        freqs = np.arange(n) * (250.0 / n)
        spectrum_energy = np.mean(np.abs(frequency_response(filt, freqs)) ** 2)
        assert abs(energy - spectrum_energy) / energy < 1e-6

    def test_steady_state_sine_gain(self, filt):
        """Output/input amplitude at 19 Hz matches |H(19 Hz)| within 1%."""
        fs, f = 250.0, 19.0
        n = int(fs * 19)  # 19 s holds exactly 361 cycles of 19 Hz
        t = np.arange(2 * n) / fs
        x = np.sin(2 * np.pi * f * t)
        y = apply_filter(filt, x, mode="causal")[n:]
        tt = t[n:]
        amp = 2.0 * np.hypot(
            np.mean(y * np.sin(2 * np.pi * f * tt)), np.mean(y * np.cos(2 * np.pi * f * tt))
        )
        expected = abs(frequency_response(filt, [f])[0])
        assert abs(amp - expected) / expected < 0.01

    def test_zero_phase_squares_magnitude(self, filt):
        fs, f = 250.0, 19.0
        n = int(fs * 19)
        t = np.arange(3 * n) / fs
        x = np.sin(2 * np.pi * f * t)
        y = apply_filter(filt, x, mode="zero_phase")[n : 2 * n]
        tt = t[n : 2 * n]
        amp = 2.0 * np.hypot(
            np.mean(y * np.sin(2 * np.pi * f * tt)), np.mean(y * np.cos(2 * np.pi * f * tt))
        )
        expected = abs(frequency_response(filt, [f])[0]) ** 2
        assert abs(amp - expected) / expected < 0.01

    def test_zero_phase_preserves_time_symmetry(self, filt):
        x = np.zeros(4001)
        x[2000] = 1.0  # symmetric about the center
        y = apply_filter(filt, x, mode="zero_phase")
        assert np.allclose(y, y[::-1], atol=1e-9)

    def test_multichannel_filters_along_last_axis(self, filt):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(3, 400))
        y = apply_filter(filt, x)
        for c in range(3):
            assert np.allclose(y[c], apply_filter(filt, x[c]))

    def test_nonfinite_input_rejected(self, filt):
        x = np.ones(100)
        x[3] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            apply_filter(filt, x)

    def test_empty_input_rejected(self, filt):
        with pytest.raises(ValueError, match="empty"):
            apply_filter(filt, np.array([]))

    def test_unknown_mode_rejected(self, filt):
        with pytest.raises(ValueError, match="mode"):
            apply_filter(filt, np.ones(10), mode="acausal")


class TestStftGeometry:
    @pytest.mark.parametrize(
        "n,window,overlap,expected_t",
        [(1000, 256, 128, 6), (1000, 256, 1, 3), (400, 128, 64, 5)],
    )
    def test_frame_counts(self, n, window, overlap, expected_t):
        rng = np.random.default_rng(1)
        out = stft(rng.normal(size=n), StftConfig(window, overlap))
        assert out.shape == (window // 2 + 1, expected_t)

    def test_frame_count_formula_exhaustive(self):
        """T = floor((n-w)/(w-overlap)) + 1 over all small geometries."""
        x = np.arange(64, dtype=float)
        for w in range(2, 17):
            for overlap in range(1, w):
                hop = w - overlap
                for n in range(w, 65):
                    out = stft(x[:n], StftConfig(w, overlap, "rectangular"))
                    assert out.shape[1] == (n - w) // hop + 1
                    assert out.shape[1] == frame_count(n, w, hop)

    def test_short_signal_rejected(self):
        with pytest.raises(ValueError, match="shorter"):
            stft(np.ones(255), StftConfig(256, 128))

    def test_constant_rectangular_hits_only_bin_zero(self):
        c = 2.5
        out = stft(np.full(1000, c), StftConfig(256, 128, "rectangular"))
        assert np.allclose(out[0], c * 256)
        assert np.max(np.abs(out[1:])) < 1e-9


class TestStftOracle:
    @pytest.mark.parametrize(
        "n,window,overlap",
        [(1000, 256, 128), (1000, 256, 1), (400, 128, 64)],
    )
    @pytest.mark.parametrize("window_fn", ["hann", "rectangular"])
    def test_matches_naive_windowed_dft(self, n, window, overlap, window_fn):
        rng = np.random.default_rng(42)
        x = rng.normal(size=n)
        got = stft(x, StftConfig(window, overlap, window_fn))
        want = stft_oracle(x, window, overlap, window_fn)
        assert got.shape == want.shape
        assert np.max(np.abs(got - want)) < 1e-9

    def test_matches_oracle_on_small_random_geometries(self):
        rng = np.random.default_rng(43)
        for _ in range(20):
            w = int(rng.integers(4, 33))
            overlap = int(rng.integers(1, w))
            n = int(rng.integers(w, 200))
            fn = "hann" if rng.random() < 0.5 else "rectangular"
            x = rng.normal(size=n)
            got = stft(x, StftConfig(w, overlap, fn))
            want = stft_oracle(x, w, overlap, fn)
            assert np.max(np.abs(got - want)) < 1e-9


class TestSpectrogram:
    def test_magnitude_of_stft(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=600)
        cfg = StftConfig(128, 64)
        spec = spectrogram(x, 250.0, cfg)
        assert np.allclose(spec.values, np.abs(stft(x, cfg)))
        assert spec.freq_bin_hz == pytest.approx(250.0 / 128)
        assert spec.hop == 64

    def test_zero_signal_zero_spectrogram(self):
        spec = spectrogram(np.zeros(1000), 250.0, StftConfig(256, 128))
        assert np.all(spec.values == 0)

    def test_pure_tone_peaks_at_its_bin(self):
        """A sine at exactly bin 10 (9.765625 Hz at fs=250, window 256)
        puts every frame's peak at bin 10."""
        fs, w = 250.0, 256
        f = 10 * fs / w
        t = np.arange(1000) / fs
        spec = spectrogram(np.sin(2 * np.pi * f * t), fs, StftConfig(w, 128, "rectangular"))
        assert np.all(np.argmax(spec.values, axis=0) == 10)

    def test_values_nonnegative_and_finite(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            x = rng.normal(size=300) * rng.uniform(0.1, 100)
            spec = spectrogram(x, 100.0, StftConfig(64, 32))
            assert np.all(spec.values >= 0)
            assert np.all(np.isfinite(spec.values))


class TestAssembleModelInput:
    def _spec(self, values):
        return Spectrogram(values=values, freq_bin_hz=1.0, hop=1)

    def test_three_channel_concatenation(self):
        mats = [np.full((129, 6), i, dtype=float) for i in range(3)]
        out = assemble_model_input([self._spec(m) for m in mats])
        assert out.shape == (129, 18, 1)
        assert np.all(out[:, :6, 0] == 0) and np.all(out[:, 12:, 0] == 2)

    def test_single_channel_passthrough(self):
        m = np.arange(65 * 5, dtype=float).reshape(65, 5)
        out = assemble_model_input([self._spec(m)])
        assert out.shape == (65, 5, 1)
        assert np.array_equal(out[:, :, 0], m)

    def test_shape_mismatch_rejected(self):
        a = self._spec(np.zeros((129, 6)))
        b = self._spec(np.zeros((129, 5)))
        with pytest.raises(ValueError, match="differ"):
            assemble_model_input([a, b])

    def test_rearrangement_is_bijective(self):
        """Every input cell appears exactly once in the output."""
        rng = np.random.default_rng(4)
        mats = [rng.permutation(np.arange(i * 77, (i + 1) * 77, dtype=float)).reshape(7, 11)
                for i in range(3)]
        out = assemble_model_input([self._spec(m) for m in mats])
        assert sorted(out.ravel()) == sorted(np.concatenate([m.ravel() for m in mats]))


class TestResizeBilinear:
    def test_same_size_is_identity(self):
        rng = np.random.default_rng(5)
        m = rng.normal(size=(32, 32))
        assert np.array_equal(resize_bilinear(m, 32, 32), m)

    def test_constant_preserved(self):
        out = resize_bilinear(np.full((7, 5), 3.25), 32, 32)
        assert np.allclose(out, 3.25)

    def test_corner_alignment(self):
        out = resize_bilinear(np.array([[0.0, 1.0], [1.0, 2.0]]), 32, 32)
        assert out[0, 0] == 0.0
        assert out[0, -1] == 1.0
        assert out[-1, 0] == 1.0
        assert out[-1, -1] == 2.0

    def test_interior_is_linear_ramp(self):
        out = resize_bilinear(np.array([[0.0, 1.0], [1.0, 2.0]]), 32, 32)
        # corner-aligned bilinear of this matrix is (i + j)/31
        i, j = np.meshgrid(np.arange(32), np.arange(32), indexing="ij")
        assert np.allclose(out, (i + j) / 31.0)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            resize_bilinear(np.zeros((0, 3)), 4, 4)


class TestSegments:
    def test_mid2_sample_range(self):
        data = np.arange(1000, dtype=float)[None, :]
        out = slice_segment(data, 250.0, "mid2")
        assert out.shape == (1, 500)
        assert out[0, 0] == 250 and out[0, -1] == 749

    def test_full4_is_identity(self):
        data = np.arange(1000, dtype=float)[None, :]
        assert np.array_equal(slice_segment(data, 250.0, "full4"), data)

    def test_sec3_at_100hz(self):
        data = np.arange(400, dtype=float)[None, :]
        out = slice_segment(data, 100.0, "sec3")
        assert out[0, 0] == 200 and out[0, -1] == 299

    def test_segment_outside_trial_rejected(self):
        data = np.zeros((3, 300))
        with pytest.raises(ValueError, match="segment"):
            slice_segment(data, 250.0, "end2")

    def test_unknown_segment_rejected(self):
        with pytest.raises(ValueError, match="unknown segment"):
            slice_segment(np.zeros((1, 1000)), 250.0, "sec5")

    def test_exact_lengths_for_integer_sample_counts(self):
        from tfoc.dsp import segment_bounds

        for fs in (100.0, 250.0, 128.0):
            data = np.zeros((2, round(4 * fs)))
            for seg in SEGMENT_IDS:
                _, dur = segment_bounds(seg)
                assert slice_segment(data, fs, seg).shape[-1] == round(dur * fs)


class TestPadSymmetric:
    def test_even_padding_centers_signal(self):
        x = np.ones(250)
        out = pad_symmetric(x, 256)
        assert out.shape == (256,)
        assert np.all(out[:3] == 0) and np.all(out[-3:] == 0)
        assert np.all(out[3:253] == 1)

    def test_odd_padding_extra_on_right(self):
        out = pad_symmetric(np.ones(3), 6)
        assert np.array_equal(out, [0, 1, 1, 1, 0, 0])

    def test_long_enough_signal_untouched(self):
        x = np.arange(300, dtype=float)
        assert pad_symmetric(x, 256) is x

    def test_multichannel_pad_last_axis(self):
        out = pad_symmetric(np.ones((3, 100)), 128)
        assert out.shape == (3, 128)
        assert np.all(out[:, 14:114] == 1)
        assert np.all(out[:, :14] == 0)
