"""Stateless signal-processing kernels.

Bandpass IIR design and application, short-time Fourier transform,
spectrogram assembly, motor-imagery time-segment slicing, and the
bilinear image-resize baseline. Everything here is a pure function of
its inputs and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as sps

WINDOW_FUNCTIONS = ("hann", "rectangular")

# Named segments of the 4-second motor-imagery window, as (start_s, dur_s).
# Order matches the 9-column report layout.
SEGMENT_TABLE = {
    "full4": (0.0, 4.0),
    "first3": (0.0, 3.0),
    "first2": (0.0, 2.0),
    "mid2": (1.0, 2.0),
    "end2": (2.0, 2.0),
    "sec1": (0.0, 1.0),
    "sec2": (1.0, 1.0),
    "sec3": (2.0, 1.0),
    "sec4": (3.0, 1.0),
}
SEGMENT_IDS = tuple(SEGMENT_TABLE)


@dataclass(frozen=True, eq=False)
class IirFilterSos:
    """A stable cascade of biquad sections plus its design parameters.

    ``sections`` is an (n, 6) array of [b0, b1, b2, a0, a1, a2] rows with
    a0 normalized to 1, directly usable by scipy's sos routines.
    """

    sections: np.ndarray
    order: int
    low_hz: float
    high_hz: float
    fs: float


@dataclass(frozen=True)
class StftConfig:
    """Window length and overlap in samples, plus the analysis window."""

    window_len: int
    overlap: int
    window_fn: str = "hann"

    def __post_init__(self):
        if self.window_len < 2:
            raise ValueError(f"window_len must be >= 2, got {self.window_len}")
        if not 1 <= self.overlap < self.window_len:
            raise ValueError(
                f"overlap must satisfy 1 <= overlap < window_len, got "
                f"overlap={self.overlap}, window_len={self.window_len}"
            )
        if self.window_fn not in WINDOW_FUNCTIONS:
            raise ValueError(f"unknown window_fn {self.window_fn!r}")

    @property
    def hop(self) -> int:
        return self.window_len - self.overlap


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """One-sided STFT magnitudes (freq bins x frames) with axis metadata."""

    values: np.ndarray
    freq_bin_hz: float
    hop: int


def design_butterworth_bandpass(
    order: int, low_hz: float, high_hz: float, fs: float
) -> IirFilterSos:
    """Design a Butterworth bandpass as second-order sections.

    ``order`` is the lowpass-prototype order (the usual toolchain
    labelling), so the bandpass has 2*order poles. Both band edges sit
    at -3 dB. Raises ValueError for invalid edges or an unstable result.
    """
    if order < 2 or order % 2 != 0:
        raise ValueError(f"order must be even and >= 2, got {order}")
    if not (0 < low_hz < high_hz < fs / 2):
        raise ValueError(
            f"band edges must satisfy 0 < low < high < fs/2, got "
            f"low={low_hz}, high={high_hz}, fs={fs}"
        )
    sections = sps.butter(order, [low_hz, high_hz], btype="bandpass", output="sos", fs=fs)
    filt = IirFilterSos(sections=sections, order=order, low_hz=low_hz, high_hz=high_hz, fs=fs)
    margin = 1.0 - stability_margin(filt)
    if margin >= 1.0 - 1e-9:
        raise ValueError(f"unstable design: pole magnitude {margin}")
    return filt


def stability_margin(filt: IirFilterSos) -> float:
    """1 - max pole magnitude over all sections (positive means stable)."""
    worst = 0.0
    for sec in filt.sections:
        poles = np.roots(sec[3:6])
        if poles.size:
            worst = max(worst, float(np.max(np.abs(poles))))
    return 1.0 - worst


def frequency_response(filt: IirFilterSos, freqs_hz) -> np.ndarray:
    """Evaluate H(e^{j*2*pi*f/fs}) from the section coefficients directly."""
    f = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
    z_inv = np.exp(-2j * np.pi * f / filt.fs)
    h = np.ones_like(z_inv)
    for b0, b1, b2, a0, a1, a2 in filt.sections:
        h *= (b0 + b1 * z_inv + b2 * z_inv**2) / (a0 + a1 * z_inv + a2 * z_inv**2)
    return h


def apply_filter(filt: IirFilterSos, x: np.ndarray, mode: str = "causal") -> np.ndarray:
    """Filter along the last axis.

    causal: one forward pass through the cascade, zero initial state.
    zero_phase: forward pass then a time-reversed pass (squared magnitude
    response, zero group delay).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty input signal")
    if not np.isfinite(x).all():
        raise ValueError("non-finite sample in input signal")
    if mode == "causal":
        return sps.sosfilt(filt.sections, x, axis=-1)
    if mode == "zero_phase":
        y = sps.sosfilt(filt.sections, x, axis=-1)
        return sps.sosfilt(filt.sections, y[..., ::-1], axis=-1)[..., ::-1]
    raise ValueError(f"unknown filter mode {mode!r}")


def window_vector(window_fn: str, window_len: int) -> np.ndarray:
    """DFT-periodic analysis window of the given length."""
    if window_fn == "hann":
        n = np.arange(window_len)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / window_len)
    if window_fn == "rectangular":
        return np.ones(window_len)
    raise ValueError(f"unknown window_fn {window_fn!r}")


def frame_count(n: int, window_len: int, hop: int) -> int:
    """Number of full analysis frames; trailing samples are dropped."""
    return (n - window_len) // hop + 1


def stft(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """One-sided STFT of a 1-D signal, returned as a complex (F, T) matrix.

    Frame t covers x[t*hop : t*hop + window_len]; F = window_len//2 + 1.
    Raises ValueError if the signal is shorter than the window (callers
    that need sub-window segments must zero-pad explicitly first).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D signal, got shape {x.shape}")
    n = x.shape[0]
    if n < cfg.window_len:
        raise ValueError(
            f"signal length {n} is shorter than the analysis window "
            f"{cfg.window_len}; zero-pad before calling stft"
        )
    frames = sliding_window_view(x, cfg.window_len)[:: cfg.hop]
    win = window_vector(cfg.window_fn, cfg.window_len)
    return np.fft.rfft(frames * win, axis=1).T.copy()


def spectrogram(x: np.ndarray, fs: float, cfg: StftConfig) -> Spectrogram:
    """Element-wise magnitude of the STFT with frequency-axis metadata."""
    values = np.abs(stft(x, cfg))
    return Spectrogram(values=values, freq_bin_hz=fs / cfg.window_len, hop=cfg.hop)


def assemble_model_input(specs) -> np.ndarray:
    """Concatenate per-channel spectrograms along the time axis.

    Channel order is the caller's (C3, Cz, C4 in the standard pipeline).
    The result gains a trailing singleton depth axis: (F, n_channels*T, 1).
    """
    if not specs:
        raise ValueError("no spectrograms to assemble")
    mats = [s.values if isinstance(s, Spectrogram) else np.asarray(s) for s in specs]
    shape = mats[0].shape
    for i, m in enumerate(mats[1:], start=1):
        if m.shape != shape:
            raise ValueError(
                f"channel spectrogram shapes differ: {shape} vs {m.shape} at index {i}"
            )
    return np.concatenate(mats, axis=1)[:, :, None]


def resize_bilinear(m: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with corner-aligned sampling.

    Output corners sample input corners exactly, constants are preserved,
    and a same-size resize is the identity. A singleton output axis
    samples input coordinate 0.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dims must be >= 1, got ({out_h}, {out_w})")

    def _coords(n_out: int, n_in: int) -> np.ndarray:
        if n_out == 1:
            return np.zeros(1)
        return np.arange(n_out) * ((n_in - 1) / (n_out - 1))

    r = _coords(out_h, m.shape[0])
    c = _coords(out_w, m.shape[1])
    r0 = np.minimum(np.floor(r).astype(int), m.shape[0] - 1)
    c0 = np.minimum(np.floor(c).astype(int), m.shape[1] - 1)
    r1 = np.minimum(r0 + 1, m.shape[0] - 1)
    c1 = np.minimum(c0 + 1, m.shape[1] - 1)
    fr = (r - r0)[:, None]
    fc = (c - c0)[None, :]
    return (
        m[np.ix_(r0, c0)] * (1 - fr) * (1 - fc)
        + m[np.ix_(r0, c1)] * (1 - fr) * fc
        + m[np.ix_(r1, c0)] * fr * (1 - fc)
        + m[np.ix_(r1, c1)] * fr * fc
    )


def segment_bounds(segment_id: str) -> tuple[float, float]:
    """(start_s, dur_s) for a named segment of the 4-second MI window."""
    try:
        return SEGMENT_TABLE[segment_id]
    except KeyError:
        raise ValueError(f"unknown segment id {segment_id!r}") from None


def slice_segment(data: np.ndarray, fs: float, segment_id: str) -> np.ndarray:
    """Slice a (channels, samples) array to sample range [round(start*fs), round(end*fs)).

    Raises ValueError if the segment lies outside the trial.
    """
    start_s, dur_s = segment_bounds(segment_id)
    lo = round(start_s * fs)
    hi = round((start_s + dur_s) * fs)
    if hi > data.shape[-1]:
        raise ValueError(
            f"segment {segment_id!r} needs samples [{lo}, {hi}) but the trial "
            f"has only {data.shape[-1]}"
        )
    return data[..., lo:hi]


def pad_symmetric(x: np.ndarray, target_len: int) -> np.ndarray:
    """Zero-pad the last axis symmetrically up to target_len.

    Signals already at least target_len long are returned unchanged. For
    odd padding the extra zero goes on the right.
    """
    n = x.shape[-1]
    if n >= target_len:
        return x
    left = (target_len - n) // 2
    right = target_len - n - left
    pad = [(0, 0)] * (x.ndim - 1) + [(left, right)]
    return np.pad(x, pad)
