"""Deterministic signal processing: STFT, log-mel extraction, resampling.

The log-mel extractor here is the single feature front end for the whole
package: generator inputs, the spectral reconstruction loss, and the
evaluation metrics all go through :func:`log_mel` (or its batched variant),
so its framing rule is fixed once: reflect-pad by half a window and take
exactly ``ceil(len / hop_length)`` frames, making the frame count depend
only on the hop. The mel filterbank uses triangular filters on the Slaney
mel scale with area normalization.

Gradient companions (``log_mel_batch_grad``, ``resample_grad``) back-propagate
through the full chain; they exist because the spectral loss and the
augment-the-generated-batch strategy both need derivatives of these
transforms.
"""

import functools
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import ConfigError, InvalidInputError


@dataclass(frozen=True)
class Waveform:
    """A mono waveform: 1-D float64 samples plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise InvalidInputError("waveform must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise InvalidInputError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class MelConfig:
    """Mel-analysis settings. Defaults follow the 22.05 kHz vocoder recipe
    (FFT 1024, hop 256, window 1024, 80 mel bins)."""

    sample_rate: int = 22050
    fft_size: int = 1024
    hop_length: int = 256
    win_length: int = 1024
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float | None = None
    log_floor: float = 1e-5

    def __post_init__(self):
        if self.fmax is None:
            object.__setattr__(self, "fmax", self.sample_rate / 2.0)
        if not (0 < self.hop_length <= self.win_length <= self.fft_size):
            raise ConfigError(
                "require hop_length <= win_length <= fft_size, got "
                f"hop={self.hop_length} win={self.win_length} fft={self.fft_size}"
            )
        if self.n_mels < 1:
            raise ConfigError("n_mels must be >= 1")
        if not (0.0 <= self.fmin < self.fmax <= self.sample_rate / 2.0):
            raise ConfigError(
                f"require 0 <= fmin < fmax <= sample_rate/2, got "
                f"fmin={self.fmin} fmax={self.fmax} sr={self.sample_rate}"
            )
        if self.log_floor <= 0.0:
            raise ConfigError("log_floor must be positive")

    @property
    def n_bins(self):
        return self.fft_size // 2 + 1

    def frame_count(self, n_samples):
        """Frames produced for a signal of n_samples: ceil(n / hop)."""
        return -(-n_samples // self.hop_length)


@dataclass(frozen=True)
class MelSpectrogram:
    """Log-mel magnitudes, shape (frames, n_mels)."""

    values: np.ndarray
    config: MelConfig = field(compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1:
            raise InvalidInputError("mel spectrogram must be (frames, n_mels)")
        if values.shape[1] != self.config.n_mels:
            raise InvalidInputError(
                f"expected {self.config.n_mels} mel bins, got {values.shape[1]}"
            )
        object.__setattr__(self, "values", values)

    @property
    def n_frames(self):
        return self.values.shape[0]


# -- mel scale ---------------------------------------------------------------

_MEL_BREAK_HZ = 1000.0
_MEL_STEP_HZ = 200.0 / 3.0
_MEL_BREAK = _MEL_BREAK_HZ / _MEL_STEP_HZ
_MEL_LOGSTEP = np.log(6.4) / 27.0


def hz_to_mel(freq):
    """Slaney mel scale: linear below 1 kHz, logarithmic above."""
    freq = np.asarray(freq, dtype=np.float64)
    mel = freq / _MEL_STEP_HZ
    log_region = freq >= _MEL_BREAK_HZ
    mel = np.where(
        log_region,
        _MEL_BREAK + np.log(np.maximum(freq, _MEL_BREAK_HZ) / _MEL_BREAK_HZ) / _MEL_LOGSTEP,
        mel,
    )
    return mel


def mel_to_hz(mel):
    mel = np.asarray(mel, dtype=np.float64)
    freq = mel * _MEL_STEP_HZ
    log_region = mel >= _MEL_BREAK
    freq = np.where(
        log_region,
        _MEL_BREAK_HZ * np.exp(_MEL_LOGSTEP * (mel - _MEL_BREAK)),
        freq,
    )
    return freq


@functools.lru_cache(maxsize=16)
def mel_filterbank(cfg: MelConfig):
    """Triangular Slaney-scale filterbank, area-normalized.

    Returns an (n_mels, fft_size // 2 + 1) matrix.
    """
    fft_freqs = np.linspace(0.0, cfg.sample_rate / 2.0, cfg.n_bins)
    mel_pts = np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)

    fdiff = np.diff(hz_pts)
    ramps = hz_pts[:, None] - fft_freqs[None, :]
    lower = -ramps[:-2] / fdiff[:-1, None]
    upper = ramps[2:] / fdiff[1:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))

    # Slaney area normalization: each filter integrates to ~2 / bandwidth.
    enorm = 2.0 / (hz_pts[2:cfg.n_mels + 2] - hz_pts[:cfg.n_mels])
    weights *= enorm[:, None]

    if not np.all(weights.max(axis=1) > 0.0):
        warnings.warn(
            "empty mel filters: n_mels is too large for this fft_size/fmax",
            stacklevel=2,
        )
    return weights


def mel_center_frequencies(cfg: MelConfig):
    """Center frequency in Hz of each mel filter."""
    mel_pts = np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2)
    return mel_to_hz(mel_pts)[1:cfg.n_mels + 1]


# -- framing and STFT --------------------------------------------------------

@functools.lru_cache(maxsize=64)
def _reflect_indices(n, pad):
    """Source index for each position of a reflect-padded length-n signal."""
    if n < 2:
        raise InvalidInputError("reflect padding needs at least 2 samples")
    pos = np.arange(-pad, n + pad)
    period = 2 * (n - 1)
    m = np.mod(pos, period)
    return np.where(m < n, m, period - m)


@functools.lru_cache(maxsize=16)
def _hann_periodic(win_length):
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(win_length) / win_length)


def _frame_batch(x, cfg):
    """Reflect-pad and slice (B, T) into (B, frames, win_length) views."""
    B, n = x.shape
    if n < 2:
        raise InvalidInputError("need at least 2 samples to frame a signal")
    pad = cfg.win_length // 2
    idx = _reflect_indices(n, pad)
    padded = x[:, idx]
    n_frames = cfg.frame_count(n)
    s0, s1 = padded.strides
    frames = np.lib.stride_tricks.as_strided(
        padded,
        (B, n_frames, cfg.win_length),
        (s0, s1 * cfg.hop_length, s1),
        writeable=False,
    )
    return frames, idx


def _spectrogram_batch(x, cfg):
    """Hann-windowed magnitude spectrogram of (B, T); returns internals too."""
    frames, idx = _frame_batch(x, cfg)
    window = _hann_periodic(cfg.win_length)
    windowed = frames * window
    if cfg.win_length < cfg.fft_size:
        lpad = (cfg.fft_size - cfg.win_length) // 2
        buf = np.zeros(windowed.shape[:2] + (cfg.fft_size,))
        buf[:, :, lpad:lpad + cfg.win_length] = windowed
        windowed = buf
    spec = np.fft.rfft(windowed, n=cfg.fft_size, axis=2)
    mag = np.abs(spec)
    return mag, spec, idx


def stft(wave: Waveform, cfg: MelConfig):
    """Complex spectrogram of shape (ceil(len/hop), fft_size // 2 + 1).

    The signal is reflect-padded by win_length // 2 on both ends and analyzed
    with a periodic Hann window, so the frame count depends only on the hop.
    """
    if len(wave) < 2:
        raise InvalidInputError("stft requires at least 2 samples")
    _check_rate(wave, cfg)
    _, spec, _ = _spectrogram_batch(wave.samples[None, :], cfg)
    return spec[0]


def _check_rate(wave, cfg):
    if wave.sample_rate != cfg.sample_rate:
        raise ConfigError(
            f"waveform sample rate {wave.sample_rate} does not match "
            f"mel config sample rate {cfg.sample_rate}"
        )


def log_mel(wave: Waveform, cfg: MelConfig) -> MelSpectrogram:
    """Log-mel spectrogram: log(max(filterbank . |STFT|, log_floor)).

    The result has shape (ceil(len/hop), n_mels); identical inputs give
    bit-identical outputs.
    """
    if len(wave) < 2:
        raise InvalidInputError("log_mel requires at least 2 samples")
    _check_rate(wave, cfg)
    values, _ = log_mel_batch(wave.samples[None, :], cfg)
    return MelSpectrogram(values=values[0], config=cfg)


def log_mel_batch(x, cfg):
    """Batched log-mel of (B, T) -> ((B, frames, n_mels), cache)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    mag, spec, idx = _spectrogram_batch(x, cfg)
    basis = mel_filterbank(cfg)
    mel = mag @ basis.T
    values = np.log(np.maximum(mel, cfg.log_floor))
    cache = (x.shape, spec, mag, mel, idx, cfg)
    return values, cache


def log_mel_batch_grad(cache, g_values):
    """Back-propagate through log_mel_batch; returns grad w.r.t. (B, T) input."""
    (B, n), spec, mag, mel, idx, cfg = cache
    basis = mel_filterbank(cfg)

    g_mel = np.where(mel > cfg.log_floor, g_values / np.maximum(mel, cfg.log_floor), 0.0)
    g_mag = g_mel @ basis
    safe = np.maximum(mag, 1e-300)
    g_spec = np.where(mag > 0.0, g_mag / safe, 0.0) * spec

    # Adjoint of rfft restricted to the stored half spectrum.
    full = np.zeros(g_spec.shape[:2] + (cfg.fft_size,), dtype=np.complex128)
    full[:, :, :cfg.n_bins] = g_spec
    g_buf = np.fft.ifft(full, n=cfg.fft_size, axis=2).real * cfg.fft_size

    if cfg.win_length < cfg.fft_size:
        lpad = (cfg.fft_size - cfg.win_length) // 2
        g_windowed = g_buf[:, :, lpad:lpad + cfg.win_length]
    else:
        g_windowed = g_buf
    g_frames = g_windowed * _hann_periodic(cfg.win_length)

    pad = cfg.win_length // 2
    g_padded = np.zeros((B, n + 2 * pad))
    hop = cfg.hop_length
    for t in range(g_frames.shape[1]):
        g_padded[:, t * hop:t * hop + cfg.win_length] += g_frames[:, t, :]

    # Reflection duplicates samples; fold the pad regions back in.
    gx = g_padded[:, pad:pad + n].copy()
    rows = np.arange(B)[:, None]
    np.add.at(gx, (rows, idx[None, :pad]), g_padded[:, :pad])
    np.add.at(gx, (rows, idx[None, pad + n:]), g_padded[:, pad + n:])
    return gx


# -- time-scale resampling ---------------------------------------------------

_RESAMPLE_TAPS = 16
_RESAMPLE_HALF = _RESAMPLE_TAPS // 2


def _resample_weights(n_in, factor):
    """Windowed-sinc interpolation weights and source indices.

    Output sample i reads input position i * factor through a 16-tap
    Hann-windowed sinc, low-passed to 1/factor of Nyquist when speeding up.
    Each kernel is normalized to unit sum so the passband gain is flat.
    """
    n_out = int(round(n_in / factor))
    if n_out < 2:
        raise InvalidInputError(
            f"resampling by factor {factor} leaves fewer than 2 samples"
        )
    pos = np.arange(n_out) * factor
    base = np.floor(pos).astype(np.int64)
    taps = np.arange(-_RESAMPLE_HALF + 1, _RESAMPLE_HALF + 1)
    src = base[:, None] + taps[None, :]
    t = src - pos[:, None]

    cutoff = min(1.0, 1.0 / factor)
    kernel = cutoff * np.sinc(cutoff * t)
    kernel *= 0.5 + 0.5 * np.cos(np.pi * np.clip(t / _RESAMPLE_HALF, -1.0, 1.0))
    kernel /= kernel.sum(axis=1, keepdims=True)

    valid = (src >= 0) & (src < n_in)
    kernel = np.where(valid, kernel, 0.0)
    src = np.clip(src, 0, n_in - 1)
    return src, kernel


def resample_array(x, factor):
    """Time-compress a 1-D signal by `factor`; returns (y, cache)."""
    if factor <= 0.0:
        raise InvalidInputError("resample factor must be positive")
    x = np.ascontiguousarray(x, dtype=np.float64)
    src, kernel = _resample_weights(x.size, factor)
    y = (x[src] * kernel).sum(axis=1)
    return y, (src, kernel, x.size)


def resample_grad(cache, gy):
    """Adjoint of resample_array."""
    src, kernel, n_in = cache
    gx = np.zeros(n_in)
    np.add.at(gx, src.reshape(-1), (gy[:, None] * kernel).reshape(-1))
    return gx


def resample_time_scale(wave: Waveform, factor: float) -> Waveform:
    """Change playback speed by `factor` (duration scales by 1/factor).

    Band-limited windowed-sinc interpolation; the sample rate is unchanged.
    factor == 1 returns the input up to float rounding.
    """
    y, _ = resample_array(wave.samples, factor)
    return Waveform(samples=y, sample_rate=wave.sample_rate)
