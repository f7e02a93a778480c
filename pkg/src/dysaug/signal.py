"""Time-domain perturbation and log-Mel filter-bank features.

Tempo perturbation uses WSOLA, which changes duration while keeping pitch and
spectral envelope; speed perturbation resamples, changing both.
"""
from __future__ import annotations

import math
import wave as _wave
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    AlphaOutOfRange,
    InvalidMelConfig,
    InvalidWsolaConfig,
    WaveTooShort,
    WavFormatError,
)

ALPHA_MIN = 0.25
ALPHA_MAX = 4.0

# windowed-sinc resampler (taps counted at unit cutoff)
RESAMPLE_TAPS = 64
RESAMPLE_BETA = 8.0

SI_FACTORS = (0.9, 1.0, 1.1)


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"expected mono samples, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class WsolaConfig:
    frame_len: int = 512
    analysis_hop: int = 128
    delta_max: int = 126
    window: str = "hann"

    def __post_init__(self):
        if not 0 < self.analysis_hop <= self.frame_len:
            raise InvalidWsolaConfig("need 0 < analysis_hop <= frame_len")
        if not 0 <= self.delta_max < self.analysis_hop:
            raise InvalidWsolaConfig("need 0 <= delta_max < analysis_hop")
        if self.window not in _WINDOWS:
            raise InvalidWsolaConfig(f"unknown window {self.window!r}")

    @classmethod
    def for_rate(cls, sample_rate: int, frame_ms=32.0, hop_ms=8.0, delta_ms=7.9, window="hann"):
        ms = sample_rate / 1000.0
        return cls(int(round(frame_ms * ms)), int(round(hop_ms * ms)), int(delta_ms * ms), window)


@dataclass(frozen=True)
class MelConfig:
    n_mels: int = 40
    fft_len: int = 512
    frame_len: int = 400
    frame_hop: int = 160
    fmin: float = 20.0
    fmax: float = 7600.0
    log_floor: float = 1e-10

    @classmethod
    def for_rate(cls, sample_rate: int, n_mels=40, frame_ms=25.0, hop_ms=10.0,
                 fmin=20.0, fmax=7600.0, log_floor=1e-10):
        ms = sample_rate / 1000.0
        frame_len = int(round(frame_ms * ms))
        fft_len = 1 << (frame_len - 1).bit_length()
        return cls(n_mels, fft_len, frame_len, int(round(hop_ms * ms)), fmin, fmax, log_floor)

    def validate(self, sample_rate: int):
        if self.n_mels < 1:
            raise InvalidMelConfig("n_mels must be >= 1")
        if not 0 < self.frame_hop <= self.frame_len <= self.fft_len:
            raise InvalidMelConfig("need 0 < frame_hop <= frame_len <= fft_len")
        if not 0 <= self.fmin < self.fmax <= sample_rate / 2:
            raise InvalidMelConfig(
                f"need 0 <= fmin < fmax <= {sample_rate / 2} Hz, got [{self.fmin}, {self.fmax}]")
        if not self.log_floor > 0:
            raise InvalidMelConfig("log_floor must be positive")


@dataclass(frozen=True)
class Spectrogram:
    """C x T log-Mel matrix; ``frame_hop`` and ``sample_rate`` are provenance only."""

    values: np.ndarray
    frame_hop: int | None = None
    sample_rate: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.dtype not in (np.float32, np.float64):
            values = values.astype(np.float64)
        if values.ndim != 2 or min(values.shape) < 1:
            raise ValueError(f"spectrogram must be a non-empty 2-D matrix, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("spectrogram contains non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def n_mels(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    def with_values(self, values) -> "Spectrogram":
        return Spectrogram(values, self.frame_hop, self.sample_rate)


def _hann(n):
    # periodic Hann: overlapping copies at hop n/4 or n/2 sum to a constant
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


_WINDOWS = {"hann": _hann, "rect": lambda n: np.ones(n)}


def _check_alpha(alpha):
    if not (math.isfinite(alpha) and ALPHA_MIN <= alpha <= ALPHA_MAX):
        raise AlphaOutOfRange(f"alpha must lie in [{ALPHA_MIN}, {ALPHA_MAX}], got {alpha}")


def tempo_perturb(wave: Waveform, alpha: float, cfg: WsolaConfig | None = None) -> Waveform:
    """Stretch duration by ``alpha`` (output length ~ alpha * input) with WSOLA.

    Analysis blocks are taken every ``cfg.analysis_hop`` samples and laid down every
    ``alpha * analysis_hop`` samples. Each block may move by up to ``cfg.delta_max``
    samples to best continue the previously placed block, then blocks are windowed
    and overlap-added with the accumulated window weight divided out.
    """
    cfg = cfg or WsolaConfig()
    _check_alpha(alpha)
    x = wave.samples
    n_in = x.shape[0]
    N = cfg.frame_len
    if n_in <= N:
        raise WaveTooShort(f"wave has {n_in} samples, needs more than frame_len={N}")

    half = N // 2
    dmax = cfg.delta_max
    ha = cfg.analysis_hop
    hs = alpha * ha
    n_out = int(round(alpha * n_in))
    n_frames = int(math.ceil((n_out + half) / hs)) + 1
    synth = np.round(np.arange(n_frames) * hs).astype(np.int64)
    analysis = np.arange(n_frames, dtype=np.int64) * ha

    max_hop = int(np.max(np.diff(synth))) if n_frames > 1 else 0
    pad_left = half + dmax
    pad_right = int(analysis[-1]) + half + dmax + max_hop + N - n_in + 1
    xp = np.concatenate([np.zeros(pad_left), x, np.zeros(max(pad_right, N))])

    win = _WINDOWS[cfg.window](N)
    acc = np.zeros(int(synth[-1]) + N)
    weight = np.zeros_like(acc)

    prev_start = None
    for m in range(n_frames):
        cand = pad_left + int(analysis[m]) - half
        if prev_start is None or dmax == 0:
            delta = 0
        else:
            natural = prev_start + int(synth[m] - synth[m - 1])
            delta = _kernels.wsola_best_offset(xp, natural, cand, N, dmax)
        start = cand + delta
        s = int(synth[m])
        acc[s:s + N] += win * xp[start:start + N]
        weight[s:s + N] += win
        prev_start = start

    out = acc[half:half + n_out]
    w = weight[half:half + n_out]
    y = np.where(w > 1e-8, out / np.maximum(w, 1e-8), 0.0)
    return Waveform(y, wave.sample_rate)


def speed_perturb(wave: Waveform, alpha: float) -> Waveform:
    """Return ``y(t) = x(alpha * t)`` via band-limited resampling.

    Output length is ``round(len / alpha)``; all frequencies scale by ``alpha``.
    For alpha > 1 the interpolator's cutoff drops to 1/alpha of Nyquist so that
    compressed content does not alias.
    """
    _check_alpha(alpha)
    x = wave.samples
    if x.shape[0] == 0:
        raise WaveTooShort("empty waveform")
    if alpha == 1.0:
        return Waveform(x.copy(), wave.sample_rate)
    n_out = max(1, int(round(x.shape[0] / alpha)))
    cutoff = min(1.0, 1.0 / alpha)
    half_width = int(math.ceil((RESAMPLE_TAPS // 2) / cutoff))
    y = _kernels.sinc_resample(np.ascontiguousarray(x), float(alpha), n_out, half_width,
                               cutoff, RESAMPLE_BETA)
    return Waveform(y, wave.sample_rate)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: MelConfig, sample_rate: int) -> np.ndarray:
    """Triangular filters (peak 1) on the HTK Mel scale, shape (n_mels, fft_len // 2 + 1)."""
    cfg.validate(sample_rate)
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2))
    freqs = np.arange(cfg.fft_len // 2 + 1) * sample_rate / cfg.fft_len
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / (mid - lo)
    falling = (hi - freqs[None, :]) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def mel_center_frequencies(cfg: MelConfig) -> np.ndarray:
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2))
    return edges[1:-1]


def mel_fbank(wave: Waveform, cfg: MelConfig | None = None) -> Spectrogram:
    """Log-Mel filter-bank features, one column per frame (no centring or padding)."""
    cfg = cfg or MelConfig()
    cfg.validate(wave.sample_rate)
    x = wave.samples
    if x.shape[0] < cfg.frame_len:
        raise WaveTooShort(f"wave has {x.shape[0]} samples, needs at least {cfg.frame_len}")
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.frame_len)[::cfg.frame_hop]
    spec = np.fft.rfft(frames * _hann(cfg.frame_len), n=cfg.fft_len, axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    energy = mel_filterbank(cfg, wave.sample_rate) @ power.T
    values = np.log(np.maximum(energy, cfg.log_floor))
    return Spectrogram(values, cfg.frame_hop, wave.sample_rate)


def n_frames_for(n_samples: int, cfg: MelConfig) -> int:
    return 1 + (n_samples - cfg.frame_len) // cfg.frame_hop


def read_wav(path) -> Waveform:
    """Read a 16-bit PCM mono RIFF/WAVE file. Stereo and other widths are rejected."""
    try:
        with _wave.open(str(path), "rb") as fh:
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except _wave.Error as exc:
        raise WavFormatError(f"{path}: {exc}") from exc
    if channels != 1:
        raise WavFormatError(f"{path}: expected mono, got {channels} channels")
    if width != 2:
        raise WavFormatError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / 32768.0, rate)


def write_wav(path, wave: Waveform):
    pcm = np.clip(np.round(wave.samples * 32768.0), -32768, 32767).astype("<i2")
    with _wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(wave.sample_rate)
        fh.writeframes(pcm.tobytes())
